#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "m3/stratify.hpp"

namespace m3 {

struct AllocError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AllocConfig {
    std::uint64_t budget = 0;  // m
    double rho = 1.0;          // fill ratio in (0, 1]
    // per-stratum mass targets indexed by label-1 (size K+1); empty means
    // uniform over nonempty strata
    std::vector<double> alpha;
    std::uint64_t seed = 0;

    void validate() const;
};

struct AllocationPlan {
    std::uint64_t m_prime = 0;
    // aligned with Stratification::strata (label-1 indexed)
    std::vector<std::uint64_t> level_budgets;
    std::vector<std::uint64_t> level_capacities;
    std::vector<double> alpha_used;  // renormalized over nonempty strata
    // aligned with Partition::cells
    std::vector<std::uint32_t> eff_capacity;
    std::vector<std::uint32_t> quotas;
};

struct EmpiricalMeasure {
    std::vector<std::uint64_t> indices;  // point indices, distinct
    double weight = 0.0;                 // 1/m', 0 when empty

    std::uint64_t size() const { return indices.size(); }
};

// N~_c = min(N_c, max(1, ceil(rho * N_c)))
std::uint32_t effective_capacity(std::uint32_t n_points, double rho);

// Integer level budgets by largest-remainder apportionment of alpha * m'
// with iterative overflow redistribution onto unsaturated levels.
std::vector<std::uint64_t> allocate_levels(
    const std::vector<std::uint64_t>& capacities,
    const std::vector<double>& targets, std::uint64_t budget);

// Balanced integer quotas under per-cell caps; the residual goes to the
// lowest-allocation cells first, ties by position (ascending Morton key).
std::vector<std::uint32_t> water_fill(const std::vector<std::uint32_t>& capacities,
                                      std::uint64_t level_budget);

AllocationPlan build_plan(const Partition& partition, const Stratification& strat,
                          const AllocConfig& config);

// Per-cell without-replacement draws with RNG streams keyed by
// (seed, cell prefix, depth).
EmpiricalMeasure draw_samples(const AllocationPlan& plan, const Partition& partition,
                              const SortedIndex& sorted, std::uint64_t seed);

struct M3Result {
    BoundingCube cube;
    SortedIndex sorted;
    Partition partition;
    Stratification stratification;
    AllocationPlan plan;
    EmpiricalMeasure measure;
};

// Full pipeline: normalize, sort, partition, stratify, allocate, draw.
M3Result m3_sample(const LabeledPointCloud& cloud, const PartitionConfig& pconfig,
                   const StratifyConfig& sconfig, const AllocConfig& aconfig);

// binary u64 index array + JSON sidecar, plus a text variant
void export_measure(const EmpiricalMeasure& measure, const AllocationPlan* plan,
                    std::uint64_t seed, double rho, const std::string& bin_path,
                    const std::string& sidecar_path);
void export_measure_text(const EmpiricalMeasure& measure, const std::string& path);

}  // namespace m3
