#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "m3/allocate.hpp"
#include "m3/partition.hpp"

namespace m3 {

struct BaselineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// m distinct indices uniform without replacement (Floyd's algorithm).
EmpiricalMeasure random_sample(std::uint64_t n, std::uint64_t m, std::uint64_t seed);

// Uniform voxel grid with per-voxel variation scores; indices drawn by
// round-robin over nonempty voxels until the budget is met.
EmpiricalMeasure grid_sample(const LabeledPointCloud& cloud, double voxel_edge,
                             std::uint64_t m, const PartitionConfig& scoring,
                             std::uint64_t seed);

// Coarse voxel grid sized to roughly 256 points per occupied voxel; global
// weighted draw with voxel importance = score + eps, duplicates rejected.
EmpiricalMeasure proxy_sample(const LabeledPointCloud& cloud, std::uint64_t m,
                              const PartitionConfig& scoring, std::uint64_t seed,
                              double target_occupancy = 256.0);

// Exact k-NN neighborhood scores (variation aggregation over each point's
// neighborhood), then top-m selection with ties by index.
EmpiricalMeasure knn_sample(const LabeledPointCloud& cloud, std::uint64_t m,
                            const PartitionConfig& scoring, std::uint64_t seed,
                            int k = 32);

// exposed for the brute-force oracle tests
std::vector<double> knn_scores(const LabeledPointCloud& cloud,
                               const PartitionConfig& scoring, int k);

struct BenchRow {
    std::string method;
    std::uint64_t n = 0;
    std::uint64_t seed = 0;
    double wall_s = 0.0;
    std::uint64_t peak_bytes = 0;
    std::string status;  // "ok" or "Timeout"
};

struct BenchConfig {
    std::vector<std::string> methods{"random", "m3", "grid", "proxy", "knn"};
    std::vector<std::uint64_t> sizes{100000, 1000000};
    double time_cap_s = 600.0;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::uint64_t budget = 8192;
};

// Wall-clock benchmark over synthetic slab clouds; loading/generation is
// excluded from the timings. A method that exceeds the cap at some size is
// skipped at larger sizes and marked Timeout.
std::vector<BenchRow> bench_run(const BenchConfig& config);

void write_bench_csv(const std::vector<BenchRow>& rows, const std::string& path);

}  // namespace m3
