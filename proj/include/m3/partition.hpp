#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "m3/cloud.hpp"
#include "m3/morton.hpp"

namespace m3 {

struct PartitionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Canonical 13-direction cube stencil: 3 axes, 6 face diagonals, 4 body
// diagonals, all unit-normalized.
std::vector<Vec3> default_directions();

struct PartitionConfig {
    double eps_refine = 0.05;
    int g_max = 8;
    int kappa = 32;  // per-cell point cap
    std::vector<Vec3> directions = default_directions();
    // per-channel weights; empty means 1.0 for scalars, 0.4 for vectors
    std::vector<double> scalar_weights;
    std::vector<double> vector_weights;

    void validate(const LabeledPointCloud& cloud) const;
    double scalar_weight(std::size_t k) const {
        return scalar_weights.empty() ? 1.0 : scalar_weights[k];
    }
    double vector_weight(std::size_t j) const {
        return vector_weights.empty() ? 0.4 : vector_weights[j];
    }
};

enum class StopRule : std::uint8_t { PointCap, DepthCap, LowVariation };

struct Cell {
    MortonKey prefix = 0;  // top 3*depth bits of any member key, rest zero
    int depth = 0;
    std::uint32_t lo = 0;  // span [lo, hi) into the sorted index
    std::uint32_t hi = 0;
    double width = 0.0;  // cube edge / 2^depth
    double delta = 0.0;  // weighted variation score
    // channel that attained the max in the score; scalar channels first
    std::uint32_t trigger_channel = 0;
    bool trigger_is_vector = false;
    StopRule stop = StopRule::LowVariation;

    std::uint32_t count() const { return hi - lo; }
};

struct RefineCounters {
    std::uint64_t thr_scalar = 0;   // evaluated cells with weighted scalar range > eps
    std::uint64_t thr_vector = 0;
    std::uint64_t refine_scalar = 0;  // executed splits triggered by a scalar channel
    std::uint64_t refine_vector = 0;
};

struct Partition {
    std::vector<Cell> cells;  // in Morton order (ascending lo)
    RefineCounters counters;
    double cube_edge = 0.0;
};

// Max over directions of the projected spread of the given vectors.
double projection_diameter(const std::vector<Vec3>& values,
                           const std::vector<Vec3>& directions);

struct VariationScore {
    double delta = 0.0;
    std::uint32_t trigger_channel = 0;
    bool trigger_is_vector = false;
    double max_weighted_scalar = 0.0;
    double max_weighted_vector = 0.0;
};

// Weighted max of scalar ranges and vector projection diameters over the
// points sorted[lo..hi). Ties break scalar-before-vector, then declaration
// order.
VariationScore cell_variation_score(const LabeledPointCloud& cloud,
                                    const SortedIndex& sorted,
                                    std::uint32_t lo, std::uint32_t hi,
                                    const PartitionConfig& config);

// Queue-driven variation-adaptive octree refinement. Leaves stop on the
// point cap, the depth cap, or low variation, in that order.
Partition build_partition(const LabeledPointCloud& cloud,
                          const SortedIndex& sorted,
                          const BoundingCube& cube,
                          const PartitionConfig& config);

// JSON-lines export, one cell per line.
void export_partition(const Partition& partition,
                      const LabeledPointCloud& cloud,
                      const std::string& path);

}  // namespace m3
