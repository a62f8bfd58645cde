#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace m3 {

using Vec3 = std::array<double, 3>;

struct CloudError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ChannelStats {
    double mean = 0.0;
    double stddev = 0.0;  // population std; 0 marks a constant channel
};

// Labeled point cloud: positions plus scalar/vector field channels and
// optional per-point geometric weights (area or volume shares).
struct LabeledPointCloud {
    std::vector<Vec3> positions;

    std::vector<std::string> scalar_names;
    std::vector<std::vector<double>> scalars;  // [channel][point]

    std::vector<std::string> vector_names;
    std::vector<std::vector<Vec3>> vectors;  // [channel][point]

    std::vector<double> geom_weights;  // empty when absent

    // populated by zscore_normalize; per scalar channel, then per vector
    // channel component (3 entries each)
    std::vector<ChannelStats> scalar_stats;
    std::vector<std::array<ChannelStats, 3>> vector_stats;
    bool normalized = false;

    std::size_t size() const { return positions.size(); }
    std::size_t num_scalars() const { return scalars.size(); }
    std::size_t num_vectors() const { return vectors.size(); }
    bool has_weights() const { return !geom_weights.empty(); }

    // throws CloudError on any invariant violation
    void validate() const;
};

struct BoundingCube {
    Vec3 origin{0.0, 0.0, 0.0};
    double edge = 1.0;

    bool contains(const Vec3& p) const {
        for (int a = 0; a < 3; ++a) {
            if (p[a] < origin[a] || p[a] >= origin[a] + edge) return false;
        }
        return true;
    }
};

enum class CloudFormat { Binary, Csv };

LabeledPointCloud load_cloud(const std::string& path, CloudFormat format);
void save_cloud(const LabeledPointCloud& cloud, const std::string& path,
                CloudFormat format);

// z-scores every scalar channel and every vector component with population
// statistics; constant channels map to zeros with stddev recorded as 0.
LabeledPointCloud zscore_normalize(const LabeledPointCloud& cloud);

// Axis-aligned cube anchored at the min corner, edge = max per-axis extent
// inflated by 1e-9 so boundary points quantize strictly inside. Coincident
// points fall back to a unit cube centered on the point.
BoundingCube compute_bounds(const LabeledPointCloud& cloud);

}  // namespace m3
