#include "m3/morton.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace m3 {

namespace {

// spread the low 21 bits of v so each lands 3 positions apart
std::uint64_t spread3(std::uint64_t v) {
    v &= 0x1fffff;
    v = (v | (v << 32)) & 0x1f00000000ffffULL;
    v = (v | (v << 16)) & 0x1f0000ff0000ffULL;
    v = (v | (v << 8)) & 0x100f00f00f00f00fULL;
    v = (v | (v << 4)) & 0x10c30c30c30c30c3ULL;
    v = (v | (v << 2)) & 0x1249249249249249ULL;
    return v;
}

std::uint32_t compact3(std::uint64_t v) {
    v &= 0x1249249249249249ULL;
    v = (v | (v >> 2)) & 0x10c30c30c30c30c3ULL;
    v = (v | (v >> 4)) & 0x100f00f00f00f00fULL;
    v = (v | (v >> 8)) & 0x1f0000ff0000ffULL;
    v = (v | (v >> 16)) & 0x1f00000000ffffULL;
    v = (v | (v >> 32)) & 0x1fffff;
    return static_cast<std::uint32_t>(v);
}

}  // namespace

Lattice3 quantize(const Vec3& position, const BoundingCube& cube, int bits) {
    if (bits < 1 || bits > kMortonBits) {
        throw MortonError("bits out of range [1,21]");
    }
    const double scale = static_cast<double>(std::uint64_t{1} << bits);
    const std::uint32_t top = (std::uint32_t{1} << bits) - 1;
    Lattice3 out{};
    for (int a = 0; a < 3; ++a) {
        const double x = position[a];
        if (x < cube.origin[a] || x > cube.origin[a] + cube.edge) {
            throw MortonError("position outside bounding cube");
        }
        const double t = (x - cube.origin[a]) / cube.edge * scale;
        auto q = static_cast<std::int64_t>(std::floor(t));
        if (q < 0) q = 0;
        if (q > top) q = top;
        out[a] = static_cast<std::uint32_t>(q);
    }
    return out;
}

MortonKey morton_encode(const Lattice3& lattice) {
    for (int a = 0; a < 3; ++a) {
        if (lattice[a] >= (std::uint32_t{1} << kMortonBits)) {
            throw MortonError("lattice coordinate overflows 21 bits");
        }
    }
    return spread3(lattice[0]) | (spread3(lattice[1]) << 1) |
           (spread3(lattice[2]) << 2);
}

Lattice3 morton_decode(MortonKey key) {
    return {compact3(key), compact3(key >> 1), compact3(key >> 2)};
}

SortedIndex morton_sort(const LabeledPointCloud& cloud, const BoundingCube& cube) {
    const std::size_t n = cloud.size();
    if (n == 0) throw MortonError("empty cloud");
    // sort packed (key, index) pairs; the index component makes the order
    // stable under equal keys
    std::vector<std::pair<MortonKey, std::uint32_t>> pairs(n);
    for (std::size_t i = 0; i < n; ++i) {
        pairs[i] = {morton_encode(quantize(cloud.positions[i], cube, kMortonBits)),
                    static_cast<std::uint32_t>(i)};
    }
    std::sort(pairs.begin(), pairs.end());
    SortedIndex idx;
    idx.perm.resize(n);
    idx.keys.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        idx.keys[r] = pairs[r].first;
        idx.perm[r] = pairs[r].second;
    }
    return idx;
}

}  // namespace m3
