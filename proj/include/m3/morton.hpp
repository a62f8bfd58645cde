#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "m3/cloud.hpp"

namespace m3 {

// 63-bit Morton key: 21 bits per axis, x in the least-significant interleave
// position (… z1 y1 x1 z0 y0 x0).
using MortonKey = std::uint64_t;

inline constexpr int kMortonBits = 21;

struct MortonError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Lattice3 = std::array<std::uint32_t, 3>;

// Maps a position inside the cube to integer lattice coordinates in
// [0, 2^bits - 1] via floor scaling, clamped to the top cell.
Lattice3 quantize(const Vec3& position, const BoundingCube& cube, int bits);

MortonKey morton_encode(const Lattice3& lattice);
Lattice3 morton_decode(MortonKey key);

struct SortedIndex {
    std::vector<std::uint32_t> perm;  // rank -> point index
    std::vector<MortonKey> keys;      // keys[rank] = key of perm[rank], nondecreasing
};

// Single global stable sort by Morton key; deterministic.
SortedIndex morton_sort(const LabeledPointCloud& cloud, const BoundingCube& cube);

}  // namespace m3
