#include "m3/partition.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace m3 {

std::vector<Vec3> default_directions() {
    std::vector<Vec3> dirs;
    dirs.reserve(13);
    // axes
    dirs.push_back({1, 0, 0});
    dirs.push_back({0, 1, 0});
    dirs.push_back({0, 0, 1});
    // face diagonals
    const double s = 1.0 / std::sqrt(2.0);
    dirs.push_back({s, s, 0});
    dirs.push_back({s, -s, 0});
    dirs.push_back({s, 0, s});
    dirs.push_back({s, 0, -s});
    dirs.push_back({0, s, s});
    dirs.push_back({0, s, -s});
    // body diagonals
    const double t = 1.0 / std::sqrt(3.0);
    dirs.push_back({t, t, t});
    dirs.push_back({t, t, -t});
    dirs.push_back({t, -t, t});
    dirs.push_back({t, -t, -t});
    return dirs;
}

void PartitionConfig::validate(const LabeledPointCloud& cloud) const {
    if (eps_refine <= 0.0) throw PartitionError("eps_refine must be > 0");
    if (g_max < 0) throw PartitionError("g_max must be >= 0");
    if (kappa < 1) throw PartitionError("kappa must be >= 1");
    if (directions.empty()) throw PartitionError("direction set must be nonempty");
    for (const auto& d : directions) {
        const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        if (std::abs(norm - 1.0) > 1e-12) {
            throw PartitionError("direction not unit-norm");
        }
    }
    if (!scalar_weights.empty() && scalar_weights.size() != cloud.num_scalars()) {
        throw PartitionError("scalar_weights size mismatch");
    }
    if (!vector_weights.empty() && vector_weights.size() != cloud.num_vectors()) {
        throw PartitionError("vector_weights size mismatch");
    }
    double max_w = 0.0;
    for (std::size_t k = 0; k < cloud.num_scalars(); ++k) {
        const double w = scalar_weight(k);
        if (w < 0.0) throw PartitionError("negative scalar weight");
        max_w = std::max(max_w, w);
    }
    for (std::size_t j = 0; j < cloud.num_vectors(); ++j) {
        const double w = vector_weight(j);
        if (w < 0.0) throw PartitionError("negative vector weight");
        max_w = std::max(max_w, w);
    }
    if (!(max_w > 0.0)) {
        throw PartitionError("at least one channel must have positive weight");
    }
}

double projection_diameter(const std::vector<Vec3>& values,
                           const std::vector<Vec3>& directions) {
    double best = 0.0;
    for (const auto& d : directions) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (const auto& v : values) {
            const double p = d[0] * v[0] + d[1] * v[1] + d[2] * v[2];
            lo = std::min(lo, p);
            hi = std::max(hi, p);
        }
        best = std::max(best, hi - lo);
    }
    return best;
}

VariationScore cell_variation_score(const LabeledPointCloud& cloud,
                                    const SortedIndex& sorted,
                                    std::uint32_t lo, std::uint32_t hi,
                                    const PartitionConfig& config) {
    VariationScore score;
    bool have_trigger = false;
    for (std::size_t k = 0; k < cloud.num_scalars(); ++k) {
        const auto& ch = cloud.scalars[k];
        double mn = std::numeric_limits<double>::infinity();
        double mx = -std::numeric_limits<double>::infinity();
        for (std::uint32_t r = lo; r < hi; ++r) {
            const double v = ch[sorted.perm[r]];
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        const double weighted = config.scalar_weight(k) * (mx - mn);
        score.max_weighted_scalar = std::max(score.max_weighted_scalar, weighted);
        if (!have_trigger || weighted > score.delta) {
            score.delta = weighted;
            score.trigger_channel = static_cast<std::uint32_t>(k);
            score.trigger_is_vector = false;
            have_trigger = true;
        }
    }
    const std::size_t ndir = config.directions.size();
    std::vector<double> pmin(ndir), pmax(ndir);
    for (std::size_t j = 0; j < cloud.num_vectors(); ++j) {
        const auto& ch = cloud.vectors[j];
        std::fill(pmin.begin(), pmin.end(), std::numeric_limits<double>::infinity());
        std::fill(pmax.begin(), pmax.end(), -std::numeric_limits<double>::infinity());
        for (std::uint32_t r = lo; r < hi; ++r) {
            const Vec3& v = ch[sorted.perm[r]];
            for (std::size_t d = 0; d < ndir; ++d) {
                const Vec3& dir = config.directions[d];
                const double p = dir[0] * v[0] + dir[1] * v[1] + dir[2] * v[2];
                pmin[d] = std::min(pmin[d], p);
                pmax[d] = std::max(pmax[d], p);
            }
        }
        double diam = 0.0;
        for (std::size_t d = 0; d < ndir; ++d) diam = std::max(diam, pmax[d] - pmin[d]);
        const double weighted = config.vector_weight(j) * diam;
        score.max_weighted_vector = std::max(score.max_weighted_vector, weighted);
        // strict > keeps the scalar-before-vector tie-break
        if (!have_trigger || weighted > score.delta) {
            score.delta = weighted;
            score.trigger_channel = static_cast<std::uint32_t>(j);
            score.trigger_is_vector = true;
            have_trigger = true;
        }
    }
    return score;
}

namespace {

// channel values (scalars, then vector projections) gathered into Morton rank
// order and interleaved per rank, so range scans touch contiguous memory; block
// min/max tables cover the interior of large ranges. min/max extrema do not
// depend on scan order, so scores are identical to the direct evaluation
struct RankedChannels {
    static constexpr std::uint32_t kBlock = 256;

    std::size_t n = 0, nch = 0, nsc = 0, nvec = 0, ndir = 0, stride = 0;
    std::vector<double> values;      // [rank * stride]: scalars, vector xyz
    std::vector<double> bmin, bmax;  // [block * nch + c]

    RankedChannels(const LabeledPointCloud& cloud, const SortedIndex& sorted,
                   const PartitionConfig& config) {
        n = sorted.perm.size();
        nsc = cloud.num_scalars();
        nvec = cloud.num_vectors();
        ndir = config.directions.size();
        nch = nsc + nvec * ndir;
        stride = nsc + 3 * nvec;
        values.resize(n * stride);
        for (std::size_t r = 0; r < n; ++r) {
            const std::uint32_t i = sorted.perm[r];
            double* row = values.data() + r * stride;
            for (std::size_t k = 0; k < nsc; ++k) row[k] = cloud.scalars[k][i];
            for (std::size_t j = 0; j < nvec; ++j) {
                const Vec3& v = cloud.vectors[j][i];
                row[nsc + 3 * j] = v[0];
                row[nsc + 3 * j + 1] = v[1];
                row[nsc + 3 * j + 2] = v[2];
            }
        }
        const std::size_t nblk = (n + kBlock - 1) / kBlock;
        bmin.assign(nblk * nch, std::numeric_limits<double>::infinity());
        bmax.assign(nblk * nch, -std::numeric_limits<double>::infinity());
        for (std::size_t r = 0; r < n; ++r) {
            accumulate(r, config, bmin.data() + (r / kBlock) * nch,
                       bmax.data() + (r / kBlock) * nch);
        }
    }

    // fold rank r's channel values (projections computed on the fly) into
    // running extrema; the dot-product expression matches cell_variation_score
    void accumulate(std::size_t r, const PartitionConfig& config, double* mn,
                    double* mx) const {
        const double* row = values.data() + r * stride;
        for (std::size_t k = 0; k < nsc; ++k) {
            mn[k] = std::min(mn[k], row[k]);
            mx[k] = std::max(mx[k], row[k]);
        }
        for (std::size_t j = 0; j < nvec; ++j) {
            const double* v = row + nsc + 3 * j;
            for (std::size_t d = 0; d < ndir; ++d) {
                const Vec3& dir = config.directions[d];
                const double p = dir[0] * v[0] + dir[1] * v[1] + dir[2] * v[2];
                const std::size_t c = nsc + j * ndir + d;
                mn[c] = std::min(mn[c], p);
                mx[c] = std::max(mx[c], p);
            }
        }
    }

    // same evaluation order and arithmetic as cell_variation_score
    VariationScore score(std::uint32_t lo, std::uint32_t hi,
                         const PartitionConfig& config) const {
        std::vector<double> mn(nch, std::numeric_limits<double>::infinity());
        std::vector<double> mx(nch, -std::numeric_limits<double>::infinity());
        auto scan = [&](std::uint32_t a, std::uint32_t b) {
            for (std::uint32_t r = a; r < b; ++r) {
                accumulate(r, config, mn.data(), mx.data());
            }
        };
        // whole blocks inside [lo, hi) come from the tables; edges are scanned
        const std::uint32_t first_blk = (lo + kBlock - 1) / kBlock;
        const std::uint32_t last_blk = hi / kBlock;
        if (first_blk >= last_blk) {
            scan(lo, hi);
        } else {
            scan(lo, first_blk * kBlock);
            for (std::uint32_t b = first_blk; b < last_blk; ++b) {
                const double* blo = bmin.data() + std::size_t{b} * nch;
                const double* bhi = bmax.data() + std::size_t{b} * nch;
                for (std::size_t c = 0; c < nch; ++c) {
                    mn[c] = std::min(mn[c], blo[c]);
                    mx[c] = std::max(mx[c], bhi[c]);
                }
            }
            scan(last_blk * kBlock, hi);
        }

        VariationScore out;
        bool have_trigger = false;
        for (std::size_t k = 0; k < nsc; ++k) {
            const double weighted = config.scalar_weight(k) * (mx[k] - mn[k]);
            out.max_weighted_scalar = std::max(out.max_weighted_scalar, weighted);
            if (!have_trigger || weighted > out.delta) {
                out.delta = weighted;
                out.trigger_channel = static_cast<std::uint32_t>(k);
                out.trigger_is_vector = false;
                have_trigger = true;
            }
        }
        for (std::size_t j = 0; j < nvec; ++j) {
            double diam = 0.0;
            for (std::size_t d = 0; d < ndir; ++d) {
                const std::size_t c = nsc + j * ndir + d;
                diam = std::max(diam, mx[c] - mn[c]);
            }
            const double weighted = config.vector_weight(j) * diam;
            out.max_weighted_vector = std::max(out.max_weighted_vector, weighted);
            // strict > keeps the scalar-before-vector tie-break
            if (!have_trigger || weighted > out.delta) {
                out.delta = weighted;
                out.trigger_channel = static_cast<std::uint32_t>(j);
                out.trigger_is_vector = true;
                have_trigger = true;
            }
        }
        return out;
    }
};

}  // namespace

Partition build_partition(const LabeledPointCloud& cloud,
                          const SortedIndex& sorted,
                          const BoundingCube& cube,
                          const PartitionConfig& config) {
    config.validate(cloud);
    const auto n = static_cast<std::uint32_t>(cloud.size());
    if (sorted.perm.size() != n || sorted.keys.size() != n) {
        throw PartitionError("sorted index does not match cloud");
    }
    const RankedChannels ranked(cloud, sorted, config);

    Partition out;
    out.cube_edge = cube.edge;

    struct Work {
        MortonKey prefix;
        int depth;
        std::uint32_t lo, hi;
    };
    std::deque<Work> queue;
    queue.push_back({0, 0, 0, n});

    auto finalize = [&](const Work& w, StopRule stop, bool have_score,
                        const VariationScore& score) {
        Cell cell;
        cell.prefix = w.prefix;
        cell.depth = w.depth;
        cell.lo = w.lo;
        cell.hi = w.hi;
        cell.width = cube.edge / static_cast<double>(std::uint64_t{1} << w.depth);
        cell.stop = stop;
        VariationScore s = score;
        if (!have_score && w.hi - w.lo > 1) {
            // cap-stopped leaves still need delta for stratification
            s = ranked.score(w.lo, w.hi, config);
        }
        cell.delta = s.delta;
        cell.trigger_channel = s.trigger_channel;
        cell.trigger_is_vector = s.trigger_is_vector;
        out.cells.push_back(cell);
    };

    while (!queue.empty()) {
        const Work w = queue.front();
        queue.pop_front();
        const std::uint32_t count = w.hi - w.lo;

        if (count <= static_cast<std::uint32_t>(config.kappa)) {
            finalize(w, StopRule::PointCap, false, {});
            continue;
        }
        if (w.depth >= config.g_max || w.depth >= kMortonBits) {
            finalize(w, StopRule::DepthCap, false, {});
            continue;
        }

        const VariationScore score = ranked.score(w.lo, w.hi, config);
        if (score.max_weighted_scalar > config.eps_refine) ++out.counters.thr_scalar;
        if (score.max_weighted_vector > config.eps_refine) ++out.counters.thr_vector;

        if (score.delta <= config.eps_refine) {
            finalize(w, StopRule::LowVariation, true, score);
            continue;
        }

        if (score.trigger_is_vector) {
            ++out.counters.refine_vector;
        } else {
            ++out.counters.refine_scalar;
        }

        // children are contiguous in the sorted order; split on the 3 bits
        // below the current prefix
        const int shift = 3 * (kMortonBits - w.depth - 1);
        std::uint32_t lo = w.lo;
        for (std::uint64_t child = 0; child < 8 && lo < w.hi; ++child) {
            const MortonKey child_prefix =
                w.prefix | (child << shift);
            const MortonKey child_end = child_prefix + (MortonKey{1} << shift);
            const auto it = std::lower_bound(sorted.keys.begin() + lo,
                                             sorted.keys.begin() + w.hi, child_end);
            const auto hi = static_cast<std::uint32_t>(it - sorted.keys.begin());
            if (hi > lo) {
                queue.push_back({child_prefix, w.depth + 1, lo, hi});
            }
            lo = hi;
        }
    }

    std::sort(out.cells.begin(), out.cells.end(),
              [](const Cell& a, const Cell& b) { return a.lo < b.lo; });
    return out;
}

void export_partition(const Partition& partition, const LabeledPointCloud& cloud,
                      const std::string& path) {
    std::ofstream os(path);
    if (!os) throw PartitionError("cannot open for writing: " + path);
    for (const Cell& c : partition.cells) {
        nlohmann::json j;
        j["key"] = c.prefix;
        j["depth"] = c.depth;
        j["lo"] = c.lo;
        j["hi"] = c.hi;
        j["n"] = c.count();
        j["h"] = c.width;
        j["delta"] = c.delta;
        const bool vec = c.trigger_is_vector;
        const auto& names = vec ? cloud.vector_names : cloud.scalar_names;
        std::string trigger = "none";
        if (c.trigger_channel < names.size()) {
            trigger = (vec ? "v:" : "s:") + names[c.trigger_channel];
        }
        j["trigger"] = trigger;
        os << j.dump() << "\n";
    }
    if (!os) throw PartitionError("write failed: " + path);
}

}  // namespace m3
