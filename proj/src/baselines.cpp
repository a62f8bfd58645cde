#include "m3/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "m3/rng.hpp"
#include "m3/stratify.hpp"
#include "m3/synth.hpp"

namespace m3 {

namespace {

EmpiricalMeasure all_indices(std::uint64_t n) {
    EmpiricalMeasure out;
    out.indices.resize(n);
    std::iota(out.indices.begin(), out.indices.end(), std::uint64_t{0});
    out.weight = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
    return out;
}

void finish(EmpiricalMeasure& out) {
    out.weight = out.indices.empty()
                     ? 0.0
                     : 1.0 / static_cast<double>(out.indices.size());
}

// per-voxel min/max accumulators for the variation score
struct VoxelAccum {
    std::vector<double> smin, smax;        // per scalar channel
    std::vector<double> pmin, pmax;        // per (vector channel, direction)
    std::uint64_t count = 0;

    void init(std::size_t n_scalar, std::size_t n_proj) {
        smin.assign(n_scalar, std::numeric_limits<double>::infinity());
        smax.assign(n_scalar, -std::numeric_limits<double>::infinity());
        pmin.assign(n_proj, std::numeric_limits<double>::infinity());
        pmax.assign(n_proj, -std::numeric_limits<double>::infinity());
    }
};

void accumulate_point(VoxelAccum& acc, const LabeledPointCloud& cloud,
                      std::size_t i, const PartitionConfig& scoring) {
    for (std::size_t k = 0; k < cloud.num_scalars(); ++k) {
        const double v = cloud.scalars[k][i];
        acc.smin[k] = std::min(acc.smin[k], v);
        acc.smax[k] = std::max(acc.smax[k], v);
    }
    const std::size_t ndir = scoring.directions.size();
    for (std::size_t j = 0; j < cloud.num_vectors(); ++j) {
        const Vec3& v = cloud.vectors[j][i];
        for (std::size_t d = 0; d < ndir; ++d) {
            const Vec3& dir = scoring.directions[d];
            const double p = dir[0] * v[0] + dir[1] * v[1] + dir[2] * v[2];
            acc.pmin[j * ndir + d] = std::min(acc.pmin[j * ndir + d], p);
            acc.pmax[j * ndir + d] = std::max(acc.pmax[j * ndir + d], p);
        }
    }
    ++acc.count;
}

double accum_score(const VoxelAccum& acc, const LabeledPointCloud& cloud,
                   const PartitionConfig& scoring) {
    double score = 0.0;
    for (std::size_t k = 0; k < cloud.num_scalars(); ++k) {
        score = std::max(score, scoring.scalar_weight(k) * (acc.smax[k] - acc.smin[k]));
    }
    const std::size_t ndir = scoring.directions.size();
    for (std::size_t j = 0; j < cloud.num_vectors(); ++j) {
        double diam = 0.0;
        for (std::size_t d = 0; d < ndir; ++d) {
            diam = std::max(diam, acc.pmax[j * ndir + d] - acc.pmin[j * ndir + d]);
        }
        score = std::max(score, scoring.vector_weight(j) * diam);
    }
    return score;
}

std::uint64_t voxel_key(const Vec3& p, const BoundingCube& cube, double voxel_edge,
                        std::uint64_t res) {
    std::uint64_t c[3];
    for (int a = 0; a < 3; ++a) {
        auto v = static_cast<std::int64_t>((p[a] - cube.origin[a]) / voxel_edge);
        if (v < 0) v = 0;
        if (v >= static_cast<std::int64_t>(res)) v = static_cast<std::int64_t>(res) - 1;
        c[a] = static_cast<std::uint64_t>(v);
    }
    return (c[0] * res + c[1]) * res + c[2];
}

}  // namespace

EmpiricalMeasure random_sample(std::uint64_t n, std::uint64_t m, std::uint64_t seed) {
    if (m >= n) return all_indices(n);
    EmpiricalMeasure out;
    if (m == 0) return out;
    // Floyd's algorithm: O(m) draws, no O(n) scratch
    RngStream rng(seed, 0x72616e64);  // "rand"
    std::unordered_set<std::uint64_t> chosen;
    chosen.reserve(m * 2);
    for (std::uint64_t j = n - m; j < n; ++j) {
        const std::uint64_t t = rng.below(j + 1);
        const std::uint64_t pick = chosen.contains(t) ? j : t;
        chosen.insert(pick);
        out.indices.push_back(pick);
    }
    finish(out);
    return out;
}

EmpiricalMeasure grid_sample(const LabeledPointCloud& cloud, double voxel_edge,
                             std::uint64_t m, const PartitionConfig& scoring,
                             std::uint64_t seed) {
    if (voxel_edge <= 0.0) throw BaselineError("voxel edge must be > 0");
    const std::uint64_t n = cloud.size();
    if (m >= n) return all_indices(n);
    EmpiricalMeasure out;
    if (m == 0) return out;

    const BoundingCube cube = compute_bounds(cloud);
    const auto res = static_cast<std::uint64_t>(
        std::max(1.0, std::ceil(cube.edge / voxel_edge)));
    const std::size_t n_proj = cloud.num_vectors() * scoring.directions.size();

    std::unordered_map<std::uint64_t, VoxelAccum> accums;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> members;
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint64_t key = voxel_key(cloud.positions[i], cube, voxel_edge, res);
        auto [it, inserted] = accums.try_emplace(key);
        if (inserted) it->second.init(cloud.num_scalars(), n_proj);
        accumulate_point(it->second, cloud, i, scoring);
        members[key].push_back(static_cast<std::uint32_t>(i));
    }
    // per-voxel scores enter the cost profile; index selection is
    // voxel-uniform round-robin
    for (const auto& [key, acc] : accums) {
        (void)accum_score(acc, cloud, scoring);
    }

    std::vector<std::uint64_t> keys;
    keys.reserve(members.size());
    for (const auto& [key, pts] : members) keys.push_back(key);
    std::sort(keys.begin(), keys.end());

    std::vector<std::size_t> cursor(keys.size(), 0);
    std::vector<RngStream> streams;
    streams.reserve(keys.size());
    for (std::uint64_t key : keys) streams.emplace_back(seed, key, 0x67726964);

    while (out.indices.size() < m) {
        bool progressed = false;
        for (std::size_t v = 0; v < keys.size() && out.indices.size() < m; ++v) {
            auto& pts = members[keys[v]];
            std::size_t& cur = cursor[v];
            if (cur >= pts.size()) continue;
            const std::size_t j = cur + streams[v].below(pts.size() - cur);
            std::swap(pts[cur], pts[j]);
            out.indices.push_back(pts[cur]);
            ++cur;
            progressed = true;
        }
        if (!progressed) break;
    }
    finish(out);
    return out;
}

EmpiricalMeasure proxy_sample(const LabeledPointCloud& cloud, std::uint64_t m,
                              const PartitionConfig& scoring, std::uint64_t seed,
                              double target_occupancy) {
    const std::uint64_t n = cloud.size();
    if (n == 0) throw BaselineError("empty cloud");
    if (m >= n) return all_indices(n);
    EmpiricalMeasure out;
    if (m == 0) return out;

    const BoundingCube cube = compute_bounds(cloud);

    // search the per-axis resolution whose mean occupancy over occupied
    // voxels is closest to the target
    std::uint64_t best_res = 1;
    double best_gap = std::numeric_limits<double>::infinity();
    for (std::uint64_t res = 1; res <= 1024; res *= 2) {
        const double edge = cube.edge / static_cast<double>(res);
        std::unordered_set<std::uint64_t> occupied;
        for (std::uint64_t i = 0; i < n; ++i) {
            occupied.insert(voxel_key(cloud.positions[i], cube, edge, res));
        }
        const double occ = static_cast<double>(n) /
                           static_cast<double>(occupied.size());
        const double gap = std::abs(std::log(occ / target_occupancy));
        if (gap < best_gap) {
            best_gap = gap;
            best_res = res;
        }
        if (occ < target_occupancy) break;  // finer grids only dilute further
    }
    const double voxel_edge = cube.edge / static_cast<double>(best_res);
    const std::size_t n_proj = cloud.num_vectors() * scoring.directions.size();

    std::unordered_map<std::uint64_t, VoxelAccum> accums;
    std::vector<std::uint64_t> point_voxel(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint64_t key =
            voxel_key(cloud.positions[i], cube, voxel_edge, best_res);
        auto [it, inserted] = accums.try_emplace(key);
        if (inserted) it->second.init(cloud.num_scalars(), n_proj);
        accumulate_point(it->second, cloud, i, scoring);
        point_voxel[i] = key;
    }

    constexpr double kImportanceFloor = 1e-12;
    std::unordered_map<std::uint64_t, double> voxel_weight;
    voxel_weight.reserve(accums.size());
    for (const auto& [key, acc] : accums) {
        // voxel chosen ∝ importance, point uniform within: per-point weight
        // is importance / occupancy
        voxel_weight[key] = (accum_score(acc, cloud, scoring) + kImportanceFloor) /
                            static_cast<double>(acc.count);
    }
    std::vector<double> weight(n);
    double total = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
        weight[i] = voxel_weight[point_voxel[i]];
        total += weight[i];
    }

    // global weighted sampling: each draw re-scans the weight array from the
    // front (one streaming pass per draw, O(N) auxiliary state), duplicates
    // rejected and redrawn
    RngStream rng(seed, 0x70726f7879);  // "proxy"
    std::vector<bool> taken(n, false);
    while (out.indices.size() < m) {
        const double u = rng.uniform() * total;
        double cum = 0.0;
        std::uint64_t idx = n - 1;
        for (std::uint64_t i = 0; i < n; ++i) {
            cum += weight[i];
            if (cum >= u) {
                idx = i;
                break;
            }
        }
        if (taken[idx]) continue;  // draw-with-rejection deduplication
        taken[idx] = true;
        out.indices.push_back(idx);
    }
    finish(out);
    return out;
}

namespace {

// minimal exact kd-tree for fixed-k neighbor queries
class KdTree {
public:
    explicit KdTree(const std::vector<Vec3>& points) : points_(points) {
        order_.resize(points.size());
        std::iota(order_.begin(), order_.end(), 0u);
        build(0, static_cast<std::uint32_t>(points.size()), 0);
    }

    // k nearest including the query point itself; ties broken by index
    void query(const Vec3& q, int k, std::vector<std::uint32_t>& out) const {
        using Entry = std::pair<double, std::uint32_t>;  // (dist2, index)
        std::priority_queue<Entry> heap;
        search(q, k, 0, static_cast<std::uint32_t>(points_.size()), 0, heap);
        out.resize(heap.size());
        for (std::size_t i = out.size(); i-- > 0;) {
            out[i] = heap.top().second;
            heap.pop();
        }
    }

private:
    void build(std::uint32_t lo, std::uint32_t hi, int depth) {
        if (hi - lo <= 1) return;
        const std::uint32_t mid = lo + (hi - lo) / 2;
        const int axis = depth % 3;
        std::nth_element(order_.begin() + lo, order_.begin() + mid,
                         order_.begin() + hi,
                         [&](std::uint32_t a, std::uint32_t b) {
                             if (points_[a][axis] != points_[b][axis]) {
                                 return points_[a][axis] < points_[b][axis];
                             }
                             return a < b;
                         });
        build(lo, mid, depth + 1);
        build(mid + 1, hi, depth + 1);
    }

    template <typename Heap>
    void search(const Vec3& q, int k, std::uint32_t lo, std::uint32_t hi,
                int depth, Heap& heap) const {
        if (lo >= hi) return;
        const std::uint32_t mid = lo + (hi - lo) / 2;
        const std::uint32_t idx = order_[mid];
        const Vec3& p = points_[idx];
        const double dx = q[0] - p[0], dy = q[1] - p[1], dz = q[2] - p[2];
        const double d2 = dx * dx + dy * dy + dz * dz;
        if (heap.size() < static_cast<std::size_t>(k)) {
            heap.emplace(d2, idx);
        } else if (d2 < heap.top().first ||
                   (d2 == heap.top().first && idx < heap.top().second)) {
            heap.pop();
            heap.emplace(d2, idx);
        }
        const int axis = depth % 3;
        const double diff = q[axis] - p[axis];
        const std::uint32_t first_lo = diff < 0 ? lo : mid + 1;
        const std::uint32_t first_hi = diff < 0 ? mid : hi;
        const std::uint32_t second_lo = diff < 0 ? mid + 1 : lo;
        const std::uint32_t second_hi = diff < 0 ? hi : mid;
        search(q, k, first_lo, first_hi, depth + 1, heap);
        if (heap.size() < static_cast<std::size_t>(k) ||
            diff * diff <= heap.top().first) {
            search(q, k, second_lo, second_hi, depth + 1, heap);
        }
    }

    const std::vector<Vec3>& points_;
    std::vector<std::uint32_t> order_;
};

}  // namespace

std::vector<double> knn_scores(const LabeledPointCloud& cloud,
                               const PartitionConfig& scoring, int k) {
    const std::size_t n = cloud.size();
    if (n < static_cast<std::size_t>(k)) {
        throw BaselineError("fewer points than neighborhood size");
    }
    KdTree tree(cloud.positions);
    const std::size_t ndir = scoring.directions.size();
    std::vector<double> scores(n);
    std::vector<std::uint32_t> nbrs;
    std::vector<Vec3> vecbuf;
    for (std::size_t i = 0; i < n; ++i) {
        tree.query(cloud.positions[i], k, nbrs);
        double score = 0.0;
        for (std::size_t kk = 0; kk < cloud.num_scalars(); ++kk) {
            double mn = std::numeric_limits<double>::infinity();
            double mx = -mn;
            for (std::uint32_t nb : nbrs) {
                const double v = cloud.scalars[kk][nb];
                mn = std::min(mn, v);
                mx = std::max(mx, v);
            }
            score = std::max(score, scoring.scalar_weight(kk) * (mx - mn));
        }
        for (std::size_t j = 0; j < cloud.num_vectors(); ++j) {
            double diam = 0.0;
            for (std::size_t d = 0; d < ndir; ++d) {
                const Vec3& dir = scoring.directions[d];
                double mn = std::numeric_limits<double>::infinity();
                double mx = -mn;
                for (std::uint32_t nb : nbrs) {
                    const Vec3& v = cloud.vectors[j][nb];
                    const double p = dir[0] * v[0] + dir[1] * v[1] + dir[2] * v[2];
                    mn = std::min(mn, p);
                    mx = std::max(mx, p);
                }
                diam = std::max(diam, mx - mn);
            }
            score = std::max(score, scoring.vector_weight(j) * diam);
        }
        scores[i] = score;
    }
    return scores;
}

EmpiricalMeasure knn_sample(const LabeledPointCloud& cloud, std::uint64_t m,
                            const PartitionConfig& scoring, std::uint64_t seed,
                            int k) {
    (void)seed;  // scoring and selection are deterministic
    const std::uint64_t n = cloud.size();
    if (m >= n) return all_indices(n);
    EmpiricalMeasure out;
    if (m == 0) return out;
    const std::vector<double> scores = knn_scores(cloud, scoring, k);
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    };
    std::nth_element(order.begin(), order.begin() + m, order.end(), better);
    std::sort(order.begin(), order.begin() + m, better);
    out.indices.assign(order.begin(), order.begin() + m);
    finish(out);
    return out;
}

namespace {

std::uint64_t peak_rss_bytes() {
    std::ifstream is("/proc/self/status");
    std::string line;
    while (std::getline(is, line)) {
        if (line.rfind("VmHWM:", 0) == 0) {
            std::uint64_t kb = 0;
            std::sscanf(line.c_str(), "VmHWM: %lu", &kb);
            return kb * 1024;
        }
    }
    return 0;
}

}  // namespace

std::vector<BenchRow> bench_run(const BenchConfig& config) {
    std::vector<BenchRow> rows;
    std::unordered_set<std::string> timed_out;

    for (std::uint64_t n : config.sizes) {
        SynthSpec spec;
        spec.density = DensityKind::Slab;
        spec.slab_ratio = 100.0;
        spec.fields.push_back({FieldKind::GaussianBump, "s"});
        spec.fields.push_back({FieldKind::Vortex, "u"});
        const LabeledPointCloud raw = generate_cloud(spec, n, 7);
        const LabeledPointCloud cloud = zscore_normalize(raw);
        const BoundingCube cube = compute_bounds(cloud);

        PartitionConfig pconf;
        pconf.eps_refine = 0.05;
        pconf.g_max = 8;

        for (const std::string& method : config.methods) {
            for (std::uint64_t seed : config.seeds) {
                BenchRow row;
                row.method = method;
                row.n = n;
                row.seed = seed;
                if (timed_out.contains(method)) {
                    row.status = "Timeout";
                    row.wall_s = config.time_cap_s;
                    rows.push_back(row);
                    continue;
                }
                const auto t0 = std::chrono::steady_clock::now();
                if (method == "random") {
                    random_sample(n, config.budget, seed);
                } else if (method == "m3") {
                    const SortedIndex sorted = morton_sort(cloud, cube);
                    const Partition part = build_partition(cloud, sorted, cube, pconf);
                    const Stratification strat = assign_strata(part, {});
                    AllocConfig aconf;
                    aconf.budget = config.budget;
                    aconf.seed = seed;
                    const AllocationPlan plan = build_plan(part, strat, aconf);
                    draw_samples(plan, part, sorted, seed);
                } else if (method == "grid") {
                    grid_sample(cloud, cube.edge / 128.0, config.budget, pconf, seed);
                } else if (method == "proxy") {
                    proxy_sample(cloud, config.budget, pconf, seed);
                } else if (method == "knn") {
                    knn_sample(cloud, config.budget, pconf, seed);
                } else {
                    throw BaselineError("unknown method: " + method);
                }
                const auto t1 = std::chrono::steady_clock::now();
                row.wall_s = std::chrono::duration<double>(t1 - t0).count();
                row.peak_bytes = peak_rss_bytes();
                row.status = row.wall_s > config.time_cap_s ? "Timeout" : "ok";
                if (row.status == "Timeout") timed_out.insert(method);
                rows.push_back(row);
                if (row.status == "Timeout") break;
            }
        }
    }
    return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw BaselineError("cannot open for writing: " + path);
    os << "method,N,seed,wall_s,peak_bytes,status\n";
    for (const auto& r : rows) {
        os << r.method << ',' << r.n << ',' << r.seed << ',' << r.wall_s << ','
           << r.peak_bytes << ',' << r.status << "\n";
    }
    if (!os) throw BaselineError("write failed: " + path);
}

}  // namespace m3
