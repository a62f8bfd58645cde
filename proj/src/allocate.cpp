#include "m3/allocate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "m3/rng.hpp"

namespace m3 {

void AllocConfig::validate() const {
    if (!(rho > 0.0 && rho <= 1.0)) throw AllocError("rho must be in (0,1]");
    for (double a : alpha) {
        if (!(a >= 0.0)) throw AllocError("alpha entries must be >= 0");
    }
}

std::uint32_t effective_capacity(std::uint32_t n_points, double rho) {
    if (!(rho > 0.0 && rho <= 1.0)) throw AllocError("rho must be in (0,1]");
    // the nudge keeps exact products like 0.1 * 100 from ceiling up
    const double scaled = rho * static_cast<double>(n_points);
    auto cap = static_cast<std::uint64_t>(std::ceil(scaled * (1.0 - 1e-12)));
    cap = std::max<std::uint64_t>(cap, 1);
    return static_cast<std::uint32_t>(std::min<std::uint64_t>(cap, n_points));
}

std::vector<std::uint64_t> allocate_levels(
    const std::vector<std::uint64_t>& capacities,
    const std::vector<double>& targets, std::uint64_t budget) {
    const std::size_t n = capacities.size();
    if (targets.size() != n) throw AllocError("targets/capacities size mismatch");
    std::uint64_t total_cap = 0;
    for (std::uint64_t c : capacities) total_cap += c;
    std::uint64_t remaining = std::min(budget, total_cap);

    std::vector<std::uint64_t> assigned(n, 0);
    std::vector<bool> saturated(n);
    for (std::size_t i = 0; i < n; ++i) saturated[i] = capacities[i] == 0;

    while (remaining > 0) {
        double wsum = 0.0;
        std::size_t live = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!saturated[i]) {
                wsum += targets[i];
                ++live;
            }
        }
        if (live == 0) throw AllocError("internal: budget left but no capacity");

        // largest-remainder apportionment of the remaining budget over the
        // unsaturated levels
        std::vector<std::uint64_t> alloc(n, 0);
        std::vector<std::pair<double, std::size_t>> remainders;
        std::uint64_t base_total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (saturated[i]) continue;
            const double w = wsum > 0.0 ? targets[i] / wsum
                                        : 1.0 / static_cast<double>(live);
            const double share = w * static_cast<double>(remaining);
            alloc[i] = static_cast<std::uint64_t>(std::floor(share));
            base_total += alloc[i];
            remainders.emplace_back(share - std::floor(share), i);
        }
        std::uint64_t extra = remaining - base_total;
        std::sort(remainders.begin(), remainders.end(),
                  [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                  });
        for (std::size_t r = 0; extra > 0 && r < remainders.size(); ++r, --extra) {
            ++alloc[remainders[r].second];
        }

        // clamp to residual capacity; overflow stays in `remaining`
        for (std::size_t i = 0; i < n; ++i) {
            if (saturated[i] || alloc[i] == 0) continue;
            const std::uint64_t room = capacities[i] - assigned[i];
            const std::uint64_t give = std::min(alloc[i], room);
            assigned[i] += give;
            remaining -= give;
            if (assigned[i] == capacities[i]) saturated[i] = true;
        }
    }
    return assigned;
}

std::vector<std::uint32_t> water_fill(const std::vector<std::uint32_t>& capacities,
                                      std::uint64_t level_budget) {
    const std::size_t n = capacities.size();
    std::uint64_t total = 0;
    std::uint32_t max_cap = 0;
    for (std::uint32_t c : capacities) {
        total += c;
        max_cap = std::max(max_cap, c);
    }
    if (level_budget > total) {
        throw AllocError("water_fill: budget exceeds stratum capacity");
    }

    // find the highest water level t with sum(min(cap, t)) <= budget
    std::vector<std::uint32_t> sorted_caps(capacities);
    std::sort(sorted_caps.begin(), sorted_caps.end());
    std::vector<std::uint64_t> prefix(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + sorted_caps[i];
    auto filled_at = [&](std::uint64_t t) {
        // number of caps <= t
        const auto k = static_cast<std::size_t>(
            std::upper_bound(sorted_caps.begin(), sorted_caps.end(), t) -
            sorted_caps.begin());
        return prefix[k] + t * static_cast<std::uint64_t>(n - k);
    };
    std::uint64_t lo = 0, hi = max_cap;
    while (lo < hi) {
        const std::uint64_t mid = lo + (hi - lo + 1) / 2;
        if (filled_at(mid) <= level_budget) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    const std::uint64_t level = lo;

    std::vector<std::uint32_t> quotas(n);
    for (std::size_t i = 0; i < n; ++i) {
        quotas[i] = static_cast<std::uint32_t>(
            std::min<std::uint64_t>(capacities[i], level));
    }
    std::uint64_t residual = level_budget - filled_at(level);
    // one extra unit each to the first unsaturated cells in Morton order
    for (std::size_t i = 0; residual > 0 && i < n; ++i) {
        if (capacities[i] > level) {
            ++quotas[i];
            --residual;
        }
    }
    return quotas;
}

AllocationPlan build_plan(const Partition& partition, const Stratification& strat,
                          const AllocConfig& config) {
    config.validate();
    const std::size_t ncells = partition.cells.size();
    const std::size_t nlevels = strat.strata.size();

    AllocationPlan plan;
    plan.eff_capacity.resize(ncells);
    for (std::size_t i = 0; i < ncells; ++i) {
        plan.eff_capacity[i] =
            effective_capacity(partition.cells[i].count(), config.rho);
    }

    plan.level_capacities.assign(nlevels, 0);
    for (std::size_t l = 0; l < nlevels; ++l) {
        for (std::uint32_t ci : strat.strata[l]) {
            plan.level_capacities[l] += plan.eff_capacity[ci];
        }
    }

    // mass targets: uniform over nonempty strata by default; user-specified
    // alpha is renormalized over the nonempty ones
    std::vector<std::size_t> nonempty;
    for (std::size_t l = 0; l < nlevels; ++l) {
        if (!strat.strata[l].empty()) nonempty.push_back(l);
    }
    if (nonempty.empty()) throw AllocError("no nonempty strata");

    plan.alpha_used.assign(nlevels, 0.0);
    if (config.alpha.empty()) {
        for (std::size_t l : nonempty) {
            plan.alpha_used[l] = 1.0 / static_cast<double>(nonempty.size());
        }
    } else {
        if (config.alpha.size() != nlevels) {
            throw AllocError("alpha size must equal K+1");
        }
        double sum = 0.0;
        for (std::size_t l : nonempty) sum += config.alpha[l];
        if (!(sum > 0.0)) {
            throw AllocError("alpha vanishes on every nonempty stratum");
        }
        for (std::size_t l : nonempty) plan.alpha_used[l] = config.alpha[l] / sum;
    }

    std::uint64_t total_cap = 0;
    for (std::uint64_t c : plan.level_capacities) total_cap += c;
    plan.m_prime = std::min<std::uint64_t>(config.budget, total_cap);

    std::vector<std::uint64_t> caps;
    std::vector<double> targets;
    caps.reserve(nonempty.size());
    for (std::size_t l : nonempty) {
        caps.push_back(plan.level_capacities[l]);
        targets.push_back(plan.alpha_used[l]);
    }
    const auto budgets = allocate_levels(caps, targets, plan.m_prime);
    plan.level_budgets.assign(nlevels, 0);
    for (std::size_t i = 0; i < nonempty.size(); ++i) {
        plan.level_budgets[nonempty[i]] = budgets[i];
    }

    plan.quotas.assign(ncells, 0);
    for (std::size_t l = 0; l < nlevels; ++l) {
        if (plan.level_budgets[l] == 0) continue;
        std::vector<std::uint32_t> caps_l;
        caps_l.reserve(strat.strata[l].size());
        for (std::uint32_t ci : strat.strata[l]) {
            caps_l.push_back(plan.eff_capacity[ci]);
        }
        const auto q = water_fill(caps_l, plan.level_budgets[l]);
        for (std::size_t i = 0; i < q.size(); ++i) {
            plan.quotas[strat.strata[l][i]] = q[i];
        }
    }
    return plan;
}

EmpiricalMeasure draw_samples(const AllocationPlan& plan, const Partition& partition,
                              const SortedIndex& sorted, std::uint64_t seed) {
    EmpiricalMeasure measure;
    measure.indices.reserve(plan.m_prime);
    std::vector<std::uint32_t> pool;
    for (std::size_t i = 0; i < partition.cells.size(); ++i) {
        const std::uint32_t q = plan.quotas[i];
        if (q == 0) continue;
        const Cell& c = partition.cells[i];
        pool.assign(sorted.perm.begin() + c.lo, sorted.perm.begin() + c.hi);
        RngStream rng(seed, c.prefix, static_cast<std::uint64_t>(c.depth));
        // partial Fisher-Yates: the first q entries are a uniform
        // without-replacement draw
        for (std::uint32_t k = 0; k < q; ++k) {
            const auto j = k + rng.below(pool.size() - k);
            std::swap(pool[k], pool[j]);
            measure.indices.push_back(pool[k]);
        }
    }
    measure.weight = measure.indices.empty()
                         ? 0.0
                         : 1.0 / static_cast<double>(measure.indices.size());
    return measure;
}

M3Result m3_sample(const LabeledPointCloud& cloud, const PartitionConfig& pconfig,
                   const StratifyConfig& sconfig, const AllocConfig& aconfig) {
    M3Result res;
    const LabeledPointCloud normalized = zscore_normalize(cloud);
    res.cube = compute_bounds(normalized);
    res.sorted = morton_sort(normalized, res.cube);
    res.partition = build_partition(normalized, res.sorted, res.cube, pconfig);
    res.stratification = assign_strata(res.partition, sconfig);
    res.plan = build_plan(res.partition, res.stratification, aconfig);
    res.measure = draw_samples(res.plan, res.partition, res.sorted, aconfig.seed);
    return res;
}

void export_measure(const EmpiricalMeasure& measure, const AllocationPlan* plan,
                    std::uint64_t seed, double rho, const std::string& bin_path,
                    const std::string& sidecar_path) {
    {
        std::ofstream os(bin_path, std::ios::binary);
        if (!os) throw AllocError("cannot open for writing: " + bin_path);
        os.write(reinterpret_cast<const char*>(measure.indices.data()),
                 static_cast<std::streamsize>(measure.indices.size() *
                                              sizeof(std::uint64_t)));
        if (!os) throw AllocError("write failed: " + bin_path);
    }
    nlohmann::json j;
    j["m_prime"] = measure.size();
    j["seed"] = seed;
    j["rho"] = rho;
    auto per_level = nlohmann::json::array();
    if (plan != nullptr) {
        for (std::size_t l = 0; l < plan->level_budgets.size(); ++l) {
            if (plan->level_budgets[l] == 0 && plan->level_capacities[l] == 0) continue;
            nlohmann::json e;
            e["level"] = l + 1;
            e["m_l"] = plan->level_budgets[l];
            e["alpha"] = plan->alpha_used[l];
            per_level.push_back(e);
        }
    }
    j["per_level"] = per_level;
    std::ofstream os(sidecar_path);
    if (!os) throw AllocError("cannot open for writing: " + sidecar_path);
    os << j.dump(2) << "\n";
    if (!os) throw AllocError("write failed: " + sidecar_path);
}

void export_measure_text(const EmpiricalMeasure& measure, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw AllocError("cannot open for writing: " + path);
    for (std::uint64_t idx : measure.indices) os << idx << "\n";
    if (!os) throw AllocError("write failed: " + path);
}

}  // namespace m3
