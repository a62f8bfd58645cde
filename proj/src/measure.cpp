#include "m3/measure.hpp"

#include <algorithm>
#include <cmath>

namespace m3 {

CellMeasure::CellMeasure(std::vector<double> mass) : mass_(std::move(mass)) {
    if (mass_.empty()) throw MeasureError("empty mass vector");
    double sum = 0.0;
    for (double p : mass_) {
        if (!std::isfinite(p) || p < 0.0) {
            throw MeasureError("mass entries must be finite and >= 0");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw MeasureError("mass vector does not sum to 1");
    }
    if (sum != 1.0 && sum > 0.0) {
        for (double& p : mass_) p /= sum;
    }
}

CellMeasure target_measure(const Stratification& strat,
                           const std::vector<double>& alpha) {
    if (alpha.size() != strat.strata.size()) {
        throw MeasureError("alpha size must equal number of strata");
    }
    std::vector<double> mass(strat.labels.size(), 0.0);
    for (std::size_t l = 0; l < strat.strata.size(); ++l) {
        if (strat.strata[l].empty()) {
            if (alpha[l] > 0.0) {
                throw MeasureError("positive alpha on an empty stratum");
            }
            continue;
        }
        const double per_cell = alpha[l] / static_cast<double>(strat.strata[l].size());
        for (std::uint32_t ci : strat.strata[l]) mass[ci] = per_cell;
    }
    return CellMeasure(std::move(mass));
}

double tv_distance(const CellMeasure& p, const CellMeasure& q) {
    if (p.size() != q.size()) {
        throw MeasureError("measures live on different cell sets");
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) sum += std::abs(p[c] - q[c]);
    return 0.5 * sum;
}

DecompositionTerms decomposition_terms(const CellMeasure& mu,
                                       const Stratification& strat,
                                       const std::vector<double>& alpha) {
    if (alpha.size() != strat.strata.size()) {
        throw MeasureError("alpha size must equal number of strata");
    }
    if (mu.size() != strat.labels.size()) {
        throw MeasureError("measure size must equal number of cells");
    }
    DecompositionTerms terms;
    for (std::size_t l = 0; l < strat.strata.size(); ++l) {
        double stratum_mass = 0.0;
        for (std::uint32_t ci : strat.strata[l]) stratum_mass += mu[ci];
        terms.inter += std::abs(stratum_mass - alpha[l]);
        if (!strat.strata[l].empty()) {
            const double mean = stratum_mass / static_cast<double>(strat.strata[l].size());
            for (std::uint32_t ci : strat.strata[l]) {
                terms.intra += std::abs(mu[ci] - mean);
            }
        }
    }
    return terms;
}

RiskGap risk_gap_check(const std::vector<double>& losses, double bound_m,
                       const CellMeasure& mu, const CellMeasure& mu_star) {
    if (losses.size() != mu.size() || mu.size() != mu_star.size()) {
        throw MeasureError("losses/measures size mismatch");
    }
    for (double l : losses) {
        if (!(l >= 0.0 && l <= bound_m)) {
            throw MeasureError("loss outside [0, M]");
        }
    }
    double r_mu = 0.0, r_star = 0.0;
    for (std::size_t c = 0; c < losses.size(); ++c) {
        r_mu += mu[c] * losses[c];
        r_star += mu_star[c] * losses[c];
    }
    RiskGap out;
    out.gap = std::abs(r_mu - r_star);
    out.bound = 2.0 * bound_m * tv_distance(mu, mu_star);
    if (out.gap > out.bound + 1e-12) {
        throw MeasureError("risk gap exceeds TV bound");
    }
    return out;
}

double importance_weighted_risk(const std::vector<double>& losses,
                                const std::vector<double>& ratios) {
    if (losses.size() != ratios.size() || losses.empty()) {
        throw MeasureError("losses/ratios size mismatch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        const double r = ratios[i];
        if (!std::isfinite(r) || r < 0.0) {
            throw MeasureError("density ratio violates absolute continuity at sample " +
                               std::to_string(i));
        }
        sum += r * losses[i];
    }
    return sum / static_cast<double>(losses.size());
}

CellMeasure measure_from_plan(const AllocationPlan& plan) {
    if (plan.m_prime == 0) throw MeasureError("empty plan (m' = 0)");
    std::vector<double> mass(plan.quotas.size());
    for (std::size_t c = 0; c < plan.quotas.size(); ++c) {
        mass[c] = static_cast<double>(plan.quotas[c]) /
                  static_cast<double>(plan.m_prime);
    }
    return CellMeasure(std::move(mass));
}

CellMeasure measure_from_indices(const std::vector<std::uint64_t>& indices,
                                 const Partition& partition,
                                 const SortedIndex& sorted) {
    if (indices.empty()) throw MeasureError("empty index set");
    // invert the permutation once, then locate cells by span binary search
    std::vector<std::uint32_t> rank_of(sorted.perm.size());
    for (std::uint32_t r = 0; r < sorted.perm.size(); ++r) {
        rank_of[sorted.perm[r]] = r;
    }
    std::vector<double> mass(partition.cells.size(), 0.0);
    for (std::uint64_t idx : indices) {
        if (idx >= rank_of.size()) throw MeasureError("point index out of range");
        const std::uint32_t r = rank_of[idx];
        auto it = std::upper_bound(partition.cells.begin(), partition.cells.end(), r,
                                   [](std::uint32_t rr, const Cell& cell) {
                                       return rr < cell.lo;
                                   });
        if (it == partition.cells.begin()) throw MeasureError("index before first cell");
        mass[static_cast<std::size_t>(it - partition.cells.begin()) - 1] += 1.0;
    }
    const double inv = 1.0 / static_cast<double>(indices.size());
    for (double& p : mass) p *= inv;
    return CellMeasure(std::move(mass));
}

}  // namespace m3
