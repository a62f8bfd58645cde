#pragma once

#include <cstdint>
#include <vector>

#include "m3/allocate.hpp"

namespace m3 {

struct MeasureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Discrete probability measure over the cell set, identified with its mass
// vector. Inputs within 1e-9 of the simplex are renormalized; anything
// further off is rejected.
class CellMeasure {
public:
    explicit CellMeasure(std::vector<double> mass);

    const std::vector<double>& mass() const { return mass_; }
    std::size_t size() const { return mass_.size(); }
    double operator[](std::size_t c) const { return mass_[c]; }

private:
    std::vector<double> mass_;
};

// mu*: mass alpha_l / |C_l| on every cell of stratum l (Eq. of the target
// family). alpha is indexed like Stratification::strata.
CellMeasure target_measure(const Stratification& strat,
                           const std::vector<double>& alpha);

// half L1 distance between mass vectors
double tv_distance(const CellMeasure& p, const CellMeasure& q);

struct DecompositionTerms {
    double inter = 0.0;  // sum_l |mu(C_l) - alpha_l|
    double intra = 0.0;  // sum_l sum_c |p_c - mu(C_l)/|C_l||
};

// Two-term bound: 2 TV(mu, mu*) <= inter + intra.
DecompositionTerms decomposition_terms(const CellMeasure& mu,
                                       const Stratification& strat,
                                       const std::vector<double>& alpha);

struct RiskGap {
    double gap = 0.0;
    double bound = 0.0;  // 2 M TV(mu, mu*)
};

// |E_mu[loss] - E_mu*[loss]| against the TV bound; losses must lie in [0, M].
RiskGap risk_gap_check(const std::vector<double>& losses, double bound_m,
                       const CellMeasure& mu, const CellMeasure& mu_star);

// (1/m) sum ratio_i * loss_i, the importance-weighted risk estimate for
// samples drawn under mu with density ratios d(mu_eval)/d(mu).
double importance_weighted_risk(const std::vector<double>& losses,
                                const std::vector<double>& ratios);

// cell-level view of an allocation: p_c = q_c / m'
CellMeasure measure_from_plan(const AllocationPlan& plan);

// cell-level view of an arbitrary index set (e.g. a baseline sampler's
// output): p_c = |I intersect cell| / |I|
CellMeasure measure_from_indices(const std::vector<std::uint64_t>& indices,
                                 const Partition& partition,
                                 const SortedIndex& sorted);

}  // namespace m3
