#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "m3/partition.hpp"

namespace m3 {

struct StratifyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StratifyConfig {
    int num_bins = 64;  // K
    double eps_log = 1e-12;
    double p_lo = 0.0;    // percentile clip, lower
    double p_hi = 99.5;   // percentile clip, upper

    void validate() const;
};

struct Stratification {
    // per-cell scale label in 1..K+1, aligned with Partition::cells;
    // K+1 is the singleton stratum
    std::vector<std::uint16_t> labels;
    // strata[l] lists cell indices with label l+1
    std::vector<std::vector<std::uint32_t>> strata;
    double s_min = 0.0;  // clipped intensity range
    double s_max = 0.0;
    int num_bins = 0;
};

// S_c = log(eps_log + delta_c / h_c)
double cell_intensity(double delta, double width, double eps_log);

// Equal-width binning of the intensity over [p_lo, p_hi] percentiles of the
// multi-point cells; tails clamp into bins 1 and K, singletons go to K+1.
Stratification assign_strata(const Partition& partition,
                             const StratifyConfig& config);

// JSON summary plus a binary u16 label array aligned to the cell order.
void export_stratification(const Stratification& strat, const Partition& partition,
                           const std::string& json_path,
                           const std::string& labels_path);

}  // namespace m3
