#include "m3/stratify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace m3 {

void StratifyConfig::validate() const {
    if (num_bins < 2) throw StratifyError("K must be >= 2");
    if (eps_log <= 0.0) throw StratifyError("eps_log must be > 0");
    if (p_lo < 0.0 || p_hi > 100.0 || p_lo >= p_hi) {
        throw StratifyError("require 0 <= p_lo < p_hi <= 100");
    }
}

double cell_intensity(double delta, double width, double eps_log) {
    return std::log(eps_log + delta / width);
}

namespace {

// linear-interpolation percentile over a sorted sample
double percentile(const std::vector<double>& sorted_vals, double p) {
    const std::size_t n = sorted_vals.size();
    if (n == 1) return sorted_vals[0];
    const double rank = p / 100.0 * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = rank - static_cast<double>(lo);
    return sorted_vals[lo] + frac * (sorted_vals[hi] - sorted_vals[lo]);
}

}  // namespace

Stratification assign_strata(const Partition& partition,
                             const StratifyConfig& config) {
    config.validate();
    const int K = config.num_bins;
    const std::size_t ncells = partition.cells.size();

    Stratification out;
    out.num_bins = K;
    out.labels.assign(ncells, 0);
    out.strata.assign(static_cast<std::size_t>(K) + 1, {});

    std::vector<double> intensities(ncells, 0.0);
    std::vector<double> multi;  // intensities of multi-point cells
    for (std::size_t i = 0; i < ncells; ++i) {
        const Cell& c = partition.cells[i];
        if (c.count() > 1) {
            intensities[i] = cell_intensity(c.delta, c.width, config.eps_log);
            multi.push_back(intensities[i]);
        }
    }

    if (!multi.empty()) {
        std::sort(multi.begin(), multi.end());
        out.s_min = percentile(multi, config.p_lo);
        out.s_max = percentile(multi, config.p_hi);
    }

    const double range = out.s_max - out.s_min;
    for (std::size_t i = 0; i < ncells; ++i) {
        const Cell& c = partition.cells[i];
        std::uint16_t label;
        if (c.count() == 1) {
            label = static_cast<std::uint16_t>(K + 1);
        } else if (range <= 0.0) {
            // degenerate range: treat the single value as the top of a
            // zero-width interval
            label = static_cast<std::uint16_t>(K);
        } else {
            const double s = intensities[i];
            if (s <= out.s_min) {
                label = 1;
            } else if (s >= out.s_max) {
                label = static_cast<std::uint16_t>(K);
            } else {
                // exact interior edges land in the upper bin via floor
                auto bin = static_cast<int>(
                    std::floor((s - out.s_min) / range * K));
                bin = std::clamp(bin, 0, K - 1);
                label = static_cast<std::uint16_t>(bin + 1);
            }
        }
        out.labels[i] = label;
        out.strata[label - 1].push_back(static_cast<std::uint32_t>(i));
    }
    return out;
}

void export_stratification(const Stratification& strat, const Partition& partition,
                           const std::string& json_path,
                           const std::string& labels_path) {
    {
        std::ofstream os(labels_path, std::ios::binary);
        if (!os) throw StratifyError("cannot open for writing: " + labels_path);
        os.write(reinterpret_cast<const char*>(strat.labels.data()),
                 static_cast<std::streamsize>(strat.labels.size() * sizeof(std::uint16_t)));
        if (!os) throw StratifyError("write failed: " + labels_path);
    }
    nlohmann::json j;
    j["edges"] = {strat.s_min, strat.s_max};
    j["k"] = strat.num_bins;
    j["labels_path"] = labels_path;
    auto per = nlohmann::json::array();
    for (std::size_t l = 0; l < strat.strata.size(); ++l) {
        if (strat.strata[l].empty()) continue;
        nlohmann::json e;
        e["level"] = l + 1;
        e["cells"] = strat.strata[l].size();
        std::uint64_t points = 0;
        for (std::uint32_t ci : strat.strata[l]) {
            points += partition.cells[ci].count();
        }
        e["points"] = points;
        per.push_back(e);
    }
    j["per_stratum"] = per;
    std::ofstream os(json_path);
    if (!os) throw StratifyError("cannot open for writing: " + json_path);
    os << j.dump(2) << "\n";
    if (!os) throw StratifyError("write failed: " + json_path);
}

}  // namespace m3
