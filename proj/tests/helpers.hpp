#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "m3/cloud.hpp"

namespace testutil {

// mt19937-based generator, deliberately unrelated to the library's RNG
inline m3::LabeledPointCloud random_cloud(std::size_t n, unsigned seed,
                                          std::size_t n_scalars = 1,
                                          std::size_t n_vectors = 1,
                                          bool with_weights = false) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> pos(0.0, 1.0);
    std::normal_distribution<double> field(0.0, 1.0);
    m3::LabeledPointCloud cloud;
    cloud.positions.resize(n);
    for (auto& p : cloud.positions) p = {pos(gen), pos(gen), pos(gen)};
    for (std::size_t k = 0; k < n_scalars; ++k) {
        cloud.scalar_names.push_back("s" + std::to_string(k));
        std::vector<double> v(n);
        for (auto& x : v) x = field(gen);
        cloud.scalars.push_back(std::move(v));
    }
    for (std::size_t k = 0; k < n_vectors; ++k) {
        cloud.vector_names.push_back("v" + std::to_string(k));
        std::vector<m3::Vec3> v(n);
        for (auto& x : v) x = {field(gen), field(gen), field(gen)};
        cloud.vectors.push_back(std::move(v));
    }
    if (with_weights) {
        cloud.geom_weights.resize(n);
        std::uniform_real_distribution<double> w(0.5, 2.0);
        for (auto& x : cloud.geom_weights) x = w(gen);
    }
    return cloud;
}

inline std::vector<double> random_simplex(std::size_t n, std::mt19937& gen) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> v(n);
    double total = 0.0;
    for (auto& x : v) total += (x = e(gen));
    for (auto& x : v) x /= total;
    return v;
}

}  // namespace testutil
