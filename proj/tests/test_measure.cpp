#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "m3/measure.hpp"

namespace {

// independent stratification over `ncells` cells with `k` strata
m3::Stratification random_strat(std::size_t ncells, int k, std::mt19937& gen) {
    m3::Stratification s;
    s.num_bins = k - 1;
    s.labels.resize(ncells);
    s.strata.assign(static_cast<std::size_t>(k), {});
    std::uniform_int_distribution<int> lab(1, k);
    for (std::size_t c = 0; c < ncells; ++c) {
        const int l = lab(gen);
        s.labels[c] = static_cast<std::uint16_t>(l);
        s.strata[static_cast<std::size_t>(l - 1)].push_back(
            static_cast<std::uint32_t>(c));
    }
    return s;
}

std::vector<double> uniform_alpha(const m3::Stratification& s) {
    std::size_t nonempty = 0;
    for (const auto& st : s.strata) nonempty += st.empty() ? 0 : 1;
    std::vector<double> alpha(s.strata.size(), 0.0);
    for (std::size_t l = 0; l < alpha.size(); ++l) {
        if (!s.strata[l].empty()) alpha[l] = 1.0 / static_cast<double>(nonempty);
    }
    return alpha;
}

}  // namespace

TEST_SUITE("measure") {

TEST_CASE("simplex validation renormalizes tiny drift and rejects junk") {
    CHECK_NOTHROW(m3::CellMeasure({0.25, 0.25, 0.5}));
    const m3::CellMeasure drift({0.25 + 1e-13, 0.25, 0.5});
    double total = 0.0;
    for (double v : drift.mass()) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(m3::CellMeasure({0.5, 0.6}), m3::MeasureError);
    CHECK_THROWS_AS(m3::CellMeasure({-0.1, 1.1}), m3::MeasureError);
    CHECK_THROWS_AS(m3::CellMeasure({}), m3::MeasureError);
}

TEST_CASE("tv distance is a metric on random simplex pairs") {
    std::mt19937 gen(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 20);
        const m3::CellMeasure p(testutil::random_simplex(n, gen));
        const m3::CellMeasure q(testutil::random_simplex(n, gen));
        const m3::CellMeasure r(testutil::random_simplex(n, gen));
        const double pq = m3::tv_distance(p, q);
        CHECK(pq >= 0.0);
        CHECK(pq <= 1.0);
        CHECK(pq == doctest::Approx(m3::tv_distance(q, p)));
        CHECK(m3::tv_distance(p, p) == 0.0);
        // triangle inequality
        CHECK(pq <= m3::tv_distance(p, r) + m3::tv_distance(r, q) + 1e-12);
        // half-L1 identity
        double l1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) l1 += std::abs(p[i] - q[i]);
        CHECK(pq == doctest::Approx(0.5 * l1));
    }
}

TEST_CASE("tv attains 1 on disjoint supports") {
    CHECK(m3::tv_distance(m3::CellMeasure({1.0, 0.0}),
                          m3::CellMeasure({0.0, 1.0})) == doctest::Approx(1.0));
}

TEST_CASE("target measure spreads stratum mass uniformly over its cells") {
    std::mt19937 gen(11);
    const auto strat = random_strat(40, 5, gen);
    const auto alpha = uniform_alpha(strat);
    const auto mu = m3::target_measure(strat, alpha);
    for (std::size_t l = 0; l < strat.strata.size(); ++l) {
        for (auto ci : strat.strata[l]) {
            CHECK(mu[ci] ==
                  doctest::Approx(alpha[l] / double(strat.strata[l].size())));
        }
    }
}

TEST_CASE("decomposition bounds 2 TV on random instances") {
    std::mt19937 gen(13);
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t ncells = 2 + static_cast<std::size_t>(trial % 30);
        const int k = 2 + trial % 5;
        const auto strat = random_strat(ncells, k, gen);
        const auto alpha = uniform_alpha(strat);
        const m3::CellMeasure mu(testutil::random_simplex(ncells, gen));
        const auto mu_star = m3::target_measure(strat, alpha);
        const auto terms = m3::decomposition_terms(mu, strat, alpha);
        const double tv = m3::tv_distance(mu, mu_star);
        CHECK(2.0 * tv <= terms.inter + terms.intra + 1e-12);
    }
}

TEST_CASE("risk gap respects the 2 M TV bound on random instances") {
    std::mt19937 gen(17);
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 25);
        const double M = 0.5 + (trial % 7);
        std::uniform_real_distribution<double> loss(0.0, M);
        std::vector<double> losses(n);
        for (auto& l : losses) l = loss(gen);
        const m3::CellMeasure mu(testutil::random_simplex(n, gen));
        const m3::CellMeasure mu_star(testutil::random_simplex(n, gen));
        const auto gap = m3::risk_gap_check(losses, M, mu, mu_star);
        CHECK(gap.gap <= gap.bound + 1e-12);
        CHECK(gap.bound ==
              doctest::Approx(2.0 * M * m3::tv_distance(mu, mu_star)));
    }
}

TEST_CASE("risk gap rejects out-of-range losses") {
    const m3::CellMeasure mu({0.5, 0.5});
    CHECK_THROWS_AS(m3::risk_gap_check({0.5, 2.0}, 1.0, mu, mu), m3::MeasureError);
    CHECK_THROWS_AS(m3::risk_gap_check({-0.1, 0.5}, 1.0, mu, mu), m3::MeasureError);
}

TEST_CASE("importance-weighted risk matches the direct average") {
    std::mt19937 gen(19);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    std::vector<double> losses(100), ratios(100);
    long double direct = 0.0;
    for (std::size_t i = 0; i < 100; ++i) {
        losses[i] = u(gen);
        ratios[i] = u(gen);
        direct += static_cast<long double>(losses[i]) * ratios[i];
    }
    direct /= 100.0L;
    CHECK(m3::importance_weighted_risk(losses, ratios) ==
          doctest::Approx(static_cast<double>(direct)).epsilon(1e-12));
    CHECK_THROWS_AS(m3::importance_weighted_risk({1.0}, {-1.0}), m3::MeasureError);
    CHECK_THROWS_AS(m3::importance_weighted_risk({1.0}, {1.0, 2.0}),
                    m3::MeasureError);
}

TEST_CASE("plan view and index view of a draw agree") {
    const auto cloud = testutil::random_cloud(2000, 23);
    m3::AllocConfig aconf;
    aconf.budget = 500;
    aconf.rho = 0.6;
    aconf.seed = 5;
    const auto res = m3::m3_sample(cloud, m3::PartitionConfig{},
                                   m3::StratifyConfig{}, aconf);
    const auto from_plan = m3::measure_from_plan(res.plan);
    const auto from_idx = m3::measure_from_indices(res.measure.indices,
                                                   res.partition, res.sorted);
    REQUIRE(from_plan.size() == from_idx.size());
    for (std::size_t c = 0; c < from_plan.size(); ++c) {
        CHECK(from_plan[c] == doctest::Approx(from_idx[c]).epsilon(1e-12));
    }
}

}  // TEST_SUITE
