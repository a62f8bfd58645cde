#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace m3 {

struct MetricsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Ground truth and prediction stored flat as N x dim row-major; empty
// weights mean uniform.
struct FieldPair {
    std::vector<double> truth;
    std::vector<double> pred;
    std::size_t dim = 1;
    std::vector<double> weights;

    std::size_t count() const { return dim == 0 ? 0 : truth.size() / dim; }
    void validate() const;
};

struct ErrorMetrics {
    double mae = 0.0;
    double mse = 0.0;
    double rel_l2 = 0.0;
};

// Weighted MAE / MSE / relative L2 over Euclidean norms of the per-point
// residuals. Unit weights reproduce the unweighted forms bit-for-bit.
ErrorMetrics weighted_errors(const FieldPair& pair);

}  // namespace m3
