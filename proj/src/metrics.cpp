#include "m3/metrics.hpp"

#include <cmath>

namespace m3 {

namespace {

// Kahan compensated accumulator
class Accumulator {
public:
    void add(double x) {
        const double y = x - comp_;
        const double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace

void FieldPair::validate() const {
    if (dim == 0) throw MetricsError("dim must be >= 1");
    if (truth.size() != pred.size()) throw MetricsError("field length mismatch");
    if (truth.empty() || truth.size() % dim != 0) {
        throw MetricsError("field size must be a positive multiple of dim");
    }
    const std::size_t n = count();
    if (!weights.empty()) {
        if (weights.size() != n) throw MetricsError("weights length mismatch");
        bool any = false;
        for (double w : weights) {
            if (!std::isfinite(w) || w < 0.0) {
                throw MetricsError("weights must be finite and >= 0");
            }
            if (w > 0.0) any = true;
        }
        if (!any) throw MetricsError("weights must not all be zero");
    }
    for (double v : truth) {
        if (!std::isfinite(v)) throw MetricsError("non-finite ground-truth value");
    }
    for (double v : pred) {
        if (!std::isfinite(v)) throw MetricsError("non-finite prediction value");
    }
}

ErrorMetrics weighted_errors(const FieldPair& pair) {
    pair.validate();
    const std::size_t n = pair.count();
    const bool weighted = !pair.weights.empty();

    Accumulator num_sq, num_abs, denom_sq, wsum;
    for (std::size_t i = 0; i < n; ++i) {
        double err_sq = 0.0;
        double ref_sq = 0.0;
        for (std::size_t d = 0; d < pair.dim; ++d) {
            const double t = pair.truth[i * pair.dim + d];
            const double e = t - pair.pred[i * pair.dim + d];
            err_sq += e * e;
            ref_sq += t * t;
        }
        const double w = weighted ? pair.weights[i] : 1.0;
        num_sq.add(err_sq * w);
        num_abs.add(std::sqrt(err_sq) * w);
        denom_sq.add(ref_sq * w);
        wsum.add(w);
    }
    if (!(wsum.value() > 0.0)) throw MetricsError("weight sum is zero");

    ErrorMetrics m;
    m.mse = num_sq.value() / wsum.value();
    m.mae = num_abs.value() / wsum.value();
    if (denom_sq.value() == 0.0) {
        if (num_sq.value() == 0.0) {
            m.rel_l2 = 0.0;
        } else {
            throw MetricsError("relative L2 undefined: zero reference norm");
        }
    } else {
        m.rel_l2 = std::sqrt(num_sq.value()) / std::sqrt(denom_sq.value());
    }
    return m;
}

}  // namespace m3
