#include <cstring>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "m3/allocate.hpp"
#include "m3/baselines.hpp"
#include "m3/measure.hpp"
#include "m3/metrics.hpp"
#include "m3/synth.hpp"

namespace py = pybind11;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

m3::LabeledPointCloud cloud_from_arrays(const DoubleArray& positions,
                                        const py::dict& scalars,
                                        const py::dict& vectors,
                                        const py::object& weights) {
    if (positions.ndim() != 2 || positions.shape(1) != 3) {
        throw py::value_error("positions must have shape (N, 3)");
    }
    const auto n = static_cast<std::size_t>(positions.shape(0));
    m3::LabeledPointCloud cloud;
    cloud.positions.resize(n);
    const auto pos = positions.unchecked<2>();
    for (std::size_t i = 0; i < n; ++i) {
        cloud.positions[i] = {pos(i, 0), pos(i, 1), pos(i, 2)};
    }
    for (const auto& item : scalars) {
        DoubleArray arr = item.second.cast<DoubleArray>();
        if (arr.ndim() != 1 || static_cast<std::size_t>(arr.shape(0)) != n) {
            throw py::value_error("scalar channels must have shape (N,)");
        }
        cloud.scalar_names.push_back(item.first.cast<std::string>());
        const auto a = arr.unchecked<1>();
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = a(i);
        cloud.scalars.push_back(std::move(v));
    }
    for (const auto& item : vectors) {
        DoubleArray arr = item.second.cast<DoubleArray>();
        if (arr.ndim() != 2 || static_cast<std::size_t>(arr.shape(0)) != n ||
            arr.shape(1) != 3) {
            throw py::value_error("vector channels must have shape (N, 3)");
        }
        cloud.vector_names.push_back(item.first.cast<std::string>());
        const auto a = arr.unchecked<2>();
        std::vector<m3::Vec3> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = {a(i, 0), a(i, 1), a(i, 2)};
        cloud.vectors.push_back(std::move(v));
    }
    if (!weights.is_none()) {
        DoubleArray arr = weights.cast<DoubleArray>();
        if (arr.ndim() != 1 || static_cast<std::size_t>(arr.shape(0)) != n) {
            throw py::value_error("weights must have shape (N,)");
        }
        const auto a = arr.unchecked<1>();
        cloud.geom_weights.resize(n);
        for (std::size_t i = 0; i < n; ++i) cloud.geom_weights[i] = a(i);
    }
    cloud.validate();
    return cloud;
}

m3::PartitionConfig make_config(const m3::LabeledPointCloud& cloud, double eps,
                                int g_max, int kappa, double w_phi, double w_psi) {
    m3::PartitionConfig cfg;
    cfg.eps_refine = eps;
    cfg.g_max = g_max;
    cfg.kappa = kappa;
    cfg.scalar_weights.assign(cloud.num_scalars(), w_phi);
    cfg.vector_weights.assign(cloud.num_vectors(), w_psi);
    return cfg;
}

template <typename T>
py::array_t<T> vector_to_array(const std::vector<T>& v) {
    const std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(v.size())};
    const std::vector<py::ssize_t> strides{static_cast<py::ssize_t>(sizeof(T))};
    py::array_t<T> out(shape, strides);
    std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(T));
    return out;
}

py::array_t<std::uint64_t> to_index_array(const std::vector<std::uint64_t>& idx) {
    return vector_to_array(idx);
}

}  // namespace

PYBIND11_MODULE(_m3, mod) {
    mod.doc() = "multi-scale variation-aware point cloud sampling";

    mod.def(
        "generate",
        [](const std::string& spec_json, std::uint64_t n, std::uint64_t seed) {
            const auto cloud =
                m3::generate_cloud(m3::SynthSpec::from_json(spec_json), n, seed);
            py::array_t<double> pos({cloud.size(), std::size_t{3}});
            auto p = pos.mutable_unchecked<2>();
            for (std::size_t i = 0; i < cloud.size(); ++i) {
                for (int d = 0; d < 3; ++d) p(i, d) = cloud.positions[i][d];
            }
            py::dict scalars, vectors;
            for (std::size_t k = 0; k < cloud.num_scalars(); ++k) {
                scalars[py::str(cloud.scalar_names[k])] =
                    vector_to_array(cloud.scalars[k]);
            }
            for (std::size_t k = 0; k < cloud.num_vectors(); ++k) {
                py::array_t<double> arr({cloud.size(), std::size_t{3}});
                auto a = arr.mutable_unchecked<2>();
                for (std::size_t i = 0; i < cloud.size(); ++i) {
                    for (int d = 0; d < 3; ++d) a(i, d) = cloud.vectors[k][i][d];
                }
                vectors[py::str(cloud.vector_names[k])] = arr;
            }
            const auto w = vector_to_array(cloud.geom_weights);
            py::dict out;
            out["positions"] = pos;
            out["scalars"] = scalars;
            out["vectors"] = vectors;
            out["weights"] = w;
            return out;
        },
        py::arg("spec_json"), py::arg("n"), py::arg("seed"),
        "Generate a synthetic labeled cloud from a JSON spec.");

    mod.def(
        "sample",
        [](const DoubleArray& positions, const py::dict& scalars,
           const py::dict& vectors, const py::object& weights, std::uint64_t m,
           std::uint64_t seed, const std::string& method, double eps, int g_max,
           int kappa, double w_phi, double w_psi, int bins, double rho) {
            auto raw = cloud_from_arrays(positions, scalars, vectors, weights);
            py::dict out;
            out["method"] = method;
            if (method == "m3") {
                m3::StratifyConfig sconf;
                sconf.num_bins = bins;
                m3::AllocConfig aconf;
                aconf.budget = m;
                aconf.rho = rho;
                aconf.seed = seed;
                const auto res = m3::m3_sample(
                    raw, make_config(raw, eps, g_max, kappa, w_phi, w_psi), sconf,
                    aconf);
                out["indices"] = to_index_array(res.measure.indices);
                out["weight"] = res.measure.weight;
                out["num_cells"] = res.partition.cells.size();
                return out;
            }
            const auto cloud = m3::zscore_normalize(raw);
            const auto cfg = make_config(cloud, eps, g_max, kappa, w_phi, w_psi);
            m3::EmpiricalMeasure mu;
            if (method == "random") {
                mu = m3::random_sample(cloud.size(), m, seed);
            } else if (method == "grid") {
                const auto cube = m3::compute_bounds(cloud);
                mu = m3::grid_sample(cloud, cube.edge / 128.0, m, cfg, seed);
            } else if (method == "proxy") {
                mu = m3::proxy_sample(cloud, m, cfg, seed);
            } else if (method == "knn") {
                mu = m3::knn_sample(cloud, m, cfg, seed);
            } else {
                throw py::value_error("unknown method: " + method);
            }
            out["indices"] = to_index_array(mu.indices);
            out["weight"] = mu.weight;
            return out;
        },
        py::arg("positions"), py::arg("scalars") = py::dict(),
        py::arg("vectors") = py::dict(), py::arg("weights") = py::none(),
        py::arg("m"), py::arg("seed"), py::arg("method") = "m3",
        py::arg("eps") = 0.05, py::arg("g_max") = 8, py::arg("kappa") = 32,
        py::arg("w_phi") = 1.0, py::arg("w_psi") = 0.4, py::arg("bins") = 64,
        py::arg("rho") = 1.0,
        "Draw a training sample with the selected method; returns indices.");

    mod.def(
        "partition",
        [](const DoubleArray& positions, const py::dict& scalars,
           const py::dict& vectors, const py::object& weights, double eps, int g_max,
           int kappa, double w_phi, double w_psi) {
            const auto cloud = m3::zscore_normalize(
                cloud_from_arrays(positions, scalars, vectors, weights));
            const auto cube = m3::compute_bounds(cloud);
            const auto sorted = m3::morton_sort(cloud, cube);
            const auto part = m3::build_partition(
                cloud, sorted, cube, make_config(cloud, eps, g_max, kappa, w_phi, w_psi));
            py::list cells;
            for (const auto& c : part.cells) {
                py::dict d;
                d["key"] = c.prefix;
                d["depth"] = c.depth;
                d["count"] = c.hi - c.lo;
                d["delta"] = c.delta;
                cells.append(d);
            }
            py::dict out;
            out["cells"] = cells;
            out["thr_scalar"] = part.counters.thr_scalar;
            out["thr_vector"] = part.counters.thr_vector;
            out["refine_scalar"] = part.counters.refine_scalar;
            out["refine_vector"] = part.counters.refine_vector;
            return out;
        },
        py::arg("positions"), py::arg("scalars") = py::dict(),
        py::arg("vectors") = py::dict(), py::arg("weights") = py::none(),
        py::arg("eps") = 0.05, py::arg("g_max") = 8, py::arg("kappa") = 32,
        py::arg("w_phi") = 1.0, py::arg("w_psi") = 0.4,
        "Variation-adaptive octree partition with refinement counters.");

    mod.def(
        "tv_report",
        [](const DoubleArray& positions, const py::dict& scalars,
           const py::dict& vectors, const py::object& weights,
           const py::array_t<std::uint64_t>& indices, double eps, int g_max,
           int kappa, double w_phi, double w_psi, int bins) {
            const auto cloud = m3::zscore_normalize(
                cloud_from_arrays(positions, scalars, vectors, weights));
            const auto cube = m3::compute_bounds(cloud);
            const auto sorted = m3::morton_sort(cloud, cube);
            const auto part = m3::build_partition(
                cloud, sorted, cube,
                make_config(cloud, eps, g_max, kappa, w_phi, w_psi));
            m3::StratifyConfig sconf;
            sconf.num_bins = bins;
            const auto strat = m3::assign_strata(part, sconf);
            const auto idx = indices.unchecked<1>();
            std::vector<std::uint64_t> vec(static_cast<std::size_t>(idx.shape(0)));
            for (py::ssize_t i = 0; i < idx.shape(0); ++i)
                vec[static_cast<std::size_t>(i)] = idx(i);
            const auto mu = m3::measure_from_indices(vec, part, sorted);
            std::size_t nonempty = 0;
            for (const auto& s : strat.strata) nonempty += s.empty() ? 0 : 1;
            std::vector<double> alpha(strat.strata.size(), 0.0);
            for (std::size_t l = 0; l < alpha.size(); ++l) {
                if (!strat.strata[l].empty())
                    alpha[l] = 1.0 / static_cast<double>(nonempty);
            }
            const auto mu_star = m3::target_measure(strat, alpha);
            const auto terms = m3::decomposition_terms(mu, strat, alpha);
            py::dict out;
            out["tv"] = m3::tv_distance(mu, mu_star);
            out["inter"] = terms.inter;
            out["intra"] = terms.intra;
            return out;
        },
        py::arg("positions"), py::arg("scalars") = py::dict(),
        py::arg("vectors") = py::dict(), py::arg("weights") = py::none(),
        py::arg("indices"), py::arg("eps") = 0.05, py::arg("g_max") = 8,
        py::arg("kappa") = 32, py::arg("w_phi") = 1.0, py::arg("w_psi") = 0.4,
        py::arg("bins") = 64,
        "Total-variation diagnostics of a sample against the stratified target.");

    mod.def(
        "errors",
        [](const DoubleArray& truth, const DoubleArray& pred,
           const py::object& weights) {
            m3::FieldPair pair;
            pair.dim = truth.ndim() == 2 ? static_cast<std::size_t>(truth.shape(1)) : 1;
            auto flatten = [](const DoubleArray& a) {
                std::vector<double> out(static_cast<std::size_t>(a.size()));
                const double* p = a.data();
                std::copy(p, p + a.size(), out.begin());
                return out;
            };
            pair.truth = flatten(truth);
            pair.pred = flatten(pred);
            if (!weights.is_none()) pair.weights = flatten(weights.cast<DoubleArray>());
            const auto e = m3::weighted_errors(pair);
            py::dict out;
            out["mae"] = e.mae;
            out["mse"] = e.mse;
            out["rel_l2"] = e.rel_l2;
            return out;
        },
        py::arg("truth"), py::arg("pred"), py::arg("weights") = py::none(),
        "Physics-weighted MAE / MSE / relative L2.");
}
