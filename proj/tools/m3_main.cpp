#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "m3/allocate.hpp"
#include "m3/baselines.hpp"
#include "m3/measure.hpp"
#include "m3/metrics.hpp"
#include "m3/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw CliError("cannot open: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

m3::CloudFormat parse_format(const std::string& s) {
    if (s == "binary") return m3::CloudFormat::Binary;
    if (s == "csv") return m3::CloudFormat::Csv;
    throw CliError("unknown format: " + s);
}

// Table-style hyperparameter profiles; volume refines deeper and tighter.
void apply_profile(json& args) {
    const std::string profile = args.value("profile", "surface");
    if (profile == "surface") {
        if (!args.contains("eps_refine")) args["eps_refine"] = 0.05;
        if (!args.contains("g_max")) args["g_max"] = 8;
    } else if (profile == "volume") {
        if (!args.contains("eps_refine")) args["eps_refine"] = 0.005;
        if (!args.contains("g_max")) args["g_max"] = 13;
    } else {
        throw CliError("unknown profile: " + profile);
    }
    if (!args.contains("kappa")) args["kappa"] = 32;
    if (!args.contains("w_phi")) args["w_phi"] = 1.0;
    if (!args.contains("w_psi")) args["w_psi"] = 0.4;
    if (!args.contains("k")) args["k"] = 64;
    if (!args.contains("eps_log")) args["eps_log"] = 1e-12;
    if (!args.contains("p_lo")) args["p_lo"] = 0.0;
    if (!args.contains("p_hi")) args["p_hi"] = 99.5;
    if (!args.contains("rho")) args["rho"] = 1.0;
}

m3::PartitionConfig partition_config(const json& args,
                                     const m3::LabeledPointCloud& cloud) {
    m3::PartitionConfig cfg;
    cfg.eps_refine = args.at("eps_refine").get<double>();
    cfg.g_max = args.at("g_max").get<int>();
    cfg.kappa = args.at("kappa").get<int>();
    cfg.scalar_weights.assign(cloud.num_scalars(), args.at("w_phi").get<double>());
    cfg.vector_weights.assign(cloud.num_vectors(), args.at("w_psi").get<double>());
    return cfg;
}

m3::StratifyConfig stratify_config(const json& args) {
    m3::StratifyConfig cfg;
    cfg.num_bins = args.at("k").get<int>();
    cfg.eps_log = args.at("eps_log").get<double>();
    cfg.p_lo = args.at("p_lo").get<double>();
    cfg.p_hi = args.at("p_hi").get<double>();
    return cfg;
}

void write_manifest(const std::string& command, const json& args,
                    const std::vector<std::string>& outputs) {
    if (outputs.empty()) return;
    json m;
    m["command"] = command;
    m["args"] = args;
    m["outputs"] = outputs;
    std::ofstream os(outputs.front() + ".manifest.json");
    os << m.dump(2) << "\n";
}

m3::LabeledPointCloud load_input(const json& args) {
    return m3::load_cloud(args.at("input").get<std::string>(),
                          parse_format(args.value("format", "binary")));
}

std::vector<std::uint64_t> read_indices(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CliError("cannot open: " + path);
    is.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(is.tellg());
    is.seekg(0);
    if (bytes % sizeof(std::uint64_t) != 0) throw CliError("bad index file size");
    std::vector<std::uint64_t> out(bytes / sizeof(std::uint64_t));
    is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
    return out;
}

// field files: CSV rows of `dim` values
std::vector<double> read_field(const std::string& path, std::size_t dim) {
    std::ifstream is(path);
    if (!is) throw CliError("cannot open: " + path);
    std::vector<double> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::size_t got = 0;
        while (std::getline(ss, tok, ',')) {
            out.push_back(std::stod(tok));
            ++got;
        }
        if (got != dim) throw CliError("field row has wrong arity in " + path);
    }
    return out;
}

// --- subcommand bodies; each takes resolved args and returns output paths ---

std::vector<std::string> run_gen(const json& args) {
    const auto spec = m3::SynthSpec::from_json(read_file(args.at("spec").get<std::string>()));
    const auto cloud = m3::generate_cloud(spec, args.at("n").get<std::uint64_t>(),
                                          args.at("seed").get<std::uint64_t>());
    const auto out = args.at("out").get<std::string>();
    m3::save_cloud(cloud, out, parse_format(args.value("format", "binary")));
    return {out};
}

std::vector<std::string> run_partition(const json& args) {
    const auto cloud = m3::zscore_normalize(load_input(args));
    const auto cube = m3::compute_bounds(cloud);
    const auto sorted = m3::morton_sort(cloud, cube);
    const auto part = m3::build_partition(cloud, sorted, cube,
                                          partition_config(args, cloud));
    const auto out = args.at("out").get<std::string>();
    m3::export_partition(part, cloud, out);
    return {out};
}

std::vector<std::string> run_stratify(const json& args) {
    const auto cloud = m3::zscore_normalize(load_input(args));
    const auto cube = m3::compute_bounds(cloud);
    const auto sorted = m3::morton_sort(cloud, cube);
    const auto part = m3::build_partition(cloud, sorted, cube,
                                          partition_config(args, cloud));
    const auto strat = m3::assign_strata(part, stratify_config(args));
    const auto out = args.at("out").get<std::string>();
    const auto labels = args.at("labels").get<std::string>();
    m3::export_stratification(strat, part, out, labels);
    return {out, labels};
}

std::vector<std::string> run_sample(const json& args) {
    const auto raw = load_input(args);
    const auto method = args.at("method").get<std::string>();
    const auto m = args.at("m").get<std::uint64_t>();
    const auto seed = args.at("seed").get<std::uint64_t>();
    const auto prefix = args.at("out").get<std::string>();
    const double rho = args.at("rho").get<double>();

    m3::EmpiricalMeasure measure;
    const m3::AllocationPlan* plan_ptr = nullptr;
    m3::M3Result result;
    if (method == "m3") {
        m3::AllocConfig aconf;
        aconf.budget = m;
        aconf.rho = rho;
        aconf.seed = seed;
        result = m3::m3_sample(raw, partition_config(args, raw),
                               stratify_config(args), aconf);
        measure = result.measure;
        plan_ptr = &result.plan;
    } else {
        const auto cloud = m3::zscore_normalize(raw);
        const auto scoring = partition_config(args, cloud);
        if (method == "random") {
            measure = m3::random_sample(cloud.size(), m, seed);
        } else if (method == "grid") {
            const auto cube = m3::compute_bounds(cloud);
            const double edge = args.contains("voxel_edge")
                                    ? args.at("voxel_edge").get<double>()
                                    : cube.edge / 128.0;
            measure = m3::grid_sample(cloud, edge, m, scoring, seed);
        } else if (method == "proxy") {
            measure = m3::proxy_sample(cloud, m, scoring, seed);
        } else if (method == "knn") {
            measure = m3::knn_sample(cloud, m, scoring, seed);
        } else {
            throw CliError("unknown method: " + method);
        }
    }
    const std::string bin = prefix + ".idx.u64";
    const std::string sidecar = prefix + ".json";
    const std::string txt = prefix + ".txt";
    m3::export_measure(measure, plan_ptr, seed, rho, bin, sidecar);
    m3::export_measure_text(measure, txt);
    return {bin, sidecar, txt};
}

std::vector<std::string> run_metrics(const json& args) {
    m3::FieldPair pair;
    pair.dim = args.value("dim", std::size_t{1});
    pair.truth = read_field(args.at("truth").get<std::string>(), pair.dim);
    pair.pred = read_field(args.at("pred").get<std::string>(), pair.dim);
    const bool have_w = args.contains("weights");
    if (have_w) {
        pair.weights = read_field(args.at("weights").get<std::string>(), 1);
    }
    const auto weighted = m3::weighted_errors(pair);
    pair.weights.clear();
    const auto unweighted = m3::weighted_errors(pair);

    json report;
    report["mae"] = unweighted.mae;
    report["mse"] = unweighted.mse;
    report["rel_l2"] = unweighted.rel_l2;
    report["mae_w"] = weighted.mae;
    report["mse_w"] = weighted.mse;
    report["rel_l2_w"] = weighted.rel_l2;
    const auto out = args.at("out").get<std::string>();
    std::ofstream os(out);
    if (!os) throw CliError("cannot open for writing: " + out);
    os << report.dump(2) << "\n";
    std::cout << report.dump(2) << "\n";
    return {out};
}

std::vector<std::string> run_measure(const json& args) {
    const auto cloud = m3::zscore_normalize(load_input(args));
    const auto cube = m3::compute_bounds(cloud);
    const auto sorted = m3::morton_sort(cloud, cube);
    const auto part = m3::build_partition(cloud, sorted, cube,
                                          partition_config(args, cloud));
    const auto strat = m3::assign_strata(part, stratify_config(args));
    const auto indices = read_indices(args.at("indices").get<std::string>());
    const auto mu = m3::measure_from_indices(indices, part, sorted);

    std::vector<double> alpha(strat.strata.size(), 0.0);
    std::size_t nonempty = 0;
    for (const auto& s : strat.strata) nonempty += s.empty() ? 0 : 1;
    for (std::size_t l = 0; l < strat.strata.size(); ++l) {
        if (!strat.strata[l].empty()) alpha[l] = 1.0 / static_cast<double>(nonempty);
    }
    const auto mu_star = m3::target_measure(strat, alpha);

    const auto report_kind = args.at("report").get<std::string>();
    json report;
    report["report"] = report_kind;
    if (report_kind == "tv") {
        report["tv"] = m3::tv_distance(mu, mu_star);
    } else if (report_kind == "decomp") {
        const auto terms = m3::decomposition_terms(mu, strat, alpha);
        report["tv"] = m3::tv_distance(mu, mu_star);
        report["inter"] = terms.inter;
        report["intra"] = terms.intra;
    } else if (report_kind == "riskgap") {
        const auto losses = read_field(args.at("losses").get<std::string>(), 1);
        const double bound_m = args.at("bound").get<double>();
        const auto gap = m3::risk_gap_check(losses, bound_m, mu, mu_star);
        report["gap"] = gap.gap;
        report["bound"] = gap.bound;
    } else {
        throw CliError("unknown report: " + report_kind);
    }
    const auto out = args.at("out").get<std::string>();
    std::ofstream os(out);
    if (!os) throw CliError("cannot open for writing: " + out);
    os << report.dump(2) << "\n";
    std::cout << report.dump(2) << "\n";
    return {out};
}

std::vector<std::string> run_bench(const json& args) {
    m3::BenchConfig cfg;
    cfg.sizes.clear();
    for (const auto& s : args.at("sizes")) cfg.sizes.push_back(s.get<std::uint64_t>());
    if (args.contains("methods")) {
        cfg.methods.clear();
        for (const auto& s : args.at("methods")) cfg.methods.push_back(s.get<std::string>());
    }
    cfg.time_cap_s = args.value("cap", 600.0);
    cfg.budget = args.value("m", std::uint64_t{8192});
    if (args.contains("seeds")) {
        cfg.seeds.clear();
        for (const auto& s : args.at("seeds")) cfg.seeds.push_back(s.get<std::uint64_t>());
    }
    const auto rows = m3::bench_run(cfg);
    const auto out = args.at("out").get<std::string>();
    m3::write_bench_csv(rows, out);
    return {out};
}

std::vector<std::string> execute(const std::string& command, const json& args) {
    if (command == "gen") return run_gen(args);
    if (command == "partition") return run_partition(args);
    if (command == "stratify") return run_stratify(args);
    if (command == "sample") return run_sample(args);
    if (command == "metrics") return run_metrics(args);
    if (command == "measure") return run_measure(args);
    if (command == "bench") return run_bench(args);
    throw CliError("unknown command: " + command);
}

int dispatch(const std::string& command, json args) {
    std::vector<std::string> outputs;
    try {
        outputs = execute(command, args);
        for (const auto& out : outputs) {
            if (!fs::exists(out)) throw CliError("declared output missing: " + out);
        }
        write_manifest(command, args, outputs);
        return 0;
    } catch (const std::exception& e) {
        for (const auto& out : outputs) {
            std::error_code ec;
            fs::remove(out, ec);
        }
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

void check_threads_env() {
    const char* env = std::getenv("M3_THREADS");
    if (env == nullptr) return;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 0) {
        throw CliError("M3_THREADS must be a nonnegative integer");
    }
    // current pipeline is sequential; any cap is trivially honored
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-scale variation-aware point cloud sampling"};
    app.require_subcommand(1);

    json base;  // from --config, overridden by flags
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file with defaults");

    // shared knobs collected per subcommand into a resolved-args json
    auto add_pipeline_opts = [](CLI::App* cmd, json& store) {
        static thread_local std::string dummy;  // CLI11 needs stable storage
        cmd->add_option_function<std::string>(
            "--profile", [&store](const std::string& v) { store["profile"] = v; },
            "hyperparameter profile: surface or volume");
        cmd->add_option_function<double>(
            "--eps", [&store](double v) { store["eps_refine"] = v; },
            "refinement threshold");
        cmd->add_option_function<int>(
            "--gmax", [&store](int v) { store["g_max"] = v; }, "depth cap");
        cmd->add_option_function<int>(
            "--kappa", [&store](int v) { store["kappa"] = v; }, "per-cell point cap");
        cmd->add_option_function<double>(
            "--wphi", [&store](double v) { store["w_phi"] = v; }, "scalar weight");
        cmd->add_option_function<double>(
            "--wpsi", [&store](double v) { store["w_psi"] = v; }, "vector weight");
        cmd->add_option_function<int>(
            "--bins", [&store](int v) { store["k"] = v; }, "strata bins K");
        cmd->add_option_function<double>(
            "--plo", [&store](double v) { store["p_lo"] = v; }, "lower percentile clip");
        cmd->add_option_function<double>(
            "--phi-clip", [&store](double v) { store["p_hi"] = v; },
            "upper percentile clip");
        cmd->add_option_function<double>(
            "--rho", [&store](double v) { store["rho"] = v; }, "fill ratio");
        cmd->add_option_function<std::string>(
            "--format", [&store](const std::string& v) { store["format"] = v; },
            "cloud file format: binary or csv");
    };

    json gen_args, part_args, strat_args, sample_args, metrics_args, measure_args,
        bench_args, replay_args;

    auto* gen = app.add_subcommand("gen", "generate a synthetic labeled cloud");
    {
        static std::string spec, out, format = "binary";
        static std::uint64_t n = 0, seed = 0;
        gen->add_option("--spec", spec, "synthetic spec JSON file")->required();
        gen->add_option("--n", n, "number of points")->required();
        gen->add_option("--seed", seed, "RNG seed")->required();
        gen->add_option("--out", out, "output cloud path")->required();
        gen->add_option("--format", format, "binary or csv");
        gen->callback([&]() {
            gen_args = {{"spec", spec}, {"n", n}, {"seed", seed}, {"out", out},
                        {"format", format}};
        });
    }

    auto* part = app.add_subcommand("partition", "variation-adaptive octree partition");
    {
        static std::string input, out;
        part->add_option("--input", input, "input cloud")->required();
        part->add_option("--out", out, "output cells JSONL")->required();
        add_pipeline_opts(part, part_args);
        part->callback([&]() {
            part_args["input"] = input;
            part_args["out"] = out;
        });
    }

    auto* strat = app.add_subcommand("stratify", "scale stratification");
    {
        static std::string input, out, labels;
        strat->add_option("--input", input, "input cloud")->required();
        strat->add_option("--out", out, "output stratification JSON")->required();
        strat->add_option("--labels", labels, "output labels binary")->required();
        add_pipeline_opts(strat, strat_args);
        strat->callback([&]() {
            strat_args["input"] = input;
            strat_args["out"] = out;
            strat_args["labels"] = labels;
        });
    }

    auto* sample = app.add_subcommand("sample", "draw a training measure");
    {
        static std::string input, out, method = "m3";
        static std::uint64_t m = 0, seed = 0;
        static double voxel_edge = 0.0;
        sample->add_option("--input", input, "input cloud")->required();
        sample->add_option("--method", method, "m3, random, grid, proxy, knn");
        sample->add_option("--m", m, "sample budget")->required();
        sample->add_option("--seed", seed, "RNG seed")->required();
        sample->add_option("--out", out, "output prefix")->required();
        sample->add_option("--voxel-edge", voxel_edge, "grid voxel edge");
        add_pipeline_opts(sample, sample_args);
        sample->callback([&]() {
            sample_args["input"] = input;
            sample_args["method"] = method;
            sample_args["m"] = m;
            sample_args["seed"] = seed;
            sample_args["out"] = out;
            if (voxel_edge > 0.0) sample_args["voxel_edge"] = voxel_edge;
        });
    }

    auto* metrics = app.add_subcommand("metrics", "weighted/unweighted error metrics");
    {
        static std::string truth, pred, weights, out;
        static std::size_t dim = 1;
        metrics->add_option("--truth", truth, "ground-truth field CSV")->required();
        metrics->add_option("--pred", pred, "prediction field CSV")->required();
        metrics->add_option("--weights", weights, "per-point weight file");
        metrics->add_option("--dim", dim, "field dimensionality");
        metrics->add_option("--out", out, "output report JSON")->required();
        metrics->callback([&]() {
            metrics_args = {{"truth", truth}, {"pred", pred}, {"dim", dim}, {"out", out}};
            if (!weights.empty()) metrics_args["weights"] = weights;
        });
    }

    auto* measure = app.add_subcommand("measure", "measure-distance diagnostics");
    {
        static std::string input, indices, report = "tv", out, losses;
        static double bound = 1.0;
        measure->add_option("--input", input, "input cloud")->required();
        measure->add_option("--indices", indices, "sample index binary")->required();
        measure->add_option("--report", report, "tv, decomp, or riskgap");
        measure->add_option("--out", out, "output report JSON")->required();
        measure->add_option("--losses", losses, "per-cell loss file (riskgap)");
        measure->add_option("--bound", bound, "loss bound M (riskgap)");
        add_pipeline_opts(measure, measure_args);
        measure->callback([&]() {
            measure_args["input"] = input;
            measure_args["indices"] = indices;
            measure_args["report"] = report;
            measure_args["out"] = out;
            measure_args["bound"] = bound;
            if (!losses.empty()) measure_args["losses"] = losses;
        });
    }

    auto* bench = app.add_subcommand("bench", "sampler feasibility benchmark");
    {
        static std::vector<double> sizes;
        static std::vector<std::string> methods;
        static std::vector<std::uint64_t> seeds;
        static double cap = 600.0;
        static std::uint64_t m = 8192;
        static std::string out;
        bench->add_option("--sizes", sizes, "input sizes")->required()->delimiter(',');
        bench->add_option("--methods", methods, "methods to run")->delimiter(',');
        bench->add_option("--seeds", seeds, "seeds")->delimiter(',');
        bench->add_option("--cap", cap, "wall-clock cap in seconds");
        bench->add_option("--m", m, "sample budget");
        bench->add_option("--out", out, "output CSV")->required();
        bench->callback([&]() {
            bench_args = {{"cap", cap}, {"m", m}, {"out", out}};
            auto sz = json::array();
            for (double s : sizes) sz.push_back(static_cast<std::uint64_t>(s));
            bench_args["sizes"] = sz;
            if (!methods.empty()) bench_args["methods"] = methods;
            if (!seeds.empty()) bench_args["seeds"] = seeds;
        });
    }

    auto* replay = app.add_subcommand("replay", "rerun from a manifest");
    {
        static std::string manifest;
        replay->add_option("manifest", manifest, "manifest JSON")->required();
        replay->callback([&]() { replay_args["manifest"] = manifest; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        check_threads_env();
        json base_config;
        if (!config_path.empty()) base_config = json::parse(read_file(config_path));

        auto finalize_args = [&](json own) {
            json merged = base_config;
            merged.update(own);
            apply_profile(merged);
            return merged;
        };

        if (gen->parsed()) return dispatch("gen", gen_args);
        if (part->parsed()) return dispatch("partition", finalize_args(part_args));
        if (strat->parsed()) return dispatch("stratify", finalize_args(strat_args));
        if (sample->parsed()) return dispatch("sample", finalize_args(sample_args));
        if (metrics->parsed()) return dispatch("metrics", metrics_args);
        if (measure->parsed()) return dispatch("measure", finalize_args(measure_args));
        if (bench->parsed()) return dispatch("bench", bench_args);
        if (replay->parsed()) {
            const json m = json::parse(read_file(replay_args.at("manifest")));
            return dispatch(m.at("command").get<std::string>(), m.at("args"));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
