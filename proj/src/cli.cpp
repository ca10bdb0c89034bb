#include "geosteer/cli.hpp"
#include "geosteer/format.hpp"
#include "geosteer/interpolation.hpp"
#include "geosteer/metrics.hpp"
#include "geosteer/oracle.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

namespace geosteer::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code_for(const Error& err) {
    return err.code() == errc::io_failure ? kExitIo : kExitConfig;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string format_lambda(const Eigen::VectorXd& lambda) {
    if (lambda.size() <= 8) {
        std::string out;
        for (Eigen::Index i = 0; i < lambda.size(); ++i) {
            if (i) out += ';';
            out += format_double(lambda[i]);
        }
        return out;
    }
    // FNV-1a over the raw little-endian bytes.
    uint64_t hash = 1469598103934665603ULL;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        uint64_t bits;
        std::memcpy(&bits, &lambda[i], sizeof(bits));
        for (int b = 0; b < 8; ++b) {
            hash ^= (bits >> (8 * b)) & 0xffULL;
            hash *= 1099511628211ULL;
        }
    }
    char buffer[17];
    std::snprintf(buffer, sizeof(buffer), "%016llx",
                  static_cast<unsigned long long>(hash));
    return buffer;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(errc::io_failure, "cannot open '" + path + "' for writing");
    }
    out << content;
    if (!out) {
        throw Error(errc::io_failure, "write to '" + path + "' failed");
    }
}

std::string output_dir(const ConfigFile& config) {
    const std::string dir = config.get_string("output", "dir", "out");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error(errc::io_failure,
                    "cannot create output dir '" + dir + "': " + ec.message());
    }
    return dir;
}

FactorizableModelSpec synthesis_spec(const ConfigFile& config,
                                     std::vector<std::string>& labels) {
    const int n_pairs = config.get_int("synthesize", "n_pairs", 2);
    const int n_neutral = config.get_int("synthesize", "n_neutral", 1);
    const int dim = config.get_int("synthesize", "dim", 3);
    const auto seed =
        static_cast<uint64_t>(config.get_int("synthesize", "seed", 0));
    const double scale = config.get_double("synthesize", "scale", 1.0);
    if (n_pairs < 1 || n_neutral < 0 || dim < 2) {
        throw Error(errc::invalid_argument,
                    "[synthesize] needs n_pairs >= 1, n_neutral >= 0, dim >= 2");
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto random_row = [&](Eigen::Index d) {
        Eigen::VectorXd row(d);
        for (Eigen::Index i = 0; i < d; ++i) row[i] = scale * gauss(rng);
        return row;
    };
    const auto explicit_row = [&](const std::string& key) {
        const std::vector<double> values = config.get_vector("synthesize", key);
        if (static_cast<int>(values.size()) != dim) {
            throw Error(errc::invalid_argument,
                        "[synthesize] " + key + " must have dim entries");
        }
        return Eigen::Map<const Eigen::VectorXd>(
                   values.data(), static_cast<Eigen::Index>(values.size()))
            .eval();
    };

    FactorizableModelSpec spec;
    spec.shared_dirs.resize(n_pairs, dim);
    for (int i = 0; i < n_pairs; ++i) {
        const std::string key = "shared_dir_" + std::to_string(i);
        spec.shared_dirs.row(i) =
            config.has("synthesize", key) ? explicit_row(key) : random_row(dim);
    }
    spec.concept_dir = config.has("synthesize", "concept_dir")
                           ? explicit_row("concept_dir")
                           : random_row(dim);
    spec.neutral_dirs.resize(n_neutral, dim);
    for (int j = 0; j < n_neutral; ++j) {
        const std::string key = "neutral_dir_" + std::to_string(j);
        spec.neutral_dirs.row(j) =
            config.has("synthesize", key) ? explicit_row(key) : random_row(dim);
    }
    if (spec.concept_dir.norm() == 0.0) {
        throw Error(errc::invalid_argument,
                    "[synthesize] concept_dir must be nonzero");
    }

    labels.clear();
    for (int i = 0; i < n_pairs; ++i) {
        labels.push_back("pair" + std::to_string(i) + "_base");
        labels.push_back("pair" + std::to_string(i) + "_target");
    }
    for (int j = 0; j < n_neutral; ++j) {
        labels.push_back("neutral" + std::to_string(j));
    }
    return spec;
}

SoftmaxModel resolve_model(const ConfigFile& config) {
    if (config.has("model", "path")) {
        SoftmaxModel model = load_model(config.require_string("model", "path"));
        const double temperature = config.get_double("model", "temperature", 1.0);
        if (temperature != 1.0) {
            if (!(temperature > 0.0)) {
                throw Error(errc::invalid_argument,
                            "[model] temperature must be positive");
            }
            MatrixRM rescaled = model.gamma() * temperature;
            return SoftmaxModel(model.labels(), std::move(rescaled));
        }
        return model;
    }
    if (config.sections().count("synthesize")) {
        std::vector<std::string> labels;
        const FactorizableModelSpec spec = synthesis_spec(config, labels);
        return synthesize_factorizable(spec, labels).model;
    }
    throw Error(errc::invalid_argument,
                "config needs [model] path or a [synthesize] section");
}

ConceptScheme resolve_scheme(const ConfigFile& config,
                             const SoftmaxModel& model) {
    if (config.has("scheme", "path")) {
        return load_scheme(config.require_string("scheme", "path"),
                           model.vocab_size());
    }
    if (config.sections().count("synthesize")) {
        std::vector<std::string> labels;
        const FactorizableModelSpec spec = synthesis_spec(config, labels);
        return synthesize_factorizable(spec, labels).scheme;
    }
    throw Error(errc::invalid_argument,
                "config needs [scheme] path or a [synthesize] section");
}

LinearProbe resolve_probe(const ConfigFile& config, const SoftmaxModel& model) {
    const std::string kind = config.get_string("probe", "kind", "explicit");
    if (kind == "explicit") {
        if (config.has("probe", "path")) {
            return load_probe(config.require_string("probe", "path"));
        }
        if (config.has("probe", "vector")) {
            const std::vector<double> values = config.get_vector("probe", "vector");
            LinearProbe probe;
            probe.beta = Eigen::Map<const Eigen::VectorXd>(
                values.data(), static_cast<Eigen::Index>(values.size()));
            probe.offset = config.get_double("probe", "offset", 0.0);
            probe.input_space = ProbeSpace::primal;
            if (probe.beta.norm() < 1e-12) {
                throw Error(errc::degenerate_probe, "[probe] vector is zero");
            }
            return probe;
        }
        if (config.sections().count("synthesize")) {
            std::vector<std::string> labels;
            const FactorizableModelSpec spec = synthesis_spec(config, labels);
            return synthesize_factorizable(spec, labels).probe;
        }
        throw Error(errc::invalid_argument,
                    "[probe] needs path, vector, or a [synthesize] section");
    }

    const std::vector<PrimalPoint> base =
        load_points(config.require_string("probe", "base_points"));
    const std::vector<PrimalPoint> target =
        load_points(config.require_string("probe", "target_points"));
    if (kind == "primal-md") {
        return primal_mean_difference(base, target);
    }
    if (kind == "dual-md") {
        return dual_mean_difference(model, base, target);
    }
    if (kind == "logistic") {
        std::vector<std::pair<PrimalPoint, int>> training;
        for (const auto& p : base) training.emplace_back(p, 0);
        for (const auto& p : target) training.emplace_back(p, 1);
        return fit_logistic_probe(training,
                                  config.get_int("probe", "iters", 500),
                                  config.get_double("probe", "lr", 0.5));
    }
    throw Error(errc::invalid_argument,
                "[probe] kind must be explicit, primal-md, dual-md, or logistic");
}

SteeringConfig resolve_steering(const ConfigFile& config) {
    SteeringConfig cfg;
    cfg.alpha = config.get_double("steering", "alpha", cfg.alpha);
    cfg.eta = config.get_optional_double("steering", "eta");
    cfg.max_steps = config.get_int("steering", "max_steps", cfg.max_steps);
    cfg.terminate_at =
        config.get_double("steering", "terminate_at", cfg.terminate_at);
    cfg.top_k = config.get_optional_int("steering", "top_k");
    cfg.record_every = config.get_int("steering", "record_every", 1);
    cfg.normalize_euclidean =
        config.get_bool("steering", "normalize_euclidean", true);
    return cfg;
}

MetricConfig resolve_metrics(const ConfigFile& config) {
    MetricConfig cfg;
    cfg.kl_floor = config.get_double("metrics", "kl_floor", cfg.kl_floor);
    cfg.n_bins = config.get_int("metrics", "n_bins", cfg.n_bins);
    cfg.reduced_vocab_mass =
        config.get_double("metrics", "reduced_vocab_mass", cfg.reduced_vocab_mass);
    if (cfg.n_bins < 1 || cfg.kl_floor <= 0.0 ||
        !(cfg.reduced_vocab_mass > 0.0 && cfg.reduced_vocab_mass <= 1.0)) {
        throw Error(errc::invalid_argument, "bad [metrics] settings");
    }
    return cfg;
}

std::vector<SteerMethod> resolve_methods(const ConfigFile& config) {
    const std::string text =
        config.get_string("steering", "methods", "euclidean,dual");
    std::vector<SteerMethod> methods;
    std::stringstream in(text);
    std::string token;
    while (std::getline(in, token, ',')) {
        if (token == "euclidean") {
            methods.push_back(SteerMethod::euclidean);
        } else if (token == "dual") {
            methods.push_back(SteerMethod::dual);
        } else if (!token.empty()) {
            throw Error(errc::invalid_argument,
                        "unknown steering method '" + token + "'");
        }
    }
    if (methods.empty()) {
        throw Error(errc::invalid_argument, "no steering methods configured");
    }
    return methods;
}

const char* method_name(SteerMethod method) {
    return method == SteerMethod::euclidean ? "euclidean" : "dual";
}

int worker_count(size_t tasks) {
    int workers = 0;
    if (const char* env = std::getenv("GEOSTEER_WORKERS")) {
        workers = std::atoi(env);
    }
    if (workers <= 0) {
        workers = static_cast<int>(std::thread::hardware_concurrency());
    }
    workers = std::max(workers, 1);
    return static_cast<int>(
        std::min(static_cast<size_t>(workers), std::max<size_t>(tasks, 1)));
}

constexpr const char* kTraceHeader =
    "step,lambda,target_prob,pair_mass,offtarget_kl,rank_diff,dual_cosine,"
    "projection,logit\n";

std::string render_trace(const SoftmaxModel& model, const SteeringPath& path) {
    std::string out = kTraceHeader;
    for (size_t i = 0; i < path.recorded_steps.size(); ++i) {
        const int step = path.recorded_steps[i];
        const PrimalPoint& point = path.points[static_cast<size_t>(step)];
        const StepMetrics& m = path.per_step[i];
        out += std::to_string(step);
        out += ',';
        out += format_lambda(point.lambda);
        out += ',';
        out += format_double(m.target_prob);
        out += ',';
        out += format_double(m.pair_mass);
        out += ',';
        out += format_double(m.offtarget_kl);
        out += ',';
        out += format_double(m.rank_diff);
        out += ',';
        out += std::isnan(m.dual_cosine) ? "" : format_double(m.dual_cosine);
        out += ',';
        out += format_double(probe_projection(path.probe, model, point));
        out += ',';
        out += format_double(probe_logit(path.probe, model, point));
        out += '\n';
    }
    return out;
}

struct SweepTask {
    size_t point_index;
    SteerMethod method;
};

struct SweepResult {
    bool ok = false;
    std::string error;
    std::string trace_csv;
    std::vector<StepMetrics> per_step;
    std::vector<int> recorded_steps;
    std::vector<PrimalPoint> recorded_points;
    int steps = 0;
    bool terminated = false;
};

json config_echo(const SteeringConfig& steer_cfg, const MetricConfig& metric_cfg,
                 const std::vector<SteerMethod>& methods, int seed) {
    json echo;
    echo["alpha"] = steer_cfg.alpha;
    if (steer_cfg.eta.has_value()) {
        echo["eta"] = *steer_cfg.eta;
    } else {
        echo["eta"] = "auto";
    }
    echo["max_steps"] = steer_cfg.max_steps;
    echo["terminate_at"] = steer_cfg.terminate_at;
    if (steer_cfg.top_k.has_value()) {
        echo["top_k"] = *steer_cfg.top_k;
    } else {
        echo["top_k"] = "auto";
    }
    echo["record_every"] = steer_cfg.record_every;
    echo["normalize_euclidean"] = steer_cfg.normalize_euclidean;
    echo["kl_floor"] = metric_cfg.kl_floor;
    echo["n_bins"] = metric_cfg.n_bins;
    echo["reduced_vocab_mass"] = metric_cfg.reduced_vocab_mass;
    echo["seed"] = seed;
    json names = json::array();
    for (SteerMethod m : methods) names.push_back(method_name(m));
    echo["methods"] = names;
    return echo;
}

// Runs the sweep shared by cmd_steer and cmd_diagnose.
std::vector<SweepResult> run_sweep(const SoftmaxModel& model,
                                   const ConceptScheme& scheme,
                                   const LinearProbe& probe,
                                   const SteeringConfig& steer_cfg,
                                   const MetricConfig& metric_cfg,
                                   const std::vector<PrimalPoint>& points,
                                   const std::vector<SteerMethod>& methods,
                                   std::vector<SweepTask>& tasks_out) {
    std::vector<SweepTask> tasks;
    for (size_t p = 0; p < points.size(); ++p) {
        for (SteerMethod m : methods) {
            tasks.push_back(SweepTask{p, m});
        }
    }
    std::vector<SweepResult> results(tasks.size());

    std::atomic<size_t> next{0};
    const auto work = [&]() {
        for (;;) {
            const size_t index = next.fetch_add(1);
            if (index >= tasks.size()) return;
            SweepResult& result = results[index];
            try {
                const SweepTask& task = tasks[index];
                SteeringPath path =
                    task.method == SteerMethod::euclidean
                        ? euclidean_steer(model, scheme,
                                          points[task.point_index], probe,
                                          steer_cfg)
                        : dual_steer(model, scheme, points[task.point_index],
                                     probe, steer_cfg);
                annotate_path(model, scheme, path, metric_cfg);
                result.trace_csv = render_trace(model, path);
                for (int idx : path.recorded_steps) {
                    result.recorded_points.push_back(
                        path.points[static_cast<size_t>(idx)]);
                }
                result.recorded_steps = std::move(path.recorded_steps);
                result.per_step = std::move(path.per_step);
                result.steps = static_cast<int>(path.points.size()) - 1;
                result.terminated = path.terminated;
                result.ok = true;
            } catch (const Error& err) {
                result.error = err.what();
            } catch (const std::exception& ex) {
                result.error = ex.what();
            }
        }
    };

    const int workers = worker_count(tasks.size());
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& thread : pool) thread.join();

    tasks_out = std::move(tasks);
    return results;
}

} // namespace

int cmd_synthesize(const ConfigFile& config) {
    try {
        std::vector<std::string> labels;
        const FactorizableModelSpec spec = synthesis_spec(config, labels);
        const SynthesizedConcept result = synthesize_factorizable(spec, labels);

        const std::string dir = output_dir(config);
        const std::string model_out =
            config.get_string("synthesize", "model_out", dir + "/model.sgm");
        const std::string scheme_out = config.get_string(
            "synthesize", "scheme_out", dir + "/scheme.json");
        const std::string probe_out =
            config.get_string("synthesize", "probe_out", dir + "/probe.json");

        save_model(result.model, model_out);
        save_scheme(result.scheme, scheme_out);
        save_probe(result.probe, probe_out);
        std::cout << "wrote " << model_out << " " << scheme_out << " "
                  << probe_out << "\n";
        return kExitOk;
    } catch (const Error& err) {
        std::cerr << err.what() << "\n";
        return exit_code_for(err);
    }
}

int cmd_interpolate(const ConfigFile& config) {
    try {
        const SoftmaxModel model = resolve_model(config);
        const std::vector<double> l0 = config.get_vector("interpolate", "lambda0");
        const std::vector<double> l1 = config.get_vector("interpolate", "lambda1");
        const std::string kind = config.get_string("interpolate", "kind", "primal");
        const int steps = config.get_int("interpolate", "steps", 21);
        const int top_k = std::min(config.get_int("interpolate", "top_k", 10),
                                   model.vocab_size());
        const double tol = config.get_double("interpolate", "tol", 1e-10);
        if (steps < 2) {
            throw Error(errc::invalid_argument, "[interpolate] steps must be >= 2");
        }
        if (kind != "primal" && kind != "dual") {
            throw Error(errc::invalid_argument,
                        "[interpolate] kind must be primal or dual");
        }
        const PrimalPoint lambda0{Eigen::Map<const Eigen::VectorXd>(
            l0.data(), static_cast<Eigen::Index>(l0.size()))};
        const PrimalPoint lambda1{Eigen::Map<const Eigen::VectorXd>(
            l1.data(), static_cast<Eigen::Index>(l1.size()))};

        std::vector<double> ts(static_cast<size_t>(steps));
        for (int i = 0; i < steps; ++i) {
            ts[static_cast<size_t>(i)] =
                static_cast<double>(i) / static_cast<double>(steps - 1);
        }

        const InterpolationPath path =
            kind == "primal" ? e_interpolate(model, lambda0, lambda1, ts)
                             : m_interpolate(model, lambda0, lambda1, ts, tol);

        std::string csv = "t";
        for (int k = 1; k <= top_k; ++k) {
            csv += ",top" + std::to_string(k) + "_label,top" +
                   std::to_string(k) + "_prob";
        }
        csv += ",others\n";
        for (size_t i = 0; i < path.ts.size(); ++i) {
            const ProbVector p = softmax_probs(model, path.points[i]);
            const std::vector<int> top = detail::top_k_indices(p.probs, top_k);
            csv += format_double(path.ts[i]);
            double mass = 0.0;
            for (int idx : top) {
                csv += ',';
                csv += csv_escape(model.labels()[static_cast<size_t>(idx)]);
                csv += ',';
                csv += format_double(p.probs[idx]);
                mass += p.probs[idx];
            }
            csv += ',';
            csv += format_double(1.0 - mass);
            csv += '\n';
        }

        const std::string dir = output_dir(config);
        write_file(dir + "/interpolate_" + kind + ".csv", csv);
        return kExitOk;
    } catch (const Error& err) {
        std::cerr << err.what() << "\n";
        return exit_code_for(err);
    }
}

int cmd_steer(const ConfigFile& config) {
    try {
        const SoftmaxModel model = resolve_model(config);
        const ConceptScheme scheme = resolve_scheme(config, model);
        const LinearProbe probe = resolve_probe(config, model);
        const SteeringConfig steer_cfg = resolve_steering(config);
        const MetricConfig metric_cfg = resolve_metrics(config);
        const std::vector<SteerMethod> methods = resolve_methods(config);
        const std::vector<PrimalPoint> points =
            load_points(config.require_string("steer", "points"));
        const int seed = config.get_int("output", "seed", 0);
        const std::string dir = output_dir(config);

        std::vector<SweepTask> tasks;
        const std::vector<SweepResult> results = run_sweep(
            model, scheme, probe, steer_cfg, metric_cfg, points, methods, tasks);

        json manifest;
        manifest["command"] = "steer";
        manifest["config"] = config_echo(steer_cfg, metric_cfg, methods, seed);
        manifest["runs"] = json::array();

        std::map<std::string, std::vector<std::vector<StepMetrics>>> by_method;
        bool any_error = false;
        for (size_t i = 0; i < tasks.size(); ++i) {
            const SweepTask& task = tasks[i];
            const SweepResult& result = results[i];
            char name[64];
            std::snprintf(name, sizeof(name), "run%03zu_%s.csv",
                          task.point_index, method_name(task.method));
            json entry;
            entry["run"] = task.point_index;
            entry["method"] = method_name(task.method);
            if (result.ok) {
                entry["status"] = "ok";
                entry["trace"] = name;
                entry["steps"] = result.steps;
                entry["terminated"] = result.terminated;
                write_file(dir + "/" + name, result.trace_csv);
                by_method[method_name(task.method)].push_back(result.per_step);
            } else {
                entry["status"] = "error";
                entry["error"] = result.error;
                any_error = true;
            }
            manifest["runs"].push_back(entry);
        }

        for (const auto& [method, runs] : by_method) {
            if (runs.empty()) continue;
            const BinnedSummary summary =
                bin_and_summarize(runs, metric_cfg.n_bins);
            for (const char* metric : BinnedSummary::metric_names) {
                write_file(dir + "/summary_" + method + "_" + metric + ".csv",
                           summary_to_csv(summary, metric));
            }
            write_file(dir + "/summary_" + method + ".json",
                       summary_to_json(summary));
        }

        write_file(dir + "/manifest.json", manifest.dump(2) + "\n");
        return any_error ? kExitPartial : kExitOk;
    } catch (const Error& err) {
        std::cerr << err.what() << "\n";
        return exit_code_for(err);
    }
}

int cmd_diagnose(const ConfigFile& config) {
    try {
        const SoftmaxModel model = resolve_model(config);
        const ConceptScheme scheme = resolve_scheme(config, model);
        const LinearProbe probe = resolve_probe(config, model);
        const SteeringConfig steer_cfg = resolve_steering(config);
        const MetricConfig metric_cfg = resolve_metrics(config);
        const std::vector<SteerMethod> methods = resolve_methods(config);
        const std::string dir = output_dir(config);

        const std::string header =
            "run,method,step,dual_cosine,projection,concept_logit\n";

        std::vector<PrimalPoint> points;
        const std::string points_path = config.require_string("steer", "points");
        try {
            points = load_points(points_path);
        } catch (const Error& err) {
            if (err.code() == errc::invalid_argument) {
                // Zero start points: emit the header-only CSV.
                write_file(dir + "/diagnostics.csv", header);
                return kExitOk;
            }
            throw;
        }

        std::vector<SweepTask> tasks;
        const std::vector<SweepResult> results = run_sweep(
            model, scheme, probe, steer_cfg, metric_cfg, points, methods, tasks);

        std::string csv = header;
        bool any_error = false;
        json manifest;
        manifest["command"] = "diagnose";
        manifest["config"] = config_echo(steer_cfg, metric_cfg, methods,
                                         config.get_int("output", "seed", 0));
        manifest["runs"] = json::array();
        for (size_t i = 0; i < tasks.size(); ++i) {
            const SweepTask& task = tasks[i];
            const SweepResult& result = results[i];
            json entry;
            entry["run"] = task.point_index;
            entry["method"] = method_name(task.method);
            if (!result.ok) {
                entry["status"] = "error";
                entry["error"] = result.error;
                manifest["runs"].push_back(entry);
                any_error = true;
                continue;
            }
            const std::vector<ProbeTracePoint> trace = probe_assumption_trace(
                probe, model, result.recorded_points, scheme);
            for (size_t s = 0; s < result.recorded_steps.size(); ++s) {
                csv += std::to_string(task.point_index);
                csv += ',';
                csv += method_name(task.method);
                csv += ',';
                csv += std::to_string(result.recorded_steps[s]);
                csv += ',';
                csv += std::isnan(result.per_step[s].dual_cosine)
                           ? ""
                           : format_double(result.per_step[s].dual_cosine);
                csv += ',';
                csv += format_double(trace[s].projection);
                csv += ',';
                csv += format_double(trace[s].concept_logit);
                csv += '\n';
            }
            entry["status"] = "ok";
            manifest["runs"].push_back(entry);
        }
        write_file(dir + "/diagnostics.csv", csv);
        write_file(dir + "/manifest.json", manifest.dump(2) + "\n");
        return any_error ? kExitPartial : kExitOk;
    } catch (const Error& err) {
        std::cerr << err.what() << "\n";
        return exit_code_for(err);
    }
}

int cmd_metrics(const ConfigFile& config) {
    try {
        const SoftmaxModel model = resolve_model(config);
        const ConceptScheme scheme = resolve_scheme(config, model);
        const LinearProbe probe = resolve_probe(config, model);
        const MetricConfig metric_cfg = resolve_metrics(config);
        const std::string trace_path = config.require_string("recompute", "trace");
        const std::string dir = output_dir(config);

        std::ifstream in(trace_path);
        if (!in) {
            throw Error(errc::io_failure, "cannot open trace '" + trace_path + "'");
        }
        std::string line;
        if (!std::getline(in, line)) {
            throw Error(errc::invalid_argument, "trace is empty");
        }

        std::vector<int> steps;
        std::vector<PrimalPoint> points;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const size_t first = line.find(',');
            const size_t second = line.find(',', first + 1);
            if (first == std::string::npos || second == std::string::npos) {
                throw Error(errc::invalid_argument, "trace row is malformed");
            }
            const std::string lambda_field =
                line.substr(first + 1, second - first - 1);
            if (lambda_field.find(';') == std::string::npos &&
                lambda_field.size() == 16 &&
                lambda_field.find_first_not_of("0123456789abcdef") ==
                    std::string::npos) {
                throw Error(errc::invalid_argument,
                            "trace stores hashed lambdas; cannot recompute");
            }
            std::string values = lambda_field;
            std::replace(values.begin(), values.end(), ';', ' ');
            std::istringstream tokens(values);
            std::vector<double> parsed;
            double value = 0.0;
            while (tokens >> value) parsed.push_back(value);
            if (static_cast<int>(parsed.size()) != model.dim()) {
                throw Error(errc::invalid_argument,
                            "trace lambda width does not match model dim");
            }
            steps.push_back(std::stoi(line.substr(0, first)));
            points.push_back(PrimalPoint{Eigen::Map<const Eigen::VectorXd>(
                parsed.data(), static_cast<Eigen::Index>(parsed.size()))});
        }
        if (points.empty()) {
            throw Error(errc::invalid_argument, "trace holds no rows");
        }

        SteeringPath path;
        path.method = SteerMethod::dual; // irrelevant for recomputation
        path.probe = probe;
        path.points = points;
        for (size_t i = 0; i < points.size(); ++i) {
            path.recorded_steps.push_back(static_cast<int>(i));
        }
        annotate_path(model, scheme, path, metric_cfg);
        // Restore the original step numbering in the output.
        path.recorded_steps = steps;
        std::string csv = kTraceHeader;
        for (size_t i = 0; i < points.size(); ++i) {
            const StepMetrics& m = path.per_step[i];
            csv += std::to_string(steps[i]);
            csv += ',';
            csv += format_lambda(points[i].lambda);
            csv += ',';
            csv += format_double(m.target_prob);
            csv += ',';
            csv += format_double(m.pair_mass);
            csv += ',';
            csv += format_double(m.offtarget_kl);
            csv += ',';
            csv += format_double(m.rank_diff);
            csv += ',';
            csv += std::isnan(m.dual_cosine) ? "" : format_double(m.dual_cosine);
            csv += ',';
            csv += format_double(probe_projection(probe, model, points[i]));
            csv += ',';
            csv += format_double(probe_logit(probe, model, points[i]));
            csv += '\n';
        }
        write_file(dir + "/recomputed.csv", csv);

        const BinnedSummary summary =
            bin_and_summarize({path.per_step}, metric_cfg.n_bins);
        write_file(dir + "/recomputed_summary.json", summary_to_json(summary));
        return kExitOk;
    } catch (const Error& err) {
        std::cerr << err.what() << "\n";
        return exit_code_for(err);
    }
}

} // namespace geosteer::cli
