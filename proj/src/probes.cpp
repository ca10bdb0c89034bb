#include "geosteer/probes.hpp"
#include "geosteer/concepts.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace geosteer {

namespace {

constexpr double kDegenerateNorm = 1e-12;

Eigen::VectorXd mean_of(const std::vector<Eigen::VectorXd>& xs) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(xs.front().size());
    for (const auto& x : xs) {
        acc += x;
    }
    return acc / static_cast<double>(xs.size());
}

LinearProbe make_md(const std::vector<Eigen::VectorXd>& base,
                    const std::vector<Eigen::VectorXd>& target) {
    if (base.empty() || target.empty()) {
        throw Error(errc::invalid_argument,
                    "mean-difference probes need nonempty point sets");
    }
    LinearProbe probe;
    probe.beta = mean_of(target) - mean_of(base);
    probe.offset = 0.0;
    probe.input_space = ProbeSpace::primal;
    if (probe.beta.norm() < kDegenerateNorm) {
        throw Error(errc::degenerate_probe, "mean difference is numerically zero");
    }
    return probe;
}

} // namespace

LinearProbe primal_mean_difference(const std::vector<PrimalPoint>& base,
                                   const std::vector<PrimalPoint>& target) {
    std::vector<Eigen::VectorXd> b, t;
    for (const auto& p : base) b.push_back(p.lambda);
    for (const auto& p : target) t.push_back(p.lambda);
    return make_md(b, t);
}

LinearProbe dual_mean_difference(const SoftmaxModel& model,
                                 const std::vector<PrimalPoint>& base,
                                 const std::vector<PrimalPoint>& target) {
    std::vector<Eigen::VectorXd> b, t;
    for (const auto& p : base) b.push_back(dual_map(model, p).phi);
    for (const auto& p : target) t.push_back(dual_map(model, p).phi);
    return make_md(b, t);
}

double probe_logit(const LinearProbe& probe, const SoftmaxModel& model,
                   const PrimalPoint& lambda) {
    if (probe.input_space == ProbeSpace::dual) {
        return probe.beta.dot(dual_map(model, lambda).phi) + probe.offset;
    }
    if (probe.beta.size() != lambda.lambda.size()) {
        throw Error(errc::dimension_mismatch, "probe/point dimension mismatch");
    }
    return probe.beta.dot(lambda.lambda) + probe.offset;
}

double probe_projection(const LinearProbe& probe, const SoftmaxModel& model,
                        const PrimalPoint& lambda) {
    const double norm = probe.beta.norm();
    if (norm < kDegenerateNorm) {
        throw Error(errc::degenerate_probe, "probe direction is numerically zero");
    }
    return (probe_logit(probe, model, lambda) - probe.offset) / norm;
}

LinearProbe fit_logistic_probe(
    const std::vector<std::pair<PrimalPoint, int>>& points, int iters,
    double lr) {
    if (points.empty()) {
        throw Error(errc::invalid_argument, "no training points");
    }
    bool has0 = false, has1 = false;
    for (const auto& [_, label] : points) {
        if (label == 0) has0 = true;
        else if (label == 1) has1 = true;
        else throw Error(errc::invalid_argument, "labels must be 0 or 1");
    }
    if (!has0 || !has1) {
        throw Error(errc::invalid_argument,
                    "both labels must be present in the training set");
    }

    const auto d = points.front().first.lambda.size();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
    double offset = 0.0;
    const double inv_n = 1.0 / static_cast<double>(points.size());

    for (int it = 0; it < iters; ++it) {
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(d);
        double grad_b = 0.0;
        for (const auto& [point, label] : points) {
            const double err =
                sigmoid(beta.dot(point.lambda) + offset) - static_cast<double>(label);
            grad += err * point.lambda;
            grad_b += err;
        }
        beta -= lr * inv_n * grad;
        offset -= lr * inv_n * grad_b;
    }

    LinearProbe probe;
    probe.beta = std::move(beta);
    probe.offset = offset;
    probe.input_space = ProbeSpace::primal;
    if (probe.beta.norm() < kDegenerateNorm) {
        throw Error(errc::degenerate_probe, "logistic fit collapsed to zero");
    }
    return probe;
}

std::vector<ProbeTracePoint> probe_assumption_trace(
    const LinearProbe& probe, const SoftmaxModel& model,
    std::span<const PrimalPoint> path, const ConceptScheme& scheme) {
    if (path.empty()) {
        throw Error(errc::invalid_argument, "path must be nonempty");
    }
    std::vector<ProbeTracePoint> trace;
    trace.reserve(path.size());
    for (const auto& point : path) {
        const FactorizedView view = factorize(model, scheme, point);
        trace.push_back(ProbeTracePoint{probe_projection(probe, model, point),
                                        logit(view.pw[1])});
    }
    return trace;
}

std::string probe_to_json(const LinearProbe& probe) {
    nlohmann::json doc;
    doc["beta"] = std::vector<double>(probe.beta.data(),
                                      probe.beta.data() + probe.beta.size());
    doc["offset"] = probe.offset;
    doc["space"] = probe.input_space == ProbeSpace::primal ? "primal" : "dual";
    return doc.dump();
}

LinearProbe probe_from_json(const std::string& text) {
    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.contains("beta") || !doc["beta"].is_array()) {
        throw Error(errc::invalid_argument, "probe JSON is malformed");
    }
    LinearProbe probe;
    const auto values = doc["beta"].get<std::vector<double>>();
    probe.beta = Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                   static_cast<Eigen::Index>(values.size()));
    probe.offset = doc.value("offset", 0.0);
    const std::string space = doc.value("space", "primal");
    if (space == "primal") {
        probe.input_space = ProbeSpace::primal;
    } else if (space == "dual") {
        probe.input_space = ProbeSpace::dual;
    } else {
        throw Error(errc::invalid_argument, "probe space must be primal or dual");
    }
    if (probe.beta.norm() < kDegenerateNorm) {
        throw Error(errc::degenerate_probe, "probe direction is numerically zero");
    }
    return probe;
}

LinearProbe load_probe(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(errc::io_failure, "cannot open '" + path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return probe_from_json(buffer.str());
}

void save_probe(const LinearProbe& probe, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error(errc::io_failure, "cannot open '" + path + "' for writing");
    }
    out << probe_to_json(probe) << "\n";
    if (!out) {
        throw Error(errc::io_failure, "write to '" + path + "' failed");
    }
}

} // namespace geosteer
