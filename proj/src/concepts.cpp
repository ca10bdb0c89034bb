#include "geosteer/concepts.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace geosteer {

namespace {

constexpr double kPairMassFloor = 1e-300;

} // namespace

void ConceptScheme::validate(int vocab_size) const {
    if (pairs.empty()) {
        throw Error(errc::invalid_argument, "scheme needs at least one pair");
    }
    std::vector<int> seen(static_cast<size_t>(vocab_size), 0);
    const auto mark = [&](int idx, const char* what) {
        if (idx < 0 || idx >= vocab_size) {
            throw Error(errc::invalid_argument,
                        std::string(what) + " index " + std::to_string(idx) +
                            " outside [0, V)");
        }
        if (seen[static_cast<size_t>(idx)]++) {
            throw Error(errc::invalid_argument,
                        "item " + std::to_string(idx) +
                            " appears more than once in the scheme");
        }
    };
    for (const auto& [base, target] : pairs) {
        mark(base, "pair base");
        mark(target, "pair target");
    }
    for (int y : neutral) {
        mark(y, "neutral");
    }
    for (const auto& [item, pair_idx] : collapse) {
        mark(item, "collapse");
        if (pair_idx < 0 || pair_idx >= n_pairs()) {
            throw Error(errc::invalid_argument,
                        "collapse target pair " + std::to_string(pair_idx) +
                            " out of range");
        }
    }
    for (int i = 0; i < vocab_size; ++i) {
        if (!seen[static_cast<size_t>(i)]) {
            throw Error(errc::invalid_argument,
                        "item " + std::to_string(i) + " not covered by scheme");
        }
    }
}

FactorizedView factorize_probs(const ConceptScheme& scheme,
                               const Eigen::VectorXd& probs) {
    const int n = scheme.n_pairs();
    const int cells = scheme.n_cells();

    Eigen::VectorXd base_mass = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd target_mass = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        base_mass[i] = probs[scheme.pairs[static_cast<size_t>(i)].first];
        target_mass[i] = probs[scheme.pairs[static_cast<size_t>(i)].second];
    }
    for (const auto& [item, pair_idx] : scheme.collapse) {
        base_mass[pair_idx] += probs[item];
    }

    const double base_total = base_mass.sum();
    const double target_total = target_mass.sum();
    const double mass = base_total + target_total;
    if (!(mass >= kPairMassFloor)) {
        throw Error(errc::no_pair_mass,
                    "counterfactual mass underflow (" + std::to_string(mass) + ")");
    }

    FactorizedView view;
    view.n_pairs = n;
    view.pw << base_total / mass, target_total / mass;
    view.pz.resize(cells);
    for (int i = 0; i < n; ++i) {
        view.pz[i] = base_mass[i] + target_mass[i];
    }
    for (size_t j = 0; j < scheme.neutral.size(); ++j) {
        view.pz[n + static_cast<int>(j)] = probs[scheme.neutral[j]];
    }
    return view;
}

FactorizedView factorize(const SoftmaxModel& model, const ConceptScheme& scheme,
                         const PrimalPoint& lambda) {
    return factorize_probs(scheme, softmax_probs(model, lambda).probs);
}

double factorization_residual_probs(const ConceptScheme& scheme,
                                    const Eigen::VectorXd& probs) {
    const FactorizedView view = factorize_probs(scheme, probs);
    double residual = 0.0;
    for (int i = 0; i < scheme.n_pairs(); ++i) {
        double base_cell = probs[scheme.pairs[static_cast<size_t>(i)].first];
        for (const auto& [item, pair_idx] : scheme.collapse) {
            if (pair_idx == i) base_cell += probs[item];
        }
        const double target_cell = probs[scheme.pairs[static_cast<size_t>(i)].second];
        residual = std::max(residual,
                            std::abs(base_cell - view.pw[0] * view.pz[i]));
        residual = std::max(residual,
                            std::abs(target_cell - view.pw[1] * view.pz[i]));
    }
    return residual;
}

double factorization_residual(const SoftmaxModel& model,
                              const ConceptScheme& scheme,
                              const PrimalPoint& lambda) {
    return factorization_residual_probs(scheme,
                                        softmax_probs(model, lambda).probs);
}

SynthesizedConcept synthesize_factorizable(
    const FactorizableModelSpec& spec, const std::vector<std::string>& labels) {
    const int n = static_cast<int>(spec.shared_dirs.rows());
    const int m = static_cast<int>(spec.neutral_dirs.rows());
    const auto d = spec.concept_dir.size();
    if (n < 1) {
        throw Error(errc::invalid_argument, "need at least one shared direction");
    }
    if (d < 2) {
        throw Error(errc::invalid_argument, "concept dimension must be >= 2");
    }
    if (spec.concept_dir.norm() == 0.0) {
        throw Error(errc::invalid_argument, "concept direction must be nonzero");
    }
    if (spec.shared_dirs.cols() != d || (m > 0 && spec.neutral_dirs.cols() != d)) {
        throw Error(errc::dimension_mismatch,
                    "spec vectors disagree on dimension");
    }
    const int vocab = 2 * n + m;
    if (static_cast<int>(labels.size()) != vocab) {
        throw Error(errc::invalid_argument,
                    "expected " + std::to_string(vocab) + " labels, got " +
                        std::to_string(labels.size()));
    }

    MatrixRM gamma(vocab, d);
    ConceptScheme scheme;
    for (int i = 0; i < n; ++i) {
        gamma.row(2 * i) = spec.shared_dirs.row(i);
        gamma.row(2 * i + 1) =
            spec.shared_dirs.row(i) + spec.concept_dir.transpose();
        scheme.pairs.emplace_back(2 * i, 2 * i + 1);
    }
    for (int j = 0; j < m; ++j) {
        gamma.row(2 * n + j) = spec.neutral_dirs.row(j);
        scheme.neutral.push_back(2 * n + j);
    }

    LinearProbe probe;
    probe.beta = spec.concept_dir;
    probe.offset = 0.0;
    probe.input_space = ProbeSpace::primal;

    return SynthesizedConcept{SoftmaxModel(labels, std::move(gamma)),
                              std::move(scheme), std::move(probe)};
}

std::string scheme_to_json(const ConceptScheme& scheme) {
    nlohmann::json doc;
    doc["pairs"] = nlohmann::json::array();
    for (const auto& [base, target] : scheme.pairs) {
        doc["pairs"].push_back({base, target});
    }
    doc["neutral"] = scheme.neutral;
    doc["collapse"] = nlohmann::json::object();
    for (const auto& [item, pair_idx] : scheme.collapse) {
        doc["collapse"][std::to_string(item)] = pair_idx;
    }
    return doc.dump();
}

ConceptScheme scheme_from_json(const std::string& text) {
    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("pairs")) {
        throw Error(errc::invalid_argument, "scheme JSON is malformed");
    }
    ConceptScheme scheme;
    for (const auto& entry : doc["pairs"]) {
        if (!entry.is_array() || entry.size() != 2) {
            throw Error(errc::invalid_argument, "each pair must be [base, target]");
        }
        scheme.pairs.emplace_back(entry[0].get<int>(), entry[1].get<int>());
    }
    if (doc.contains("neutral")) {
        scheme.neutral = doc["neutral"].get<std::vector<int>>();
    }
    if (doc.contains("collapse")) {
        for (const auto& [key, value] : doc["collapse"].items()) {
            scheme.collapse[std::stoi(key)] = value.get<int>();
        }
    }
    return scheme;
}

ConceptScheme load_scheme(const std::string& path, int vocab_size) {
    std::ifstream in(path);
    if (!in) {
        throw Error(errc::io_failure, "cannot open '" + path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    ConceptScheme scheme = scheme_from_json(buffer.str());
    scheme.validate(vocab_size);
    return scheme;
}

void save_scheme(const ConceptScheme& scheme, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error(errc::io_failure, "cannot open '" + path + "' for writing");
    }
    out << scheme_to_json(scheme) << "\n";
    if (!out) {
        throw Error(errc::io_failure, "write to '" + path + "' failed");
    }
}

} // namespace geosteer
