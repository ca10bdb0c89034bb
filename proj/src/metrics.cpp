#include "geosteer/metrics.hpp"
#include "geosteer/format.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace geosteer {

namespace {

// 1-based ranks by descending mass, ties broken by ascending cell index.
std::vector<int> rank_cells(const Eigen::VectorXd& mass,
                            const std::vector<int>& cells) {
    std::vector<int> order = cells;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (mass[a] != mass[b]) return mass[a] > mass[b];
        return a < b;
    });
    std::vector<int> rank(static_cast<size_t>(mass.size()), 0);
    for (size_t i = 0; i < order.size(); ++i) {
        rank[static_cast<size_t>(order[i])] = static_cast<int>(i) + 1;
    }
    return rank;
}

std::vector<int> all_cells(int n) {
    std::vector<int> cells(static_cast<size_t>(n));
    std::iota(cells.begin(), cells.end(), 0);
    return cells;
}

} // namespace

double target_prob(const SoftmaxModel& model, const ConceptScheme& scheme,
                   const PrimalPoint& lambda) {
    return factorize(model, scheme, lambda).pw[1];
}

double pair_mass(const SoftmaxModel& model, const ConceptScheme& scheme,
                 const PrimalPoint& lambda) {
    const ProbVector p = softmax_probs(model, lambda);
    double mass = 0.0;
    for (const auto& [base, target] : scheme.pairs) {
        mass += p.probs[base] + p.probs[target];
    }
    for (const auto& [item, pair_idx] : scheme.collapse) {
        (void)pair_idx;
        mass += p.probs[item];
    }
    return mass;
}

double offtarget_kl_views(const FactorizedView& from, const FactorizedView& to,
                          double floor) {
    double total = 0.0;
    for (Eigen::Index z = 0; z < from.pz.size(); ++z) {
        const double p = from.pz[z];
        if (p <= 0.0) continue;
        total += p * (std::log(p) - std::log(std::max(to.pz[z], floor)));
    }
    return total;
}

double offtarget_kl(const SoftmaxModel& model, const ConceptScheme& scheme,
                    const PrimalPoint& lambda0, const PrimalPoint& lambda_t,
                    double floor) {
    return offtarget_kl_views(factorize(model, scheme, lambda0),
                              factorize(model, scheme, lambda_t), floor);
}

double rank_diff_views(const FactorizedView& from, const FactorizedView& to,
                       const std::optional<std::vector<int>>& reduced_vocab) {
    const std::vector<int> cells =
        reduced_vocab.has_value() ? *reduced_vocab
                                  : all_cells(static_cast<int>(from.pz.size()));
    if (cells.empty()) return 0.0;
    const std::vector<int> rank0 = rank_cells(from.pz, cells);
    const std::vector<int> rank1 = rank_cells(to.pz, cells);
    double total = 0.0;
    for (int z : cells) {
        total += from.pz[z] * std::abs(1.0 / rank1[static_cast<size_t>(z)] -
                                       1.0 / rank0[static_cast<size_t>(z)]);
    }
    return total;
}

double rank_diff(const SoftmaxModel& model, const ConceptScheme& scheme,
                 const PrimalPoint& lambda0, const PrimalPoint& lambda_t,
                 const std::optional<std::vector<int>>& reduced_vocab) {
    return rank_diff_views(factorize(model, scheme, lambda0),
                           factorize(model, scheme, lambda_t), reduced_vocab);
}

double dual_step_cosine(const SoftmaxModel& model, const LinearProbe& probe,
                        const PrimalPoint& lambda_t,
                        const PrimalPoint& lambda_next) {
    const Eigen::VectorXd displacement =
        dual_map(model, lambda_next).phi - dual_map(model, lambda_t).phi;
    const double norm = displacement.norm();
    const double beta_norm = probe.beta.norm();
    if (norm < 1e-300 || beta_norm < 1e-300) {
        throw Error(errc::zero_displacement, "dual displacement vanished");
    }
    return displacement.dot(probe.beta) / (norm * beta_norm);
}

KlDecomposition kl_decomposition(const SoftmaxModel& model,
                                 const ConceptScheme& scheme,
                                 const PrimalPoint& lambda_a,
                                 const PrimalPoint& lambda_b,
                                 KlDirection direction) {
    constexpr double kResidualTol = 1e-8;
    const double res_a = factorization_residual(model, scheme, lambda_a);
    const double res_b = factorization_residual(model, scheme, lambda_b);
    if (res_a > kResidualTol || res_b > kResidualTol) {
        throw Error(errc::not_factorizable,
                    "factorization residual " +
                        std::to_string(std::max(res_a, res_b)) +
                        " exceeds 1e-8");
    }

    // forward: KL(P_a || P_b) weighted by a; reverse: KL(P_b || P_a).
    const PrimalPoint& from =
        direction == KlDirection::forward ? lambda_a : lambda_b;
    const PrimalPoint& to =
        direction == KlDirection::forward ? lambda_b : lambda_a;

    const FactorizedView vf = factorize(model, scheme, from);
    const FactorizedView vt = factorize(model, scheme, to);

    KlDecomposition out;
    out.pair_mass_weight = vf.pair_mass();
    out.concept_kl = 0.0;
    for (int w = 0; w < 2; ++w) {
        if (vf.pw[w] > 0.0) {
            out.concept_kl += vf.pw[w] * (std::log(vf.pw[w]) - std::log(vt.pw[w]));
        }
    }
    out.offtarget_kl = offtarget_kl_views(vf, vt, /*floor=*/1e-300);
    out.total_kl = kl(model, from, to);
    return out;
}

void annotate_path(const SoftmaxModel& model, const ConceptScheme& scheme,
                   SteeringPath& path, const MetricConfig& config) {
    path.per_step.clear();
    if (path.recorded_steps.empty()) return;

    const FactorizedView start =
        factorize(model, scheme, path.points.front());

    // Rank-vocabulary reduction for large off-target spaces: union of the
    // top cumulative-mass cells over at most 16 equally spaced steps.
    std::optional<std::vector<int>> reduced;
    if (scheme.n_cells() > 64 && config.reduced_vocab_mass < 1.0) {
        std::set<int> keep;
        const size_t n_probe = std::min<size_t>(path.recorded_steps.size(), 16);
        for (size_t s = 0; s < n_probe; ++s) {
            const size_t idx = path.recorded_steps.size() == 1
                                   ? 0
                                   : s * (path.recorded_steps.size() - 1) /
                                         std::max<size_t>(n_probe - 1, 1);
            const FactorizedView view = factorize(
                model, scheme,
                path.points[static_cast<size_t>(path.recorded_steps[idx])]);
            std::vector<int> order = all_cells(static_cast<int>(view.pz.size()));
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                if (view.pz[a] != view.pz[b]) return view.pz[a] > view.pz[b];
                return a < b;
            });
            double mass = 0.0;
            for (int z : order) {
                keep.insert(z);
                mass += view.pz[z];
                if (mass >= config.reduced_vocab_mass) break;
            }
        }
        reduced = std::vector<int>(keep.begin(), keep.end());
    }

    path.per_step.reserve(path.recorded_steps.size());
    std::optional<int> prev_idx;
    for (int idx : path.recorded_steps) {
        const PrimalPoint& point = path.points[static_cast<size_t>(idx)];
        const FactorizedView view = factorize(model, scheme, point);
        StepMetrics metrics;
        metrics.target_prob = view.pw[1];
        metrics.pair_mass = view.pair_mass();
        metrics.offtarget_kl = offtarget_kl_views(start, view, config.kl_floor);
        metrics.rank_diff = rank_diff_views(start, view, reduced);
        if (prev_idx.has_value()) {
            try {
                metrics.dual_cosine = dual_step_cosine(
                    model, path.probe,
                    path.points[static_cast<size_t>(*prev_idx)], point);
            } catch (const Error& err) {
                if (err.code() != errc::zero_displacement) throw;
            }
        }
        path.per_step.push_back(metrics);
        prev_idx = idx;
    }
}

BinnedSummary bin_and_summarize(const std::vector<std::vector<StepMetrics>>& runs,
                                int n_bins) {
    if (runs.empty()) {
        throw Error(errc::invalid_argument, "no runs to summarize");
    }
    if (n_bins < 1) {
        throw Error(errc::invalid_argument, "n_bins must be >= 1");
    }

    BinnedSummary summary;
    summary.edges.resize(static_cast<size_t>(n_bins) + 1);
    for (int b = 0; b <= n_bins; ++b) {
        summary.edges[static_cast<size_t>(b)] =
            static_cast<double>(b) / static_cast<double>(n_bins);
    }
    for (auto& metric : summary.metrics) {
        metric.assign(static_cast<size_t>(n_bins), BinnedSummary::Bin{});
    }

    const auto metric_value = [](const StepMetrics& m, size_t which) {
        switch (which) {
        case 0: return m.target_prob;
        case 1: return m.pair_mass;
        case 2: return m.offtarget_kl;
        case 3: return m.rank_diff;
        default: return m.dual_cosine;
        }
    };

    // Stage 1: per-run per-bin means. Stage 2: mean and SEM across runs.
    for (size_t which = 0; which < summary.metrics.size(); ++which) {
        std::vector<std::vector<double>> run_means(
            static_cast<size_t>(n_bins));
        for (const auto& run : runs) {
            std::vector<double> sums(static_cast<size_t>(n_bins), 0.0);
            std::vector<int> counts(static_cast<size_t>(n_bins), 0);
            for (const auto& step : run) {
                const double value = metric_value(step, which);
                if (std::isnan(value)) continue;
                int bin = static_cast<int>(step.target_prob *
                                           static_cast<double>(n_bins));
                bin = std::clamp(bin, 0, n_bins - 1);
                sums[static_cast<size_t>(bin)] += value;
                counts[static_cast<size_t>(bin)] += 1;
            }
            for (int b = 0; b < n_bins; ++b) {
                if (counts[static_cast<size_t>(b)] > 0) {
                    run_means[static_cast<size_t>(b)].push_back(
                        sums[static_cast<size_t>(b)] /
                        counts[static_cast<size_t>(b)]);
                }
            }
        }
        for (int b = 0; b < n_bins; ++b) {
            const auto& values = run_means[static_cast<size_t>(b)];
            BinnedSummary::Bin& bin = summary.metrics[which][static_cast<size_t>(b)];
            bin.count = static_cast<int>(values.size());
            if (values.empty()) continue;
            const double mean =
                std::accumulate(values.begin(), values.end(), 0.0) /
                static_cast<double>(values.size());
            bin.mean = mean;
            if (values.size() >= 2) {
                double ss = 0.0;
                for (double v : values) ss += (v - mean) * (v - mean);
                const double sample_std =
                    std::sqrt(ss / static_cast<double>(values.size() - 1));
                bin.sem = sample_std / std::sqrt(static_cast<double>(values.size()));
            }
        }
    }
    return summary;
}

std::string summary_to_csv(const BinnedSummary& summary,
                           const std::string& metric_name) {
    size_t which = summary.metric_names.size();
    for (size_t i = 0; i < summary.metric_names.size(); ++i) {
        if (metric_name == summary.metric_names[i]) which = i;
    }
    if (which == summary.metric_names.size()) {
        throw Error(errc::invalid_argument, "unknown metric '" + metric_name + "'");
    }
    std::string out = "bin_lo,bin_hi,metric,mean,sem,count\n";
    const auto& bins = summary.metrics[which];
    for (size_t b = 0; b < bins.size(); ++b) {
        out += format_double(summary.edges[b]);
        out += ',';
        out += format_double(summary.edges[b + 1]);
        out += ',';
        out += metric_name;
        out += ',';
        out += std::isnan(bins[b].mean) ? "" : format_double(bins[b].mean);
        out += ',';
        out += std::isnan(bins[b].sem) ? "" : format_double(bins[b].sem);
        out += ',';
        out += std::to_string(bins[b].count);
        out += '\n';
    }
    return out;
}

std::string summary_to_json(const BinnedSummary& summary) {
    nlohmann::json doc;
    doc["edges"] = summary.edges;
    for (size_t i = 0; i < summary.metric_names.size(); ++i) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& bin : summary.metrics[i]) {
            nlohmann::json row;
            row["count"] = bin.count;
            if (!std::isnan(bin.mean)) row["mean"] = bin.mean;
            if (!std::isnan(bin.sem)) row["sem"] = bin.sem;
            rows.push_back(row);
        }
        doc[summary.metric_names[i]] = rows;
    }
    return doc.dump();
}

} // namespace geosteer
