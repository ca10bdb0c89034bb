#pragma once

#include "geosteer/concepts.hpp"
#include "geosteer/steering.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace geosteer {

/// Factorized P(W=1 | lambda); throws NoPairMass when no counterfactual mass.
double target_prob(const SoftmaxModel& model, const ConceptScheme& scheme,
                   const PrimalPoint& lambda);

/// Total probability mass on the counterfactual pairs.
double pair_mass(const SoftmaxModel& model, const ConceptScheme& scheme,
                 const PrimalPoint& lambda);

/// KL(P^Z_{lambda0} || P^Z_{lambda_t}) with a probability floor on the
/// second argument's cells.
double offtarget_kl(const SoftmaxModel& model, const ConceptScheme& scheme,
                    const PrimalPoint& lambda0, const PrimalPoint& lambda_t,
                    double floor = 1e-12);
double offtarget_kl_views(const FactorizedView& from, const FactorizedView& to,
                          double floor = 1e-12);

/// sum_z P^Z_0(z) |1/rank_t(z) - 1/rank_0(z)| with 1-based ranks by
/// descending mass, ties broken by ascending cell index. When reduced_vocab
/// is given, only those cells participate (and are ranked among themselves).
double rank_diff(const SoftmaxModel& model, const ConceptScheme& scheme,
                 const PrimalPoint& lambda0, const PrimalPoint& lambda_t,
                 const std::optional<std::vector<int>>& reduced_vocab = std::nullopt);
double rank_diff_views(const FactorizedView& from, const FactorizedView& to,
                       const std::optional<std::vector<int>>& reduced_vocab =
                           std::nullopt);

/// cos(phi(lambda_next) - phi(lambda_t), beta); throws ZeroDisplacement when
/// the dual displacement vanishes.
double dual_step_cosine(const SoftmaxModel& model, const LinearProbe& probe,
                        const PrimalPoint& lambda_t,
                        const PrimalPoint& lambda_next);

struct KlDecomposition {
    double pair_mass_weight; // sum_i P^Z(z_i) of the reference distribution
    double concept_kl;
    double offtarget_kl;
    double total_kl;
};

/// Splits KL between two exactly factorizable distributions into the
/// concept and off-target terms. forward decomposes KL(P_a || P_b) with
/// weights from a; reverse decomposes KL(P_b || P_a) with weights from b.
/// Throws NotFactorizable when either residual exceeds 1e-8.
KlDecomposition kl_decomposition(const SoftmaxModel& model,
                                 const ConceptScheme& scheme,
                                 const PrimalPoint& lambda_a,
                                 const PrimalPoint& lambda_b,
                                 KlDirection direction);

struct MetricConfig {
    double kl_floor = 1e-12;
    int n_bins = 20;
    double reduced_vocab_mass = 0.99; // cumulative-mass cutoff for rank vocab
};

/// Fills path.per_step at the recorded steps: target_prob, pair_mass,
/// offtarget_kl and rank_diff against the start point, and the dual-step
/// cosine between consecutive recorded points. Rank reduction (top
/// cumulative-mass union over <= 16 equally spaced steps) kicks in only for
/// off-target spaces larger than 64 cells.
void annotate_path(const SoftmaxModel& model, const ConceptScheme& scheme,
                   SteeringPath& path, const MetricConfig& config = {});

struct BinnedSummary {
    static constexpr std::array<const char*, 5> metric_names = {
        "target_prob", "pair_mass", "offtarget_kl", "rank_diff", "dual_cosine"};

    struct Bin {
        double mean = std::numeric_limits<double>::quiet_NaN();
        double sem = std::numeric_limits<double>::quiet_NaN();
        int count = 0;
    };

    std::vector<double> edges; // n_bins + 1 edges over [0, 1]
    std::array<std::vector<Bin>, 5> metrics;
};

/// Two-stage aggregation over target_prob bins: per-run per-bin means first,
/// then cross-run mean and SEM (sample std over sqrt(count); undefined for
/// count < 2). NaN metric values are skipped.
BinnedSummary bin_and_summarize(const std::vector<std::vector<StepMetrics>>& runs,
                                int n_bins);

std::string summary_to_csv(const BinnedSummary& summary,
                           const std::string& metric_name);
std::string summary_to_json(const BinnedSummary& summary);

} // namespace geosteer
