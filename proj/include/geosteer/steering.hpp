#pragma once

#include "geosteer/concepts.hpp"
#include "geosteer/probes.hpp"

#include <optional>
#include <vector>

namespace geosteer {

enum class SteerMethod { euclidean, dual };

/// Per-step evaluation record; filled in by the metrics module.
/// dual_cosine is NaN for the first recorded point (no displacement yet).
struct StepMetrics {
    double target_prob = 0.0;
    double pair_mass = 0.0;
    double offtarget_kl = 0.0;
    double rank_diff = 0.0;
    double dual_cosine = std::numeric_limits<double>::quiet_NaN();
};

struct SteeringConfig {
    double alpha = 5e-3;          // covariance regularization
    std::optional<double> eta;    // step size; defaults from the start point
    int max_steps = 1000;
    double terminate_at = 0.9999; // stop once P(W=1 | lambda_t) reaches this
    std::optional<int> top_k;     // covariance truncation; defaults from V
    int record_every = 1;
    bool normalize_euclidean = true;
};

/// 0.1 |lambda0| / sqrt(d), clamped to [1e-3, 1], unless config pins eta.
double resolve_eta(const SteeringConfig& config, const PrimalPoint& lambda0);

/// Explicit top_k if set; otherwise 20000 when V exceeds 20000, else no
/// truncation (returns 0).
int resolve_top_k(const SteeringConfig& config, int vocab_size);

struct SteeringPath {
    SteerMethod method = SteerMethod::euclidean;
    std::vector<PrimalPoint> points; // every lambda_t, starting at lambda0
    LinearProbe probe;
    SteeringConfig config;
    std::vector<int> recorded_steps;    // indices into points, per record_every
    std::vector<StepMetrics> per_step;  // parallel to recorded_steps
    bool terminated = false;            // reached terminate_at
    bool rank_deficient = false;        // alpha = 0 pseudo-inverse saw rank < d
};

/// lambda_{t+1} = lambda_t + eta * beta / |beta| (normalization optional via
/// config). Stops at terminate_at or max_steps; aborts with
/// DistributionCollapsed when the top-1 probability exceeds 1 - 1e-12 first.
SteeringPath euclidean_steer(const SoftmaxModel& model,
                             const ConceptScheme& scheme,
                             const PrimalPoint& lambda0,
                             const LinearProbe& probe,
                             const SteeringConfig& config);

/// Regularized Newton steering: each step solves
/// (Cov[gamma | lambda_t] + alpha I) v = beta and moves eta * v / |v|.
/// With alpha = 0 a least-squares pseudo-inverse is used and rank deficiency
/// is flagged on the path.
SteeringPath dual_steer(const SoftmaxModel& model, const ConceptScheme& scheme,
                        const PrimalPoint& lambda0, const LinearProbe& probe,
                        const SteeringConfig& config);

/// KL projection of lambda0 onto the hyperplane {beta . lambda = c}: damped
/// Newton over the hyperplane parameterization. The dual displacement of the
/// result is collinear with beta. Throws NoMinimizer on divergence.
PrimalPoint dual_projection_target(const SoftmaxModel& model,
                                   const PrimalPoint& lambda0,
                                   const LinearProbe& probe, double c,
                                   double tol = 1e-10);

} // namespace geosteer
