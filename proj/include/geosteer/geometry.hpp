#pragma once

#include "geosteer/common.hpp"
#include "geosteer/model.hpp"

#include <optional>

namespace geosteer {

/// Softmax probabilities of all items under one representation vector.
struct ProbVector {
    Eigen::VectorXd probs;
};

/// d x d covariance of the unembedding vectors under the softmax
/// distribution; equals the Hessian of the log-normalizer.
struct HessianMatrix {
    Eigen::MatrixXd cov;
};

/// A(lambda) = log sum_y exp(lambda . gamma_y), max-subtracted.
double log_normalizer(const SoftmaxModel& model, const PrimalPoint& lambda);

ProbVector softmax_probs(const SoftmaxModel& model, const PrimalPoint& lambda);

/// Mean parameter phi = E[gamma | lambda]; lies in the convex hull of the
/// rows of gamma.
DualPoint dual_map(const SoftmaxModel& model, const PrimalPoint& lambda);

/// Cov[gamma | lambda]. With top_k, the covariance of the k most probable
/// items under renormalized probabilities. Computed in centered form
/// sum_y p_y (gamma_y - phi)(gamma_y - phi)^T, which is algebraically the
/// spec's sum p gamma gamma^T - phi phi^T but stays PSD at near-point-mass
/// distributions.
HessianMatrix hessian(const SoftmaxModel& model, const PrimalPoint& lambda,
                      std::optional<int> top_k = std::nullopt);

/// KL(P_a || P_b) in Bregman form: A(b) - A(a) - phi(a).(b - a).
double kl(const SoftmaxModel& model, const PrimalPoint& lambda_a,
          const PrimalPoint& lambda_b);

/// KL(P_a || P_b) by direct summation sum p_a log(p_a / p_b), with the given
/// probability floor applied inside the logs.
double kl_direct(const SoftmaxModel& model, const PrimalPoint& lambda_a,
                 const PrimalPoint& lambda_b, double floor = 1e-300);

/// Convex conjugate A*(phi) evaluated through the inverse dual map.
/// Throws NotInDualImage when phi has no preimage.
double conjugate(const SoftmaxModel& model, const DualPoint& phi);

/// Solves dual_map(lambda) = phi by damped Newton on A(lambda) - phi.lambda
/// with Levenberg-style regularization; throws NotInDualImage when the
/// gradient norm cannot be brought under tol within max_iter iterations.
/// warm_start, when given, seeds the iteration (used by dual-path tracing).
PrimalPoint inverse_dual_map(const SoftmaxModel& model, const DualPoint& phi,
                             double tol = 1e-10, int max_iter = 100,
                             const PrimalPoint* warm_start = nullptr);

} // namespace geosteer
