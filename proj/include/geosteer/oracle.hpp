#pragma once

#include "geosteer/interpolation.hpp"
#include "geosteer/probes.hpp"

#include <cstdint>
#include <functional>

namespace geosteer::oracle {

/// Axis-aligned grid over primal space; supports d <= 3.
struct GridSpec {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    int points_per_axis = 41;
};

struct GridMinResult {
    PrimalPoint argmin;
    double value;
};

/// Exhaustive minimizer of the weighted (reverse or forward) KL objective
/// over the grid. Brute force by design; validates the interpolation module.
GridMinResult grid_min_weighted_kl(const SoftmaxModel& model,
                                   const PrimalPoint& lambda0,
                                   const PrimalPoint& lambda1, double t,
                                   KlDirection direction, const GridSpec& grid);

/// Multi-start backtracking gradient descent over the hyperplane
/// {beta . lambda = c}, minimizing A(lambda) - phi(lambda0) . lambda.
/// Independent of the production Newton projection; used to cross-check it.
PrimalPoint constrained_min_kl(const SoftmaxModel& model,
                               const PrimalPoint& lambda0,
                               const LinearProbe& probe, double c,
                               int starts = 20, uint64_t seed = 831201);

Eigen::VectorXd finite_diff_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h);

Eigen::MatrixXd finite_diff_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g,
    const Eigen::VectorXd& x, double h);

/// Extended-precision references for the double-precision reductions.
long double log_normalizer_ld(const SoftmaxModel& model,
                              const PrimalPoint& lambda);
long double kl_direct_ld(const SoftmaxModel& model, const PrimalPoint& lambda_a,
                         const PrimalPoint& lambda_b, double floor = 1e-300);
long double kl_vec_ld(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                      double floor);

} // namespace geosteer::oracle
