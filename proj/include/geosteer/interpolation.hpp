#pragma once

#include "geosteer/geometry.hpp"

#include <vector>

namespace geosteer {

enum class PathKind { primal, dual };

/// An interpolation path between two representation vectors. For dual paths,
/// points holds the primal preimages of the affine dual coordinates.
struct InterpolationPath {
    PathKind kind;
    std::vector<double> ts;
    std::vector<PrimalPoint> points;
    std::vector<DualPoint> dual_points;
};

/// Straight line in primal coordinates: lambda_t = (1-t) lambda0 + t lambda1.
InterpolationPath e_interpolate(const SoftmaxModel& model,
                                const PrimalPoint& lambda0,
                                const PrimalPoint& lambda1,
                                const std::vector<double>& ts);

/// Straight line in dual coordinates, traced back through the inverse dual
/// map; each solve warm-starts from the previous point.
InterpolationPath m_interpolate(const SoftmaxModel& model,
                                const PrimalPoint& lambda0,
                                const PrimalPoint& lambda1,
                                const std::vector<double>& ts,
                                double tol = 1e-10);

/// (1-t) KL(P_lambda || P_lambda0) + t KL(P_lambda || P_lambda1)
double weighted_reverse_kl(const SoftmaxModel& model, const PrimalPoint& lambda,
                           const PrimalPoint& lambda0, const PrimalPoint& lambda1,
                           double t);

/// (1-t) KL(P_lambda0 || P_lambda) + t KL(P_lambda1 || P_lambda)
double weighted_forward_kl(const SoftmaxModel& model, const PrimalPoint& lambda,
                           const PrimalPoint& lambda0, const PrimalPoint& lambda1,
                           double t);

/// Forward objective evaluated at a dual coordinate; resolves the primal
/// preimage first.
double weighted_forward_kl(const SoftmaxModel& model, const DualPoint& phi,
                           const PrimalPoint& lambda0, const PrimalPoint& lambda1,
                           double t, double tol = 1e-10);

} // namespace geosteer
