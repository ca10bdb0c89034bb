#include "geosteer/interpolation.hpp"

#include <string>

namespace geosteer {

namespace {

void check_ts(const std::vector<double>& ts) {
    if (ts.empty()) {
        throw Error(errc::invalid_argument, "ts must be nonempty");
    }
    if (ts.front() != 0.0 || ts.back() != 1.0) {
        throw Error(errc::invalid_argument, "ts must start at 0 and end at 1");
    }
    for (size_t i = 1; i < ts.size(); ++i) {
        if (!(ts[i] > ts[i - 1])) {
            throw Error(errc::invalid_argument, "ts must be strictly increasing");
        }
    }
}

} // namespace

InterpolationPath e_interpolate(const SoftmaxModel& model,
                                const PrimalPoint& lambda0,
                                const PrimalPoint& lambda1,
                                const std::vector<double>& ts) {
    check_ts(ts);
    if (lambda0.lambda.size() != model.dim() ||
        lambda1.lambda.size() != model.dim()) {
        throw Error(errc::dimension_mismatch, "endpoint dimension mismatch");
    }
    InterpolationPath path;
    path.kind = PathKind::primal;
    path.ts = ts;
    path.points.reserve(ts.size());
    path.dual_points.reserve(ts.size());
    for (double t : ts) {
        PrimalPoint p{(1.0 - t) * lambda0.lambda + t * lambda1.lambda};
        path.dual_points.push_back(dual_map(model, p));
        path.points.push_back(std::move(p));
    }
    return path;
}

InterpolationPath m_interpolate(const SoftmaxModel& model,
                                const PrimalPoint& lambda0,
                                const PrimalPoint& lambda1,
                                const std::vector<double>& ts, double tol) {
    check_ts(ts);
    const DualPoint phi0 = dual_map(model, lambda0);
    const DualPoint phi1 = dual_map(model, lambda1);

    InterpolationPath path;
    path.kind = PathKind::dual;
    path.ts = ts;
    path.points.reserve(ts.size());
    path.dual_points.reserve(ts.size());

    PrimalPoint warm = lambda0;
    for (double t : ts) {
        DualPoint phi_t{(1.0 - t) * phi0.phi + t * phi1.phi};
        PrimalPoint p;
        try {
            p = inverse_dual_map(model, phi_t, tol, 200, &warm);
        } catch (const Error& err) {
            if (err.code() == errc::not_in_dual_image) {
                throw Error(errc::not_in_dual_image,
                            "no preimage at t = " + std::to_string(t));
            }
            throw;
        }
        warm = p;
        path.points.push_back(std::move(p));
        path.dual_points.push_back(std::move(phi_t));
    }
    return path;
}

double weighted_reverse_kl(const SoftmaxModel& model, const PrimalPoint& lambda,
                           const PrimalPoint& lambda0,
                           const PrimalPoint& lambda1, double t) {
    return (1.0 - t) * kl(model, lambda, lambda0) + t * kl(model, lambda, lambda1);
}

double weighted_forward_kl(const SoftmaxModel& model, const PrimalPoint& lambda,
                           const PrimalPoint& lambda0,
                           const PrimalPoint& lambda1, double t) {
    return (1.0 - t) * kl(model, lambda0, lambda) + t * kl(model, lambda1, lambda);
}

double weighted_forward_kl(const SoftmaxModel& model, const DualPoint& phi,
                           const PrimalPoint& lambda0,
                           const PrimalPoint& lambda1, double t, double tol) {
    const PrimalPoint lambda = inverse_dual_map(model, phi, tol, 200);
    return weighted_forward_kl(model, lambda, lambda0, lambda1, t);
}

} // namespace geosteer
