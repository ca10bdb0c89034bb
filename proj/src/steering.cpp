#include "geosteer/steering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace geosteer {

namespace {

constexpr double kCollapseThreshold = 1.0 - 1e-12;
constexpr double kDegenerateNorm = 1e-12;

void check_probe(const LinearProbe& probe) {
    if (probe.input_space != ProbeSpace::primal) {
        throw Error(errc::invalid_argument,
                    "steering requires a primal-space probe");
    }
    if (probe.beta.norm() < kDegenerateNorm) {
        throw Error(errc::degenerate_probe, "probe direction is numerically zero");
    }
}

// Shared steering loop; step_direction produces the (unnormalized) update
// from the current point.
template <class StepFn>
SteeringPath run_steering(const SoftmaxModel& model, const ConceptScheme& scheme,
                          const PrimalPoint& lambda0, const LinearProbe& probe,
                          const SteeringConfig& config, SteerMethod method,
                          bool normalize, const StepFn& step_direction) {
    check_probe(probe);
    scheme.validate(model.vocab_size());
    if (config.max_steps < 1 || config.record_every < 1 ||
        !(config.terminate_at > 0.0 && config.terminate_at <= 1.0)) {
        throw Error(errc::invalid_argument, "bad steering config");
    }

    SteeringPath path;
    path.method = method;
    path.probe = probe;
    path.config = config;
    path.points.push_back(lambda0);

    const double eta = resolve_eta(config, lambda0);

    for (int t = 0;; ++t) {
        const PrimalPoint& current = path.points.back();
        const ProbVector p = softmax_probs(model, current);
        const FactorizedView view = factorize_probs(scheme, p.probs);
        if (view.pw[1] >= config.terminate_at) {
            path.terminated = true;
            break;
        }
        if (p.probs.maxCoeff() > kCollapseThreshold) {
            throw Error(errc::distribution_collapsed,
                        "top-1 probability exceeded 1 - 1e-12 at step " +
                            std::to_string(t));
        }
        if (t == config.max_steps) {
            break;
        }

        Eigen::VectorXd dir = step_direction(current);
        if (normalize) {
            const double norm = dir.norm();
            if (!(norm > 0.0) || !dir.allFinite()) {
                throw Error(errc::singular_system,
                            "step direction is zero or non-finite");
            }
            dir /= norm;
        }
        path.points.push_back(PrimalPoint{current.lambda + eta * dir});
    }

    for (size_t i = 0; i < path.points.size(); ++i) {
        const bool last = i + 1 == path.points.size();
        if (i % static_cast<size_t>(config.record_every) == 0 || last) {
            path.recorded_steps.push_back(static_cast<int>(i));
        }
    }
    return path;
}

} // namespace

double resolve_eta(const SteeringConfig& config, const PrimalPoint& lambda0) {
    if (config.eta.has_value()) {
        if (!(*config.eta > 0.0)) {
            throw Error(errc::invalid_argument, "eta must be positive");
        }
        return *config.eta;
    }
    const double d = static_cast<double>(lambda0.lambda.size());
    return std::clamp(0.1 * lambda0.lambda.norm() / std::sqrt(d), 1e-3, 1.0);
}

int resolve_top_k(const SteeringConfig& config, int vocab_size) {
    if (config.top_k.has_value()) {
        if (*config.top_k < 2 || *config.top_k > vocab_size) {
            throw Error(errc::invalid_argument, "top_k outside [2, V]");
        }
        return *config.top_k;
    }
    return vocab_size > 20000 ? 20000 : 0;
}

SteeringPath euclidean_steer(const SoftmaxModel& model,
                             const ConceptScheme& scheme,
                             const PrimalPoint& lambda0,
                             const LinearProbe& probe,
                             const SteeringConfig& config) {
    return run_steering(model, scheme, lambda0, probe, config,
                        SteerMethod::euclidean, config.normalize_euclidean,
                        [&](const PrimalPoint&) {
                            return Eigen::VectorXd(probe.beta);
                        });
}

SteeringPath dual_steer(const SoftmaxModel& model, const ConceptScheme& scheme,
                        const PrimalPoint& lambda0, const LinearProbe& probe,
                        const SteeringConfig& config) {
    if (config.alpha < 0.0) {
        throw Error(errc::invalid_argument, "alpha must be >= 0");
    }
    const int top_k = resolve_top_k(config, model.vocab_size());

    bool rank_deficient = false;
    SteeringPath path = run_steering(
        model, scheme, lambda0, probe, config, SteerMethod::dual,
        /*normalize=*/true, [&, top_k](const PrimalPoint& current) {
            Eigen::MatrixXd sigma =
                hessian(model, current,
                        top_k > 0 ? std::optional<int>(top_k) : std::nullopt)
                    .cov;
            Eigen::VectorXd v;
            if (config.alpha > 0.0) {
                sigma.diagonal().array() += config.alpha;
                v = Eigen::LDLT<Eigen::MatrixXd>(sigma).solve(probe.beta);
            } else {
                Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(sigma);
                v = cod.solve(probe.beta);
                if (cod.rank() < sigma.rows()) {
                    rank_deficient = true;
                }
            }
            if (!v.allFinite()) {
                throw Error(errc::singular_system,
                            "regularized solve produced non-finite direction");
            }
            return v;
        });
    path.rank_deficient = rank_deficient;
    return path;
}

PrimalPoint dual_projection_target(const SoftmaxModel& model,
                                   const PrimalPoint& lambda0,
                                   const LinearProbe& probe, double c,
                                   double tol) {
    check_probe(probe);
    const int d = model.dim();
    if (lambda0.lambda.size() != d || probe.beta.size() != d) {
        throw Error(errc::dimension_mismatch, "dimension mismatch");
    }
    if (d < 2) {
        // Hyperplane has a single point.
        const double shift = (c - probe.beta.dot(lambda0.lambda)) /
                             probe.beta.squaredNorm();
        return PrimalPoint{lambda0.lambda + shift * probe.beta};
    }

    // Orthonormal basis of the nullspace of beta^T via full QR of beta.
    const Eigen::MatrixXd q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(probe.beta).householderQ();
    const Eigen::MatrixXd basis = q.rightCols(d - 1);

    const Eigen::VectorXd anchor =
        lambda0.lambda +
        ((c - probe.beta.dot(lambda0.lambda)) / probe.beta.squaredNorm()) *
            probe.beta;
    const DualPoint phi0 = dual_map(model, lambda0);

    // Minimize A(anchor + basis a) - phi0 . (anchor + basis a) over a.
    Eigen::VectorXd a = Eigen::VectorXd::Zero(d - 1);
    const auto objective = [&](const Eigen::VectorXd& coords) {
        const PrimalPoint point{anchor + basis * coords};
        return log_normalizer(model, point) - phi0.phi.dot(point.lambda);
    };

    const int max_iter = 200;
    for (int it = 0; it < max_iter; ++it) {
        const PrimalPoint point{anchor + basis * a};
        const DualPoint phi = dual_map(model, point);
        const Eigen::VectorXd grad = basis.transpose() * (phi.phi - phi0.phi);
        if (grad.norm() <= tol) {
            return point;
        }

        Eigen::MatrixXd h =
            basis.transpose() * hessian(model, point).cov * basis;
        h.diagonal().array() += 1e-12;
        const Eigen::VectorXd step = Eigen::LDLT<Eigen::MatrixXd>(h).solve(-grad);
        if (!step.allFinite()) {
            throw Error(errc::no_minimizer, "projected Newton step non-finite");
        }

        const double f0 = objective(a);
        const double slope = grad.dot(step);
        // evaluation noise scales with the logit magnitudes, well above
        // eps * |f0|; below this the decrease is unmeasurable
        const double resolution = 1e-13 * std::max(1.0, std::abs(f0));
        if (-slope <= resolution) {
            a += step; // quadratic basin; see inverse_dual_map
            continue;
        }
        double scale = 1.0;
        bool moved = false;
        for (int half = 0; half < 60; ++half) {
            const Eigen::VectorXd candidate = a + scale * step;
            if (objective(candidate) <= f0 + 1e-4 * scale * slope + resolution) {
                a = candidate;
                moved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!moved) {
            break;
        }
        if (a.norm() > 1e10) {
            throw Error(errc::no_minimizer,
                        "hyperplane iterates diverged; no minimizer");
        }
    }

    const PrimalPoint point{anchor + basis * a};
    const Eigen::VectorXd grad =
        basis.transpose() * (dual_map(model, point).phi - phi0.phi);
    if (grad.norm() <= tol) {
        return point;
    }
    throw Error(errc::no_minimizer,
                "projected gradient did not reach tolerance (" +
                    std::to_string(grad.norm()) + ")");
}

} // namespace geosteer
