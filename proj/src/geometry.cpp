#include "geosteer/geometry.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace geosteer {

namespace {

void check_dim(const SoftmaxModel& model, const Eigen::VectorXd& x,
               const char* what) {
    if (x.size() != model.dim()) {
        throw Error(errc::dimension_mismatch,
                    std::string(what) + " has dimension " +
                        std::to_string(x.size()) + ", model expects " +
                        std::to_string(model.dim()));
    }
}

} // namespace

double log_normalizer(const SoftmaxModel& model, const PrimalPoint& lambda) {
    check_dim(model, lambda.lambda, "lambda");
    const Eigen::VectorXd logits = model.gamma() * lambda.lambda;
    const double max_logit = logits.maxCoeff();
    const double sum = detail::pairwise_sum(
        static_cast<size_t>(logits.size()),
        [&](size_t i) { return std::exp(logits[static_cast<Eigen::Index>(i)] - max_logit); });
    const double a = max_logit + std::log(sum);
    if (!std::isfinite(a)) {
        throw Error(errc::non_finite, "log-normalizer overflowed");
    }
    return a;
}

ProbVector softmax_probs(const SoftmaxModel& model, const PrimalPoint& lambda) {
    check_dim(model, lambda.lambda, "lambda");
    const Eigen::VectorXd logits = model.gamma() * lambda.lambda;
    const double max_logit = logits.maxCoeff();
    const double sum = detail::pairwise_sum(
        static_cast<size_t>(logits.size()),
        [&](size_t i) { return std::exp(logits[static_cast<Eigen::Index>(i)] - max_logit); });
    const double a = max_logit + std::log(sum);
    if (!std::isfinite(a)) {
        throw Error(errc::non_finite, "log-normalizer overflowed");
    }
    ProbVector out;
    out.probs = (logits.array() - a).exp();
    return out;
}

DualPoint dual_map(const SoftmaxModel& model, const PrimalPoint& lambda) {
    const ProbVector p = softmax_probs(model, lambda);
    const auto v = static_cast<size_t>(model.vocab_size());
    DualPoint out;
    out.phi.resize(model.dim());
    for (int j = 0; j < model.dim(); ++j) {
        out.phi[j] = detail::pairwise_sum(v, [&](size_t i) {
            const auto row = static_cast<Eigen::Index>(i);
            return p.probs[row] * model.gamma()(row, j);
        });
    }
    return out;
}

HessianMatrix hessian(const SoftmaxModel& model, const PrimalPoint& lambda,
                      std::optional<int> top_k) {
    const ProbVector full = softmax_probs(model, lambda);

    std::vector<int> keep;
    Eigen::VectorXd p;
    if (top_k.has_value()) {
        if (*top_k < 1 || *top_k > model.vocab_size()) {
            throw Error(errc::invalid_argument, "top_k outside [1, V]");
        }
        keep = detail::top_k_indices(full.probs, *top_k);
        p.resize(*top_k);
        for (int i = 0; i < *top_k; ++i) {
            p[i] = full.probs[keep[static_cast<size_t>(i)]];
        }
        p /= p.sum(); // renormalize over the kept items
    } else {
        keep.resize(static_cast<size_t>(model.vocab_size()));
        for (int i = 0; i < model.vocab_size(); ++i) keep[static_cast<size_t>(i)] = i;
        p = full.probs;
    }

    const int d = model.dim();
    const auto n = static_cast<size_t>(keep.size());
    Eigen::VectorXd mean(d);
    for (int j = 0; j < d; ++j) {
        mean[j] = detail::pairwise_sum(n, [&](size_t i) {
            return p[static_cast<Eigen::Index>(i)] * model.gamma()(keep[i], j);
        });
    }

    HessianMatrix out;
    out.cov.resize(d, d);
    for (int j = 0; j < d; ++j) {
        for (int k = j; k < d; ++k) {
            const double value = detail::pairwise_sum(n, [&](size_t i) {
                const auto row = keep[i];
                return p[static_cast<Eigen::Index>(i)] *
                       (model.gamma()(row, j) - mean[j]) *
                       (model.gamma()(row, k) - mean[k]);
            });
            out.cov(j, k) = value;
            out.cov(k, j) = value;
        }
    }
    return out;
}

double kl(const SoftmaxModel& model, const PrimalPoint& lambda_a,
          const PrimalPoint& lambda_b) {
    check_dim(model, lambda_a.lambda, "lambda_a");
    check_dim(model, lambda_b.lambda, "lambda_b");
    const double a0 = log_normalizer(model, lambda_a);
    const double a1 = log_normalizer(model, lambda_b);
    const DualPoint phi = dual_map(model, lambda_a);
    return a1 - a0 - phi.phi.dot(lambda_b.lambda - lambda_a.lambda);
}

double kl_direct(const SoftmaxModel& model, const PrimalPoint& lambda_a,
                 const PrimalPoint& lambda_b, double floor) {
    const ProbVector pa = softmax_probs(model, lambda_a);
    const ProbVector pb = softmax_probs(model, lambda_b);
    return detail::pairwise_sum(
        static_cast<size_t>(model.vocab_size()), [&](size_t i) {
            const auto row = static_cast<Eigen::Index>(i);
            const double p = pa.probs[row];
            if (p <= 0.0) return 0.0;
            return p * (std::log(std::max(p, floor)) -
                        std::log(std::max(pb.probs[row], floor)));
        });
}

double conjugate(const SoftmaxModel& model, const DualPoint& phi) {
    const PrimalPoint lambda = inverse_dual_map(model, phi, 1e-10, 200);
    return lambda.lambda.dot(phi.phi) - log_normalizer(model, lambda);
}

PrimalPoint inverse_dual_map(const SoftmaxModel& model, const DualPoint& phi,
                             double tol, int max_iter,
                             const PrimalPoint* warm_start) {
    check_dim(model, phi.phi, "phi");
    const int d = model.dim();
    PrimalPoint lambda;
    if (warm_start != nullptr) {
        check_dim(model, warm_start->lambda, "warm_start");
        lambda.lambda = warm_start->lambda;
    } else {
        lambda.lambda = Eigen::VectorXd::Zero(d);
    }

    // Strictly convex objective A(lambda) - phi . lambda; its gradient is
    // dual_map(lambda) - phi.
    const auto objective = [&](const Eigen::VectorXd& x) {
        return log_normalizer(model, PrimalPoint{x}) - phi.phi.dot(x);
    };

    double grad_norm = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        const DualPoint current = dual_map(model, lambda);
        const Eigen::VectorXd grad = current.phi - phi.phi;
        grad_norm = grad.norm();
        if (grad_norm <= tol) {
            return lambda;
        }

        Eigen::MatrixXd h = hessian(model, lambda).cov;
        h.diagonal().array() += 1e-10;
        const Eigen::VectorXd step = Eigen::LDLT<Eigen::MatrixXd>(h).solve(-grad);
        if (!step.allFinite()) {
            throw Error(errc::not_in_dual_image, "Newton step is non-finite");
        }

        const double f0 = objective(lambda.lambda);
        const double slope = grad.dot(step);
        // evaluation noise scales with the logit magnitudes, well above
        // eps * |f0|; below this the decrease is unmeasurable
        const double resolution = 1e-13 * std::max(1.0, std::abs(f0));
        if (-slope <= resolution) {
            // Inside the quadratic basin the objective can no longer resolve
            // the predicted decrease; the undamped Newton step contracts the
            // gradient, while a backtracking test would only chase rounding
            // noise.
            lambda.lambda += step;
            continue;
        }
        double scale = 1.0;
        bool moved = false;
        for (int half = 0; half < 60; ++half) {
            const Eigen::VectorXd candidate = lambda.lambda + scale * step;
            if (objective(candidate) <= f0 + 1e-4 * scale * slope + resolution) {
                lambda.lambda = candidate;
                moved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!moved) {
            break; // stalled at numerical resolution
        }
    }

    grad_norm = (dual_map(model, lambda).phi - phi.phi).norm();
    if (grad_norm <= tol) {
        return lambda;
    }
    throw Error(errc::not_in_dual_image,
                "no preimage within tolerance (residual " +
                    std::to_string(grad_norm) + ")");
}

} // namespace geosteer
