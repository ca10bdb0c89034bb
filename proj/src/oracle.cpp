#include "geosteer/oracle.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace geosteer::oracle {

namespace {

constexpr double kArmijo = 1e-4;

} // namespace

GridMinResult grid_min_weighted_kl(const SoftmaxModel& model,
                                   const PrimalPoint& lambda0,
                                   const PrimalPoint& lambda1, double t,
                                   KlDirection direction, const GridSpec& grid) {
    const auto d = grid.lo.size();
    if (d != model.dim() || grid.hi.size() != d) {
        throw Error(errc::dimension_mismatch, "grid dimension mismatch");
    }
    if (d > 3) {
        throw Error(errc::invalid_argument, "grid oracle supports d <= 3");
    }
    if (grid.points_per_axis < 3) {
        throw Error(errc::invalid_argument, "need at least 3 points per axis");
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        if (!(grid.lo[i] < grid.hi[i])) {
            throw Error(errc::invalid_argument, "grid lo must be below hi");
        }
    }

    const auto objective = [&](const PrimalPoint& point) {
        return direction == KlDirection::reverse
                   ? weighted_reverse_kl(model, point, lambda0, lambda1, t)
                   : weighted_forward_kl(model, point, lambda0, lambda1, t);
    };

    const int n = grid.points_per_axis;
    long total = 1;
    for (Eigen::Index i = 0; i < d; ++i) total *= n;

    GridMinResult best{PrimalPoint{grid.lo},
                       std::numeric_limits<double>::infinity()};
    Eigen::VectorXd x(d);
    for (long flat = 0; flat < total; ++flat) {
        long rest = flat;
        for (Eigen::Index axis = 0; axis < d; ++axis) {
            const long idx = rest % n;
            rest /= n;
            x[axis] = grid.lo[axis] + (grid.hi[axis] - grid.lo[axis]) *
                                          static_cast<double>(idx) /
                                          static_cast<double>(n - 1);
        }
        PrimalPoint point{x};
        const double value = objective(point);
        if (value < best.value) {
            best.value = value;
            best.argmin = point;
        }
    }
    return best;
}

PrimalPoint constrained_min_kl(const SoftmaxModel& model,
                               const PrimalPoint& lambda0,
                               const LinearProbe& probe, double c, int starts,
                               uint64_t seed) {
    if (starts < 1) {
        throw Error(errc::invalid_argument, "need at least one start");
    }
    const int d = model.dim();
    if (probe.beta.size() != d || lambda0.lambda.size() != d) {
        throw Error(errc::dimension_mismatch, "dimension mismatch");
    }

    const Eigen::MatrixXd q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(probe.beta).householderQ();
    const Eigen::MatrixXd basis = d > 1 ? q.rightCols(d - 1) : Eigen::MatrixXd(d, 0);
    const Eigen::VectorXd anchor =
        lambda0.lambda +
        ((c - probe.beta.dot(lambda0.lambda)) / probe.beta.squaredNorm()) *
            probe.beta;
    if (d == 1) {
        return PrimalPoint{anchor};
    }
    const DualPoint phi0 = dual_map(model, lambda0);

    const auto objective = [&](const Eigen::VectorXd& coords) {
        const PrimalPoint point{anchor + basis * coords};
        return log_normalizer(model, point) - phi0.phi.dot(point.lambda);
    };
    const auto gradient = [&](const Eigen::VectorXd& coords) -> Eigen::VectorXd {
        const PrimalPoint point{anchor + basis * coords};
        return basis.transpose() * (dual_map(model, point).phi - phi0.phi);
    };

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double spread = lambda0.lambda.norm() + 1.0;

    bool found = false;
    Eigen::VectorXd best_coords;
    double best_value = std::numeric_limits<double>::infinity();

    for (int s = 0; s < starts; ++s) {
        Eigen::VectorXd coords(d - 1);
        if (s == 0) {
            coords.setZero(); // anchor start
        } else {
            for (Eigen::Index i = 0; i < coords.size(); ++i) {
                coords[i] = gauss(rng) * spread;
            }
        }

        bool diverged = false;
        double value = objective(coords);
        for (int it = 0; it < 20000; ++it) {
            const Eigen::VectorXd grad = gradient(coords);
            if (grad.norm() <= 1e-10) break;
            double step = 1.0;
            bool moved = false;
            const double g2 = grad.squaredNorm();
            for (int half = 0; half < 60; ++half) {
                const Eigen::VectorXd candidate = coords - step * grad;
                const double cand_value = objective(candidate);
                if (cand_value <= value - kArmijo * step * g2) {
                    coords = candidate;
                    value = cand_value;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) break;
            if (coords.norm() > 1e10 || !std::isfinite(value)) {
                diverged = true;
                break;
            }
        }
        if (!diverged && std::isfinite(value) && value < best_value) {
            best_value = value;
            best_coords = coords;
            found = true;
        }
    }

    if (!found) {
        throw Error(errc::no_minimizer, "all descent starts diverged");
    }
    return PrimalPoint{anchor + basis * best_coords};
}

Eigen::VectorXd finite_diff_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h) {
    if (!(h > 0.0)) {
        throw Error(errc::invalid_argument, "h must be positive");
    }
    Eigen::VectorXd grad(x.size());
    Eigen::VectorXd probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double up = f(probe);
        probe[i] = x[i] - h;
        const double down = f(probe);
        probe[i] = x[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

Eigen::MatrixXd finite_diff_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g,
    const Eigen::VectorXd& x, double h) {
    if (!(h > 0.0)) {
        throw Error(errc::invalid_argument, "h must be positive");
    }
    Eigen::VectorXd probe = x;
    probe[0] = x[0] + h;
    const Eigen::VectorXd sample = g(probe);
    probe[0] = x[0];
    Eigen::MatrixXd jac(sample.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const Eigen::VectorXd up = g(probe);
        probe[i] = x[i] - h;
        const Eigen::VectorXd down = g(probe);
        probe[i] = x[i];
        jac.col(i) = (up - down) / (2.0 * h);
    }
    return jac;
}

long double log_normalizer_ld(const SoftmaxModel& model,
                              const PrimalPoint& lambda) {
    const int v = model.vocab_size();
    std::vector<long double> logits(static_cast<size_t>(v));
    long double max_logit = -std::numeric_limits<long double>::infinity();
    for (int y = 0; y < v; ++y) {
        long double acc = 0.0L;
        for (int j = 0; j < model.dim(); ++j) {
            acc += static_cast<long double>(model.gamma()(y, j)) *
                   static_cast<long double>(lambda.lambda[j]);
        }
        logits[static_cast<size_t>(y)] = acc;
        max_logit = std::max(max_logit, acc);
    }
    long double sum = 0.0L;
    for (long double logit_value : logits) {
        sum += std::exp(logit_value - max_logit);
    }
    return max_logit + std::log(sum);
}

long double kl_direct_ld(const SoftmaxModel& model, const PrimalPoint& lambda_a,
                         const PrimalPoint& lambda_b, double floor) {
    const int v = model.vocab_size();
    const long double za = log_normalizer_ld(model, lambda_a);
    const long double zb = log_normalizer_ld(model, lambda_b);
    long double total = 0.0L;
    for (int y = 0; y < v; ++y) {
        long double la = 0.0L, lb = 0.0L;
        for (int j = 0; j < model.dim(); ++j) {
            la += static_cast<long double>(model.gamma()(y, j)) *
                  static_cast<long double>(lambda_a.lambda[j]);
            lb += static_cast<long double>(model.gamma()(y, j)) *
                  static_cast<long double>(lambda_b.lambda[j]);
        }
        const long double pa = std::exp(la - za);
        const long double pb = std::exp(lb - zb);
        if (pa <= 0.0L) continue;
        total += pa * (std::log(std::max<long double>(pa, floor)) -
                       std::log(std::max<long double>(pb, floor)));
    }
    return total;
}

long double kl_vec_ld(const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                      double floor) {
    long double total = 0.0L;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const long double pi = static_cast<long double>(p[i]);
        if (pi <= 0.0L) continue;
        total += pi * (std::log(pi) -
                       std::log(std::max<long double>(
                           static_cast<long double>(q[i]), floor)));
    }
    return total;
}

} // namespace geosteer::oracle
