#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace geosteer {

// Row-major storage so the unembedding matrix maps 1:1 onto the SGM payload.
using MatrixRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A representation vector in the primal (natural-parameter) space.
struct PrimalPoint {
    Eigen::VectorXd lambda;
};

/// A mean-parameter vector, the image of a primal point under the dual map.
struct DualPoint {
    Eigen::VectorXd phi;
};

enum class errc {
    dimension_mismatch,
    malformed_header,
    payload_truncated,
    vocabulary_too_small,
    duplicate_labels,
    non_finite,
    io_failure,
    invalid_argument,
    not_in_dual_image,
    degenerate_probe,
    no_pair_mass,
    not_factorizable,
    zero_displacement,
    singular_system,
    no_minimizer,
    distribution_collapsed,
};

const char* errc_name(errc code);

class Error : public std::runtime_error {
  public:
    Error(errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message),
          code_(code) {}

    errc code() const { return code_; }

  private:
    errc code_;
};

enum class KlDirection { forward, reverse };

inline double sigmoid(double t) {
    if (t >= 0.0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

namespace detail {

// Pairwise (cascade) summation over f(0..n-1). Keeps rounding error at
// O(log n) ulps for the vocabulary-sized reductions used throughout.
template <class F>
double pairwise_sum(std::size_t begin, std::size_t end, const F& f) {
    const std::size_t n = end - begin;
    if (n <= 32) {
        double acc = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            acc += f(i);
        }
        return acc;
    }
    const std::size_t mid = begin + n / 2;
    return pairwise_sum(begin, mid, f) + pairwise_sum(mid, end, f);
}

template <class F>
double pairwise_sum(std::size_t n, const F& f) {
    return pairwise_sum(std::size_t{0}, n, f);
}

} // namespace detail

} // namespace geosteer
