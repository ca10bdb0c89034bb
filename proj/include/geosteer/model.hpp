#pragma once

#include "geosteer/common.hpp"

#include <string>
#include <utility>
#include <vector>

namespace geosteer {

/// A finite softmax family: item labels plus one unembedding vector per item.
/// Immutable after construction; safe to share across threads.
class SoftmaxModel {
  public:
    /// Validates V >= 2, d >= 1, unique labels, finite entries.
    SoftmaxModel(std::vector<std::string> labels, MatrixRM gamma);

    int vocab_size() const { return static_cast<int>(gamma_.rows()); }
    int dim() const { return static_cast<int>(gamma_.cols()); }
    const std::vector<std::string>& labels() const { return labels_; }
    const MatrixRM& gamma() const { return gamma_; }

  private:
    std::vector<std::string> labels_;
    MatrixRM gamma_;
};

struct RestrictedModel {
    SoftmaxModel model;
    std::vector<int> index_map; // new index -> original index, ascending
};

/// Reads an SGM file (JSON header line + little-endian float64 payload, or
/// the inline pure-JSON variant).
SoftmaxModel load_model(const std::string& path);

/// Writes the binary SGM form atomically (temp file + rename); a reload
/// reproduces the matrix bit-exactly.
void save_model(const SoftmaxModel& model, const std::string& path);

/// Sub-model of the k items most probable under lambda (ties broken by lower
/// original index). Kept rows are unchanged and keep their relative order.
RestrictedModel restrict_top_k(const SoftmaxModel& model,
                               const PrimalPoint& lambda, int k);

namespace detail {

/// Indices of the k largest entries of probs, ties broken by lower index;
/// returned in descending-probability order.
std::vector<int> top_k_indices(const Eigen::VectorXd& probs, int k);

} // namespace detail

} // namespace geosteer
