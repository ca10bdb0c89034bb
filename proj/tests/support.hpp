#pragma once

#include "geosteer/concepts.hpp"
#include "geosteer/model.hpp"

#include <random>
#include <string>
#include <vector>

namespace testsupport {

using namespace geosteer;

// Canonical 3-item, 2-dim model: gamma_a = (1,0), gamma_b = (0,1),
// gamma_c = (0,0).
inline SoftmaxModel t1() {
    MatrixRM gamma(3, 2);
    gamma << 1, 0, 0, 1, 0, 0;
    return SoftmaxModel({"a", "b", "c"}, std::move(gamma));
}

inline SoftmaxModel random_model(std::mt19937_64& rng, int vocab, int dim,
                                 double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    MatrixRM gamma(vocab, dim);
    for (int i = 0; i < vocab; ++i) {
        for (int j = 0; j < dim; ++j) {
            gamma(i, j) = scale * gauss(rng);
        }
    }
    std::vector<std::string> labels;
    for (int i = 0; i < vocab; ++i) {
        labels.push_back("item" + std::to_string(i));
    }
    return SoftmaxModel(std::move(labels), std::move(gamma));
}

inline PrimalPoint random_point(std::mt19937_64& rng, int dim,
                                double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd lambda(dim);
    for (int j = 0; j < dim; ++j) {
        lambda[j] = scale * gauss(rng);
    }
    return PrimalPoint{lambda};
}

// Exactly factorizable testbed with Gaussian attribute directions.
inline SynthesizedConcept random_testbed(std::mt19937_64& rng, int n_pairs,
                                         int n_neutral, int dim,
                                         double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    FactorizableModelSpec spec;
    spec.shared_dirs.resize(n_pairs, dim);
    spec.neutral_dirs.resize(n_neutral, dim);
    spec.concept_dir.resize(dim);
    for (int i = 0; i < n_pairs; ++i) {
        for (int j = 0; j < dim; ++j) spec.shared_dirs(i, j) = scale * gauss(rng);
    }
    for (int j = 0; j < dim; ++j) spec.concept_dir[j] = scale * gauss(rng);
    for (int i = 0; i < n_neutral; ++i) {
        for (int j = 0; j < dim; ++j) spec.neutral_dirs(i, j) = scale * gauss(rng);
    }
    std::vector<std::string> labels;
    for (int i = 0; i < n_pairs; ++i) {
        labels.push_back("p" + std::to_string(i) + "b");
        labels.push_back("p" + std::to_string(i) + "t");
    }
    for (int j = 0; j < n_neutral; ++j) {
        labels.push_back("n" + std::to_string(j));
    }
    return synthesize_factorizable(spec, labels);
}

} // namespace testsupport
