#pragma once

#include "geosteer/geometry.hpp"
#include "geosteer/probes.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace geosteer {

/// A binary concept over a model's items: counterfactual (base, target)
/// pairs, neutral items, and an optional map folding extra base items into
/// an existing pair's cell. Pairs, neutral items, and collapse members must
/// be disjoint and together cover every item exactly once.
struct ConceptScheme {
    std::vector<std::pair<int, int>> pairs; // (base, target) item indices
    std::vector<int> neutral;
    std::map<int, int> collapse; // extra base item index -> pair index

    int n_pairs() const { return static_cast<int>(pairs.size()); }
    int n_cells() const {
        return static_cast<int>(pairs.size() + neutral.size());
    }

    /// Throws InvalidArgument unless the scheme is a disjoint cover of
    /// {0..vocab_size-1}.
    void validate(int vocab_size) const;
};

/// The induced (concept, off-target) marginals of a distribution. pz lists
/// the pair cells first (scheme order), then the neutral cells.
struct FactorizedView {
    Eigen::Vector2d pw;
    Eigen::VectorXd pz;
    int n_pairs = 0;

    double pair_mass() const { return pz.head(n_pairs).sum(); }
};

/// Marginalizes a distribution onto the concept and off-target spaces.
/// Well-defined for any distribution with positive counterfactual mass;
/// throws NoPairMass when that mass underflows.
FactorizedView factorize(const SoftmaxModel& model, const ConceptScheme& scheme,
                         const PrimalPoint& lambda);

/// Variant on a precomputed probability vector (shared by the metric loops).
FactorizedView factorize_probs(const ConceptScheme& scheme,
                               const Eigen::VectorXd& probs);

/// max_i,w |P(y_i^w) - pw(w) pz(z_i)|; zero iff the distribution factorizes
/// exactly over the scheme.
double factorization_residual(const SoftmaxModel& model,
                              const ConceptScheme& scheme,
                              const PrimalPoint& lambda);
double factorization_residual_probs(const ConceptScheme& scheme,
                                    const Eigen::VectorXd& probs);

/// Blueprint for a model whose every distribution factorizes exactly:
/// gamma(y_i^w) = shared_dirs[i] + w * concept_dir, gamma(neutral) as given.
struct FactorizableModelSpec {
    MatrixRM shared_dirs;      // n_pairs x d
    Eigen::VectorXd concept_dir; // d
    MatrixRM neutral_dirs;     // n_neutral x d (may have zero rows)
};

struct SynthesizedConcept {
    SoftmaxModel model;
    ConceptScheme scheme;
    LinearProbe probe; // exact: P(W=1 | lambda) = sigmoid(concept_dir . lambda)
};

/// Items are laid out pair-by-pair (base then target) followed by the
/// neutral items; labels must match that layout.
SynthesizedConcept synthesize_factorizable(const FactorizableModelSpec& spec,
                                           const std::vector<std::string>& labels);

std::string scheme_to_json(const ConceptScheme& scheme);
ConceptScheme scheme_from_json(const std::string& text);
ConceptScheme load_scheme(const std::string& path, int vocab_size);
void save_scheme(const ConceptScheme& scheme, const std::string& path);

} // namespace geosteer
