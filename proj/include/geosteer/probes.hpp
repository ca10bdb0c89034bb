#pragma once

#include "geosteer/geometry.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace geosteer {

struct ConceptScheme; // concepts.hpp

enum class ProbeSpace { primal, dual };

/// A linear concept probe: P(W=1 | x) = sigmoid(beta . x + offset), where x
/// is the primal vector or its dual image depending on input_space.
struct LinearProbe {
    Eigen::VectorXd beta;
    double offset = 0.0;
    ProbeSpace input_space = ProbeSpace::primal;
};

/// beta = mean(target) - mean(base) over primal points; offset 0.
LinearProbe primal_mean_difference(const std::vector<PrimalPoint>& base,
                                   const std::vector<PrimalPoint>& target);

/// Same, but each point is first sent through the dual map. The result is
/// still applied to primal vectors when steering.
LinearProbe dual_mean_difference(const SoftmaxModel& model,
                                 const std::vector<PrimalPoint>& base,
                                 const std::vector<PrimalPoint>& target);

/// beta . x + offset with x resolved per input_space.
double probe_logit(const LinearProbe& probe, const SoftmaxModel& model,
                   const PrimalPoint& lambda);

/// beta . x / |beta|, the normalized projection onto the probe direction.
double probe_projection(const LinearProbe& probe, const SoftmaxModel& model,
                        const PrimalPoint& lambda);

/// Full-batch gradient-descent logistic regression; deterministic given the
/// input ordering. Labels must include both classes.
LinearProbe fit_logistic_probe(
    const std::vector<std::pair<PrimalPoint, int>>& points, int iters = 500,
    double lr = 0.5);

struct ProbeTracePoint {
    double projection;    // beta . lambda_t / |beta|
    double concept_logit; // logit of the factorized P(W=1 | lambda_t)
};

/// Per-step (projection, concept logit) pairs along a steering path; the
/// raw material for checking how well the probing assumption holds.
std::vector<ProbeTracePoint> probe_assumption_trace(
    const LinearProbe& probe, const SoftmaxModel& model,
    std::span<const PrimalPoint> path, const ConceptScheme& scheme);

std::string probe_to_json(const LinearProbe& probe);
LinearProbe probe_from_json(const std::string& text);
LinearProbe load_probe(const std::string& path);
void save_probe(const LinearProbe& probe, const std::string& path);

} // namespace geosteer
