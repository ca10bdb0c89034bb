#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "geosteer/concepts.hpp"
#include "geosteer/probes.hpp"
#include "support.hpp"

#include <cmath>
#include <random>

using namespace geosteer;
using testsupport::random_point;
using testsupport::random_testbed;
using testsupport::t1;

TEST_CASE("primal mean difference basics") {
    const LinearProbe single = primal_mean_difference(
        {PrimalPoint{Eigen::Vector2d(0, 0)}}, {PrimalPoint{Eigen::Vector2d(1, 2)}});
    CHECK((single.beta.array() == Eigen::Vector2d(1, 2).array()).all());
    CHECK(single.offset == 0.0);
    CHECK(single.input_space == ProbeSpace::primal);

    const LinearProbe averaged = primal_mean_difference(
        {PrimalPoint{Eigen::Vector2d(1, 0)}, PrimalPoint{Eigen::Vector2d(-1, 0)}},
        {PrimalPoint{Eigen::Vector2d(0, 1)}, PrimalPoint{Eigen::Vector2d(0, 3)}});
    CHECK((averaged.beta.array() == Eigen::Vector2d(0, 2).array()).all());

    // permutation invariance
    const LinearProbe permuted = primal_mean_difference(
        {PrimalPoint{Eigen::Vector2d(-1, 0)}, PrimalPoint{Eigen::Vector2d(1, 0)}},
        {PrimalPoint{Eigen::Vector2d(0, 3)}, PrimalPoint{Eigen::Vector2d(0, 1)}});
    CHECK((permuted.beta.array() == averaged.beta.array()).all());

    // beta depends on the inputs only through the two means
    const LinearProbe collapsed = primal_mean_difference(
        {PrimalPoint{Eigen::Vector2d(0, 0)}}, {PrimalPoint{Eigen::Vector2d(0, 2)}});
    CHECK((collapsed.beta - averaged.beta).cwiseAbs().maxCoeff() < 1e-15);

    CHECK_THROWS_AS(primal_mean_difference({}, {PrimalPoint{Eigen::Vector2d(1, 1)}}),
                    Error);
}

TEST_CASE("dual mean difference: T1 closed form and degenerate rejection") {
    const SoftmaxModel model = t1();
    const LinearProbe probe = dual_mean_difference(
        model, {PrimalPoint{Eigen::Vector2d(0, 0)}},
        {PrimalPoint{Eigen::Vector2d(std::log(2.0), 0)}});
    CHECK(probe.beta[0] == doctest::Approx(0.5 - 1.0 / 3.0).epsilon(1e-12));
    CHECK(probe.beta[1] == doctest::Approx(0.25 - 1.0 / 3.0).epsilon(1e-12));

    try {
        dual_mean_difference(model, {PrimalPoint{Eigen::Vector2d(0.4, 0.2)}},
                             {PrimalPoint{Eigen::Vector2d(0.4, 0.2)}});
        FAIL("expected DegenerateProbe");
    } catch (const Error& err) {
        CHECK(err.code() == errc::degenerate_probe);
    }
}

TEST_CASE("dual mean difference equals per-point dual-map average") {
    std::mt19937_64 rng(3);
    const SoftmaxModel model = testsupport::random_model(rng, 10, 3);
    std::vector<PrimalPoint> base, target;
    for (int i = 0; i < 4; ++i) base.push_back(random_point(rng, 3));
    for (int i = 0; i < 3; ++i) target.push_back(random_point(rng, 3));

    Eigen::VectorXd mb = Eigen::VectorXd::Zero(3), mt = Eigen::VectorXd::Zero(3);
    for (const auto& p : base) mb += dual_map(model, p).phi;
    for (const auto& p : target) mt += dual_map(model, p).phi;
    const Eigen::VectorXd expected = mt / 3.0 - mb / 4.0;

    const LinearProbe probe = dual_mean_difference(model, base, target);
    CHECK((probe.beta - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("probe logit and projection") {
    const SoftmaxModel model = t1();
    LinearProbe probe;
    probe.beta = Eigen::Vector2d(0, 1);
    probe.offset = 0.0;
    const PrimalPoint lambda{Eigen::Vector2d(5, 2)};
    CHECK(probe_logit(probe, model, lambda) == 2.0);
    CHECK(probe_projection(probe, model, lambda) == 2.0);

    // positive scaling changes the logit but not the classification
    probe.beta *= 3.0;
    CHECK(probe_logit(probe, model, lambda) == 6.0);
    CHECK(probe_projection(probe, model, lambda) == 2.0);
}

TEST_CASE("probe_logit is affine in lambda for primal probes") {
    std::mt19937_64 rng(5);
    const SoftmaxModel model = testsupport::random_model(rng, 6, 4);
    LinearProbe probe;
    probe.beta = random_point(rng, 4).lambda;
    probe.offset = 0.7;
    const PrimalPoint a = random_point(rng, 4);
    const PrimalPoint b = random_point(rng, 4);
    const double w = 0.3;
    const PrimalPoint mix{w * a.lambda + (1 - w) * b.lambda};
    const double lhs = probe_logit(probe, model, mix);
    // affine, not linear: offsets weigh in once
    const double rhs = w * probe_logit(probe, model, a) +
                       (1 - w) * probe_logit(probe, model, b);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("sigmoid of probe logit equals factorized target probability") {
    std::mt19937_64 rng(7);
    const SynthesizedConcept testbed = random_testbed(rng, 2, 1, 4);
    for (int trial = 0; trial < 30; ++trial) {
        const PrimalPoint lambda = random_point(rng, 4, 1.5);
        const double predicted =
            sigmoid(probe_logit(testbed.probe, testbed.model, lambda));
        const double actual =
            factorize(testbed.model, testbed.scheme, lambda).pw[1];
        CHECK(std::abs(predicted - actual) < 1e-10);
    }
}

TEST_CASE("logistic fit separates a separable pair") {
    std::vector<std::pair<PrimalPoint, int>> points = {
        {PrimalPoint{Eigen::Vector2d(-1, 0)}, 0},
        {PrimalPoint{Eigen::Vector2d(1, 0)}, 1},
    };
    const LinearProbe probe = fit_logistic_probe(points, 2000, 1.0);
    const SoftmaxModel model = t1();
    CHECK(probe_logit(probe, model, points[0].first) < 0.0);
    CHECK(probe_logit(probe, model, points[1].first) > 0.0);
}

TEST_CASE("logistic fit: flipping labels negates the boundary") {
    std::mt19937_64 rng(11);
    std::vector<std::pair<PrimalPoint, int>> points, flipped;
    for (int i = 0; i < 20; ++i) {
        const PrimalPoint p = random_point(rng, 3);
        const int label = p.lambda[0] + 0.3 * p.lambda[1] > 0 ? 1 : 0;
        points.emplace_back(p, label);
        flipped.emplace_back(p, 1 - label);
    }
    const LinearProbe probe = fit_logistic_probe(points, 500, 0.5);
    const LinearProbe anti = fit_logistic_probe(flipped, 500, 0.5);
    CHECK((probe.beta + anti.beta).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(probe.offset == doctest::Approx(-anti.offset).epsilon(1e-9));
}

TEST_CASE("logistic fit recovers the planted direction") {
    std::mt19937_64 rng(13);
    const Eigen::Vector3d planted(1.0, -2.0, 0.5);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<std::pair<PrimalPoint, int>> points;
    for (int i = 0; i < 2000; ++i) {
        const PrimalPoint p = random_point(rng, 3, 2.0);
        const int label = coin(rng) < sigmoid(planted.dot(p.lambda)) ? 1 : 0;
        points.emplace_back(p, label);
    }
    const LinearProbe probe = fit_logistic_probe(points, 3000, 1.0);
    const double cosine =
        probe.beta.dot(planted) / (probe.beta.norm() * planted.norm());
    CHECK(cosine >= 0.99);
}

TEST_CASE("logistic fit rejects single-label input") {
    std::vector<std::pair<PrimalPoint, int>> points = {
        {PrimalPoint{Eigen::Vector2d(1, 0)}, 1},
        {PrimalPoint{Eigen::Vector2d(2, 0)}, 1},
    };
    CHECK_THROWS_AS(fit_logistic_probe(points), Error);
}

TEST_CASE("probe assumption trace: exact testbed lies on a line") {
    std::mt19937_64 rng(17);
    const SynthesizedConcept testbed = random_testbed(rng, 2, 1, 4);
    std::vector<PrimalPoint> path;
    PrimalPoint point = random_point(rng, 4);
    for (int i = 0; i < 12; ++i) {
        path.push_back(point);
        point.lambda += 0.25 * testbed.probe.beta / testbed.probe.beta.norm();
    }
    const std::vector<ProbeTracePoint> trace =
        probe_assumption_trace(testbed.probe, testbed.model, path, testbed.scheme);
    const double norm = testbed.probe.beta.norm();
    for (const auto& sample : trace) {
        CHECK(std::abs(sample.concept_logit -
                       (norm * sample.projection + testbed.probe.offset)) < 1e-8);
    }

    // constant path gives a constant trace
    const std::vector<PrimalPoint> constant(5, path.front());
    const std::vector<ProbeTracePoint> flat = probe_assumption_trace(
        testbed.probe, testbed.model, constant, testbed.scheme);
    for (const auto& sample : flat) {
        CHECK(sample.projection == flat.front().projection);
        CHECK(sample.concept_logit == flat.front().concept_logit);
    }
}

TEST_CASE("misaligned probe decouples projection from concept logit") {
    // u directions orthogonal to both the concept and the rotated probe, so
    // moving along the rotated probe changes the projection but not P(W=1).
    FactorizableModelSpec spec;
    spec.shared_dirs.resize(2, 3);
    spec.shared_dirs << 0, 1, 0, 0, -1, 0;
    spec.neutral_dirs.resize(0, 3);
    spec.concept_dir = Eigen::Vector3d(0, 0, 1);
    const SynthesizedConcept testbed =
        synthesize_factorizable(spec, {"a0", "a1", "b0", "b1"});

    LinearProbe rotated;
    rotated.beta = Eigen::Vector3d(1, 0, 0); // 90 degrees off the concept
    rotated.offset = 0.0;

    std::vector<PrimalPoint> path;
    PrimalPoint point{Eigen::Vector3d(0.0, 0.3, 0.4)};
    for (int i = 0; i < 10; ++i) {
        path.push_back(point);
        point.lambda += 0.5 * rotated.beta;
    }
    const std::vector<ProbeTracePoint> trace =
        probe_assumption_trace(rotated, testbed.model, path, testbed.scheme);
    const double logit_spread = [&] {
        double lo = trace.front().concept_logit, hi = lo;
        for (const auto& sample : trace) {
            lo = std::min(lo, sample.concept_logit);
            hi = std::max(hi, sample.concept_logit);
        }
        return hi - lo;
    }();
    const double projection_spread =
        trace.back().projection - trace.front().projection;
    CHECK(projection_spread > 4.0);
    CHECK(logit_spread < 1e-10); // near-zero slope
}

TEST_CASE("probe JSON round trip") {
    LinearProbe probe;
    probe.beta = Eigen::Vector3d(0.25, -1.5, 3.0);
    probe.offset = -0.125;
    probe.input_space = ProbeSpace::dual;
    const LinearProbe back = probe_from_json(probe_to_json(probe));
    CHECK((back.beta.array() == probe.beta.array()).all());
    CHECK(back.offset == probe.offset);
    CHECK(back.input_space == ProbeSpace::dual);
}
