#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <utility>
#include <vector>

#include "w2s/calibration.hpp"
#include "w2s/errors.hpp"

using namespace w2s;

namespace {

DiscreteClassifierInstance single_point(std::vector<double> score, std::vector<double> bayes, double floor) {
    DiscreteClassifierInstance inst;
    inst.point_ids = {0};
    inst.masses = {1.0};
    inst.model_scores.emplace_back(std::move(score), floor);
    inst.bayes_scores.emplace_back(std::move(bayes), floor);
    return inst;
}

}  // namespace

TEST_CASE("mce_exact on hand-built instances") {
    // Perfectly calibrated: scores equal bayes everywhere.
    DiscreteClassifierInstance calibrated;
    calibrated.point_ids = {0, 1};
    calibrated.masses = {0.5, 0.5};
    calibrated.model_scores = {ProbVector({0.7, 0.3}, 0.01), ProbVector({0.2, 0.8}, 0.01)};
    calibrated.bayes_scores = calibrated.model_scores;
    CHECK(mce_exact(calibrated).mce == doctest::Approx(0.0));

    // Single point, conditioning vacuous: |0.7-1| + |0.3-0| = 0.6 with a
    // bayes vector at the clamp floor standing in for (1, 0).
    const double g = 1e-9;
    const auto one = single_point({0.7, 0.3}, {1.0 - g, g}, g);
    CHECK(mce_exact(one).mce == doctest::Approx(0.6).epsilon(1e-7));

    // Two points sharing the same score row pool before comparison:
    // pooled bayes = (0.8, 0.2) matches the score, so MCE is 0.
    DiscreteClassifierInstance pooled;
    pooled.point_ids = {0, 1};
    pooled.masses = {0.5, 0.5};
    pooled.model_scores = {ProbVector({0.8, 0.2}, 0.01), ProbVector({0.8, 0.2}, 0.01)};
    pooled.bayes_scores = {ProbVector({1.0 - 0.01, 0.01}, 0.01), ProbVector({0.6 + 0.01, 0.4 - 0.01}, 0.01)};
    // pooled conditional for class 0: (0.99 + 0.61)/2 = 0.8
    CHECK(mce_exact(pooled).mce == doctest::Approx(0.0).epsilon(1e-12));

    DiscreteClassifierInstance bad = calibrated;
    bad.masses = {0.5, 0.4};
    CHECK_THROWS_AS(mce_exact(bad), ContractViolation);
}

TEST_CASE("mce_exact fills the exact binary ece") {
    const auto one = single_point({0.7, 0.3}, {0.9, 0.1}, 0.01);
    const CalibrationReport rep = mce_exact(one);
    REQUIRE(rep.ece.has_value());
    CHECK(rep.mce == doctest::Approx(2.0 * *rep.ece).epsilon(1e-15));
    CHECK(rep.estimator == Estimator::Exact);
}

TEST_CASE("vector pooling variant agrees on distinct-score instances") {
    rng::Stream stream(123);
    for (int it = 0; it < 20; ++it) {
        const DiscreteClassifierInstance inst = random_instance(stream, 3, 6, 0.01);
        CHECK(mce_exact(inst).mce == doctest::Approx(mce_exact_vector_pooled(inst).mce).epsilon(1e-12));
    }
}

TEST_CASE("ece_binned") {
    std::vector<std::pair<double, bool>> all_right = {{1.0, true}, {1.0, true}, {1.0, true}};
    CHECK(ece_binned(all_right, 10).ece.value() == doctest::Approx(0.0));

    std::vector<std::pair<double, bool>> matched = {{0.5, true}, {0.5, false}, {0.5, true}, {0.5, false}};
    CHECK(ece_binned(matched, 10).ece.value() == doctest::Approx(0.0));

    // Single occupied bin: |3/4 - 0.9| = 0.15.
    std::vector<std::pair<double, bool>> s = {{0.9, true}, {0.9, true}, {0.9, true}, {0.9, false}};
    CHECK(ece_binned(s, 10).ece.value() == doctest::Approx(0.15).epsilon(1e-12));

    const std::vector<std::pair<double, bool>> empty;
    CHECK_THROWS_AS(ece_binned(empty, 10), DegenerateInput);
    CHECK_THROWS_AS(ece_binned(s, 0), ContractViolation);
}

TEST_CASE("calibration_gap_bound") {
    CHECK(calibration_gap_bound({0.0, DivKind::KL}) == doctest::Approx(0.0));
    CHECK(calibration_gap_bound({std::log(2.0), DivKind::KL}) ==
          doctest::Approx(1.414213562373095049).epsilon(1e-12));
    CHECK(calibration_gap_bound({60.0, DivKind::KL}) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(calibration_gap_bound({0.1, DivKind::WIS}), ContractViolation);
}

TEST_CASE("instance text round-trip") {
    rng::Stream stream(9);
    const DiscreteClassifierInstance inst = random_instance(stream, 4, 5, 0.01);
    const std::string path = (std::filesystem::temp_directory_path() / "w2s_instance.csv").string();
    save_instance(inst, path);
    const DiscreteClassifierInstance back = load_instance(path, 0.01);
    REQUIRE(back.size() == inst.size());
    CHECK(back.masses == inst.masses);
    for (std::size_t i = 0; i < inst.size(); ++i) {
        CHECK(back.model_scores[i].entries() == inst.model_scores[i].entries());
        CHECK(back.bayes_scores[i].entries() == inst.bayes_scores[i].entries());
    }
    std::filesystem::remove(path);
}
