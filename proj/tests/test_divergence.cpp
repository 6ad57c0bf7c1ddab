#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "w2s/divergence.hpp"
#include "w2s/errors.hpp"
#include "w2s/rng.hpp"

using namespace w2s;

namespace {
ProbVector pv(std::vector<double> v, double floor = 0.01) { return ProbVector(std::move(v), floor); }
}

TEST_CASE("kl_discrete matches the high-precision oracle") {
    CHECK(kl_discrete(pv({0.5, 0.5}), pv({0.5, 0.5})).value == doctest::Approx(0.0).epsilon(1e-15));
    // Expected values frozen from a 30-digit evaluation of the defining sum.
    CHECK(kl_discrete(pv({0.75, 0.25}), pv({0.5, 0.5})).value ==
          doctest::Approx(0.130812035941136959).epsilon(1e-12));
    CHECK(kl_discrete(pv({0.9, 0.1}), pv({0.1, 0.9})).value ==
          doctest::Approx(1.757779661868975506).epsilon(1e-12));
    // Asymmetry on a non-symmetric pair.
    CHECK(kl_discrete(pv({0.8, 0.2}), pv({0.6, 0.4})).value ==
          doctest::Approx(0.091516221849435680).epsilon(1e-12));
    CHECK(kl_discrete(pv({0.6, 0.4}), pv({0.8, 0.2})).value ==
          doctest::Approx(0.104649628752909567).epsilon(1e-12));
    CHECK(kl_discrete(pv({0.8, 0.2}), pv({0.6, 0.4})).value !=
          kl_discrete(pv({0.6, 0.4}), pv({0.8, 0.2})).value);
    CHECK(kl_discrete(pv({0.5, 0.5}), pv({0.5, 0.5})).kind == DivKind::KL);
}

TEST_CASE("kl_discrete rejects mismatched dimensions") {
    CHECK_THROWS_AS(kl_discrete(pv({0.5, 0.5}), pv({0.4, 0.3, 0.3})), ContractViolation);
}

TEST_CASE("ProbVector enforces the clamped-simplex invariants") {
    CHECK_THROWS_AS(pv({0.005, 0.995}), ContractViolation);       // below floor
    CHECK_THROWS_AS(pv({0.6, 0.6}), ContractViolation);           // sum != 1
    CHECK_THROWS_AS(pv({1.2, -0.2}), ContractViolation);          // entry outside [floor, 1]
    CHECK_THROWS_AS(ProbVector({0.5, 0.5}, 0.0), ContractViolation);
    CHECK_THROWS_AS(ProbVector({0.5, 0.5}, 1.0), ContractViolation);
}

TEST_CASE("kl_population is the weighted mean of pointwise divergences") {
    const std::vector<ProbVector> id = {pv({0.3, 0.7}), pv({0.6, 0.4})};
    const std::vector<double> uniform = {0.5, 0.5};
    CHECK(kl_population(id, id, uniform).value == doctest::Approx(0.0));

    const double a = kl_discrete(pv({0.3, 0.7}), pv({0.5, 0.5})).value;
    const double b = kl_discrete(pv({0.6, 0.4}), pv({0.2, 0.8})).value;
    const std::vector<ProbVector> f = {pv({0.3, 0.7}), pv({0.6, 0.4})};
    const std::vector<ProbVector> g = {pv({0.5, 0.5}), pv({0.2, 0.8})};
    CHECK(kl_population(f, g, uniform).value == doctest::Approx((a + b) / 2.0).epsilon(1e-14));

    // Three-point weighted case, oracle = explicit dot product of pointwise
    // kl_discrete values (frozen from the same 30-digit evaluation).
    const std::vector<ProbVector> f3 = {pv({0.7, 0.3}), pv({0.2, 0.8}), pv({0.5, 0.5})};
    const std::vector<ProbVector> g3 = {pv({0.5, 0.5}), pv({0.4, 0.6}), pv({0.9, 0.1})};
    const std::vector<double> w3 = {0.2, 0.3, 0.5};
    CHECK(kl_population(f3, g3, w3).value == doctest::Approx(0.299324254138836415).epsilon(1e-12));

    const std::vector<double> bad_w = {0.9, 0.3};
    CHECK_THROWS_AS(kl_population(f, g, bad_w), ContractViolation);
    const std::vector<ProbVector> shorter = {pv({0.5, 0.5})};
    CHECK_THROWS_AS(kl_population(f, shorter, uniform), ContractViolation);
}

TEST_CASE("normalize_outputs clamps then renormalizes to a fixpoint") {
    const ProbVector u = normalize_outputs(std::vector<double>{1, 1, 1, 1}, 0.01);
    for (std::size_t i = 0; i < 4; ++i) CHECK(u[i] == doctest::Approx(0.25).epsilon(1e-15));

    const ProbVector p = normalize_outputs(std::vector<double>{3, 1}, 0.01);
    CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-15));

    // Two entries pinned exactly at the floor, first entry takes the rest.
    const ProbVector q = normalize_outputs(std::vector<double>{100, 1e-7, 1e-7}, 0.01);
    CHECK(q[0] == doctest::Approx(0.98).epsilon(1e-12));
    CHECK(q[1] == 0.01);
    CHECK(q[2] == 0.01);

    CHECK_THROWS_AS(normalize_outputs(std::vector<double>{0, 0, 0}, 0.01), DegenerateInput);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(normalize_outputs(std::vector<double>{1, inf}, 0.01), DegenerateInput);
    CHECK_THROWS_AS(normalize_outputs(std::vector<double>{1}, 0.01), ContractViolation);
}

TEST_CASE("tv_distance") {
    const ProbVector p = pv({0.7, 0.3});
    CHECK(tv_distance(p, p).value == 0.0);
    CHECK(tv_distance(pv({0.9, 0.1}, 0.1), pv({0.1, 0.9}, 0.1)).value == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(tv_distance(pv({0.7, 0.3}), pv({0.5, 0.5})).value == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(tv_distance(p, p).kind == DivKind::TV);
}

TEST_CASE("weighted_is_divergence") {
    const ProbVector p = pv({0.6, 0.4});
    const ProbVector q = pv({0.4, 0.6});
    const std::vector<double> ones = {1.0, 1.0};
    CHECK(weighted_is_divergence(p, p, ones).value == doctest::Approx(0.0));
    // (0.6/0.4 - ln 1.5 - 1) + (0.4/0.6 - ln(2/3) - 1): the log terms cancel,
    // leaving 1.5 + 2/3 - 2 = 1/6 exactly.
    CHECK(weighted_is_divergence(p, q, ones).value == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(weighted_is_divergence(p, q, ones).kind == DivKind::IS);
    const std::vector<double> neg = {-1.0, -1.0};
    CHECK(weighted_is_divergence(p, q, neg).value == doctest::Approx(-1.0 / 6.0).epsilon(1e-12));
    CHECK(weighted_is_divergence(p, q, neg).kind == DivKind::WIS);
}

TEST_CASE("bh_tv_bound") {
    CHECK(bh_tv_bound({0.0, DivKind::KL}) == 0.0);
    CHECK(bh_tv_bound({std::log(2.0), DivKind::KL}) == doctest::Approx(0.707106781186547524).epsilon(1e-12));
    const double big = bh_tv_bound({50.0, DivKind::KL});
    CHECK(big < 1.0);
    CHECK(big > 0.999999);
    CHECK_THROWS_AS(bh_tv_bound({0.5, DivKind::TV}), ContractViolation);
}

TEST_CASE("pinsker_l1_bound") {
    CHECK(pinsker_l1_bound({0.0, DivKind::KL}) == 0.0);
    CHECK(pinsker_l1_bound({0.5, DivKind::EmpiricalKL}) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(pinsker_l1_bound({2.0, DivKind::KL}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(pinsker_l1_bound({0.5, DivKind::IS}), ContractViolation);
}
