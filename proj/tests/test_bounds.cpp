#include <doctest.h>

#include <cmath>
#include <vector>

#include "w2s/bounds.hpp"
#include "w2s/errors.hpp"
#include "w2s/rng.hpp"

using namespace w2s;

TEST_CASE("t41_constant closed forms") {
    // sqrt(2) * 10 * ln 10, frozen from a 30-digit evaluation.
    CHECK(t41_constant(0.1) == doctest::Approx(32.563470670302937).epsilon(1e-12));
    CHECK(t41_constant(0.01) == doctest::Approx(651.26941340605874).epsilon(1e-12));
    // Decreasing in gamma on (0, 1/e].
    CHECK(t41_constant(0.01) > t41_constant(0.05));
    CHECK(t41_constant(0.05) > t41_constant(0.1));
}

TEST_CASE("check_t41 collapses when the misfit vanishes") {
    TaskResult r;
    r.task_id = 3;
    r.d_star_w = 0.4;
    r.d_star_sw = 0.4000005;
    r.d_sw_w = 0.0;
    auto [upper, lower] = check_t41(r, 0.1);
    CHECK(upper.holds);
    CHECK(lower.holds);
    CHECK(upper.constant_c1 == doctest::Approx(32.563470670302937));
    CHECK(upper.rhs == doctest::Approx(r.d_star_w));
    // Move d_star_sw past the tolerance and both sides notice.
    r.d_star_sw = 0.5;
    auto [upper2, lower2] = check_t41(r, 0.1);
    CHECK_FALSE(upper2.holds);
    CHECK(lower2.holds);
    r.d_star_sw = 0.3;
    auto [upper3, lower3] = check_t41(r, 0.1);
    CHECK_FALSE(lower3.holds);
    CHECK(upper3.holds);
}

TEST_CASE("check_t51 reverse vs forward") {
    TaskResult r;
    r.d_star_w = 0.5;
    r.d_star_sw = 0.2;
    r.d_sw_w = 0.25;
    r.wis_value = -0.01;
    BoundCheckReport rev = check_t51(r, LossDirection::ReverseKL, Regime::RealizablePretrain);
    CHECK(rev.tag == TheoremTag::T51Realizable);
    CHECK(rev.asserted);
    CHECK(rev.holds);  // 0.2 <= 0.5 - 0.25 + 5e-3
    CHECK_FALSE(rev.wis_sign.has_value());

    BoundCheckReport rev_nr = check_t51(r, LossDirection::ReverseKL, Regime::NonrealizablePerturb);
    CHECK_FALSE(rev_nr.asserted);

    // Zero misfit reduces to d_star_sw <= d_star_w.
    TaskResult eq;
    eq.d_star_w = 0.3;
    eq.d_star_sw = 0.3;
    eq.d_sw_w = 0.0;
    CHECK(check_t51(eq, LossDirection::ReverseKL, Regime::RealizablePretrain).holds);

    BoundCheckReport fwd = check_t51(r, LossDirection::ForwardKL, Regime::NonrealizablePerturb);
    CHECK(fwd.tag == TheoremTag::CB5Forward);
    CHECK_FALSE(fwd.asserted);
    REQUIRE(fwd.wis_sign.has_value());
    CHECK(*fwd.wis_sign == WisSign::Nonpositive);
    CHECK(fwd.hypothesis_met);

    r.wis_value = 0.02;
    BoundCheckReport fwd2 = check_t51(r, LossDirection::ForwardKL, Regime::NonrealizablePerturb);
    CHECK(*fwd2.wis_sign == WisSign::Positive);
    CHECK_FALSE(fwd2.hypothesis_met);
}

TEST_CASE("check_t52_residual is descriptive") {
    TaskResult r;
    r.d_star_shat = 0.31;
    r.d_star_w = 0.5;
    r.d_shat_w = 0.2;
    r.d_star_s = 0.07;
    r.n_hat = 250;
    const BoundCheckReport rep = check_t52_residual(r);
    CHECK(rep.lhs == doctest::Approx(0.31 - (0.5 - 0.2)).epsilon(1e-12));
    CHECK(rep.epsilon == doctest::Approx(0.07));
    CHECK(rep.n == 250);
    CHECK_FALSE(rep.asserted);
    CHECK(rep.holds == (rep.lhs <= 0.0));
}

TEST_CASE("check_t43 estimator contract") {
    CalibrationReport exact_a;
    exact_a.mce = 0.4;
    CalibrationReport exact_b;
    exact_b.mce = 0.9;
    const DivergenceValue kl{std::log(2.0), DivKind::KL};
    const BoundCheckReport rep = check_t43(exact_a, exact_b, kl);
    CHECK(rep.lhs == doctest::Approx(0.5));
    CHECK(rep.rhs == doctest::Approx(1.414213562373095049).epsilon(1e-12));
    CHECK(rep.holds);
    CHECK(rep.asserted);

    CalibrationReport binned;
    binned.estimator = Estimator::Binned;
    binned.mce = 0.2;
    CHECK_THROWS_AS(check_t43(exact_a, binned, kl, true), ContractViolation);
    const BoundCheckReport desc = check_t43(exact_a, binned, kl, false);
    CHECK_FALSE(desc.asserted);
}

TEST_CASE("report algebra: holds iff lhs <= rhs + tau") {
    rng::Stream stream(77);
    for (int it = 0; it < 500; ++it) {
        TaskResult r;
        r.d_star_w = stream.uniform();
        r.d_star_sw = stream.uniform();
        r.d_sw_w = stream.uniform();
        r.d_star_shat = stream.uniform();
        r.d_shat_w = stream.uniform();
        r.wis_value = stream.uniform() - 0.5;
        const double tau = stream.uniform() * 0.1;
        auto [u, l] = check_t41(r, 0.05, tau);
        CHECK(u.holds == (u.lhs <= u.rhs + u.tau));
        CHECK(l.holds == (l.lhs <= l.rhs + l.tau));
        const auto t51 = check_t51(r, it % 2 == 0 ? LossDirection::ReverseKL : LossDirection::ForwardKL,
                                   Regime::RealizablePretrain, tau);
        CHECK(t51.holds == (t51.lhs <= t51.rhs + t51.tau));
        const auto t52 = check_t52_residual(r);
        CHECK(t52.holds == (t52.lhs <= t52.rhs + t52.tau));
    }
}

TEST_CASE("fit_gain_misfit recovers a known line") {
    std::vector<TaskResult> results;
    rng::Stream stream(5);
    for (int i = 0; i < 40; ++i) {
        TaskResult r;
        r.task_id = i;
        r.gain = stream.uniform();
        r.d_sw_w = r.gain;  // exactly y = x
        results.push_back(r);
    }
    LineFit fit = fit_gain_misfit(results);
    CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fit.pearson == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.n == 40);

    // Failed tasks are excluded.
    TaskResult bad;
    bad.failed = true;
    bad.gain = std::nan("");
    results.push_back(bad);
    CHECK(fit_gain_misfit(results).n == 40);
}
