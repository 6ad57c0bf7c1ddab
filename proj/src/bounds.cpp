#include "w2s/bounds.hpp"

#include <cmath>

#include "w2s/errors.hpp"

namespace w2s {

const char* theorem_tag_name(TheoremTag tag) {
    switch (tag) {
        case TheoremTag::T41Upper: return "T4.1-upper";
        case TheoremTag::T41Lower: return "T4.1-lower";
        case TheoremTag::T43Calibration: return "T4.3-calibration";
        case TheoremTag::T51Realizable: return "T5.1-realizable";
        case TheoremTag::CB5Forward: return "C-B5-forward";
        case TheoremTag::T52Residual: return "T5.2-residual";
    }
    return "?";
}

const char* wis_sign_name(WisSign sign) {
    return sign == WisSign::Nonpositive ? "nonpositive" : "positive";
}

double t41_constant(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ContractViolation("t41_constant: gamma must lie in (0, 1)");
    return std::sqrt(2.0) / gamma * std::log(1.0 / gamma);
}

namespace {

BoundCheckReport finish(BoundCheckReport r) {
    r.holds = r.lhs <= r.rhs + r.tau;
    return r;
}

}  // namespace

std::pair<BoundCheckReport, BoundCheckReport> check_t41(const TaskResult& result, double gamma,
                                                        std::optional<double> tau) {
    const double c1 = t41_constant(gamma);
    const double envelope = c1 * std::sqrt(std::max(result.d_sw_w, 0.0));

    BoundCheckReport upper;
    upper.tag = TheoremTag::T41Upper;
    upper.task_id = result.task_id;
    upper.lhs = result.d_star_sw;
    upper.rhs = result.d_star_w + envelope;
    upper.tau = tau.value_or(1e-3 * (1.0 + std::abs(upper.rhs)));
    upper.constant_c1 = c1;
    upper.asserted = true;

    BoundCheckReport lower;
    lower.tag = TheoremTag::T41Lower;
    lower.task_id = result.task_id;
    // d_star_sw >= d_star_w - envelope, rearranged into lhs <= rhs form.
    lower.lhs = result.d_star_w - envelope;
    lower.rhs = result.d_star_sw;
    lower.tau = tau.value_or(1e-3 * (1.0 + std::abs(lower.rhs)));
    lower.constant_c1 = c1;
    lower.asserted = true;

    return {finish(upper), finish(lower)};
}

BoundCheckReport check_t51(const TaskResult& result, LossDirection direction, Regime regime, double tau) {
    BoundCheckReport r;
    r.task_id = result.task_id;
    r.lhs = result.d_star_sw;
    r.rhs = result.d_star_w - result.d_sw_w;
    r.tau = tau;
    if (direction == LossDirection::ReverseKL) {
        r.tag = TheoremTag::T51Realizable;
        r.asserted = regime == Regime::RealizablePretrain;
    } else {
        r.tag = TheoremTag::CB5Forward;
        r.wis_sign = result.wis_value <= 0.0 ? WisSign::Nonpositive : WisSign::Positive;
        r.hypothesis_met = r.wis_sign == WisSign::Nonpositive;
        r.asserted = false;
    }
    return finish(r);
}

BoundCheckReport check_t52_residual(const TaskResult& result) {
    BoundCheckReport r;
    r.tag = TheoremTag::T52Residual;
    r.task_id = result.task_id;
    r.lhs = result.d_star_shat - (result.d_star_w - result.d_shat_w);
    r.rhs = 0.0;
    r.tau = 0.0;
    r.asserted = false;
    r.epsilon = result.d_star_s;
    r.n = result.n_hat;
    return finish(r);
}

BoundCheckReport check_t43(const CalibrationReport& weak_report, const CalibrationReport& strong_report,
                           DivergenceValue d_sw_w, bool assert_mode) {
    const bool both_exact =
        weak_report.estimator == Estimator::Exact && strong_report.estimator == Estimator::Exact;
    if (assert_mode && !both_exact) {
        throw ContractViolation("check_t43: assertion mode requires exact estimators on both sides");
    }
    BoundCheckReport r;
    r.tag = TheoremTag::T43Calibration;
    r.lhs = std::abs(strong_report.mce - weak_report.mce);
    r.rhs = calibration_gap_bound(d_sw_w);
    r.tau = 0.0;
    r.asserted = assert_mode && both_exact;
    return finish(r);
}

LineFit fit_gain_misfit(std::span<const TaskResult> results) {
    LineFit fit;
    double sx = 0.0, sy = 0.0;
    int n = 0;
    for (const TaskResult& t : results) {
        if (t.failed) continue;
        sx += t.gain;
        sy += t.d_sw_w;
        ++n;
    }
    fit.n = n;
    if (n < 2) return fit;
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const TaskResult& t : results) {
        if (t.failed) continue;
        const double dx = t.gain - mx, dy = t.d_sw_w - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.pearson = sxy / std::sqrt(sxx * syy);
    return fit;
}

std::pair<int, int> count_holds(std::span<const BoundCheckReport> reports) {
    int held = 0, total = 0;
    for (const BoundCheckReport& r : reports) {
        ++total;
        held += r.holds ? 1 : 0;
    }
    return {held, total};
}

}  // namespace w2s
