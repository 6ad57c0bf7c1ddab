#include "w2s/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "w2s/bounds.hpp"
#include "w2s/calibration.hpp"
#include "w2s/divergence.hpp"
#include "w2s/net.hpp"
#include "w2s/rng.hpp"

namespace w2s {

namespace {

ProbVector random_simplex(rng::Stream& stream, int k, double gamma) {
    std::vector<double> v(static_cast<std::size_t>(k));
    for (double& x : v) x = -std::log(std::max(stream.uniform(), 0x1.0p-53));
    clamp_normalize(v, gamma);
    return ProbVector(std::move(v), gamma);
}

SelfTestItem simplex_pair_suite(std::uint64_t seed, int pairs) {
    SelfTestItem item{"simplex-pair inequalities", true, ""};
    rng::Stream stream(rng::derive_seed(seed, "selftest-simplex"));
    const double gamma = 0.01;
    int nonneg_fail = 0, pinsker_fail = 0, bh_fail = 0, clamp_fail = 0, wis_fail = 0, zero_fail = 0;
    for (int it = 0; it < pairs; ++it) {
        const int k = 2 + static_cast<int>(stream.uniform() * 15.0);  // 2..16
        const ProbVector p = random_simplex(stream, k, gamma);
        const ProbVector q = random_simplex(stream, k, gamma);
        const DivergenceValue kl = kl_discrete(p, q);
        if (!(kl.value >= 0.0)) ++nonneg_fail;
        double l1 = 0.0, max_diff = 0.0, max_log_ratio = 0.0;
        for (int i = 0; i < k; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            l1 += std::abs(p[idx] - q[idx]);
            max_diff = std::max(max_diff, std::abs(p[idx] - q[idx]));
            max_log_ratio = std::max(max_log_ratio, std::abs(std::log(p[idx] / q[idx])));
        }
        if (kl.value == 0.0 && max_diff >= 1e-12) ++zero_fail;
        if (l1 > 2.0 * pinsker_l1_bound(kl) + 1e-12) ++pinsker_fail;
        if (tv_distance(p, q).value > bh_tv_bound(kl) + 1e-12) ++bh_fail;
        if (max_log_ratio > std::log(1.0 / gamma) + 1e-12) ++clamp_fail;

        // WIS linearity in the weight argument.
        std::vector<double> w1(static_cast<std::size_t>(k)), w2(static_cast<std::size_t>(k)), ws(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            w1[idx] = 2.0 * stream.uniform() - 1.0;
            w2[idx] = 2.0 * stream.uniform() - 1.0;
            ws[idx] = w1[idx] + w2[idx];
        }
        const double a = weighted_is_divergence(p, q, w1).value;
        const double b = weighted_is_divergence(p, q, w2).value;
        const double c = weighted_is_divergence(p, q, ws).value;
        const double scale = std::max({1.0, std::abs(a), std::abs(b), std::abs(c)});
        if (std::abs(c - (a + b)) > 1e-12 * scale) ++wis_fail;
    }
    std::ostringstream os;
    os << pairs << " pairs: nonneg_fail=" << nonneg_fail << " zero_fail=" << zero_fail
       << " pinsker_fail=" << pinsker_fail << " bh_fail=" << bh_fail << " clamp_fail=" << clamp_fail
       << " wis_linearity_fail=" << wis_fail;
    item.detail = os.str();
    item.pass = nonneg_fail + pinsker_fail + bh_fail + clamp_fail + wis_fail + zero_fail == 0;
    return item;
}

struct FdCase {
    LayeredNet net;
    SampleSet data;
    LossSpec loss;
};

// Random small net + teacher targets for one loss descriptor. Cases whose
// pre-activations or clamp margins sit within the finite-difference step of
// a kink are rejected, so the central difference stays an exact oracle.
bool build_fd_case(rng::Stream& stream, LossKind kind, KlDirection direction, std::uint64_t seed, FdCase& out) {
    const int n = 8 + static_cast<int>(stream.uniform() * 8.0);
    const int d = 2 + static_cast<int>(stream.uniform() * 3.0);
    const int depth = 1 + static_cast<int>(stream.uniform() * 3.0);
    const int width = 3 + static_cast<int>(stream.uniform() * 3.0);
    const int k = 3;

    ArchSpec spec;
    spec.in_dim = d;
    spec.depth = depth;
    spec.hidden = width;
    spec.activation = Activation::Relu;
    if (kind == LossKind::PointwiseKL) {
        spec.out_dim = k;
        spec.head = OutputHead::SoftmaxK;
        spec.head_floor = 0.01;
    } else {
        spec.out_dim = 1;
        spec.head = OutputHead::ScalarPositive;
    }
    out.net = init_net(spec, rng::derive_seed(seed, "fd-net"));
    out.data = gaussian_sample(n, d, rng::derive_seed(seed, "fd-data"), "fd-data");
    const LayeredNet teacher = init_net(spec, rng::derive_seed(seed, "fd-teacher"));
    out.loss.kind = kind;
    out.loss.direction = direction;
    out.loss.targets = forward(teacher, out.data);
    out.loss.gamma = spec.head_floor;
    out.loss.floor_pre = 1e-4;

    // Kink-margin screen: reject cases where a ReLU pre-activation or clamp
    // margin sits within the finite-difference step.
    const double step = 1e-5;
    Matrix cur = out.data.inputs;
    for (std::size_t l = 0; l + 1 < out.net.layers.size(); ++l) {
        LayeredNet one;
        one.layers.push_back(out.net.layers[l]);
        one.activation = out.net.activation;
        one.head = OutputHead::None;
        Matrix z = forward_linear(one, cur);
        for (double v : z.a) {
            if (std::abs(v) < 50.0 * step) return false;
        }
        for (double& v : z.a) v = v > 0.0 ? v : 0.0;
        cur = std::move(z);
    }
    Matrix o = forward(out.net, out.data);
    if (kind == LossKind::ProfileKL) {
        for (double v : o.a) {
            if (std::abs(v - out.loss.floor_pre) < 50.0 * step) return false;
        }
    } else {
        for (double v : o.a) {
            if (std::abs(v - out.loss.gamma) < 1e-3) return false;
        }
    }
    return true;
}

double fd_max_rel_error(const FdCase& c) {
    const double step = 1e-5;
    const GradientRecord rec = backward(c.net, c.data, c.loss);
    double worst = 0.0;
    LayeredNet probe = c.net;
    for (std::size_t l = 0; l < probe.layers.size(); ++l) {
        auto check_param = [&](double& slot, double analytic) {
            const double saved = slot;
            slot = saved + step;
            const double up = loss_value(probe, c.data, c.loss);
            slot = saved - step;
            const double down = loss_value(probe, c.data, c.loss);
            slot = saved;
            const double fd = (up - down) / (2.0 * step);
            const double rel = std::abs(fd - analytic) / std::max({1.0, std::abs(fd), std::abs(analytic)});
            worst = std::max(worst, rel);
        };
        for (std::size_t i = 0; i < probe.layers[l].w.a.size(); ++i) {
            check_param(probe.layers[l].w.a[i], rec.grads[l].w.a[i]);
        }
        for (std::size_t i = 0; i < probe.layers[l].b.size(); ++i) {
            check_param(probe.layers[l].b[i], rec.grads[l].b[i]);
        }
    }
    return worst;
}

SelfTestItem gradient_suite(std::uint64_t seed, int configs_per_loss) {
    SelfTestItem item{"gradient vs central finite differences", true, ""};
    struct Desc {
        const char* name;
        LossKind kind;
        KlDirection direction;
    };
    const Desc descs[] = {
        {"forward-kl-to-targets", LossKind::PointwiseKL, KlDirection::TeacherFirst},
        {"reverse-kl-to-targets", LossKind::PointwiseKL, KlDirection::StudentFirst},
        {"output-distribution-forward", LossKind::ProfileKL, KlDirection::TeacherFirst},
        {"output-distribution-reverse", LossKind::ProfileKL, KlDirection::StudentFirst},
    };
    double worst = 0.0;
    std::string worst_desc;
    for (const Desc& desc : descs) {
        rng::Stream stream(rng::derive_seed(seed, desc.name));
        int built = 0;
        std::uint64_t attempt = 0;
        while (built < configs_per_loss) {
            FdCase c;
            const std::uint64_t case_seed = rng::derive_seed(seed, desc.name, ++attempt);
            if (!build_fd_case(stream, desc.kind, desc.direction, case_seed, c)) continue;
            ++built;
            const double rel = fd_max_rel_error(c);
            if (rel > worst) {
                worst = rel;
                worst_desc = desc.name;
            }
        }
    }
    std::ostringstream os;
    os << configs_per_loss << " configs x 4 losses, max relative error " << worst << " (" << worst_desc
       << "), tolerance 1e-4";
    item.detail = os.str();
    item.pass = worst <= 1e-4;
    return item;
}

SelfTestItem calibration_identity_suite(std::uint64_t seed, int instances) {
    SelfTestItem item{"exact MCE identities", true, ""};
    rng::Stream stream(rng::derive_seed(seed, "selftest-cal"));
    int ece_fail = 0, range_fail = 0, pooling_fail = 0;
    for (int it = 0; it < instances; ++it) {
        const int k = it % 2 == 0 ? 2 : 2 + static_cast<int>(stream.uniform() * 3.0);
        const int domain = 1 + static_cast<int>(stream.uniform() * 8.0);
        const DiscreteClassifierInstance inst = random_instance(stream, k, domain, 0.01);
        const CalibrationReport rep = mce_exact(inst);
        if (!(rep.mce >= 0.0 && rep.mce <= 2.0)) ++range_fail;
        if (k == 2) {
            if (!rep.ece || std::abs(rep.mce - 2.0 * *rep.ece) > 1e-12) ++ece_fail;
        }
        // Duplicating every point with halved masses must leave MCE unchanged.
        DiscreteClassifierInstance doubled = inst;
        for (std::size_t i = 0; i < inst.size(); ++i) {
            doubled.point_ids.push_back(static_cast<int>(inst.size() + i));
            doubled.masses[i] *= 0.5;
            doubled.masses.push_back(inst.masses[i] * 0.5);
            doubled.model_scores.push_back(inst.model_scores[i]);
            doubled.bayes_scores.push_back(inst.bayes_scores[i]);
        }
        if (std::abs(mce_exact(doubled).mce - rep.mce) > 1e-12) ++pooling_fail;
    }
    std::ostringstream os;
    os << instances << " instances: mce=2*ece fail=" << ece_fail << " range_fail=" << range_fail
       << " pooling_fail=" << pooling_fail;
    item.detail = os.str();
    item.pass = ece_fail + range_fail + pooling_fail == 0;
    return item;
}

SelfTestItem calibration_gap_suite(std::uint64_t seed, int pairs) {
    SelfTestItem item{"calibration gap bound (exact pairs)", true, ""};
    rng::Stream stream(rng::derive_seed(seed, "selftest-gap"));
    int fail = 0;
    for (int it = 0; it < pairs; ++it) {
        const int k = 2 + it % 3;  // 2..4
        const int domain = 1 + static_cast<int>(stream.uniform() * 8.0);
        const DiscreteClassifierInstance weak = random_instance(stream, k, domain, 0.01);
        const DiscreteClassifierInstance strong = with_random_scores(weak, stream);
        const BoundCheckReport rep =
            check_t43(mce_exact(weak), mce_exact(strong), instance_kl(weak, strong), /*assert_mode=*/true);
        if (!rep.holds) ++fail;
    }
    std::ostringstream os;
    os << pairs << " random pairs, tau=0, failures=" << fail;
    item.detail = os.str();
    item.pass = fail == 0;
    return item;
}

SelfTestItem normalization_suite(std::uint64_t seed, int cases) {
    SelfTestItem item{"normalize_outputs fixpoint", true, ""};
    rng::Stream stream(rng::derive_seed(seed, "selftest-norm"));
    int invariant_fail = 0, idempotent_fail = 0;
    for (int it = 0; it < cases; ++it) {
        const int k = 2 + static_cast<int>(stream.uniform() * 15.0);
        const double floor = 0.01;
        std::vector<double> raw(static_cast<std::size_t>(k));
        for (double& v : raw) {
            v = std::exp(8.0 * (stream.uniform() - 0.5));  // span several decades
            if (stream.uniform() < 0.2) v *= 1e-7;
        }
        const ProbVector p = normalize_outputs(raw, floor);
        double sum = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p[i] < floor || p[i] > 1.0) ++invariant_fail;
            sum += p[i];
        }
        if (std::abs(sum - 1.0) > 1e-9) ++invariant_fail;
        const ProbVector again = normalize_outputs(p.entries(), floor);
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (std::abs(again[i] - p[i]) > 1e-12) ++idempotent_fail;
        }
    }
    std::ostringstream os;
    os << cases << " cases: invariant_fail=" << invariant_fail << " idempotent_fail=" << idempotent_fail;
    item.detail = os.str();
    item.pass = invariant_fail + idempotent_fail == 0;
    return item;
}

SelfTestItem determinism_suite(std::uint64_t seed) {
    SelfTestItem item{"seeded determinism", true, ""};
    ArchSpec spec;
    spec.in_dim = 4;
    spec.out_dim = 3;
    spec.depth = 2;
    spec.head = OutputHead::SoftmaxK;
    spec.head_floor = 0.01;
    const LayeredNet a = init_net(spec, seed);
    const LayeredNet b = init_net(spec, seed);
    const SampleSet s1 = gaussian_sample(16, 4, rng::derive_seed(seed, "det-data"), "det");
    const SampleSet s2 = gaussian_sample(16, 4, rng::derive_seed(seed, "det-data"), "det");
    bool ok = a == b && s1.inputs == s2.inputs;
    ok = ok && perturb_net(a, 0.3, seed) == perturb_net(a, 0.3, seed);
    ok = ok && forward(a, s1) == forward(a, s2);
    const LayeredNet teacher = init_net(spec, rng::derive_seed(seed, "det-teacher"));
    LossSpec loss;
    loss.kind = LossKind::PointwiseKL;
    loss.direction = KlDirection::TeacherFirst;
    loss.targets = forward(teacher, s1);
    loss.gamma = spec.head_floor;
    OptimSchedule sched{50, 0.05, 1e-12};
    const FitResult f1 = sgd_fit(a, {1, 1}, s1, loss, sched);
    const FitResult f2 = sgd_fit(a, {1, 1}, s1, loss, sched);
    ok = ok && f1.net == f2.net && f1.final_loss == f2.final_loss;
    item.pass = ok;
    item.detail = ok ? "init/sample/perturb/forward/sgd_fit all bitwise-stable" : "bitwise mismatch";
    return item;
}

}  // namespace

SelfTestReport run_selftest(std::uint64_t seed, bool quick) {
    SelfTestReport report;
    const int pairs = quick ? 1000 : 10000;
    const int fd_configs = quick ? 3 : 20;
    const int cal_instances = quick ? 50 : 200;
    const int gap_pairs = quick ? 100 : 1000;
    const int norm_cases = quick ? 1000 : 10000;

    report.items.push_back(simplex_pair_suite(seed, pairs));
    report.items.push_back(gradient_suite(seed, fd_configs));
    report.items.push_back(calibration_identity_suite(seed, cal_instances));
    report.items.push_back(calibration_gap_suite(seed, gap_pairs));
    report.items.push_back(normalization_suite(seed, norm_cases));
    report.items.push_back(determinism_suite(seed));
    for (const SelfTestItem& item : report.items) report.all_pass = report.all_pass && item.pass;
    return report;
}

}  // namespace w2s
