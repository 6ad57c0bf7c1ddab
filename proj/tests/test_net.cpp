#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "w2s/errors.hpp"
#include "w2s/net.hpp"
#include "w2s/rng.hpp"

using namespace w2s;

TEST_CASE("init_net is deterministic and shaped by the spec") {
    ArchSpec spec;
    spec.in_dim = 8;
    spec.out_dim = 16;
    spec.depth = 2;
    const LayeredNet a = init_net(spec, 0);
    const LayeredNet b = init_net(spec, 0);
    CHECK(a == b);
    REQUIRE(a.layers.size() == 2);
    CHECK(a.layers[0].w.rows == 16);
    CHECK(a.layers[0].w.cols == 8);
    CHECK(a.layers[1].w.rows == 16);
    CHECK(a.layers[1].w.cols == 16);
    for (double v : a.layers[0].b) CHECK(v == 0.0);

    const LayeredNet c = init_net(spec, 1);
    double max_delta = 0.0;
    for (std::size_t i = 0; i < a.layers[0].w.a.size(); ++i) {
        max_delta = std::max(max_delta, std::abs(a.layers[0].w.a[i] - c.layers[0].w.a[i]));
    }
    CHECK(max_delta > 0.0);

    CHECK_THROWS_AS(init_net(ArchSpec{0, 4, 1}, 0), ContractViolation);
}

TEST_CASE("forward applies layers, activation and head") {
    // Identity single layer with identity weights reproduces the input.
    LayeredNet id;
    id.activation = Activation::Identity;
    id.head = OutputHead::None;
    Layer l;
    l.w = Matrix(3, 3);
    for (int i = 0; i < 3; ++i) l.w(i, i) = 1.0;
    l.b.assign(3, 0.0);
    id.layers.push_back(l);
    SampleSet s = gaussian_sample(5, 3, 42, "t");
    CHECK(forward(id, s).a == s.inputs.a);

    // Zero-weight net with a softmax-2 head emits [0.5, 0.5] everywhere.
    LayeredNet zero;
    zero.head = OutputHead::SoftmaxK;
    zero.head_floor = 0.01;
    Layer z;
    z.w = Matrix(2, 3);
    z.b.assign(2, 0.0);
    zero.layers.push_back(z);
    Matrix out = forward(zero, s);
    for (double v : out.a) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));

    // Any softmax-head output row is a valid ProbVector.
    ArchSpec spec;
    spec.in_dim = 3;
    spec.out_dim = 4;
    spec.depth = 2;
    spec.head = OutputHead::SoftmaxK;
    spec.head_floor = 0.05;
    const LayeredNet net = init_net(spec, 7);
    Matrix probs = forward(net, s);
    for (int i = 0; i < probs.rows; ++i) {
        CHECK_NOTHROW(ProbVector(std::vector<double>(probs.row(i), probs.row(i) + 4), 0.05));
    }

    SampleSet wrong = gaussian_sample(4, 2, 0, "w");
    CHECK_THROWS_AS(forward(net, wrong), ContractViolation);
}

TEST_CASE("backward: stationary point and loss-scaling linearity") {
    ArchSpec spec;
    spec.in_dim = 3;
    spec.out_dim = 4;
    spec.depth = 2;
    spec.head = OutputHead::SoftmaxK;
    const LayeredNet net = init_net(spec, 11);
    SampleSet s = gaussian_sample(10, 3, 5, "t");

    LossSpec loss;
    loss.kind = LossKind::PointwiseKL;
    loss.direction = KlDirection::TeacherFirst;
    loss.targets = forward(net, s);  // teacher == student: exact stationary point
    loss.gamma = spec.head_floor;
    GradientRecord g = backward(net, s, loss);
    CHECK(g.loss_value == doctest::Approx(0.0).epsilon(1e-12));
    for (const Layer& layer : g.grads) {
        for (double v : layer.w.a) CHECK(std::abs(v) < 1e-10);
        for (double v : layer.b) CHECK(std::abs(v) < 1e-10);
    }
}

TEST_CASE("backward matches central finite differences on a small net") {
    ArchSpec spec;
    spec.in_dim = 3;
    spec.out_dim = 1;
    spec.depth = 2;
    spec.hidden = 4;
    spec.head = OutputHead::ScalarPositive;
    const LayeredNet net = init_net(spec, 3);
    const LayeredNet teacher = init_net(spec, 9);
    SampleSet s = gaussian_sample(12, 3, 17, "t");

    LossSpec loss;
    loss.kind = LossKind::ProfileKL;
    loss.direction = KlDirection::TeacherFirst;
    loss.targets = forward(teacher, s);

    const GradientRecord rec = backward(net, s, loss);
    LayeredNet probe = net;
    const double step = 1e-5;
    double worst = 0.0;
    for (std::size_t l = 0; l < probe.layers.size(); ++l) {
        for (std::size_t i = 0; i < probe.layers[l].w.a.size(); ++i) {
            double& slot = probe.layers[l].w.a[i];
            const double saved = slot;
            slot = saved + step;
            const double up = loss_value(probe, s, loss);
            slot = saved - step;
            const double down = loss_value(probe, s, loss);
            slot = saved;
            const double fd = (up - down) / (2 * step);
            const double an = rec.grads[l].w.a[i];
            worst = std::max(worst, std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)}));
        }
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("perturb_net") {
    ArchSpec spec;
    spec.in_dim = 4;
    spec.out_dim = 4;
    spec.depth = 2;
    const LayeredNet net = init_net(spec, 21);
    CHECK(perturb_net(net, 0.0, 99) == net);
    const LayeredNet p1 = perturb_net(net, 0.1, 99);
    const LayeredNet p2 = perturb_net(net, 0.1, 99);
    CHECK(p1 == p2);
    CHECK(p1 != net);
    // Large sigma moves weights a lot on average.
    const LayeredNet p9 = perturb_net(net, 9.0, 99);
    double mean_abs = 0.0;
    for (std::size_t i = 0; i < net.layers[0].w.a.size(); ++i) {
        mean_abs += std::abs(p9.layers[0].w.a[i] - net.layers[0].w.a[i]);
    }
    mean_abs /= static_cast<double>(net.layers[0].w.a.size());
    CHECK(mean_abs > 1.0);
    CHECK_THROWS_AS(perturb_net(net, -1.0, 0), ContractViolation);
}

TEST_CASE("sgd_fit: zero steps, frozen layers, convex head fit") {
    ArchSpec rep_spec;
    rep_spec.in_dim = 2;
    rep_spec.out_dim = 3;
    rep_spec.depth = 1;
    const LayeredNet rep = init_net(rep_spec, 5);

    ArchSpec head_spec;
    head_spec.in_dim = 3;
    head_spec.out_dim = 1;
    head_spec.depth = 1;
    head_spec.head = OutputHead::ScalarPositive;
    const LayeredNet teacher_head = init_net(head_spec, 6);
    const LayeredNet student_head = init_net(head_spec, 7);

    const LayeredNet teacher = compose(rep, teacher_head);
    const LayeredNet student = compose(rep, student_head);
    SampleSet s = gaussian_sample(2, 2, 13, "t");

    LossSpec loss;
    loss.kind = LossKind::ProfileKL;
    loss.direction = KlDirection::TeacherFirst;
    loss.targets = forward(teacher, s);

    // 0 steps leaves the net unchanged.
    FitResult zero = sgd_fit(student, {1, 1}, s, loss, {0, 0.1, 1e-12});
    CHECK(zero.net == student);
    CHECK(zero.steps_run == 0);

    // Frozen representation layer stays bitwise identical while the head fits.
    FitResult fit = sgd_fit(student, {0, 1}, s, loss, {5000, 1.0, 1e-12});
    CHECK(fit.net.layers[0] == student.layers[0]);
    CHECK(fit.final_loss <= fit.initial_loss);
    CHECK(fit.final_loss < 1e-4 * fit.initial_loss);

    // Grid search along the line through the fitted head and the teacher head
    // confirms the minimizer: no point on the segment does better.
    const LayeredNet fitted_head{{fit.net.layers[1]}, fit.net.activation, fit.net.head, fit.net.head_floor};
    double best_on_grid = fit.final_loss;
    for (int gi = -10; gi <= 20; ++gi) {
        const double t = gi / 10.0;
        LayeredNet blend = fit.net;
        for (std::size_t i = 0; i < blend.layers[1].w.a.size(); ++i) {
            blend.layers[1].w.a[i] = (1 - t) * fitted_head.layers[0].w.a[i] + t * teacher_head.layers[0].w.a[i];
        }
        for (std::size_t i = 0; i < blend.layers[1].b.size(); ++i) {
            blend.layers[1].b[i] = (1 - t) * fitted_head.layers[0].b[i] + t * teacher_head.layers[0].b[i];
        }
        best_on_grid = std::min(best_on_grid, loss_value(blend, s, loss));
    }
    CHECK(fit.final_loss <= best_on_grid + 1e-8);

    CHECK_THROWS_AS(sgd_fit(student, {1}, s, loss, {10, 0.1, 1e-12}), ContractViolation);
}

TEST_CASE("net serialization round-trips bitwise") {
    ArchSpec spec;
    spec.in_dim = 5;
    spec.out_dim = 3;
    spec.depth = 3;
    spec.head = OutputHead::SoftmaxK;
    spec.head_floor = 0.02;
    const LayeredNet net = init_net(spec, 77);
    const LayeredNet back = deserialize_net(serialize_net(net));
    CHECK(back == net);

    const std::string path = (std::filesystem::temp_directory_path() / "w2s_net_roundtrip.txt").string();
    save_net(net, path);
    CHECK(load_net(path) == net);
    std::filesystem::remove(path);
}

TEST_CASE("kl_output_distribution") {
    ArchSpec spec;
    spec.in_dim = 4;
    spec.out_dim = 1;
    spec.depth = 2;
    spec.head = OutputHead::ScalarPositive;
    const LayeredNet f = init_net(spec, 31);
    const LayeredNet g = init_net(spec, 32);
    SampleSet s = gaussian_sample(16, 4, 8, "t");
    const double floor = 1e-4 / 16;

    CHECK(kl_output_distribution(f, f, s, floor).value == doctest::Approx(0.0));
    CHECK(kl_output_distribution(f, f, s, floor).kind == DivKind::EmpiricalKL);

    // Composition oracle: normalize_outputs + kl_discrete by hand.
    Matrix fo = forward(f, s);
    Matrix go = forward(g, s);
    const ProbVector fp = normalize_outputs(fo.a, floor);
    const ProbVector gp = normalize_outputs(go.a, floor);
    CHECK(kl_output_distribution(f, g, s, floor).value ==
          doctest::Approx(kl_discrete(fp, gp).value).epsilon(1e-14));

    // Constant-output nets normalize to uniform on both sides.
    LayeredNet c1 = f, c2 = g;
    for (Layer& l : c1.layers) std::fill(l.w.a.begin(), l.w.a.end(), 0.0);
    for (Layer& l : c2.layers) std::fill(l.w.a.begin(), l.w.a.end(), 0.0);
    c1.layers.back().b[0] = 1.7;
    c2.layers.back().b[0] = -0.4;
    CHECK(kl_output_distribution(c1, c2, s, floor).value == doctest::Approx(0.0).epsilon(1e-12));
}
