#include <doctest.h>

#include <cmath>

#include "w2s/errors.hpp"
#include "w2s/pipeline.hpp"
#include "w2s/rng.hpp"

using namespace w2s;

namespace {

// Tiny but fully-wired configuration for unit runs.
ExperimentConfig tiny_config() {
    ExperimentConfig c;
    c.setting = Setting::OutputDistribution;
    c.regime = Regime::RealizablePretrain;
    c.loss_direction = LossDirection::ReverseKL;
    c.pretrain_tasks = 2;
    c.pretrain_samples = 64;
    c.tasks = 2;
    c.finetune_samples = 64;
    c.eval_samples = 128;
    c.depth_star = 3;
    c.depth_weak = 2;
    c.depth_strong = 3;
    c.rep_schedule = {200, 0.05, 1e-5};
    c.head_schedule = {2000, 0.05, 1e-7};
    c.seed = 42;
    return c;
}

}  // namespace

TEST_CASE("make_ground_truth is seeded and shaped") {
    const ExperimentConfig c = tiny_config();
    const GroundTruth a = make_ground_truth(c);
    const GroundTruth b = make_ground_truth(c);
    CHECK(a.h_star == b.h_star);
    REQUIRE(a.task_heads.size() == 2);
    REQUIRE(a.pretrain_heads.size() == 2);
    CHECK(a.h_star.depth() == 3);
    // Heads are depth-1 linear maps with the setting's output head.
    for (const LayeredNet& head : a.task_heads) {
        CHECK(head.depth() == 1);
        CHECK(head.head == OutputHead::ScalarPositive);
    }
    CHECK(a.task_heads[0] != a.task_heads[1]);  // distinct sub-seeds
}

TEST_CASE("config invariants are enforced by name") {
    ExperimentConfig c = tiny_config();
    c.tasks = 0;
    CHECK_THROWS_WITH_AS(validate_config(c), "config: tasks must be positive", ContractViolation);
    c = tiny_config();
    c.gamma = 0.7;
    CHECK_THROWS_AS(validate_config(c), ContractViolation);
    c = tiny_config();
    c.setting = Setting::ClassificationKL;
    c.classes = 1;
    CHECK_THROWS_AS(validate_config(c), ContractViolation);
}

TEST_CASE("pretrain objective is the mean over tasks") {
    ExperimentConfig c = tiny_config();
    c.pretrain_tasks = 3;
    GroundTruth gt = make_ground_truth(c);
    // All pretraining tasks share one head: the objective is the mean of the
    // per-sample single-task losses.
    gt.pretrain_heads[1] = gt.pretrain_heads[0];
    gt.pretrain_heads[2] = gt.pretrain_heads[0];

    ArchSpec rep_spec;
    rep_spec.in_dim = c.input_dim;
    rep_spec.out_dim = c.rep_dim;
    rep_spec.depth = c.depth_weak;
    const LayeredNet rep = init_net(rep_spec, rng::derive_seed(c.seed, "probe"));

    const double objective = pretrain_objective(c, gt, rep);

    double mean = 0.0;
    for (int t = 0; t < 3; ++t) {
        const SampleSet data = gaussian_sample(c.pretrain_samples, c.input_dim,
                                               rng::derive_seed(c.seed, "pretrain-data", static_cast<std::uint64_t>(t)),
                                               "probe");
        const LayeredNet teacher = compose(gt.h_star, gt.pretrain_heads[0]);
        LossSpec loss;
        loss.kind = LossKind::ProfileKL;
        loss.direction = KlDirection::StudentFirst;
        loss.targets = forward(teacher, data);
        loss.floor_pre = c.floor_pre;
        mean += loss_value(compose(rep, gt.pretrain_heads[0]), data, loss) / 3.0;
    }
    CHECK(objective == doctest::Approx(mean).epsilon(1e-14));
}

TEST_CASE("pretraining from the ground-truth representation returns immediately") {
    ExperimentConfig c = tiny_config();
    c.depth_weak = c.depth_star;  // same class, loss starts at the global minimum
    const GroundTruth gt = make_ground_truth(c);
    const PretrainResult r = pretrain_representation(c, Which::Weak, gt, &gt.h_star);
    CHECK(r.initial_loss == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.final_loss == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.converged);
    CHECK(r.rep == gt.h_star);
}

TEST_CASE("pretraining in the perturbation regime is a contract violation") {
    ExperimentConfig c = tiny_config();
    c.regime = Regime::NonrealizablePerturb;
    const GroundTruth gt = make_ground_truth(c);
    CHECK_THROWS_AS(pretrain_representation(c, Which::Weak, gt), ContractViolation);
}

TEST_CASE("finetune_weak freezes the representation and reduces the loss") {
    const ExperimentConfig c = tiny_config();
    const GroundTruth gt = make_ground_truth(c);
    const PretrainResult pre = pretrain_representation(c, Which::Weak, gt);
    const HeadFit fit = finetune_weak(c, pre.rep, 0, gt);
    CHECK(fit.fit.final_loss <= fit.fit.initial_loss);
    // Composed net = representation layers + head layer, rep bitwise frozen.
    REQUIRE(fit.composed.depth() == pre.rep.depth() + 1);
    for (int l = 0; l < pre.rep.depth(); ++l) {
        CHECK(fit.composed.layers[static_cast<std::size_t>(l)] == pre.rep.layers[static_cast<std::size_t>(l)]);
    }
}

TEST_CASE("w2s zero-misfit case: weak model inside the strong class") {
    ExperimentConfig c = tiny_config();
    c.head_schedule = {4000, 0.05, 1e-9};
    const GroundTruth gt = make_ground_truth(c);
    const PretrainResult pre = pretrain_representation(c, Which::Weak, gt);
    const HeadFit weak = finetune_weak(c, pre.rep, 0, gt);
    // Strong representation equal to the weak one: F_w is realizable for the
    // student, so the supervision loss can reach ~0.
    const HeadFit sw = w2s_supervise(c, pre.rep, weak.composed, 0, c.w2s_n(), "w2s-data");
    const double floor = c.floor_pre / sw.sample.size();
    const double misfit = kl_output_distribution(sw.composed, weak.composed, sw.sample, floor, c.floor_pre).value;
    CHECK(misfit < 1e-6);
}

TEST_CASE("run_experiment: realizable tiny run has near-zero ceiling error") {
    ExperimentConfig c = tiny_config();
    c.tasks = 1;
    const RunArtifacts arts = run_experiment(c);
    REQUIRE(arts.results.size() == 1);
    const TaskResult& r = arts.results[0];
    CHECK_FALSE(r.failed);
    CHECK(r.d_star_s >= 0.0);
    CHECK(r.d_star_s < 1e-5);  // realizable: strong ceiling reaches the truth
    CHECK(r.gain == doctest::Approx(r.d_star_w - r.d_star_sw));
    // h_s is the ground-truth representation in the realizable regime.
    CHECK(arts.h_s == arts.gt.h_star);
}

TEST_CASE("run_experiment is deterministic and thread-count independent") {
    ExperimentConfig c = tiny_config();
    c.tasks = 3;
    ExperimentConfig c2 = c;
    c2.threads = 3;
    const RunArtifacts a = run_experiment(c);
    const RunArtifacts b = run_experiment(c2);
    REQUIRE(a.results.size() == b.results.size());
    for (std::size_t i = 0; i < a.results.size(); ++i) {
        CHECK(a.results[i].d_star_w == b.results[i].d_star_w);
        CHECK(a.results[i].d_star_sw == b.results[i].d_star_sw);
        CHECK(a.results[i].d_sw_w == b.results[i].d_sw_w);
        CHECK(a.results[i].wis_value == b.results[i].wis_value);
    }
}

TEST_CASE("perturbation regime wires sigmas into the representations") {
    ExperimentConfig c = tiny_config();
    c.regime = Regime::NonrealizablePerturb;
    c.tasks = 1;
    c.sigma_strong = 0.0;  // strong rep equals h* exactly
    const RunArtifacts arts = run_experiment(c);
    CHECK(arts.h_s == arts.gt.h_star);
    CHECK(arts.h_w != arts.gt.h_star);
    CHECK_FALSE(arts.results[0].failed);
}

TEST_CASE("classification setting produces valid divergences") {
    ExperimentConfig c = tiny_config();
    c.setting = Setting::ClassificationKL;
    c.classes = 4;
    c.tasks = 1;
    c.head_schedule = {800, 0.5, 1e-7};
    const RunArtifacts arts = run_experiment(c);
    const TaskResult& r = arts.results[0];
    CHECK_FALSE(r.failed);
    CHECK(r.d_star_w >= 0.0);
    CHECK(r.d_sw_w >= 0.0);
    CHECK(r.d_star_s >= 0.0);
    CHECK(std::isfinite(r.wis_value));
}
