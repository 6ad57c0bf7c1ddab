#include "w2s/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <thread>

#include "w2s/errors.hpp"
#include "w2s/rng.hpp"

namespace w2s {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ArchSpec head_arch(const ExperimentConfig& config) {
    ArchSpec spec;
    spec.in_dim = config.rep_dim;
    spec.depth = 1;
    spec.activation = Activation::Relu;  // irrelevant at depth 1
    if (config.setting == Setting::ClassificationKL) {
        spec.out_dim = config.classes;
        spec.head = OutputHead::SoftmaxK;
        spec.head_floor = config.gamma;
    } else {
        spec.out_dim = 1;
        spec.head = OutputHead::ScalarPositive;
    }
    return spec;
}

ArchSpec rep_arch(const ExperimentConfig& config, int depth) {
    ArchSpec spec;
    spec.in_dim = config.input_dim;
    spec.out_dim = config.rep_dim;
    spec.depth = depth;
    spec.activation = Activation::Relu;
    spec.head = OutputHead::None;
    return spec;
}

LossSpec make_loss(const ExperimentConfig& config, Matrix teacher_outputs, KlDirection direction) {
    LossSpec loss;
    loss.kind = config.setting == Setting::ClassificationKL ? LossKind::PointwiseKL : LossKind::ProfileKL;
    loss.direction = direction;
    loss.targets = std::move(teacher_outputs);
    loss.gamma = config.gamma;
    loss.floor_pre = config.floor_pre;
    return loss;
}

// Head fit over a frozen representation: the representation outputs are
// computed once and the head is trained on them, which is exactly the
// composed-net fit with every representation layer frozen.
HeadFit fit_head_on(const ExperimentConfig& config, const LayeredNet& rep, const Matrix& teacher_outputs,
                    KlDirection direction, SampleSet sample, std::uint64_t init_seed) {
    HeadFit out;
    out.sample = std::move(sample);
    SampleSet features;
    features.inputs = rep_features(rep, out.sample.inputs);
    features.source_seed = out.sample.source_seed;
    features.distribution_tag = out.sample.distribution_tag + "+rep";
    const LayeredNet head0 = init_net(head_arch(config), init_seed);
    LossSpec loss = make_loss(config, teacher_outputs, direction);
    out.fit = sgd_fit(head0, {1}, features, loss, config.head_schedule);
    out.head = out.fit.net;
    out.composed = compose(rep, out.head);
    return out;
}

void run_tasks_parallel(int count, int threads, const std::function<void(int)>& body);

}  // namespace

const char* setting_name(Setting s) {
    return s == Setting::ClassificationKL ? "classification-kl" : "output-distribution";
}

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::RealizablePretrain: return "realizable-pretrain";
        case Regime::NonrealizablePretrain: return "nonrealizable-pretrain";
        case Regime::NonrealizablePerturb: return "nonrealizable-perturb";
    }
    return "?";
}

const char* loss_direction_name(LossDirection d) {
    return d == LossDirection::ForwardKL ? "forward-kl" : "reverse-kl";
}

std::optional<Setting> setting_from_name(const std::string& s) {
    if (s == "classification-kl") return Setting::ClassificationKL;
    if (s == "output-distribution") return Setting::OutputDistribution;
    return std::nullopt;
}

std::optional<Regime> regime_from_name(const std::string& s) {
    if (s == "realizable-pretrain") return Regime::RealizablePretrain;
    if (s == "nonrealizable-pretrain") return Regime::NonrealizablePretrain;
    if (s == "nonrealizable-perturb") return Regime::NonrealizablePerturb;
    return std::nullopt;
}

std::optional<LossDirection> loss_direction_from_name(const std::string& s) {
    if (s == "forward-kl") return LossDirection::ForwardKL;
    if (s == "reverse-kl") return LossDirection::ReverseKL;
    return std::nullopt;
}

double ExperimentConfig::effective_gamma() const {
    if (setting == Setting::ClassificationKL) return gamma;
    return floor_pre / eval_samples;
}

ExperimentConfig resolved(ExperimentConfig config) {
    // Profile losses tolerate and need much larger steps than the mean
    // pointwise-KL losses; values below were tuned on desk-scale runs.
    if (config.head_schedule.lr == 0.0) {
        config.head_schedule.lr = config.setting == Setting::OutputDistribution ? 5.0 : 0.5;
    }
    if (config.rep_schedule.lr == 0.0) {
        config.rep_schedule.lr = 0.5;
    }
    return config;
}

void validate_config(const ExperimentConfig& config) {
    auto positive = [](int v, const char* field) {
        if (v <= 0) throw ContractViolation(std::string("config: ") + field + " must be positive");
    };
    positive(config.pretrain_tasks, "pretrain_tasks");
    positive(config.pretrain_samples, "pretrain_samples");
    positive(config.tasks, "tasks");
    positive(config.finetune_samples, "finetune_samples");
    positive(config.w2s_n(), "w2s_samples");
    positive(config.w2s_hat_n(), "w2s_hat_samples");
    positive(config.eval_samples, "eval_samples");
    positive(config.input_dim, "input_dim");
    positive(config.rep_dim, "rep_dim");
    positive(config.depth_weak, "depth_weak");
    positive(config.depth_strong, "depth_strong");
    positive(config.depth_star, "depth_star");
    positive(config.head_schedule.steps, "head_steps");
    positive(config.rep_schedule.steps, "rep_steps");
    positive(config.threads, "threads");
    if (!(config.gamma > 0.0 && config.gamma < 0.5)) {
        throw ContractViolation("config: gamma must lie in (0, 0.5)");
    }
    if (!(config.floor_pre > 0.0 && config.floor_pre < 1.0)) {
        throw ContractViolation("config: floor_pre must lie in (0, 1)");
    }
    if (config.setting == Setting::ClassificationKL) {
        if (config.classes < 2) throw ContractViolation("config: classes must be >= 2");
        if (config.gamma * config.classes > 1.0) {
            throw ContractViolation("config: gamma * classes exceeds 1");
        }
    }
    if (config.sigma_strong < 0.0 || config.sigma_weak < 0.0) {
        throw ContractViolation("config: sigmas must be >= 0");
    }
    if (config.head_schedule.lr <= 0.0 || config.rep_schedule.lr <= 0.0) {
        throw ContractViolation("config: learning rates must be positive");
    }
}

GroundTruth make_ground_truth(const ExperimentConfig& config) {
    validate_config(config);
    GroundTruth gt;
    gt.h_star = init_net(rep_arch(config, config.depth_star), rng::derive_seed(config.seed, "gt-rep"));
    gt.task_heads.reserve(static_cast<std::size_t>(config.tasks));
    for (int i = 0; i < config.tasks; ++i) {
        gt.task_heads.push_back(init_net(head_arch(config), rng::derive_seed(config.seed, "gt-task-head", static_cast<std::uint64_t>(i))));
    }
    gt.pretrain_heads.reserve(static_cast<std::size_t>(config.pretrain_tasks));
    for (int t = 0; t < config.pretrain_tasks; ++t) {
        gt.pretrain_heads.push_back(init_net(head_arch(config), rng::derive_seed(config.seed, "gt-pretrain-head", static_cast<std::uint64_t>(t))));
    }
    return gt;
}

// Pretraining tasks and their samples are shared between the weak and the
// strong representation fits.
struct PretrainTasks {
    std::vector<SampleSet> data;
    std::vector<LossSpec> losses;
};

static PretrainTasks make_pretrain_tasks(const ExperimentConfig& config, const GroundTruth& gt) {
    PretrainTasks tasks;
    for (int t = 0; t < config.pretrain_tasks; ++t) {
        const std::string tag = "pretrain-data/" + std::to_string(t);
        tasks.data.push_back(gaussian_sample(config.pretrain_samples, config.input_dim,
                                             rng::derive_seed(config.seed, "pretrain-data", static_cast<std::uint64_t>(t)), tag));
        const LayeredNet teacher = compose(gt.h_star, gt.pretrain_heads[static_cast<std::size_t>(t)]);
        Matrix targets = forward(teacher, tasks.data.back());
        tasks.losses.push_back(make_loss(config, std::move(targets), KlDirection::StudentFirst));
    }
    return tasks;
}

double pretrain_objective(const ExperimentConfig& config, const GroundTruth& gt, const LayeredNet& rep) {
    const PretrainTasks tasks = make_pretrain_tasks(config, gt);
    double total = 0.0;
    for (int t = 0; t < config.pretrain_tasks; ++t) {
        const LayeredNet net = compose(rep, gt.pretrain_heads[static_cast<std::size_t>(t)]);
        total += loss_value(net, tasks.data[static_cast<std::size_t>(t)], tasks.losses[static_cast<std::size_t>(t)]);
    }
    return total / config.pretrain_tasks;
}

PretrainResult pretrain_representation(const ExperimentConfig& config, Which which, const GroundTruth& gt,
                                       const LayeredNet* initial) {
    if (config.regime == Regime::NonrealizablePerturb) {
        throw ContractViolation("pretrain_representation: perturbation regime does not pretrain");
    }
    const int depth = which == Which::Weak ? config.depth_weak : config.depth_strong;
    const char* init_tag = which == Which::Weak ? "pretrain-init-weak" : "pretrain-init-strong";
    LayeredNet rep = initial != nullptr
                         ? *initial
                         : init_net(rep_arch(config, depth), rng::derive_seed(config.seed, init_tag));
    const int T = config.pretrain_tasks;
    const int rep_depth = rep.depth();

    PretrainTasks tasks = make_pretrain_tasks(config, gt);

    auto objective = [&](const LayeredNet& r) {
        double total = 0.0;
        for (int t = 0; t < T; ++t) {
            total += loss_value(compose(r, gt.pretrain_heads[static_cast<std::size_t>(t)]),
                                tasks.data[static_cast<std::size_t>(t)], tasks.losses[static_cast<std::size_t>(t)]);
        }
        return total / T;
    };

    std::vector<Layer> acc(static_cast<std::size_t>(rep_depth));
    double loss_now = 0.0, gnorm = 0.0;
    auto eval_grad = [&]() {
        for (int l = 0; l < rep_depth; ++l) {
            const Layer& proto = rep.layers[static_cast<std::size_t>(l)];
            acc[static_cast<std::size_t>(l)].w = Matrix(proto.w.rows, proto.w.cols);
            acc[static_cast<std::size_t>(l)].b.assign(proto.b.size(), 0.0);
        }
        loss_now = 0.0;
        for (int t = 0; t < T; ++t) {
            const LayeredNet net = compose(rep, gt.pretrain_heads[static_cast<std::size_t>(t)]);
            GradientRecord g = backward(net, tasks.data[static_cast<std::size_t>(t)],
                                        tasks.losses[static_cast<std::size_t>(t)]);
            loss_now += g.loss_value / T;
            for (int l = 0; l < rep_depth; ++l) {
                Layer& a = acc[static_cast<std::size_t>(l)];
                const Layer& gl = g.grads[static_cast<std::size_t>(l)];
                for (std::size_t i = 0; i < a.w.a.size(); ++i) a.w.a[i] += gl.w.a[i] / T;
                for (std::size_t i = 0; i < a.b.size(); ++i) a.b[i] += gl.b[i] / T;
            }
        }
        double sq = 0.0;
        for (const Layer& a : acc) {
            for (double v : a.w.a) sq += v * v;
            for (double v : a.b) sq += v * v;
        }
        gnorm = std::sqrt(sq);
    };

    auto apply_step = [&](double lr) {
        LayeredNet next = rep;
        for (int l = 0; l < rep_depth; ++l) {
            Layer& layer = next.layers[static_cast<std::size_t>(l)];
            const Layer& a = acc[static_cast<std::size_t>(l)];
            for (std::size_t i = 0; i < layer.w.a.size(); ++i) layer.w.a[i] -= lr * a.w.a[i];
            for (std::size_t i = 0; i < layer.b.size(); ++i) layer.b[i] -= lr * a.b[i];
        }
        return next;
    };

    PretrainResult result;
    eval_grad();
    result.initial_loss = loss_now;
    for (int step = 0; step < config.rep_schedule.steps; ++step) {
        if (gnorm <= config.rep_schedule.grad_norm_tol) break;
        double lr = config.rep_schedule.lr;
        bool accepted = false;
        for (int tries = 0; tries < 40; ++tries) {
            LayeredNet candidate = apply_step(lr);
            double cand_loss;
            try {
                cand_loss = objective(candidate);
            } catch (const NumericOverflow&) {
                lr *= 0.5;
                continue;
            }
            if (cand_loss <= loss_now - 1e-4 * lr * gnorm * gnorm) {
                rep = std::move(candidate);
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        if (!accepted) break;
        eval_grad();
    }
    result.final_loss = loss_now;
    result.final_grad_norm = gnorm;
    result.converged = gnorm <= config.rep_schedule.grad_norm_tol;
    result.monotone_warning = result.final_loss > result.initial_loss + 1e-12;
    result.rep = std::move(rep);
    return result;
}

HeadFit finetune_weak(const ExperimentConfig& config, const LayeredNet& h_w, int task_id,
                      const GroundTruth& gt) {
    const std::string tag = "weak-data/" + std::to_string(task_id);
    SampleSet sample = gaussian_sample(config.finetune_samples, config.input_dim,
                                       rng::derive_seed(config.seed, "weak-data", static_cast<std::uint64_t>(task_id)), tag);
    const LayeredNet teacher = compose(gt.h_star, gt.task_heads[static_cast<std::size_t>(task_id)]);
    Matrix targets = forward(teacher, sample);
    return fit_head_on(config, h_w, targets, KlDirection::TeacherFirst, std::move(sample),
                       rng::derive_seed(config.seed, "weak-init", static_cast<std::uint64_t>(task_id)));
}

HeadFit train_strong_ceiling(const ExperimentConfig& config, const LayeredNet& h_s, int task_id,
                             const GroundTruth& gt) {
    const std::string tag = "ceiling-data/" + std::to_string(task_id);
    SampleSet sample = gaussian_sample(config.finetune_samples, config.input_dim,
                                       rng::derive_seed(config.seed, "ceiling-data", static_cast<std::uint64_t>(task_id)), tag);
    const LayeredNet teacher = compose(gt.h_star, gt.task_heads[static_cast<std::size_t>(task_id)]);
    Matrix targets = forward(teacher, sample);
    return fit_head_on(config, h_s, targets, KlDirection::TeacherFirst, std::move(sample),
                       rng::derive_seed(config.seed, "ceiling-init", static_cast<std::uint64_t>(task_id)));
}

HeadFit w2s_supervise(const ExperimentConfig& config, const LayeredNet& h_s,
                      const LayeredNet& weak_model, int task_id, int n, const char* stream) {
    const std::string tag = std::string(stream) + "/" + std::to_string(task_id);
    SampleSet sample = gaussian_sample(n, config.input_dim,
                                       rng::derive_seed(config.seed, stream, static_cast<std::uint64_t>(task_id)), tag);
    Matrix weak_labels = forward(weak_model, sample);
    const KlDirection direction = config.loss_direction == LossDirection::ReverseKL
                                      ? KlDirection::StudentFirst
                                      : KlDirection::TeacherFirst;
    const std::string init_stream = std::string(stream) + "-init";
    return fit_head_on(config, h_s, weak_labels, direction, std::move(sample),
                       rng::derive_seed(config.seed, init_stream, static_cast<std::uint64_t>(task_id)));
}

namespace {

// Per-point clamped distributions of every model on the evaluation sample
// (classification setting).
std::vector<ProbVector> prob_rows(const Matrix& outputs, double gamma) {
    std::vector<ProbVector> rows;
    rows.reserve(static_cast<std::size_t>(outputs.rows));
    for (int i = 0; i < outputs.rows; ++i) {
        rows.emplace_back(std::vector<double>(outputs.row(i), outputs.row(i) + outputs.cols), gamma);
    }
    return rows;
}

double mean_pointwise_kl(const std::vector<ProbVector>& a, const std::vector<ProbVector>& b) {
    const std::vector<double> weights(a.size(), 1.0 / static_cast<double>(a.size()));
    return kl_population(a, b, weights).value;
}

}  // namespace

TaskResult evaluate_task(const ExperimentConfig& config, const GroundTruth& gt, int task_id,
                         const TaskModels& models, bool fits_converged) {
    TaskResult r;
    r.task_id = task_id;
    r.n_w2s = config.w2s_n();
    r.n_hat = config.w2s_hat_n();
    const std::string tag = "eval-data/" + std::to_string(task_id);
    SampleSet eval = gaussian_sample(config.eval_samples, config.input_dim,
                                     rng::derive_seed(config.seed, "eval-data", static_cast<std::uint64_t>(task_id)), tag);
    const LayeredNet truth = compose(gt.h_star, gt.task_heads[static_cast<std::size_t>(task_id)]);

    if (config.setting == Setting::OutputDistribution) {
        const double floor = config.floor_pre / config.eval_samples;
        auto profile = [&](const LayeredNet& net) {
            Matrix o = forward(net, eval);
            return normalize_outputs(std::span<const double>(o.a.data(), o.a.size()), floor, config.floor_pre);
        };
        const ProbVector p_star = profile(truth);
        const ProbVector p_w = profile(models.weak);
        const ProbVector p_s = profile(models.ceiling);
        const ProbVector p_sw = profile(models.sw);
        const ProbVector p_shat = profile(models.shat);
        r.d_star_w = kl_discrete(p_star, p_w).value;
        r.d_star_sw = kl_discrete(p_star, p_sw).value;
        r.d_star_shat = kl_discrete(p_star, p_shat).value;
        r.d_sw_w = kl_discrete(p_sw, p_w).value;
        r.d_shat_w = kl_discrete(p_shat, p_w).value;
        r.d_shat_sw = kl_discrete(p_shat, p_sw).value;
        r.d_star_s = kl_discrete(p_star, p_s).value;
        std::vector<double> weight(p_sw.size());
        for (std::size_t i = 0; i < weight.size(); ++i) weight[i] = p_sw[i] - p_w[i];
        r.wis_value = weighted_is_divergence(p_star, p_sw, weight).value;
    } else {
        auto rows = [&](const LayeredNet& net) { return prob_rows(forward(net, eval), config.gamma); };
        const auto p_star = rows(truth);
        const auto p_w = rows(models.weak);
        const auto p_s = rows(models.ceiling);
        const auto p_sw = rows(models.sw);
        const auto p_shat = rows(models.shat);
        r.d_star_w = mean_pointwise_kl(p_star, p_w);
        r.d_star_sw = mean_pointwise_kl(p_star, p_sw);
        r.d_star_shat = mean_pointwise_kl(p_star, p_shat);
        r.d_sw_w = mean_pointwise_kl(p_sw, p_w);
        r.d_shat_w = mean_pointwise_kl(p_shat, p_w);
        r.d_shat_sw = mean_pointwise_kl(p_shat, p_sw);
        r.d_star_s = mean_pointwise_kl(p_star, p_s);
        double wis = 0.0;
        std::vector<double> weight(static_cast<std::size_t>(config.classes));
        for (std::size_t j = 0; j < p_star.size(); ++j) {
            for (std::size_t c = 0; c < weight.size(); ++c) weight[c] = p_sw[j][c] - p_w[j][c];
            wis += weighted_is_divergence(p_star[j], p_sw[j], weight).value;
        }
        r.wis_value = wis / static_cast<double>(p_star.size());
    }
    r.gain = r.d_star_w - r.d_star_sw;
    r.converged = fits_converged;
    return r;
}

namespace {

void run_tasks_parallel(int count, int threads, const std::function<void(int)>& body) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace

RunArtifacts run_experiment(const ExperimentConfig& raw_config) {
    const ExperimentConfig config = resolved(raw_config);
    validate_config(config);
    RunArtifacts arts;
    arts.gt = make_ground_truth(config);

    switch (config.regime) {
        case Regime::RealizablePretrain: {
            arts.pretrain_weak = pretrain_representation(config, Which::Weak, arts.gt);
            arts.h_w = arts.pretrain_weak->rep;
            arts.h_s = arts.gt.h_star;
            break;
        }
        case Regime::NonrealizablePretrain: {
            arts.pretrain_weak = pretrain_representation(config, Which::Weak, arts.gt);
            arts.pretrain_strong = pretrain_representation(config, Which::Strong, arts.gt);
            arts.h_w = arts.pretrain_weak->rep;
            arts.h_s = arts.pretrain_strong->rep;
            break;
        }
        case Regime::NonrealizablePerturb: {
            arts.h_w = perturb_net(arts.gt.h_star, config.sigma_weak, rng::derive_seed(config.seed, "perturb-weak"));
            arts.h_s = perturb_net(arts.gt.h_star, config.sigma_strong, rng::derive_seed(config.seed, "perturb-strong"));
            break;
        }
    }

    arts.results.assign(static_cast<std::size_t>(config.tasks), TaskResult{});
    run_tasks_parallel(config.tasks, config.threads, [&](int i) {
        TaskResult& slot = arts.results[static_cast<std::size_t>(i)];
        try {
            HeadFit weak = finetune_weak(config, arts.h_w, i, arts.gt);
            HeadFit ceiling = train_strong_ceiling(config, arts.h_s, i, arts.gt);
            HeadFit sw = w2s_supervise(config, arts.h_s, weak.composed, i, config.w2s_n(), "w2s-data");
            HeadFit shat = w2s_supervise(config, arts.h_s, weak.composed, i, config.w2s_hat_n(), "w2s-hat-data");
            TaskModels models{weak.composed, ceiling.composed, sw.composed, shat.composed};
            const bool fits_ok = weak.fit.converged && ceiling.fit.converged && sw.fit.converged && shat.fit.converged;
            slot = evaluate_task(config, arts.gt, i, models, fits_ok);
            slot.weak_converged = weak.fit.converged;
            slot.ceiling_converged = ceiling.fit.converged;
            slot.sw_converged = sw.fit.converged;
            slot.shat_converged = shat.fit.converged;
        } catch (const std::exception&) {
            slot = TaskResult{};
            slot.task_id = i;
            slot.failed = true;
            slot.converged = false;
            slot.d_star_w = slot.d_star_sw = slot.d_star_shat = kNaN;
            slot.d_sw_w = slot.d_shat_w = slot.d_shat_sw = slot.d_star_s = kNaN;
            slot.gain = slot.wis_value = kNaN;
        }
    });
    return arts;
}

}  // namespace w2s
