#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "w2s/net.hpp"

namespace w2s {

enum class Setting { ClassificationKL, OutputDistribution };
enum class Regime { RealizablePretrain, NonrealizablePretrain, NonrealizablePerturb };
enum class LossDirection { ForwardKL, ReverseKL };

const char* setting_name(Setting s);
const char* regime_name(Regime r);
const char* loss_direction_name(LossDirection d);
std::optional<Setting> setting_from_name(const std::string& s);
std::optional<Regime> regime_from_name(const std::string& s);
std::optional<LossDirection> loss_direction_from_name(const std::string& s);

// Full description of one synthetic run. Paper-scale values are the
// defaults; desk-scale runs shrink the counts through the config file.
struct ExperimentConfig {
    Setting setting = Setting::OutputDistribution;
    Regime regime = Regime::RealizablePretrain;
    LossDirection loss_direction = LossDirection::ReverseKL;

    int pretrain_tasks = 10;      // T
    int pretrain_samples = 2000;  // N_r
    int tasks = 100;              // M
    int finetune_samples = 2000;  // N_f
    int w2s_samples = 0;          // weakly-labeled sample size; 0 -> finetune_samples
    int w2s_hat_samples = 0;      // residual-study sample size; 0 -> w2s sample size
    int eval_samples = 2000;

    int input_dim = 8;
    int rep_dim = 16;
    int classes = 4;  // k, classification setting only
    int depth_weak = 2;
    int depth_strong = 8;
    int depth_star = 16;

    double sigma_strong = 0.1;
    double sigma_weak = 9.0;
    double gamma = 0.01;
    double floor_pre = 1e-4;

    std::uint64_t seed = 0;
    // A zero learning rate means "auto": resolved() fills the per-setting
    // default measured for the loss family.
    OptimSchedule head_schedule{3000, 0.0, 1e-5};
    OptimSchedule rep_schedule{2000, 0.0, 1e-5};
    int threads = 1;
    std::string out_dir = "w2slab-out";

    int w2s_n() const { return w2s_samples > 0 ? w2s_samples : finetune_samples; }
    int w2s_hat_n() const { return w2s_hat_samples > 0 ? w2s_hat_samples : w2s_n(); }
    // Effective simplex floor of the divergence estimates reported by a run
    // with this config: the per-row clamp in the classification setting, the
    // profile floor over the evaluation sample otherwise.
    double effective_gamma() const;

    bool operator==(const ExperimentConfig&) const = default;
};

// Fills auto (zero) learning rates with the per-setting defaults. Idempotent.
ExperimentConfig resolved(ExperimentConfig config);

// Throws ContractViolation naming the offending field.
void validate_config(const ExperimentConfig& config);

// Per-task record of the trained models' pairwise divergences and fit flags.
struct TaskResult {
    int task_id = 0;
    double d_star_w = 0.0;     // d(F*, F_w)
    double d_star_sw = 0.0;    // d(F*, F_sw)
    double d_star_shat = 0.0;  // d(F*, F^_sw)
    double d_sw_w = 0.0;       // misfit d(F_sw, F_w)
    double d_shat_w = 0.0;     // d(F^_sw, F_w)
    double d_shat_sw = 0.0;    // d(F^_sw, F_sw)
    double d_star_s = 0.0;     // epsilon = d(F*, F_s)
    double gain = 0.0;         // d_star_w - d_star_sw
    double wis_value = 0.0;    // weighted IS, weight F_sw - F_w
    int n_w2s = 0;
    int n_hat = 0;
    bool weak_converged = false;
    bool ceiling_converged = false;
    bool sw_converged = false;
    bool shat_converged = false;
    bool converged = false;  // all four fits converged and evaluation succeeded
    bool failed = false;     // training aborted; divergences are NaN
};

struct GroundTruth {
    LayeredNet h_star;
    std::vector<LayeredNet> task_heads;      // f_1*..f_M*
    std::vector<LayeredNet> pretrain_heads;  // f_1*..f_T* (pretraining tasks)
};

GroundTruth make_ground_truth(const ExperimentConfig& config);

struct PretrainResult {
    LayeredNet rep;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double final_grad_norm = 0.0;
    bool converged = false;
    bool monotone_warning = false;
};

enum class Which { Weak, Strong };

// Fits a representation to the pretraining objective (heads frozen to the
// pretraining tasks, mean divergence to the ground-truth outputs). `initial`
// overrides the seeded fresh initialization when provided.
PretrainResult pretrain_representation(const ExperimentConfig& config, Which which,
                                       const GroundTruth& gt,
                                       const LayeredNet* initial = nullptr);

// Mean pretraining objective of `rep` over the seeded pretraining tasks.
double pretrain_objective(const ExperimentConfig& config, const GroundTruth& gt, const LayeredNet& rep);

struct HeadFit {
    LayeredNet composed;  // rep + fitted head
    LayeredNet head;      // fitted head alone
    FitResult fit;
    SampleSet sample;
};

// Weak model: head fitted on true labels over the weak representation.
HeadFit finetune_weak(const ExperimentConfig& config, const LayeredNet& h_w, int task_id,
                      const GroundTruth& gt);

// Strong ceiling: head fitted on true labels over the strong representation.
HeadFit train_strong_ceiling(const ExperimentConfig& config, const LayeredNet& h_s, int task_id,
                             const GroundTruth& gt);

// Weak-to-strong supervision on a fresh weakly-labeled sample of size n.
HeadFit w2s_supervise(const ExperimentConfig& config, const LayeredNet& h_s,
                      const LayeredNet& weak_model, int task_id, int n, const char* stream);

struct RunArtifacts {
    GroundTruth gt;
    LayeredNet h_w;
    LayeredNet h_s;
    std::optional<PretrainResult> pretrain_weak;
    std::optional<PretrainResult> pretrain_strong;
    std::vector<TaskResult> results;
};

// End-to-end synthetic procedure: representations, per-task weak models,
// strong ceilings and weak-to-strong fits, all divergences on a held-out
// evaluation sample. Individual task failures are recorded, never fatal.
RunArtifacts run_experiment(const ExperimentConfig& config);

// The models produced for one task; exposed for tests and the CLI.
struct TaskModels {
    LayeredNet weak;
    LayeredNet ceiling;
    LayeredNet sw;
    LayeredNet shat;
};

TaskResult evaluate_task(const ExperimentConfig& config, const GroundTruth& gt, int task_id,
                         const TaskModels& models, bool fits_converged);

}  // namespace w2s
