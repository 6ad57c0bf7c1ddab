#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "w2s/divergence.hpp"
#include "w2s/matrix.hpp"

namespace w2s {

enum class Activation { Relu, Identity };
enum class OutputHead { None, SoftmaxK, ScalarPositive };

struct Layer {
    Matrix w;               // out x in
    std::vector<double> b;  // out

    bool operator==(const Layer&) const = default;
};

// Feed-forward stack: activation between consecutive layers, output head on
// the final linear output. SoftmaxK rows are clamped to head_floor and
// renormalized; ScalarPositive squashes to (0, 1) with a logistic.
struct LayeredNet {
    std::vector<Layer> layers;
    Activation activation = Activation::Relu;
    OutputHead head = OutputHead::None;
    double head_floor = 0.01;

    int in_dim() const { return layers.empty() ? 0 : layers.front().w.cols; }
    int out_dim() const { return layers.empty() ? 0 : layers.back().w.rows; }
    int depth() const { return static_cast<int>(layers.size()); }
    std::size_t parameter_count() const;
    void validate() const;

    bool operator==(const LayeredNet&) const = default;
};

struct ArchSpec {
    int in_dim = 0;
    int out_dim = 0;
    int depth = 1;
    int hidden = 0;  // 0 means hidden width = out_dim
    Activation activation = Activation::Relu;
    OutputHead head = OutputHead::None;
    double head_floor = 0.01;
};

// Deterministic He-style initialization: weights N(0, 2/fan_in), biases zero.
LayeredNet init_net(const ArchSpec& spec, std::uint64_t seed);

// Adds independent N(0, sigma^2) noise to every weight and bias.
LayeredNet perturb_net(const LayeredNet& net, double sigma, std::uint64_t seed);

// Concatenates representation layers with head layers; the activation is
// applied between them, so the head sees the activated representation.
LayeredNet compose(const LayeredNet& rep, const LayeredNet& head);

struct SampleSet {
    Matrix inputs;  // n x d
    std::uint64_t source_seed = 0;
    std::string distribution_tag;

    int size() const { return inputs.rows; }
    int dim() const { return inputs.cols; }
};

// n draws from N(0, I_d); tag records the stream for the data-separation audit.
SampleSet gaussian_sample(int n, int d, std::uint64_t seed, std::string tag);

// Full forward pass with the output head applied.
Matrix forward(const LayeredNet& net, const SampleSet& inputs);

// Forward pass up to the final linear output (head not applied).
Matrix forward_linear(const LayeredNet& net, const Matrix& x);

// Activated representation output: activation applied to every layer output
// including the last, matching what compose() feeds to a head.
Matrix rep_features(const LayeredNet& rep, const Matrix& x);

enum class LossKind { PointwiseKL, ProfileKL };
enum class KlDirection { TeacherFirst, StudentFirst };  // forward / reverse KL

// KL-type training loss against fixed teacher outputs.
//   PointwiseKL: mean over rows of KL between per-row distributions
//                (targets: n x k rows on the clamped simplex).
//   ProfileKL:   KL between sample-normalized output profiles
//                (targets: n x 1 raw teacher outputs, normalized internally).
struct LossSpec {
    LossKind kind = LossKind::PointwiseKL;
    KlDirection direction = KlDirection::TeacherFirst;
    Matrix targets;
    double gamma = 0.01;      // per-row clamp floor (PointwiseKL)
    double floor_pre = 1e-4;  // pre-normalization floor (ProfileKL)
};

struct GradientRecord {
    std::vector<Layer> grads;  // shapes mirror the net
    double loss_value = 0.0;
};

double loss_value(const LayeredNet& net, const SampleSet& data, const LossSpec& loss);

// Exact reverse-mode gradient of the scalar loss w.r.t. every parameter.
GradientRecord backward(const LayeredNet& net, const SampleSet& data, const LossSpec& loss);

struct OptimSchedule {
    int steps = 3000;
    double lr = 0.05;
    double grad_norm_tol = 1e-5;

    bool operator==(const OptimSchedule&) const = default;
};

struct FitResult {
    LayeredNet net;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double final_grad_norm = 0.0;
    int steps_run = 0;
    bool converged = false;        // gradient norm reached tolerance
    bool monotone_warning = false; // final loss exceeded initial loss
};

// Full-batch gradient descent; layers with trainable_mask[i] == 0 are frozen
// and returned bitwise unchanged.
FitResult sgd_fit(const LayeredNet& net, const std::vector<std::uint8_t>& trainable_mask,
                  const SampleSet& data, const LossSpec& loss, const OptimSchedule& schedule);

// Flat text serialization, 17 significant digits (round-trips doubles exactly).
std::string serialize_net(const LayeredNet& net);
LayeredNet deserialize_net(const std::string& text);
void save_net(const LayeredNet& net, const std::string& path);
LayeredNet load_net(const std::string& path);

// Setting-2 empirical divergence: normalizes each net's outputs over the
// sample, then takes the discrete KL between the two profiles.
DivergenceValue kl_output_distribution(const LayeredNet& f, const LayeredNet& g,
                                       const SampleSet& sample, double floor,
                                       double floor_pre = 1e-4);

}  // namespace w2s
