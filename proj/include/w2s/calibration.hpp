#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "w2s/divergence.hpp"
#include "w2s/rng.hpp"

namespace w2s {

// Finite discrete domain with known input masses, model scores and true
// conditional class probabilities (bayes scores). Exact calibration errors
// are well-defined here because conditioning on a score value reduces to
// pooling points that share it.
struct DiscreteClassifierInstance {
    std::vector<int> point_ids;
    std::vector<double> masses;               // >= 0, sum to 1
    std::vector<ProbVector> model_scores;     // one row per point
    std::vector<ProbVector> bayes_scores;     // one row per point

    std::size_t size() const { return masses.size(); }
    int num_classes() const { return model_scores.empty() ? 0 : static_cast<int>(model_scores[0].size()); }
    void validate() const;
};

enum class Estimator { Exact, Binned };

struct CalibrationReport {
    double mce = 0.0;                 // in [0, 2]
    std::optional<double> ece;        // binary exact or binned estimate
    Estimator estimator = Estimator::Exact;
    int bin_count = 0;
};

// Exact marginal calibration error. Scores equal after rounding to 12
// decimal digits are pooled per coordinate before comparing with the pooled
// bayes conditional. For k = 2 the exact binary ECE is filled in as well.
CalibrationReport mce_exact(const DiscreteClassifierInstance& instance);

// Variant that pools on the full score vector instead of per coordinate.
CalibrationReport mce_exact_vector_pooled(const DiscreteClassifierInstance& instance);

// Standard equal-width binned estimator over (confidence, correctness) pairs.
CalibrationReport ece_binned(std::span<const std::pair<double, bool>> scored, int bins);

// Right-hand side of the calibration gap bound: 2 * sqrt(1 - exp(-d)).
double calibration_gap_bound(DivergenceValue d_sw_w);

// Delimited text: point id, mass, k score columns, k bayes columns.
std::string serialize_instance(const DiscreteClassifierInstance& instance);
DiscreteClassifierInstance parse_instance(const std::string& text, double floor);
void save_instance(const DiscreteClassifierInstance& instance, const std::string& path);
DiscreteClassifierInstance load_instance(const std::string& path, double floor);

// Random instance on a shared domain: masses, bayes scores and one model
// score row per point, all floor-clamped. Used by the verification suites.
DiscreteClassifierInstance random_instance(rng::Stream& stream, int k, int domain_size, double gamma);

// Same domain/masses/bayes as `base`, fresh random model scores.
DiscreteClassifierInstance with_random_scores(const DiscreteClassifierInstance& base, rng::Stream& stream);

// Population KL between two instances' model scores under the shared masses.
DivergenceValue instance_kl(const DiscreteClassifierInstance& f, const DiscreteClassifierInstance& g);

}  // namespace w2s
