#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace w2s {

enum class DivKind { KL, TV, IS, WIS, EmpiricalKL };

const char* div_kind_name(DivKind kind);

// Non-negative scalar in nats (WIS excepted: a signed weight function may
// push it negative).
struct DivergenceValue {
    double value = 0.0;
    DivKind kind = DivKind::KL;
};

// A point on the floor-clamped probability simplex: every entry lies in
// [floor, 1] and the entries sum to 1 within kSumTolerance. Immutable after
// construction; the constructor enforces the invariants.
class ProbVector {
public:
    static constexpr double kSumTolerance = 1e-9;
    static constexpr double kEntrySlack = 1e-12;

    ProbVector(std::vector<double> entries, double floor);

    const std::vector<double>& entries() const { return entries_; }
    double floor() const { return floor_; }
    std::size_t size() const { return entries_.size(); }
    double operator[](std::size_t i) const { return entries_[i]; }

    bool operator==(const ProbVector&) const = default;

private:
    std::vector<double> entries_;
    double floor_ = 0.0;
};

// Water-filling projection onto the floor-clamped simplex. `v` must be
// non-negative with a positive sum; on return it sums to 1 with every entry
// >= floor. Entries pinned at the floor are marked 1 in the returned mask.
// Throws DegenerateInput if the fixpoint is not reached in max_passes.
std::vector<std::uint8_t> clamp_normalize(std::vector<double>& v, double floor, int max_passes = 8);

// Clamps raw values to [floor_pre, +inf), normalizes to unit sum, then
// projects onto the floor-clamped simplex.
ProbVector normalize_outputs(std::span<const double> raw, double floor, double floor_pre = 1e-4);

// Sum_i p_i log(p_i / q_i), in nats.
DivergenceValue kl_discrete(const ProbVector& p, const ProbVector& q);

// Weighted mean of pointwise KL divergences; weights must be non-negative
// and sum to 1 (uniform 1/n weights give the empirical estimate).
DivergenceValue kl_population(std::span<const ProbVector> f_outputs,
                              std::span<const ProbVector> g_outputs,
                              std::span<const double> weights);

// (1/2) Sum_i |p_i - q_i|, in [0, 1].
DivergenceValue tv_distance(const ProbVector& p, const ProbVector& q);

// Sum_i w_i (p_i/q_i - log(p_i/q_i) - 1). Weights may be negative, so the
// result may be too; the all-ones case is the plain Itakura-Saito divergence
// and is non-negative.
DivergenceValue weighted_is_divergence(const ProbVector& p, const ProbVector& q,
                                       std::span<const double> weight);

// Bretagnolle-Huber: sqrt(1 - exp(-kl)), an upper bound on TV distance.
double bh_tv_bound(DivergenceValue kl);

// Pinsker: sqrt(kl / 2), an upper bound on half the L1 distance.
double pinsker_l1_bound(DivergenceValue kl);

}  // namespace w2s
