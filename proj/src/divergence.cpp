#include "w2s/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "w2s/errors.hpp"

namespace w2s {

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* op) {
    if (a != b) {
        throw ContractViolation(std::string(op) + ": dimension mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
    }
}

}  // namespace

const char* div_kind_name(DivKind kind) {
    switch (kind) {
        case DivKind::KL: return "KL";
        case DivKind::TV: return "TV";
        case DivKind::IS: return "IS";
        case DivKind::WIS: return "WIS";
        case DivKind::EmpiricalKL: return "empirical-KL";
    }
    return "?";
}

ProbVector::ProbVector(std::vector<double> entries, double floor)
    : entries_(std::move(entries)), floor_(floor) {
    if (!(floor > 0.0 && floor < 1.0)) {
        throw ContractViolation("ProbVector: floor must lie in (0, 1), got " + std::to_string(floor));
    }
    if (entries_.empty()) {
        throw ContractViolation("ProbVector: empty entry list");
    }
    double sum = 0.0;
    for (double& e : entries_) {
        if (!std::isfinite(e)) {
            throw ContractViolation("ProbVector: non-finite entry");
        }
        if (e < floor_) {
            if (e < floor_ - kEntrySlack) {
                throw ContractViolation("ProbVector: entry " + std::to_string(e) +
                                        " below clamp floor " + std::to_string(floor_));
            }
            e = floor_;  // absorb last-bit dust from upstream arithmetic
        }
        if (e > 1.0 + kEntrySlack) {
            throw ContractViolation("ProbVector: entry " + std::to_string(e) + " exceeds 1");
        }
        e = std::min(e, 1.0);
        sum += e;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
        throw ContractViolation("ProbVector: entries sum to " + std::to_string(sum) + ", expected 1");
    }
}

std::vector<std::uint8_t> clamp_normalize(std::vector<double>& v, double floor, int max_passes) {
    const std::size_t k = v.size();
    if (k < 1) throw ContractViolation("clamp_normalize: empty vector");
    if (!(floor > 0.0 && floor < 1.0)) {
        throw ContractViolation("clamp_normalize: floor must lie in (0, 1)");
    }
    if (floor * static_cast<double>(k) > 1.0 + 1e-12) {
        throw ContractViolation("clamp_normalize: floor * dimension exceeds 1, simplex is empty");
    }
    double sum = 0.0;
    for (double e : v) {
        if (!(std::isfinite(e)) || e < 0.0) {
            throw DegenerateInput("clamp_normalize: entries must be finite and non-negative");
        }
        sum += e;
    }
    if (sum <= 0.0) throw DegenerateInput("clamp_normalize: zero total mass");
    for (double& e : v) e /= sum;

    std::vector<std::uint8_t> pinned(k, 0);
    std::size_t pinned_count = 0;
    for (int pass = 0; pass < max_passes; ++pass) {
        // Rescale free entries so free mass + pinned mass = 1, then pin any
        // free entry that fell to the floor. Each pass pins at least one new
        // entry or terminates.
        double free_sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            if (!pinned[i]) free_sum += v[i];
        }
        const double target = 1.0 - floor * static_cast<double>(pinned_count);
        if (free_sum <= 0.0) throw DegenerateInput("clamp_normalize: free mass vanished");
        const double scale = target / free_sum;
        bool newly_pinned = false;
        for (std::size_t i = 0; i < k; ++i) {
            if (pinned[i]) continue;
            v[i] *= scale;
            if (v[i] <= floor * (1.0 + 1e-12)) {
                v[i] = floor;
                pinned[i] = 1;
                ++pinned_count;
                newly_pinned = true;
            }
        }
        if (!newly_pinned) return pinned;
        if (pinned_count == k) {
            // Only consistent if floor * k == 1; otherwise the input is unusable.
            if (std::abs(floor * static_cast<double>(k) - 1.0) <= 1e-9) return pinned;
            throw DegenerateInput("clamp_normalize: all entries pinned at the floor");
        }
    }
    throw DegenerateInput("clamp_normalize: no fixpoint after max passes");
}

ProbVector normalize_outputs(std::span<const double> raw, double floor, double floor_pre) {
    if (raw.size() < 2) throw ContractViolation("normalize_outputs: need at least 2 entries");
    if (!(floor > 0.0 && floor < 1.0)) {
        throw ContractViolation("normalize_outputs: floor must lie in (0, 1)");
    }
    if (!(floor_pre > 0.0)) throw ContractViolation("normalize_outputs: floor_pre must be positive");
    double max_raw = -std::numeric_limits<double>::infinity();
    for (double r : raw) {
        if (!std::isfinite(r)) throw DegenerateInput("normalize_outputs: non-finite input");
        max_raw = std::max(max_raw, r);
    }
    if (max_raw <= 0.0) throw DegenerateInput("normalize_outputs: all inputs non-positive");
    std::vector<double> v(raw.begin(), raw.end());
    for (double& e : v) e = std::max(e, floor_pre);
    clamp_normalize(v, floor);
    return ProbVector(std::move(v), floor);
}

DivergenceValue kl_discrete(const ProbVector& p, const ProbVector& q) {
    require_same_size(p.size(), q.size(), "kl_discrete");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        sum += p[i] * std::log(p[i] / q[i]);
    }
    if (sum < 0.0) {
        if (sum < -1e-9) throw NumericOverflow("kl_discrete: negative divergence " + std::to_string(sum));
        sum = 0.0;
    }
    return {sum, DivKind::KL};
}

DivergenceValue kl_population(std::span<const ProbVector> f_outputs,
                              std::span<const ProbVector> g_outputs,
                              std::span<const double> weights) {
    require_same_size(f_outputs.size(), g_outputs.size(), "kl_population");
    require_same_size(f_outputs.size(), weights.size(), "kl_population(weights)");
    if (f_outputs.empty()) throw ContractViolation("kl_population: empty output lists");
    double wsum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw ContractViolation("kl_population: negative weight");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9) {
        throw ContractViolation("kl_population: weights sum to " + std::to_string(wsum) + ", expected 1");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < f_outputs.size(); ++j) {
        sum += weights[j] * kl_discrete(f_outputs[j], g_outputs[j]).value;
    }
    return {sum, DivKind::KL};
}

DivergenceValue tv_distance(const ProbVector& p, const ProbVector& q) {
    require_same_size(p.size(), q.size(), "tv_distance");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(p[i] - q[i]);
    return {0.5 * sum, DivKind::TV};
}

DivergenceValue weighted_is_divergence(const ProbVector& p, const ProbVector& q,
                                       std::span<const double> weight) {
    require_same_size(p.size(), q.size(), "weighted_is_divergence");
    require_same_size(p.size(), weight.size(), "weighted_is_divergence(weight)");
    bool all_ones = true;
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!std::isfinite(weight[i])) throw ContractViolation("weighted_is_divergence: non-finite weight");
        all_ones = all_ones && weight[i] == 1.0;
        const double ratio = p[i] / q[i];
        sum += weight[i] * (ratio - std::log(ratio) - 1.0);
    }
    if (all_ones) {
        return {std::max(sum, 0.0), DivKind::IS};
    }
    return {sum, DivKind::WIS};
}

double bh_tv_bound(DivergenceValue kl) {
    if (kl.kind != DivKind::KL) {
        throw ContractViolation(std::string("bh_tv_bound: expected KL kind, got ") + div_kind_name(kl.kind));
    }
    // -expm1 keeps precision near kl = 0; the cap keeps the value strictly
    // below 1 when rounding would saturate (the mathematical value is < 1).
    const double v = std::sqrt(-std::expm1(-kl.value));
    return std::min(v, std::nextafter(1.0, 0.0));
}

double pinsker_l1_bound(DivergenceValue kl) {
    if (kl.kind != DivKind::KL && kl.kind != DivKind::EmpiricalKL) {
        throw ContractViolation(std::string("pinsker_l1_bound: expected KL kind, got ") + div_kind_name(kl.kind));
    }
    return std::sqrt(kl.value / 2.0);
}

}  // namespace w2s
