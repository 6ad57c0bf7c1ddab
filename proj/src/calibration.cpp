#include "w2s/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "w2s/errors.hpp"

namespace w2s {

namespace {

// Pooling key: scores equal to 12 decimal digits are treated as one value.
long long pool_key(double v) { return std::llround(v * 1e12); }

struct Pool {
    double mass = 0.0;
    double mass_score = 0.0;  // sum of mass * model score
    double mass_bayes = 0.0;  // sum of mass * bayes score
};

}  // namespace

void DiscreteClassifierInstance::validate() const {
    const std::size_t n = masses.size();
    if (n == 0) throw ContractViolation("instance: empty domain");
    if (point_ids.size() != n || model_scores.size() != n || bayes_scores.size() != n) {
        throw ContractViolation("instance: field lengths disagree");
    }
    double total = 0.0;
    for (double m : masses) {
        if (!(m >= 0.0) || !std::isfinite(m)) throw ContractViolation("instance: bad mass");
        total += m;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ContractViolation("instance: masses sum to " + std::to_string(total));
    }
    const std::size_t k = model_scores[0].size();
    for (std::size_t i = 0; i < n; ++i) {
        if (model_scores[i].size() != k || bayes_scores[i].size() != k) {
            throw ContractViolation("instance: score dimensions disagree");
        }
    }
}

CalibrationReport mce_exact(const DiscreteClassifierInstance& instance) {
    instance.validate();
    const int k = instance.num_classes();
    const std::size_t n = instance.size();
    double mce = 0.0;
    double binary_ece = 0.0;
    for (int c = 0; c < k; ++c) {
        std::map<long long, Pool> pools;
        for (std::size_t i = 0; i < n; ++i) {
            const double score = instance.model_scores[i][static_cast<std::size_t>(c)];
            Pool& p = pools[pool_key(score)];
            p.mass += instance.masses[i];
            p.mass_score += instance.masses[i] * score;
            p.mass_bayes += instance.masses[i] * instance.bayes_scores[i][static_cast<std::size_t>(c)];
        }
        double coord = 0.0;
        for (const auto& [key, p] : pools) {
            if (p.mass <= 0.0) continue;
            const double score = p.mass_score / p.mass;
            const double conditional = p.mass_bayes / p.mass;
            coord += p.mass * std::abs(score - conditional);
        }
        mce += coord;
        if (c == 0) binary_ece = coord;
    }
    CalibrationReport rep;
    rep.mce = mce;
    rep.estimator = Estimator::Exact;
    if (k == 2) rep.ece = binary_ece;
    return rep;
}

CalibrationReport mce_exact_vector_pooled(const DiscreteClassifierInstance& instance) {
    instance.validate();
    const int k = instance.num_classes();
    const std::size_t n = instance.size();
    double mce = 0.0;
    // Pool on the whole score vector, then compare per coordinate.
    std::map<std::vector<long long>, std::pair<double, std::vector<double>>> pools;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<long long> key(static_cast<std::size_t>(k));
        for (int c = 0; c < k; ++c) key[static_cast<std::size_t>(c)] = pool_key(instance.model_scores[i][static_cast<std::size_t>(c)]);
        auto& [mass, acc] = pools[key];
        if (acc.empty()) acc.assign(static_cast<std::size_t>(2 * k), 0.0);
        mass += instance.masses[i];
        for (int c = 0; c < k; ++c) {
            acc[static_cast<std::size_t>(c)] += instance.masses[i] * instance.model_scores[i][static_cast<std::size_t>(c)];
            acc[static_cast<std::size_t>(k + c)] += instance.masses[i] * instance.bayes_scores[i][static_cast<std::size_t>(c)];
        }
    }
    for (const auto& [key, entry] : pools) {
        const auto& [mass, acc] = entry;
        if (mass <= 0.0) continue;
        for (int c = 0; c < k; ++c) {
            mce += mass * std::abs(acc[static_cast<std::size_t>(c)] / mass - acc[static_cast<std::size_t>(k + c)] / mass);
        }
    }
    CalibrationReport rep;
    rep.mce = mce;
    rep.estimator = Estimator::Exact;
    return rep;
}

CalibrationReport ece_binned(std::span<const std::pair<double, bool>> scored, int bins) {
    if (scored.empty()) throw DegenerateInput("ece_binned: empty input");
    if (bins < 1) throw ContractViolation("ece_binned: bins must be >= 1");
    std::vector<double> conf_sum(static_cast<std::size_t>(bins), 0.0);
    std::vector<double> correct_sum(static_cast<std::size_t>(bins), 0.0);
    std::vector<int> counts(static_cast<std::size_t>(bins), 0);
    for (const auto& [conf, correct] : scored) {
        if (!(conf >= 0.0 && conf <= 1.0)) throw ContractViolation("ece_binned: confidence outside [0, 1]");
        int b = static_cast<int>(conf * bins);
        b = std::min(b, bins - 1);
        conf_sum[static_cast<std::size_t>(b)] += conf;
        correct_sum[static_cast<std::size_t>(b)] += correct ? 1.0 : 0.0;
        counts[static_cast<std::size_t>(b)] += 1;
    }
    const double n = static_cast<double>(scored.size());
    double ece = 0.0;
    for (int b = 0; b < bins; ++b) {
        const std::size_t idx = static_cast<std::size_t>(b);
        if (counts[idx] == 0) continue;
        const double acc = correct_sum[idx] / counts[idx];
        const double conf = conf_sum[idx] / counts[idx];
        ece += (counts[idx] / n) * std::abs(acc - conf);
    }
    CalibrationReport rep;
    rep.mce = 2.0 * ece;  // binned MCE proxy; exact only in the binary case
    rep.ece = ece;
    rep.estimator = Estimator::Binned;
    rep.bin_count = bins;
    return rep;
}

double calibration_gap_bound(DivergenceValue d_sw_w) {
    if (d_sw_w.kind != DivKind::KL && d_sw_w.kind != DivKind::EmpiricalKL) {
        throw ContractViolation("calibration_gap_bound: expected a KL divergence");
    }
    return 2.0 * std::sqrt(-std::expm1(-d_sw_w.value));
}

std::string serialize_instance(const DiscreteClassifierInstance& instance) {
    instance.validate();
    std::ostringstream os;
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
    };
    const int k = instance.num_classes();
    os << "point_id,mass";
    for (int c = 0; c < k; ++c) os << ",score" << c;
    for (int c = 0; c < k; ++c) os << ",bayes" << c;
    os << "\n";
    for (std::size_t i = 0; i < instance.size(); ++i) {
        os << instance.point_ids[i] << ",";
        put(instance.masses[i]);
        for (int c = 0; c < k; ++c) {
            os << ",";
            put(instance.model_scores[i][static_cast<std::size_t>(c)]);
        }
        for (int c = 0; c < k; ++c) {
            os << ",";
            put(instance.bayes_scores[i][static_cast<std::size_t>(c)]);
        }
        os << "\n";
    }
    return os.str();
}

DiscreteClassifierInstance parse_instance(const std::string& text, double floor) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw ContractViolation("parse_instance: empty text");
    int k = 0;
    {
        std::size_t cols = 1;
        for (char c : line) cols += c == ',' ? 1 : 0;
        if (cols < 6 || (cols - 2) % 2 != 0) throw ContractViolation("parse_instance: bad header");
        k = static_cast<int>((cols - 2) / 2);
    }
    DiscreteClassifierInstance inst;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        auto next = [&]() {
            if (!std::getline(ls, cell, ',')) throw ContractViolation("parse_instance: short row");
            return cell;
        };
        inst.point_ids.push_back(std::stoi(next()));
        inst.masses.push_back(std::stod(next()));
        std::vector<double> score, bayes;
        for (int c = 0; c < k; ++c) score.push_back(std::stod(next()));
        for (int c = 0; c < k; ++c) bayes.push_back(std::stod(next()));
        inst.model_scores.emplace_back(std::move(score), floor);
        inst.bayes_scores.emplace_back(std::move(bayes), floor);
    }
    inst.validate();
    return inst;
}

void save_instance(const DiscreteClassifierInstance& instance, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ContractViolation("save_instance: cannot open " + path);
    f << serialize_instance(instance);
}

DiscreteClassifierInstance load_instance(const std::string& path, double floor) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ContractViolation("load_instance: cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return parse_instance(os.str(), floor);
}

namespace {

ProbVector random_prob_vector(rng::Stream& stream, int k, double gamma) {
    std::vector<double> v(static_cast<std::size_t>(k));
    for (double& x : v) x = -std::log(std::max(stream.uniform(), 0x1.0p-53));
    clamp_normalize(v, gamma);
    return ProbVector(std::move(v), gamma);
}

}  // namespace

DiscreteClassifierInstance random_instance(rng::Stream& stream, int k, int domain_size, double gamma) {
    if (k < 2 || domain_size < 1) throw ContractViolation("random_instance: need k >= 2 and domain >= 1");
    DiscreteClassifierInstance inst;
    std::vector<double> masses(static_cast<std::size_t>(domain_size));
    for (double& m : masses) m = stream.uniform() + 1e-3;
    double total = 0.0;
    for (double m : masses) total += m;
    for (double& m : masses) m /= total;
    for (int i = 0; i < domain_size; ++i) {
        inst.point_ids.push_back(i);
        inst.masses.push_back(masses[static_cast<std::size_t>(i)]);
        inst.model_scores.push_back(random_prob_vector(stream, k, gamma));
        inst.bayes_scores.push_back(random_prob_vector(stream, k, gamma));
    }
    inst.validate();
    return inst;
}

DiscreteClassifierInstance with_random_scores(const DiscreteClassifierInstance& base, rng::Stream& stream) {
    DiscreteClassifierInstance inst = base;
    const double gamma = base.model_scores[0].floor();
    for (auto& row : inst.model_scores) {
        row = random_prob_vector(stream, base.num_classes(), gamma);
    }
    return inst;
}

DivergenceValue instance_kl(const DiscreteClassifierInstance& f, const DiscreteClassifierInstance& g) {
    if (f.size() != g.size()) throw ContractViolation("instance_kl: domain size mismatch");
    return kl_population(f.model_scores, g.model_scores, f.masses);
}

}  // namespace w2s
