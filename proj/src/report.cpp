#include "w2s/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "w2s/config.hpp"
#include "w2s/errors.hpp"
#include "w2s/rng.hpp"

namespace w2s {

namespace {

constexpr const char* kArtifactVersion = "w2slab 0.1.0";
constexpr const char* kScatterHeader =
    "task_id,setting,regime,loss_direction,d_star_w,d_star_sw,gain,misfit,epsilon,wis_value,converged";

std::string g12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw NumericOverflow("write_file: cannot open " + path);
    f << bytes;
    if (!f) throw NumericOverflow("write_file: short write to " + path);
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ContractViolation("read_file: cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

// Sampled hard labels + binned estimates back the classification-setting
// calibration report; the exact estimator needs a discrete domain, so this
// path stays descriptive.
TaskCalibration binned_task_calibration(const ExperimentConfig& config, const GroundTruth& gt,
                                        const TaskResult& result, const LayeredNet& weak,
                                        const LayeredNet& strong) {
    const int i = result.task_id;
    SampleSet eval = gaussian_sample(config.eval_samples, config.input_dim,
                                     rng::derive_seed(config.seed, "eval-data", static_cast<std::uint64_t>(i)),
                                     "eval-data/" + std::to_string(i));
    const LayeredNet truth = compose(gt.h_star, gt.task_heads[static_cast<std::size_t>(i)]);
    Matrix p_true = forward(truth, eval);
    Matrix p_w = forward(weak, eval);
    Matrix p_s = forward(strong, eval);

    rng::Stream labels(rng::derive_seed(config.seed, "labels", static_cast<std::uint64_t>(i)));
    std::vector<int> y(static_cast<std::size_t>(eval.size()));
    for (int j = 0; j < eval.size(); ++j) {
        double u = labels.uniform();
        int cls = 0;
        for (int c = 0; c < p_true.cols; ++c) {
            u -= p_true(j, c);
            if (u <= 0.0) {
                cls = c;
                break;
            }
            cls = c;
        }
        y[static_cast<std::size_t>(j)] = cls;
    }

    auto scored = [&](const Matrix& p) {
        std::vector<std::pair<double, bool>> s;
        s.reserve(static_cast<std::size_t>(p.rows));
        for (int j = 0; j < p.rows; ++j) {
            int arg = 0;
            for (int c = 1; c < p.cols; ++c) {
                if (p(j, c) > p(j, arg)) arg = c;
            }
            s.emplace_back(p(j, arg), arg == y[static_cast<std::size_t>(j)]);
        }
        return s;
    };

    TaskCalibration cal;
    cal.task_id = i;
    const auto sw = scored(p_w);
    const auto ss = scored(p_s);
    cal.weak = ece_binned(sw, 10);
    cal.strong = ece_binned(ss, 10);
    cal.gap = check_t43(cal.weak, cal.strong, DivergenceValue{result.d_sw_w, DivKind::EmpiricalKL},
                        /*assert_mode=*/false);
    cal.gap.task_id = i;
    return cal;
}

}  // namespace

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

RunOutput run_full(const ExperimentConfig& raw_config) {
    const ExperimentConfig config = resolved(raw_config);
    validate_config(config);
    RunOutput out;
    out.config = config;
    out.artifacts = run_experiment(config);

    const double gamma_eff = config.effective_gamma();
    std::vector<double> residuals, epsilons;
    for (const TaskResult& r : out.artifacts.results) {
        ++out.aggregates.tasks;
        if (r.failed) {
            ++out.aggregates.failed_tasks;
            continue;
        }
        auto [upper, lower] = check_t41(r, gamma_eff);
        out.checks.push_back(upper);
        out.checks.push_back(lower);
        out.aggregates.t41_total += 2;
        out.aggregates.t41_held += (upper.holds ? 1 : 0) + (lower.holds ? 1 : 0);

        BoundCheckReport t51 = check_t51(r, config.loss_direction, config.regime);
        out.checks.push_back(t51);
        ++out.aggregates.t51_total;
        out.aggregates.t51_held += t51.holds ? 1 : 0;
        out.aggregates.t51_asserted = out.aggregates.t51_asserted || t51.asserted;
        if (t51.wis_sign) {
            if (*t51.wis_sign == WisSign::Nonpositive) {
                ++out.aggregates.wis_nonpositive;
                out.aggregates.t51_held_nonpositive += t51.holds ? 1 : 0;
            } else {
                ++out.aggregates.wis_positive;
            }
        }

        BoundCheckReport t52 = check_t52_residual(r);
        out.checks.push_back(t52);
        residuals.push_back(t52.lhs);
        epsilons.push_back(t52.epsilon);
    }
    out.aggregates.gain_misfit = fit_gain_misfit(out.artifacts.results);
    out.aggregates.median_residual = median(residuals);
    out.aggregates.median_epsilon = median(epsilons);

    if (config.setting == Setting::ClassificationKL) {
        for (const TaskResult& r : out.artifacts.results) {
            if (r.failed) continue;
            // Rebuild the two models for this task; fits are deterministic.
            HeadFit weak = finetune_weak(config, out.artifacts.h_w, r.task_id, out.artifacts.gt);
            HeadFit sw = w2s_supervise(config, out.artifacts.h_s, weak.composed, r.task_id, config.w2s_n(),
                                       "w2s-data");
            out.calibration.push_back(
                binned_task_calibration(config, out.artifacts.gt, r, weak.composed, sw.composed));
        }
    }

    bool pass = out.aggregates.t41_total > 0 ? out.aggregates.t41_held == out.aggregates.t41_total : true;
    if (out.aggregates.t51_asserted && out.aggregates.t51_total > 0) {
        const double frac = static_cast<double>(out.aggregates.t51_held) / out.aggregates.t51_total;
        pass = pass && frac >= 0.95;
    }
    out.aggregates.pass = pass;
    return out;
}

std::string scatter_csv(const ExperimentConfig& config, const std::vector<TaskResult>& results) {
    if (results.empty()) throw ContractViolation("scatter_csv: no results");
    std::ostringstream os;
    os << kScatterHeader << "\n";
    for (const TaskResult& r : results) {
        os << r.task_id << "," << setting_name(config.setting) << "," << regime_name(config.regime) << ","
           << loss_direction_name(config.loss_direction) << "," << g12(r.d_star_w) << "," << g12(r.d_star_sw)
           << "," << g12(r.gain) << "," << g12(r.d_sw_w) << "," << g12(r.d_star_s) << "," << g12(r.wis_value)
           << "," << (r.converged ? 1 : 0) << "\n";
    }
    return os.str();
}

void emit_scatter(const ExperimentConfig& config, const std::vector<TaskResult>& results,
                  const std::string& path) {
    write_file(path, scatter_csv(config, results));
}

std::vector<ScatterRow> load_scatter(const std::string& path) {
    std::istringstream is(read_file(path));
    std::string line;
    if (!std::getline(is, line) || line != kScatterHeader) {
        throw ContractViolation("load_scatter: unexpected header in " + path);
    }
    std::vector<ScatterRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        auto next = [&]() {
            if (!std::getline(ls, cell, ',')) throw ContractViolation("load_scatter: short row");
            return cell;
        };
        ScatterRow r;
        r.task_id = std::stoi(next());
        r.setting = next();
        r.regime = next();
        r.loss_direction = next();
        r.d_star_w = std::stod(next());
        r.d_star_sw = std::stod(next());
        r.gain = std::stod(next());
        r.misfit = std::stod(next());
        r.epsilon = std::stod(next());
        r.wis_value = std::stod(next());
        r.converged = std::stoi(next());
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string bounds_csv(const std::vector<BoundCheckReport>& checks) {
    std::ostringstream os;
    os << "task_id,theorem_tag,lhs,rhs,tau,holds,asserted,constant_c1,wis_sign,hypothesis_met,epsilon,n\n";
    for (const BoundCheckReport& c : checks) {
        os << c.task_id << "," << theorem_tag_name(c.tag) << "," << g12(c.lhs) << "," << g12(c.rhs) << ","
           << g12(c.tau) << "," << (c.holds ? 1 : 0) << "," << (c.asserted ? 1 : 0) << ",";
        if (c.tag == TheoremTag::T41Upper || c.tag == TheoremTag::T41Lower) os << g12(c.constant_c1);
        os << ",";
        if (c.wis_sign) os << wis_sign_name(*c.wis_sign);
        os << "," << (c.hypothesis_met ? 1 : 0) << ",";
        if (c.tag == TheoremTag::T52Residual) os << g12(c.epsilon);
        os << ",";
        if (c.tag == TheoremTag::T52Residual) os << c.n;
        os << "\n";
    }
    return os.str();
}

std::string calibration_csv(const std::vector<TaskCalibration>& rows) {
    std::ostringstream os;
    os << "task_id,ece_weak,ece_strong,mce_weak,mce_strong,gap_lhs,gap_rhs,gap_holds\n";
    for (const TaskCalibration& c : rows) {
        os << c.task_id << "," << g12(c.weak.ece.value_or(0.0)) << "," << g12(c.strong.ece.value_or(0.0))
           << "," << g12(c.weak.mce) << "," << g12(c.strong.mce) << "," << g12(c.gap.lhs) << ","
           << g12(c.gap.rhs) << "," << (c.gap.holds ? 1 : 0) << "\n";
    }
    return os.str();
}

std::string summary_text(const RunOutput& out) {
    const RunAggregates& ag = out.aggregates;
    std::ostringstream os;
    os << kArtifactVersion << " run summary\n";
    os << "setting         " << setting_name(out.config.setting) << "\n";
    os << "regime          " << regime_name(out.config.regime) << "\n";
    os << "loss_direction  " << loss_direction_name(out.config.loss_direction) << "\n";
    os << "tasks           " << ag.tasks << " (failed " << ag.failed_tasks << ")\n";
    os << "gain~misfit     slope " << g12(ag.gain_misfit.slope) << ", intercept "
       << g12(ag.gain_misfit.intercept) << ", pearson " << g12(ag.gain_misfit.pearson) << "\n";
    os << "T4.1            " << ag.t41_held << "/" << ag.t41_total << " held (asserted)\n";
    if (out.config.loss_direction == LossDirection::ReverseKL) {
        os << "T5.1            " << ag.t51_held << "/" << ag.t51_total << " held ("
           << (ag.t51_asserted ? "asserted, threshold 0.95" : "descriptive") << ")\n";
    } else {
        os << "C-B5            wis nonpositive " << ag.wis_nonpositive << ", positive " << ag.wis_positive
           << "; held among nonpositive " << ag.t51_held_nonpositive << "/" << ag.wis_nonpositive
           << " (descriptive)\n";
    }
    os << "T5.2            median residual " << g12(ag.median_residual) << ", median epsilon "
       << g12(ag.median_epsilon) << " (descriptive)\n";
    if (!out.calibration.empty()) {
        double ece_w = 0.0, ece_s = 0.0;
        int held = 0;
        for (const TaskCalibration& c : out.calibration) {
            ece_w += c.weak.ece.value_or(0.0);
            ece_s += c.strong.ece.value_or(0.0);
            held += c.gap.holds ? 1 : 0;
        }
        const double n = static_cast<double>(out.calibration.size());
        os << "calibration     mean ece weak " << g12(ece_w / n) << ", strong " << g12(ece_s / n)
           << "; binned gap bound held " << held << "/" << out.calibration.size() << " (descriptive)\n";
    }
    os << "verdict         " << (ag.pass ? "PASS" : "FAIL") << "\n";
    return os.str();
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string resolve_out_dir(const ExperimentConfig& config) {
    if (const char* env = std::getenv("W2SLAB_OUT_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return config.out_dir;
}

std::string manifest_text(const RunManifest& m) {
    std::ostringstream os;
    os << "artifact = " << m.artifact_version << "\n";
    os << "master_seed = " << m.master_seed << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", m.duration_seconds);
    os << "duration_seconds = " << buf << "\n";
    for (const auto& [name, seed] : m.sub_seeds) {
        os << "subseed." << name << " = " << seed << "\n";
    }
    for (const auto& [name, digest] : m.file_digests) {
        os << "digest." << name << " = " << digest << "\n";
    }
    os << "config = <<EOF\n" << m.config_text << "EOF\n";
    return os.str();
}

RunManifest write_run_output(const RunOutput& out, const std::string& out_dir, double duration_seconds) {
    std::filesystem::create_directories(out_dir);
    RunManifest m;
    m.artifact_version = kArtifactVersion;
    m.master_seed = out.config.seed;
    m.config_text = serialize_config(out.config);
    m.duration_seconds = duration_seconds;
    m.sub_seeds["gt-rep"] = rng::derive_seed(out.config.seed, "gt-rep");
    m.sub_seeds["pretrain-data-0"] = rng::derive_seed(out.config.seed, "pretrain-data", 0);
    m.sub_seeds["weak-data-0"] = rng::derive_seed(out.config.seed, "weak-data", 0);
    m.sub_seeds["w2s-data-0"] = rng::derive_seed(out.config.seed, "w2s-data", 0);
    m.sub_seeds["eval-data-0"] = rng::derive_seed(out.config.seed, "eval-data", 0);

    const auto emit = [&](const std::string& name, const std::string& bytes) {
        write_file(out_dir + "/" + name, bytes);
        m.file_digests[name] = fnv1a64(bytes);
    };
    emit("scatter.csv", scatter_csv(out.config, out.artifacts.results));
    emit("bounds.csv", bounds_csv(out.checks));
    if (!out.calibration.empty()) emit("calibration.csv", calibration_csv(out.calibration));
    emit("summary.txt", summary_text(out));
    emit("effective_config.cfg", serialize_config(out.config));
    write_file(out_dir + "/manifest.txt", manifest_text(m));
    return m;
}

}  // namespace w2s
