#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "w2s/bounds.hpp"
#include "w2s/pipeline.hpp"

namespace w2s {

// Per-task binned calibration numbers (classification setting only).
struct TaskCalibration {
    int task_id = 0;
    CalibrationReport weak;
    CalibrationReport strong;
    BoundCheckReport gap;  // descriptive T4.3 on the binned estimates
};

struct RunAggregates {
    LineFit gain_misfit;
    int tasks = 0;
    int failed_tasks = 0;
    int t41_held = 0, t41_total = 0;
    int t51_held = 0, t51_total = 0;
    bool t51_asserted = false;
    int wis_nonpositive = 0, wis_positive = 0;
    int t51_held_nonpositive = 0;  // forward runs: holds among hypothesis-met tasks
    double median_residual = 0.0;
    double median_epsilon = 0.0;
    bool pass = true;  // all asserted checks within their thresholds
};

struct RunOutput {
    ExperimentConfig config;
    RunArtifacts artifacts;
    std::vector<BoundCheckReport> checks;
    std::vector<TaskCalibration> calibration;
    RunAggregates aggregates;
};

// Pipeline + bound checks + (classification) calibration suite.
RunOutput run_full(const ExperimentConfig& config);

// Scatter CSV: exact normative header, 12 significant digits, LF endings.
std::string scatter_csv(const ExperimentConfig& config, const std::vector<TaskResult>& results);
void emit_scatter(const ExperimentConfig& config, const std::vector<TaskResult>& results,
                  const std::string& path);

// Reloads an emitted scatter file; returns the rows needed to re-emit it.
struct ScatterRow {
    int task_id;
    std::string setting, regime, loss_direction;
    double d_star_w, d_star_sw, gain, misfit, epsilon, wis_value;
    int converged;
};
std::vector<ScatterRow> load_scatter(const std::string& path);

std::string bounds_csv(const std::vector<BoundCheckReport>& checks);
std::string calibration_csv(const std::vector<TaskCalibration>& rows);
std::string summary_text(const RunOutput& out);

struct RunManifest {
    std::string artifact_version;
    std::uint64_t master_seed = 0;
    std::string config_text;
    std::map<std::string, std::uint64_t> sub_seeds;
    std::map<std::string, std::uint64_t> file_digests;
    double duration_seconds = 0.0;
};

std::string manifest_text(const RunManifest& manifest);

// FNV-1a 64-bit digest used for the output-reproducibility audit.
std::uint64_t fnv1a64(const std::string& bytes);

// Resolves the output directory: W2SLAB_OUT_DIR overrides the config value.
std::string resolve_out_dir(const ExperimentConfig& config);

// Writes scatter/bounds/calibration/summary/config/manifest into out_dir and
// returns the manifest. Creates the directory if needed.
RunManifest write_run_output(const RunOutput& out, const std::string& out_dir, double duration_seconds);

// Median of a vector (empty -> 0); helper shared by sweep reporting.
double median(std::vector<double> values);

}  // namespace w2s
