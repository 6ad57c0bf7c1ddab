// w2slab: weak-to-strong generalization laboratory under KL-style losses.
//
// Verbs:
//   run <config>       train the synthetic pipeline, check bounds, emit CSVs
//   validate <config>  parse + validate, print the effective config
//   sweep <config> --vary key=v1,v2,...   run once per value
//   selftest           run the property suites
//
// Exit status is nonzero iff an asserted bound check failed or a fatal
// error occurred; per-task non-convergence is recorded in the outputs.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "w2s/config.hpp"
#include "w2s/report.hpp"
#include "w2s/selftest.hpp"

namespace {

int do_run(const std::string& config_path) {
    const w2s::ExperimentConfig config = w2s::load_config(config_path);
    const auto t0 = std::chrono::steady_clock::now();
    w2s::RunOutput out = w2s::run_full(config);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string out_dir = w2s::resolve_out_dir(config);
    w2s::write_run_output(out, out_dir, seconds);
    std::cout << w2s::summary_text(out);
    std::cout << "outputs         " << out_dir << "\n";
    return out.aggregates.pass ? 0 : 1;
}

int do_validate(const std::string& config_path) {
    const w2s::ExperimentConfig config = w2s::load_config(config_path);
    std::cout << w2s::serialize_config(config);
    std::cout << "# effective simplex floor: " << config.effective_gamma() << "\n";
    std::cout << "config ok\n";
    return 0;
}

int do_sweep(const std::string& config_path, const std::string& vary) {
    const auto eq = vary.find('=');
    if (eq == std::string::npos) {
        std::cerr << "--vary expects key=v1,v2,...\n";
        return 2;
    }
    const std::string key = vary.substr(0, eq);
    std::vector<std::string> values;
    {
        std::string rest = vary.substr(eq + 1);
        std::size_t pos = 0;
        while (pos <= rest.size()) {
            const auto comma = rest.find(',', pos);
            const std::string v = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            if (!v.empty()) values.push_back(v);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    if (values.empty()) {
        std::cerr << "--vary: no values given\n";
        return 2;
    }
    const w2s::ExperimentConfig base = w2s::load_config(config_path);
    const std::string root = w2s::resolve_out_dir(base);
    std::filesystem::create_directories(root);
    std::string sweep_csv = "key,value,tasks,failed,slope,pearson,median_residual,median_epsilon,pass\n";
    bool all_pass = true;
    for (const std::string& v : values) {
        w2s::ExperimentConfig config = base;
        w2s::assign_config_key(config, key, v);
        w2s::validate_config(config);
        config.out_dir = root + "/sweep_" + key + "_" + v;
        const auto t0 = std::chrono::steady_clock::now();
        w2s::RunOutput out = w2s::run_full(config);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        w2s::write_run_output(out, config.out_dir, seconds);
        const auto& ag = out.aggregates;
        char row[256];
        std::snprintf(row, sizeof row, "%s,%s,%d,%d,%.12g,%.12g,%.12g,%.12g,%d\n", key.c_str(), v.c_str(),
                      ag.tasks, ag.failed_tasks, ag.gain_misfit.slope, ag.gain_misfit.pearson,
                      ag.median_residual, ag.median_epsilon, ag.pass ? 1 : 0);
        sweep_csv += row;
        all_pass = all_pass && ag.pass;
        std::cout << "sweep " << key << "=" << v << ": slope " << ag.gain_misfit.slope << ", median residual "
                  << ag.median_residual << (ag.pass ? " [ok]" : " [FAIL]") << "\n";
    }
    std::ofstream f(root + "/sweep_summary.csv", std::ios::binary);
    f << sweep_csv;
    std::cout << "sweep summary in " << root << "/sweep_summary.csv\n";
    return all_pass ? 0 : 1;
}

int do_selftest(std::uint64_t seed, bool quick) {
    const w2s::SelfTestReport report = w2s::run_selftest(seed, quick);
    for (const w2s::SelfTestItem& item : report.items) {
        std::cout << (item.pass ? "[PASS] " : "[FAIL] ") << item.name << ": " << item.detail << "\n";
    }
    std::cout << (report.all_pass ? "selftest passed\n" : "selftest FAILED\n");
    return report.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"weak-to-strong generalization laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string vary;
    std::uint64_t seed = 0;
    bool quick = false;

    CLI::App* run = app.add_subcommand("run", "train, check bounds, emit CSVs");
    run->add_option("config", config_path, "config file")->required();

    CLI::App* validate = app.add_subcommand("validate", "parse and validate a config");
    validate->add_option("config", config_path, "config file")->required();

    CLI::App* sweep = app.add_subcommand("sweep", "run the config once per value of a key");
    sweep->add_option("config", config_path, "config file")->required();
    sweep->add_option("--vary", vary, "key=v1,v2,...")->required();

    CLI::App* selftest = app.add_subcommand("selftest", "run the property suites");
    selftest->add_option("--seed", seed, "selftest seed");
    selftest->add_flag("--quick", quick, "reduced sample counts");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return do_run(config_path);
        if (validate->parsed()) return do_validate(config_path);
        if (sweep->parsed()) return do_sweep(config_path, vary);
        if (selftest->parsed()) return do_selftest(seed, quick);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
