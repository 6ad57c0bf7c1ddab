#include "w2s/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "w2s/errors.hpp"

namespace w2s {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ContractViolation("config: key '" + key + "' expects an integer, got '" + value + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ContractViolation("config: key '" + key + "' expects an unsigned integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ContractViolation("config: key '" + key + "' expects a number, got '" + value + "'");
    }
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

ExperimentConfig default_config() { return ExperimentConfig{}; }

void assign_config_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
    if (key == "setting") {
        const auto s = setting_from_name(value);
        if (!s) throw ContractViolation("config: unknown setting '" + value + "'");
        c.setting = *s;
    } else if (key == "regime") {
        const auto r = regime_from_name(value);
        if (!r) throw ContractViolation("config: unknown regime '" + value + "'");
        c.regime = *r;
    } else if (key == "loss_direction") {
        const auto d = loss_direction_from_name(value);
        if (!d) throw ContractViolation("config: unknown loss_direction '" + value + "'");
        c.loss_direction = *d;
    } else if (key == "pretrain_tasks") {
        c.pretrain_tasks = static_cast<int>(parse_int(key, value));
    } else if (key == "pretrain_samples") {
        c.pretrain_samples = static_cast<int>(parse_int(key, value));
    } else if (key == "tasks") {
        c.tasks = static_cast<int>(parse_int(key, value));
    } else if (key == "finetune_samples") {
        c.finetune_samples = static_cast<int>(parse_int(key, value));
    } else if (key == "w2s_samples") {
        c.w2s_samples = static_cast<int>(parse_int(key, value));
    } else if (key == "w2s_hat_samples") {
        c.w2s_hat_samples = static_cast<int>(parse_int(key, value));
    } else if (key == "eval_samples") {
        c.eval_samples = static_cast<int>(parse_int(key, value));
    } else if (key == "input_dim") {
        c.input_dim = static_cast<int>(parse_int(key, value));
    } else if (key == "rep_dim") {
        c.rep_dim = static_cast<int>(parse_int(key, value));
    } else if (key == "classes") {
        c.classes = static_cast<int>(parse_int(key, value));
    } else if (key == "depth_weak") {
        c.depth_weak = static_cast<int>(parse_int(key, value));
    } else if (key == "depth_strong") {
        c.depth_strong = static_cast<int>(parse_int(key, value));
    } else if (key == "depth_star") {
        c.depth_star = static_cast<int>(parse_int(key, value));
    } else if (key == "sigma_strong") {
        c.sigma_strong = parse_double(key, value);
    } else if (key == "sigma_weak") {
        c.sigma_weak = parse_double(key, value);
    } else if (key == "gamma") {
        c.gamma = parse_double(key, value);
    } else if (key == "floor_pre") {
        c.floor_pre = parse_double(key, value);
    } else if (key == "seed") {
        c.seed = parse_u64(key, value);
    } else if (key == "head_steps") {
        c.head_schedule.steps = static_cast<int>(parse_int(key, value));
    } else if (key == "head_lr") {
        c.head_schedule.lr = parse_double(key, value);
    } else if (key == "rep_steps") {
        c.rep_schedule.steps = static_cast<int>(parse_int(key, value));
    } else if (key == "rep_lr") {
        c.rep_schedule.lr = parse_double(key, value);
    } else if (key == "grad_norm_tol") {
        c.head_schedule.grad_norm_tol = parse_double(key, value);
        c.rep_schedule.grad_norm_tol = c.head_schedule.grad_norm_tol;
    } else if (key == "threads") {
        c.threads = static_cast<int>(parse_int(key, value));
    } else if (key == "out_dir") {
        c.out_dir = value;
    } else {
        throw ContractViolation("config: unknown key '" + key + "'");
    }
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig config = default_config();
    std::istringstream is(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        std::string line = raw;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: expected 'key = value'", line_no, 1);
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config: empty key", line_no, 1);
        if (value.empty()) throw ConfigError("config: empty value for key '" + key + "'", line_no, static_cast<int>(eq) + 2);
        try {
            assign_config_key(config, key, value);
        } catch (const ContractViolation& e) {
            throw ConfigError(e.what(), line_no, static_cast<int>(eq) + 2);
        }
    }
    config = resolved(config);
    validate_config(config);
    return config;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ContractViolation("load_config: cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return parse_config_text(os.str());
}

std::string serialize_config(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "setting = " << setting_name(c.setting) << "\n";
    os << "regime = " << regime_name(c.regime) << "\n";
    os << "loss_direction = " << loss_direction_name(c.loss_direction) << "\n";
    os << "pretrain_tasks = " << c.pretrain_tasks << "\n";
    os << "pretrain_samples = " << c.pretrain_samples << "\n";
    os << "tasks = " << c.tasks << "\n";
    os << "finetune_samples = " << c.finetune_samples << "\n";
    os << "w2s_samples = " << c.w2s_samples << "\n";
    os << "w2s_hat_samples = " << c.w2s_hat_samples << "\n";
    os << "eval_samples = " << c.eval_samples << "\n";
    os << "input_dim = " << c.input_dim << "\n";
    os << "rep_dim = " << c.rep_dim << "\n";
    os << "classes = " << c.classes << "\n";
    os << "depth_weak = " << c.depth_weak << "\n";
    os << "depth_strong = " << c.depth_strong << "\n";
    os << "depth_star = " << c.depth_star << "\n";
    os << "sigma_strong = " << fmt(c.sigma_strong) << "\n";
    os << "sigma_weak = " << fmt(c.sigma_weak) << "\n";
    os << "gamma = " << fmt(c.gamma) << "\n";
    os << "floor_pre = " << fmt(c.floor_pre) << "\n";
    os << "seed = " << c.seed << "\n";
    os << "head_steps = " << c.head_schedule.steps << "\n";
    os << "head_lr = " << fmt(c.head_schedule.lr) << "\n";
    os << "rep_steps = " << c.rep_schedule.steps << "\n";
    os << "rep_lr = " << fmt(c.rep_schedule.lr) << "\n";
    os << "grad_norm_tol = " << fmt(c.head_schedule.grad_norm_tol) << "\n";
    os << "threads = " << c.threads << "\n";
    os << "out_dir = " << c.out_dir << "\n";
    return os.str();
}

}  // namespace w2s
