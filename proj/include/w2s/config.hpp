#pragma once

#include <stdexcept>
#include <string>

#include "w2s/pipeline.hpp"

namespace w2s {

struct ConfigError : std::runtime_error {
    int line = 0;
    int column = 0;
    ConfigError(const std::string& msg, int line_, int column_)
        : std::runtime_error(msg + " (line " + std::to_string(line_) + ", column " + std::to_string(column_) + ")"),
          line(line_),
          column(column_) {}
};

// Paper-scale defaults.
ExperimentConfig default_config();

// Flat `key = value` text, one key per line, '#' comments. Unknown keys are
// rejected by name; invariant violations name the offending field.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Canonical serialization; parsing it back yields an equal config.
std::string serialize_config(const ExperimentConfig& config);

// Assigns one key (same names as the file format). Used by `sweep --vary`.
void assign_config_key(ExperimentConfig& config, const std::string& key, const std::string& value);

}  // namespace w2s
