#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>

#include "msnmt/augmentation.hpp"
#include "msnmt/kvfile.hpp"

namespace msnmt {

// Key=value experiment description. Relative paths resolve against the
// directory of the file they came from and are stored absolute.
struct ExperimentConfig {
  std::string corpus;
  std::string valid_corpus;  // optional; when empty the corpus is split
  std::string test_corpus;
  std::array<double, 3> split{0.8, 0.1, 0.1};
  std::string out;
  std::string mode = "null_fill";  // cmd_train: one_to_one | null_fill
  PipelineConfig pipeline;

  // Rerun of one iterative step (present in step manifests).
  std::optional<std::size_t> resume_step;
  std::string resume_generator;
  std::string resume_previous_pseudo;

  // Resolved configuration, the same keys a config file uses.
  KeyValues to_key_values() const;
};

// Throws ValidationError on unknown, missing or malformed keys.
ExperimentConfig parse_experiment_config(const KeyValues& kv, const std::string& base_dir);
ExperimentConfig load_experiment_config(const std::string& path);

// Loads the corpora, splitting `corpus` when no valid/test files are named.
PipelineData load_data(const ExperimentConfig& config);

}  // namespace msnmt
