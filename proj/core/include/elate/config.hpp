#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "elate/feature_db.hpp"
#include "elate/model.hpp"

namespace elate {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FilterMode { Shap, Fresh };
enum class BackendKind { Mock, Http };

struct EngineConfig {
  std::filesystem::path csv;
  std::filesystem::path description;
  std::filesystem::path prompt_template;  // empty: built-in template
  std::string timestamp_column = "date";
  std::string target;
  std::size_t horizon = 1;

  double test_frac = 0.1;
  double val_frac = 0.1;
  std::size_t val_folds = 5;
  std::size_t test_folds = 5;

  FilterMode filter = FilterMode::Shap;
  FeatureDbParams population;
  std::size_t n_resp = 4;

  BackendKind backend = BackendKind::Mock;
  std::filesystem::path mock_script;
  std::string endpoint;
  std::string model;
  double llm_temperature = 1.0;
  double timeout_seconds = 60.0;

  std::vector<std::string> seed_features;  // empty: default_seed_features()
  std::uint64_t seed = 0;

  model::GbtParams gbt;
  std::size_t lag_order = 4;
  double corr_threshold = 0.9;
  std::size_t max_rounds = 100000;  // prompts sent before giving up

  std::filesystem::path output_db;
  std::filesystem::path output_report;
};

/// Rolling 7-step mean and first difference of Target_Tminus1.
std::vector<std::string> default_seed_features();

/// Parses `key = value` lines; `#` starts a comment line. Relative paths are
/// resolved against `base_dir`. `seed_feature` may repeat. Throws ConfigError
/// on unknown keys, bad values, or inconsistent settings.
EngineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
EngineConfig load_config(const std::filesystem::path& path);

/// Throws ConfigError unless N <= N_max, G >= 1 and the fractions and counts
/// are usable. Backend settings are checked when the backend is built.
void check_config(const EngineConfig& config);

}  // namespace elate
