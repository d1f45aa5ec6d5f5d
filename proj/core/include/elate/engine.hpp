#pragma once

#include <memory>
#include <string>
#include <vector>

#include "elate/config.hpp"
#include "elate/data.hpp"
#include "elate/feature_db.hpp"
#include "elate/llm.hpp"

namespace elate {

/// What happened to the candidates proposed during one generation.
/// proposed = parse_failed + validation_failed + duplicate + dead + accepted.
struct CandidateCounts {
  std::size_t proposed = 0;
  std::size_t parse_failed = 0;
  std::size_t validation_failed = 0;
  std::size_t duplicate = 0;
  std::size_t dead = 0;
  std::size_t accepted = 0;
};

struct GenerationReport {
  double residual = 0.0;  // validation RMSE of the stored best set
  std::vector<std::string> best_set;
  CandidateCounts counts;
  double seconds = 0.0;   // wall clock; kept out of the JSON report
};

struct RunReport {
  std::uint64_t seed = 0;
  std::string filter;
  std::size_t seeded = 0;  // seed features that entered the population
  double base_validation_rmse = 0.0;
  double base_test_rmse = 0.0;
  double base_test_mae = 0.0;
  double test_rmse = 0.0;
  double test_mae = 0.0;
  std::vector<std::string> final_best_set;
  std::vector<GenerationReport> generations;
  llm::TokenUsage tokens;
  std::string stop_reason;  // generations | llm_exhausted | llm_failures | max_rounds
};

/// Deterministic JSON text of the report (no timings).
std::string report_to_json(const RunReport& report);
/// Per-generation wall clock, written next to the report.
std::string timing_to_json(const RunReport& report);

struct FitResult {
  FeatureDb db;
  RunReport report;
};

/// Builds the backend the config asks for.
std::unique_ptr<llm::LlmBackend> make_backend(const EngineConfig& config);

/// Loads data per the config, then runs the generation loop. Writes the
/// feature-set file and report when output paths are configured.
FitResult fit(const EngineConfig& config);
FitResult fit(const EngineConfig& config, llm::LlmBackend& backend);
/// Same on an already loaded dataset (the target lag is attached here).
FitResult fit(const EngineConfig& config, const LoadedDataset& data, llm::LlmBackend& backend);

/// Appends each program's output to `frame`, in order. Throws dsl::DslError
/// when the frame lacks a column a program reads.
TimeFrame transform(const std::vector<FeatureSpec>& features, const TimeFrame& frame);

/// One prompt with no examples and no history, `k` samples, invalid
/// programs dropped. Nothing is scored.
std::vector<FeatureSpec> zero_shot(const EngineConfig& config, std::size_t k);
std::vector<FeatureSpec> zero_shot(const EngineConfig& config, const LoadedDataset& data, std::size_t k,
                                   llm::LlmBackend& backend);

/// Dataset with Target_Tminus1 attached and described.
LoadedDataset prepare_dataset(const EngineConfig& config);
LoadedDataset with_target_lag(const LoadedDataset& data);

}  // namespace elate
