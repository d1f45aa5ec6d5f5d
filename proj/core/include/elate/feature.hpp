#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "elate/dsl.hpp"
#include "elate/evaluators.hpp"

namespace elate {

/// One candidate feature: its program, the source it came from, and the
/// evaluator scores it earned.
struct FeatureSpec {
  dsl::DslProgram program;
  std::string source;  // as proposed, used verbatim in prompts and on disk
  std::optional<eval::EvalScore> scores;
  std::optional<double> p_value;  // raw Kendall p-value, FRESH mode only
  std::uint64_t created_seq = 0;

  /// Parses `source`; throws dsl::DslError on bad syntax.
  static FeatureSpec from_source(std::string source, std::uint64_t created_seq = 0);

  [[nodiscard]] const std::string& name() const { return program.feature_name; }
  /// Mean evaluator score, 0 when not evaluated.
  [[nodiscard]] double score() const { return scores ? scores->mean : 0.0; }
};

}  // namespace elate
