#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "elate/feature.hpp"

namespace elate {

class PersistenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kRecordSeparator = "===";

/// Feature-set file: one record per program,
///
///   name: <feature name>
///   seq: <creation counter>
///   score: <mean score>              (omitted when not evaluated)
///   score.<evaluator>: <score>       (one line per evaluator)
///   p_value: <raw p-value>           (FRESH runs only)
///   source:
///   <DSL source, verbatim, any number of lines>
///
/// with records separated by a line holding only `===`. Numbers use the
/// shortest text that reads back to the same double.
std::string format_feature_set(const std::vector<FeatureSpec>& features);
/// Re-parses every source; throws PersistenceError on a malformed record or
/// a source whose feature name disagrees with its `name:` line.
std::vector<FeatureSpec> parse_feature_set(std::string_view text);

void write_feature_set(const std::filesystem::path& path, const std::vector<FeatureSpec>& features);
std::vector<FeatureSpec> read_feature_set(const std::filesystem::path& path);

/// Shortest round-trip decimal text for a double ("nan", "inf" for the rest).
std::string format_number(double v);

std::string read_text_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename so readers never see half a file.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace elate
