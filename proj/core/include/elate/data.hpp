#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace elate {

using Series = std::vector<double>;

inline constexpr std::string_view kTargetLagColumn = "Target_Tminus1";

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ColumnKind { Numeric, Categorical };

/// One column of a TimeFrame. Numeric columns hold NaN for missing cells;
/// categorical columns hold string codes with "" for missing.
struct Column {
  ColumnKind kind = ColumnKind::Numeric;
  Series numeric;
  std::vector<std::string> categorical;

  static Column make_numeric(Series values);
  static Column make_categorical(std::vector<std::string> values);

  [[nodiscard]] std::size_t size() const {
    return kind == ColumnKind::Numeric ? numeric.size() : categorical.size();
  }
};

/// Column names and kinds, the part of a frame a DSL program is checked against.
using Schema = std::map<std::string, ColumnKind, std::less<>>;

/// Timestamp-indexed columnar table with a designated numeric target.
///
/// Rows are sorted by timestamp. Several rows may share one timestamp
/// (multi-entity data such as one row per symbol and date); such rows keep
/// their file order.
class TimeFrame {
 public:
  TimeFrame() = default;

  /// Builds a frame from rows already in time order. Throws DataError when
  /// timestamps decrease, column lengths differ, or the target is missing or
  /// categorical.
  TimeFrame(std::vector<std::int64_t> timestamps, std::vector<std::string> timestamp_labels,
            std::vector<std::string> names, std::vector<Column> columns, std::string target_name,
            std::size_t horizon = 1, std::set<std::string> group_keys = {});

  [[nodiscard]] std::size_t rows() const { return timestamps_.size(); }
  [[nodiscard]] std::size_t column_count() const { return names_.size(); }

  [[nodiscard]] const std::vector<std::int64_t>& timestamps() const { return timestamps_; }
  [[nodiscard]] const std::vector<std::string>& timestamp_labels() const { return labels_; }
  [[nodiscard]] const std::vector<std::string>& names() const { return names_; }
  [[nodiscard]] const std::string& target_name() const { return target_; }
  [[nodiscard]] std::size_t horizon() const { return horizon_; }
  [[nodiscard]] const std::set<std::string>& group_keys() const { return group_keys_; }

  [[nodiscard]] bool has_column(std::string_view name) const;
  [[nodiscard]] const Column& column(std::string_view name) const;
  [[nodiscard]] const Column& column(std::size_t index) const { return columns_.at(index); }
  [[nodiscard]] const Series& numeric(std::string_view name) const;
  [[nodiscard]] const Series& target() const { return numeric(target_); }

  /// Schema of every column except the target, which programs may not read.
  [[nodiscard]] Schema feature_schema() const;

  /// Names of numeric columns other than the target, in column order.
  [[nodiscard]] std::vector<std::string> base_feature_names() const;

  /// Copy with one more column appended. Throws DataError on a name clash or
  /// length mismatch.
  [[nodiscard]] TimeFrame with_column(std::string name, Column column) const;

  /// Copy restricted to rows [begin, end).
  [[nodiscard]] TimeFrame slice(std::size_t begin, std::size_t end) const;

 private:
  std::size_t index_of(std::string_view name) const;

  std::vector<std::int64_t> timestamps_;
  std::vector<std::string> labels_;
  std::vector<std::string> names_;
  std::vector<Column> columns_;
  std::string target_;
  std::size_t horizon_ = 1;
  std::set<std::string> group_keys_;
};

struct ColumnDescription {
  std::string name;
  std::string description;
  std::string data_type;
  bool contains_nan = false;

  [[nodiscard]] bool is_categorical() const;
};

/// Dataset metadata handed to the language model. `text` keeps the file
/// contents verbatim; `entries` is the parsed per-column view.
struct DatasetDescription {
  std::string prose_header;
  std::vector<ColumnDescription> entries;
  std::string text;

  [[nodiscard]] const ColumnDescription* find(std::string_view name) const;
  /// Appends an entry and a matching line to `text`.
  void add_entry(ColumnDescription entry);
};

/// Parses "header paragraph, then one `name (type, nan=yes|no): text` line per column".
DatasetDescription parse_description(std::string_view text);

struct CsvOptions {
  std::string timestamp_column = "date";
  std::string target_column;
  std::size_t horizon = 1;
};

struct LoadedDataset {
  TimeFrame frame;
  DatasetDescription description;
};

/// Reads a CSV file plus its description. Categorical columns are the ones the
/// description types as category/string; unparseable numeric cells become NaN.
LoadedDataset load_csv(const std::filesystem::path& csv_path,
                       const std::filesystem::path& description_path, const CsvOptions& options);

/// Same as load_csv but on in-memory text. With no description, a column is
/// categorical when none of its non-empty cells parses as a number.
LoadedDataset parse_csv(std::string_view csv_text, std::optional<std::string_view> description_text,
                        const CsvOptions& options);

/// Writes the frame as CSV: timestamp label column first, then every column.
/// NaN and missing categorical cells are written empty.
void write_csv(const TimeFrame& frame, const std::filesystem::path& path,
               std::string_view timestamp_column = "date");
std::string to_csv(const TimeFrame& frame, std::string_view timestamp_column = "date");

/// Parses ISO-8601 dates/date-times (seconds since epoch, UTC) or an epoch integer.
std::optional<std::int64_t> parse_timestamp(std::string_view text);

/// Adds Target_Tminus1 holding y[t - horizon] at row t (NaN for the first
/// `horizon` rows).
TimeFrame attach_target_lag(const TimeFrame& frame);

/// Description entry matching the column attach_target_lag creates.
ColumnDescription target_lag_description(const TimeFrame& frame);

struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  [[nodiscard]] std::size_t size() const { return end - begin; }
  [[nodiscard]] bool empty() const { return end <= begin; }
  friend bool operator==(const RowRange&, const RowRange&) = default;
};

struct SplitSpec {
  std::size_t train_end = 0;
  std::size_t validation_end = 0;
  std::size_t test_end = 0;
  std::size_t fold_count = 5;

  [[nodiscard]] RowRange train() const { return {0, train_end}; }
  [[nodiscard]] RowRange validation() const { return {train_end, validation_end}; }
  [[nodiscard]] RowRange test() const { return {validation_end, test_end}; }
};

/// Chronological train/validation/test split on distinct dates, so rows that
/// share a timestamp always land in the same region.
SplitSpec chronological_split(const TimeFrame& frame, double test_frac = 0.10,
                              double val_frac = 0.10, std::size_t fold_count = 5);

struct Fold {
  RowRange train;
  RowRange eval;
  friend bool operator==(const Fold&, const Fold&) = default;
};

/// Expanding-window folds: `eval` is cut into `fold_count` contiguous blocks
/// and fold k trains on [train_begin, start of block k).
std::vector<Fold> walk_forward_folds(RowRange eval, std::size_t fold_count,
                                     std::size_t train_begin = 0);

/// Date-aligned variant: block edges fall on timestamp changes of `frame`.
std::vector<Fold> walk_forward_folds(const TimeFrame& frame, RowRange eval, std::size_t fold_count,
                                     std::size_t train_begin = 0);

}  // namespace elate
