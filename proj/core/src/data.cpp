#include "elate/data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <regex>
#include <sstream>
#include <unordered_set>

namespace elate {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

double cell_to_double(std::string_view text) {
  const auto v = parse_number(text);
  if (!v || !std::isfinite(*v)) return kNaN;
  return *v;
}

// RFC 4180 style: quoted fields may contain commas, doubled quotes and newlines.
std::vector<std::vector<std::string>> split_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      record.clear();
      field.clear();
      any = false;
    } else {
      field.push_back(c);
      any = true;
    }
  }
  if (quoted) throw DataError("CSV ends inside a quoted field");
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  if (std::isnan(v)) return {};
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// Row index where each distinct timestamp starts, plus frame.rows() at the end.
std::vector<std::size_t> date_starts(const std::vector<std::int64_t>& ts, RowRange range) {
  std::vector<std::size_t> starts;
  for (std::size_t i = range.begin; i < range.end; ++i) {
    if (i == range.begin || ts[i] != ts[i - 1]) starts.push_back(i);
  }
  starts.push_back(range.end);
  return starts;
}

std::vector<Fold> folds_from_boundaries(const std::vector<std::size_t>& starts,
                                        std::size_t fold_count, std::size_t train_begin) {
  const std::size_t units = starts.size() - 1;
  if (fold_count == 0) throw DataError("fold_count must be at least 1");
  if (units < fold_count)
    throw DataError("fold_count " + std::to_string(fold_count) + " exceeds the " +
                    std::to_string(units) + " available evaluation dates");
  if (starts.front() <= train_begin)
    throw DataError("walk-forward folds need at least one training row before the eval region");

  std::vector<Fold> folds;
  folds.reserve(fold_count);
  const std::size_t base = units / fold_count;
  const std::size_t extra = units % fold_count;
  std::size_t unit = 0;
  for (std::size_t k = 0; k < fold_count; ++k) {
    const std::size_t take = base + (k < extra ? 1 : 0);
    const std::size_t begin = starts[unit];
    const std::size_t end = starts[unit + take];
    folds.push_back({{train_begin, begin}, {begin, end}});
    unit += take;
  }
  return folds;
}

}  // namespace

Column Column::make_numeric(Series values) {
  Column c;
  c.kind = ColumnKind::Numeric;
  for (double& v : values) {
    if (!std::isfinite(v)) v = kNaN;
  }
  c.numeric = std::move(values);
  return c;
}

Column Column::make_categorical(std::vector<std::string> values) {
  Column c;
  c.kind = ColumnKind::Categorical;
  c.categorical = std::move(values);
  return c;
}

TimeFrame::TimeFrame(std::vector<std::int64_t> timestamps, std::vector<std::string> timestamp_labels,
                     std::vector<std::string> names, std::vector<Column> columns,
                     std::string target_name, std::size_t horizon,
                     std::set<std::string> group_keys)
    : timestamps_(std::move(timestamps)),
      labels_(std::move(timestamp_labels)),
      names_(std::move(names)),
      columns_(std::move(columns)),
      target_(std::move(target_name)),
      horizon_(horizon),
      group_keys_(std::move(group_keys)) {
  if (labels_.empty()) {
    labels_.reserve(timestamps_.size());
    for (auto t : timestamps_) labels_.push_back(std::to_string(t));
  }
  if (labels_.size() != timestamps_.size()) throw DataError("timestamp label count mismatch");
  if (names_.size() != columns_.size()) throw DataError("column name count mismatch");
  if (horizon_ == 0) throw DataError("horizon must be at least 1");
  for (std::size_t i = 1; i < timestamps_.size(); ++i) {
    if (timestamps_[i] < timestamps_[i - 1]) throw DataError("timestamps must be ascending");
  }
  std::unordered_set<std::string> seen;
  for (std::size_t j = 0; j < names_.size(); ++j) {
    if (!seen.insert(names_[j]).second) throw DataError("duplicate column name: " + names_[j]);
    if (columns_[j].size() != timestamps_.size())
      throw DataError("column " + names_[j] + " has the wrong length");
  }
  const auto it = std::find(names_.begin(), names_.end(), target_);
  if (it == names_.end()) throw DataError("target column not found: " + target_);
  if (columns_[static_cast<std::size_t>(it - names_.begin())].kind != ColumnKind::Numeric)
    throw DataError("target column must be numeric: " + target_);
  for (const auto& key : group_keys_) {
    if (!has_column(key) || column(key).kind != ColumnKind::Categorical)
      throw DataError("group key must be a categorical column: " + key);
  }
}

std::size_t TimeFrame::index_of(std::string_view name) const {
  for (std::size_t j = 0; j < names_.size(); ++j) {
    if (names_[j] == name) return j;
  }
  throw DataError("unknown column: " + std::string(name));
}

bool TimeFrame::has_column(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const Column& TimeFrame::column(std::string_view name) const { return columns_[index_of(name)]; }

const Series& TimeFrame::numeric(std::string_view name) const {
  const Column& c = column(name);
  if (c.kind != ColumnKind::Numeric) throw DataError("column is not numeric: " + std::string(name));
  return c.numeric;
}

Schema TimeFrame::feature_schema() const {
  Schema schema;
  for (std::size_t j = 0; j < names_.size(); ++j) {
    if (names_[j] != target_) schema.emplace(names_[j], columns_[j].kind);
  }
  return schema;
}

std::vector<std::string> TimeFrame::base_feature_names() const {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < names_.size(); ++j) {
    if (names_[j] != target_ && columns_[j].kind == ColumnKind::Numeric) out.push_back(names_[j]);
  }
  return out;
}

TimeFrame TimeFrame::with_column(std::string name, Column column) const {
  if (has_column(name)) throw DataError("column already exists: " + name);
  if (column.size() != rows()) throw DataError("column " + name + " has the wrong length");
  TimeFrame out = *this;
  out.names_.push_back(std::move(name));
  out.columns_.push_back(std::move(column));
  return out;
}

TimeFrame TimeFrame::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows()) throw DataError("slice out of range");
  const auto b = static_cast<std::ptrdiff_t>(begin);
  const auto e = static_cast<std::ptrdiff_t>(end);
  std::vector<Column> cols;
  cols.reserve(columns_.size());
  for (const auto& c : columns_) {
    if (c.kind == ColumnKind::Numeric)
      cols.push_back(Column::make_numeric(Series(c.numeric.begin() + b, c.numeric.begin() + e)));
    else
      cols.push_back(Column::make_categorical(
          std::vector<std::string>(c.categorical.begin() + b, c.categorical.begin() + e)));
  }
  return TimeFrame({timestamps_.begin() + b, timestamps_.begin() + e},
                   {labels_.begin() + b, labels_.begin() + e}, names_, std::move(cols), target_,
                   horizon_, group_keys_);
}

bool ColumnDescription::is_categorical() const {
  std::string t;
  for (char c : data_type) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return t == "category" || t == "categorical" || t == "string" || t == "str" || t == "object" ||
         t == "text";
}

const ColumnDescription* DatasetDescription::find(std::string_view name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

void DatasetDescription::add_entry(ColumnDescription entry) {
  if (!text.empty() && text.back() != '\n') text.push_back('\n');
  text += entry.name + " (" + entry.data_type + ", nan=" + (entry.contains_nan ? "yes" : "no") +
          "): " + entry.description + "\n";
  entries.push_back(std::move(entry));
}

DatasetDescription parse_description(std::string_view text) {
  static const std::regex entry_re(R"(^\s*(.+?) \(([^,()]+),\s*nan=(yes|no)\):\s*(.*?)\s*$)");
  DatasetDescription out;
  out.text = std::string(text);
  std::istringstream in{std::string(text)};
  std::string line;
  std::string header;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch m;
    if (std::regex_match(line, m, entry_re)) {
      ColumnDescription e{m[1].str(), m[4].str(), std::string(trim(m[2].str())), m[3].str() == "yes"};
      if (!seen.insert(e.name).second)
        throw DataError("description lists column twice: " + e.name);
      out.entries.push_back(std::move(e));
    } else if (out.entries.empty()) {
      if (!header.empty()) header.push_back('\n');
      header += line;
    }
  }
  out.prose_header = std::string(trim(header));
  return out;
}

std::optional<std::int64_t> parse_timestamp(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;

  const bool all_digits =
      std::all_of(text.begin() + (text.front() == '-' ? 1 : 0), text.end(),
                  [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; });
  if (all_digits) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec == std::errc{} && ptr == text.data() + text.size()) return v;
    return std::nullopt;
  }

  static const std::regex iso_re(
      R"(^(\d{4})-(\d{2})-(\d{2})(?:[T ](\d{2}):(\d{2})(?::(\d{2})(?:\.\d+)?)?)?Z?$)");
  std::cmatch m;
  if (!std::regex_match(text.data(), text.data() + text.size(), m, iso_re)) return std::nullopt;
  using namespace std::chrono;
  const year_month_day ymd{year{std::stoi(m[1].str())}, month{static_cast<unsigned>(std::stoi(m[2].str()))},
                           day{static_cast<unsigned>(std::stoi(m[3].str()))}};
  if (!ymd.ok()) return std::nullopt;
  std::int64_t secs = sys_days{ymd}.time_since_epoch().count() * std::int64_t{86400};
  if (m[4].matched) {
    const int hh = std::stoi(m[4].str());
    const int mm = std::stoi(m[5].str());
    const int ss = m[6].matched ? std::stoi(m[6].str()) : 0;
    if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
    secs += hh * 3600 + mm * 60 + ss;
  }
  return secs;
}

LoadedDataset parse_csv(std::string_view csv_text, std::optional<std::string_view> description_text,
                        const CsvOptions& options) {
  auto records = split_csv(csv_text);
  if (records.empty()) throw DataError("CSV has no header row");
  std::vector<std::string> header;
  for (const auto& h : records.front()) header.emplace_back(trim(h));

  std::unordered_set<std::string> seen;
  for (const auto& h : header) {
    if (!seen.insert(h).second) throw DataError("duplicate column name: " + h);
  }
  const auto ts_it = std::find(header.begin(), header.end(), options.timestamp_column);
  if (ts_it == header.end())
    throw DataError("missing timestamp column: " + options.timestamp_column);
  const auto ts_col = static_cast<std::size_t>(ts_it - header.begin());

  DatasetDescription description;
  if (description_text) {
    description = parse_description(*description_text);
    for (const auto& e : description.entries) {
      if (e.name != options.timestamp_column && !seen.contains(e.name))
        throw DataError("description names a column not in the CSV: " + e.name);
    }
    for (const auto& h : header) {
      if (h != options.timestamp_column && description.find(h) == nullptr)
        throw DataError("description has no entry for column: " + h);
    }
  }

  struct RawRow {
    std::int64_t ts;
    std::size_t record;
  };
  std::vector<RawRow> order;
  order.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    auto& rec = records[r];
    if (rec.size() == 1 && trim(rec[0]).empty()) continue;
    if (rec.size() != header.size())
      throw DataError("CSV row " + std::to_string(r + 1) + " has " + std::to_string(rec.size()) +
                      " fields, expected " + std::to_string(header.size()));
    const auto ts = parse_timestamp(rec[ts_col]);
    if (!ts) throw DataError("unparseable timestamp '" + rec[ts_col] + "' on row " + std::to_string(r + 1));
    order.push_back({*ts, r});
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const RawRow& a, const RawRow& b) { return a.ts < b.ts; });

  std::vector<std::int64_t> timestamps;
  std::vector<std::string> labels;
  timestamps.reserve(order.size());
  labels.reserve(order.size());
  for (const auto& row : order) {
    timestamps.push_back(row.ts);
    labels.emplace_back(trim(records[row.record][ts_col]));
  }

  std::vector<std::string> names;
  std::vector<Column> columns;
  std::set<std::string> group_keys;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j == ts_col) continue;
    bool categorical = false;
    if (description_text) {
      categorical = description.find(header[j])->is_categorical();
    } else {
      bool any_value = false;
      bool any_number = false;
      for (const auto& row : order) {
        const auto cell = trim(records[row.record][j]);
        if (cell.empty()) continue;
        any_value = true;
        if (parse_number(cell)) {
          any_number = true;
          break;
        }
      }
      categorical = any_value && !any_number;
    }
    if (categorical) {
      std::vector<std::string> values;
      values.reserve(order.size());
      for (const auto& row : order) values.emplace_back(trim(records[row.record][j]));
      columns.push_back(Column::make_categorical(std::move(values)));
      group_keys.insert(header[j]);
    } else {
      Series values;
      values.reserve(order.size());
      for (const auto& row : order) values.push_back(cell_to_double(records[row.record][j]));
      columns.push_back(Column::make_numeric(std::move(values)));
    }
    names.push_back(header[j]);
  }

  if (options.target_column.empty()) throw DataError("no target column configured");
  TimeFrame frame(std::move(timestamps), std::move(labels), std::move(names), std::move(columns),
                  options.target_column, options.horizon, std::move(group_keys));
  return {std::move(frame), std::move(description)};
}

LoadedDataset load_csv(const std::filesystem::path& csv_path,
                       const std::filesystem::path& description_path, const CsvOptions& options) {
  const std::string csv = read_file(csv_path);
  if (description_path.empty()) return parse_csv(csv, std::nullopt, options);
  const std::string desc = read_file(description_path);
  return parse_csv(csv, desc, options);
}

std::string to_csv(const TimeFrame& frame, std::string_view timestamp_column) {
  std::string out = csv_escape(timestamp_column);
  for (const auto& n : frame.names()) out += "," + csv_escape(n);
  out.push_back('\n');
  for (std::size_t i = 0; i < frame.rows(); ++i) {
    out += csv_escape(frame.timestamp_labels()[i]);
    for (std::size_t j = 0; j < frame.column_count(); ++j) {
      out.push_back(',');
      const Column& c = frame.column(j);
      if (c.kind == ColumnKind::Numeric) out += format_double(c.numeric[i]);
      else out += csv_escape(c.categorical[i]);
    }
    out.push_back('\n');
  }
  return out;
}

void write_csv(const TimeFrame& frame, const std::filesystem::path& path,
               std::string_view timestamp_column) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_csv(frame, timestamp_column);
}

TimeFrame attach_target_lag(const TimeFrame& frame) {
  const std::string name(kTargetLagColumn);
  if (frame.has_column(name)) throw DataError("column already exists: " + name);
  const Series& y = frame.target();
  const std::size_t h = frame.horizon();
  Series lagged(y.size(), kNaN);
  for (std::size_t t = h; t < y.size(); ++t) lagged[t] = y[t - h];
  return frame.with_column(name, Column::make_numeric(std::move(lagged)));
}

ColumnDescription target_lag_description(const TimeFrame& frame) {
  return {std::string(kTargetLagColumn),
          "most recent value of " + frame.target_name() + " available at forecast time (" +
              frame.target_name() + " lagged by " + std::to_string(frame.horizon()) + " step" +
              (frame.horizon() == 1 ? "" : "s") + ")",
          "float", true};
}

SplitSpec chronological_split(const TimeFrame& frame, double test_frac, double val_frac,
                              std::size_t fold_count) {
  if (!(test_frac > 0.0) || !(val_frac > 0.0) || !(test_frac + val_frac < 1.0))
    throw DataError("split fractions must be positive and sum to less than 1");
  const auto starts = date_starts(frame.timestamps(), {0, frame.rows()});
  const std::size_t dates = starts.size() - 1;
  if (dates < 3) throw DataError("chronological split needs at least 3 distinct dates");

  const auto count = [dates](double frac) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(frac * static_cast<double>(dates) + 1e-9)));
  };
  const std::size_t test_dates = count(test_frac);
  const std::size_t val_dates = count(val_frac);
  if (test_dates + val_dates >= dates) throw DataError("split leaves no training dates");
  const std::size_t train_dates = dates - test_dates - val_dates;

  SplitSpec split;
  split.train_end = starts[train_dates];
  split.validation_end = starts[train_dates + val_dates];
  split.test_end = frame.rows();
  split.fold_count = fold_count;
  return split;
}

std::vector<Fold> walk_forward_folds(RowRange eval, std::size_t fold_count, std::size_t train_begin) {
  if (eval.empty()) throw DataError("empty evaluation range");
  std::vector<std::size_t> starts(eval.size() + 1);
  std::iota(starts.begin(), starts.end(), eval.begin);
  return folds_from_boundaries(starts, fold_count, train_begin);
}

std::vector<Fold> walk_forward_folds(const TimeFrame& frame, RowRange eval, std::size_t fold_count,
                                     std::size_t train_begin) {
  if (eval.empty() || eval.end > frame.rows()) throw DataError("evaluation range out of bounds");
  return folds_from_boundaries(date_starts(frame.timestamps(), eval), fold_count, train_begin);
}

}  // namespace elate
