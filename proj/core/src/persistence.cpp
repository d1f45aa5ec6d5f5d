#include "elate/persistence.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace elate {

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  return lines;
}

double parse_number(std::string_view v) {
  if (v == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (v == "inf") return std::numeric_limits<double>::infinity();
  if (v == "-inf") return -std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw PersistenceError("bad number '" + std::string(v) + "'");
  return out;
}

FeatureSpec parse_record(const std::vector<std::string_view>& lines, std::size_t first_line) {
  std::string name;
  std::optional<double> mean;
  std::map<std::string, double> per;
  FeatureSpec spec;
  std::size_t i = 0;
  for (; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (line == "source:") break;
    if (line.empty()) continue;
    const auto colon = line.find(": ");
    if (colon == std::string_view::npos)
      throw PersistenceError("line " + std::to_string(first_line + i) + ": expected 'key: value'");
    const std::string_view key = line.substr(0, colon);
    const std::string_view value = line.substr(colon + 2);
    if (key == "name") {
      name = value;
    } else if (key == "seq") {
      std::uint64_t seq = 0;
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), seq);
      if (ec != std::errc() || ptr != value.data() + value.size())
        throw PersistenceError("line " + std::to_string(first_line + i) + ": bad seq");
      spec.created_seq = seq;
    } else if (key == "score") {
      mean = parse_number(value);
    } else if (key.starts_with("score.")) {
      per[std::string(key.substr(6))] = parse_number(value);
    } else if (key == "p_value") {
      spec.p_value = parse_number(value);
    } else {
      throw PersistenceError("line " + std::to_string(first_line + i) + ": unknown key '" + std::string(key) + "'");
    }
  }
  if (i == lines.size()) throw PersistenceError("record starting at line " + std::to_string(first_line) + " has no source");
  std::string source;
  for (std::size_t j = i + 1; j < lines.size(); ++j) {
    source += lines[j];
    source += '\n';
  }
  try {
    spec.program = dsl::parse(source);
  } catch (const dsl::DslError& e) {
    throw PersistenceError("record starting at line " + std::to_string(first_line) + ": " + e.what());
  }
  spec.source = std::move(source);
  if (spec.program.feature_name != name)
    throw PersistenceError("record '" + name + "' holds a program named '" + spec.program.feature_name + "'");
  if (mean || !per.empty()) {
    eval::EvalScore s;
    s.per_evaluator = std::move(per);
    s.mean = mean.value_or(0.0);
    spec.scores = std::move(s);
  }
  return spec;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string format_feature_set(const std::vector<FeatureSpec>& features) {
  std::string out;
  for (std::size_t k = 0; k < features.size(); ++k) {
    const auto& f = features[k];
    if (k > 0) out += std::string(kRecordSeparator) + "\n";
    out += "name: " + f.name() + "\n";
    out += "seq: " + std::to_string(f.created_seq) + "\n";
    if (f.scores) {
      out += "score: " + format_number(f.scores->mean) + "\n";
      for (const auto& [ev, v] : f.scores->per_evaluator) out += "score." + ev + ": " + format_number(v) + "\n";
    }
    if (f.p_value) out += "p_value: " + format_number(*f.p_value) + "\n";
    out += "source:\n";
    out += f.source;
    if (!f.source.empty() && f.source.back() != '\n') out += '\n';
  }
  return out;
}

std::vector<FeatureSpec> parse_feature_set(std::string_view text) {
  const auto lines = split_lines(text);
  std::vector<FeatureSpec> out;
  std::vector<std::string_view> record;
  std::size_t record_start = 1;
  const auto flush = [&] {
    bool blank = true;
    for (auto l : record) blank = blank && l.find_first_not_of(" \t") == std::string_view::npos;
    if (!blank) out.push_back(parse_record(record, record_start));
    record.clear();
  };
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i] == kRecordSeparator) {
      flush();
      record_start = i + 2;
    } else {
      record.push_back(lines[i]);
    }
  }
  flush();
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw PersistenceError("cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw PersistenceError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_feature_set(const std::filesystem::path& path, const std::vector<FeatureSpec>& features) {
  write_text_file(path, format_feature_set(features));
}

std::vector<FeatureSpec> read_feature_set(const std::filesystem::path& path) {
  return parse_feature_set(read_text_file(path));
}

}  // namespace elate
