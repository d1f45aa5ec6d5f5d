#include "elate/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace elate {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::size_t to_count(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("'" + std::string(key) + "' expects a non-negative integer, got '" + std::string(v) + "'");
  return out;
}

double to_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" + std::string(v) + "'");
  return out;
}

}  // namespace

std::vector<std::string> default_seed_features() {
  return {
      "# Weekly level of the target.\nfeature \"tm1_mean7\": rolling_mean(Target_Tminus1, 7)\n",
      "# Most recent change of the target.\nfeature \"tm1_diff\": diff(Target_Tminus1, 1)\n",
  };
}

EngineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  EngineConfig c;
  const auto path = [&](std::string_view v) {
    std::filesystem::path p{std::string(v)};
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  using Setter = std::function<void(std::string_view, std::string_view)>;
  const std::map<std::string, Setter, std::less<>> setters{
      {"csv", [&](auto, auto v) { c.csv = path(v); }},
      {"description", [&](auto, auto v) { c.description = path(v); }},
      {"template", [&](auto, auto v) { c.prompt_template = path(v); }},
      {"timestamp_column", [&](auto, auto v) { c.timestamp_column = v; }},
      {"target", [&](auto, auto v) { c.target = v; }},
      {"horizon", [&](auto k, auto v) { c.horizon = to_count(k, v); }},
      {"test_frac", [&](auto k, auto v) { c.test_frac = to_real(k, v); }},
      {"val_frac", [&](auto k, auto v) { c.val_frac = to_real(k, v); }},
      {"val_folds", [&](auto k, auto v) { c.val_folds = to_count(k, v); }},
      {"test_folds", [&](auto k, auto v) { c.test_folds = to_count(k, v); }},
      {"filter",
       [&](auto, auto v) {
         if (v == "shap") c.filter = FilterMode::Shap;
         else if (v == "fresh") c.filter = FilterMode::Fresh;
         else throw ConfigError("filter must be 'shap' or 'fresh'");
       }},
      {"n_max", [&](auto k, auto v) { c.population.n_max = to_count(k, v); }},
      {"n_keep", [&](auto k, auto v) { c.population.n_keep = to_count(k, v); }},
      {"generations", [&](auto k, auto v) { c.population.max_gen = to_count(k, v); }},
      {"n_prompt", [&](auto k, auto v) { c.population.n_prompt = to_count(k, v); }},
      {"t0", [&](auto k, auto v) { c.population.t0 = to_real(k, v); }},
      {"k_decay", [&](auto k, auto v) { c.population.k_decay = to_real(k, v); }},
      {"eps", [&](auto k, auto v) { c.population.eps = to_real(k, v); }},
      {"n_resp", [&](auto k, auto v) { c.n_resp = to_count(k, v); }},
      {"backend",
       [&](auto, auto v) {
         if (v == "mock") c.backend = BackendKind::Mock;
         else if (v == "http") c.backend = BackendKind::Http;
         else throw ConfigError("backend must be 'mock' or 'http'");
       }},
      {"mock_script", [&](auto, auto v) { c.mock_script = path(v); }},
      {"endpoint", [&](auto, auto v) { c.endpoint = v; }},
      {"model", [&](auto, auto v) { c.model = v; }},
      {"llm_temperature", [&](auto k, auto v) { c.llm_temperature = to_real(k, v); }},
      {"timeout", [&](auto k, auto v) { c.timeout_seconds = to_real(k, v); }},
      {"seed_feature", [&](auto, auto v) { c.seed_features.emplace_back(v); }},
      {"seed", [&](auto k, auto v) { c.seed = to_count(k, v); }},
      {"gbt_trees", [&](auto k, auto v) { c.gbt.trees = to_count(k, v); }},
      {"gbt_max_depth", [&](auto k, auto v) { c.gbt.max_depth = to_count(k, v); }},
      {"gbt_learning_rate", [&](auto k, auto v) { c.gbt.learning_rate = to_real(k, v); }},
      {"gbt_min_samples_leaf", [&](auto k, auto v) { c.gbt.min_samples_leaf = to_count(k, v); }},
      {"lag_order", [&](auto k, auto v) { c.lag_order = to_count(k, v); }},
      {"corr_threshold", [&](auto k, auto v) { c.corr_threshold = to_real(k, v); }},
      {"max_rounds", [&](auto k, auto v) { c.max_rounds = to_count(k, v); }},
      {"output_db", [&](auto, auto v) { c.output_db = path(v); }},
      {"output_report", [&](auto, auto v) { c.output_report = path(v); }},
  };

  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end())
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    try {
      it->second(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  check_config(c);
  return c;
}

EngineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

void check_config(const EngineConfig& c) {
  const auto& p = c.population;
  if (c.target.empty()) throw ConfigError("'target' is required");
  if (c.horizon == 0) throw ConfigError("horizon must be at least 1");
  if (p.n_max == 0 || p.n_keep == 0 || p.n_keep > p.n_max) throw ConfigError("need 1 <= n_keep <= n_max");
  if (p.max_gen == 0) throw ConfigError("generations must be at least 1");
  if (p.n_prompt == 0) throw ConfigError("n_prompt must be at least 1");
  if (c.n_resp == 0) throw ConfigError("n_resp must be at least 1");
  if (!(p.eps > 0.0) || !(p.t0 >= 0.0)) throw ConfigError("need t0 >= 0 and eps > 0");
  if (!(c.test_frac > 0.0) || !(c.val_frac > 0.0) || c.test_frac + c.val_frac >= 1.0)
    throw ConfigError("split fractions must be positive and sum to less than 1");
  if (c.val_folds == 0 || c.test_folds == 0) throw ConfigError("fold counts must be at least 1");
  if (!(c.corr_threshold > 0.0 && c.corr_threshold <= 1.0)) throw ConfigError("corr_threshold must be in (0, 1]");
  if (c.lag_order == 0) throw ConfigError("lag_order must be at least 1");
  if (c.gbt.min_samples_leaf == 0) throw ConfigError("gbt_min_samples_leaf must be at least 1");
}

}  // namespace elate
