#include "elate/engine.hpp"

#include <chrono>
#include <map>
#include <random>

#include <json.hpp>

#include "elate/dsl.hpp"
#include "elate/evaluators.hpp"
#include "elate/filter.hpp"
#include "elate/model.hpp"
#include "elate/persistence.hpp"

namespace elate {

namespace {

using ordered_json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

constexpr std::size_t kMaxConsecutiveLlmFailures = 3;

std::string with_trailing_newline(std::string s) {
  if (s.empty() || s.back() != '\n') s += '\n';
  return s;
}

Series slice(const Series& v, RowRange r) { return Series(v.begin() + static_cast<std::ptrdiff_t>(r.begin), v.begin() + static_cast<std::ptrdiff_t>(r.end)); }

// Holds everything derived from the dataset that scoring and filtering need.
class Workspace : public FeatureSetJudge {
 public:
  Workspace(const EngineConfig& config, const TimeFrame& frame)
      : config_(config),
        frame_(frame),
        split_(chronological_split(frame, config.test_frac, config.val_frac, config.val_folds)),
        val_folds_(walk_forward_folds(frame, split_.validation(), config.val_folds, 0)),
        test_folds_(walk_forward_folds(frame, split_.test(), config.test_folds, 0)) {}

  const SplitSpec& split() const { return split_; }
  const std::vector<Fold>& test_folds() const { return test_folds_; }

  void remember(const FeatureSpec& f, Series values) { columns_[f.created_seq] = std::move(values); }
  void forget_unused(const std::vector<FeatureSpec>& population) {
    std::map<std::uint64_t, Series> kept;
    for (const auto& f : population) {
      if (auto it = columns_.find(f.created_seq); it != columns_.end()) kept.insert(*it);
    }
    columns_ = std::move(kept);
  }

  // Evaluator scores on the validation rows only.
  void score(FeatureSpec& f, const Series& values) const {
    const RowRange val = split_.validation();
    const Series x = slice(values, val);
    const Series y = slice(frame_.target(), val);
    if (config_.filter == FilterMode::Fresh) {
      const double p = eval::kendall_pvalue(x, y);
      f.p_value = p;
      f.scores = eval::EvalScore::from({{eval::kKendall, 1.0 - p}});
    } else {
      f.scores = eval::combined_score(x, y, config_.lag_order);
    }
  }

  std::vector<FeatureSpec> select(const std::vector<FeatureSpec>& population, std::size_t keep) override {
    if (population.size() <= keep) return population;
    std::vector<filter::Candidate> candidates;
    candidates.reserve(population.size());
    for (const auto& f : population) candidates.push_back({f.name(), column(f), f.created_seq, f.p_value});
    std::vector<std::size_t> picked;
    if (config_.filter == FilterMode::Fresh) {
      picked = filter::fresh_filter(candidates, keep);
    } else {
      filter::FilterOptions options;
      options.gbt = config_.gbt;
      options.correlation_threshold = config_.corr_threshold;
      picked = filter::shap_filter(frame_, candidates, keep, val_folds_, options);
    }
    std::vector<FeatureSpec> out;
    out.reserve(picked.size());
    for (std::size_t i : picked) out.push_back(population[i]);
    return out;
  }

  double validation_rmse(const std::vector<FeatureSpec>& set) override {
    return model::walk_forward_score(frame_, columns_of(set), val_folds_, config_.gbt).rmse;
  }

  model::ForecastScore test_score(const std::vector<FeatureSpec>& set) const {
    return model::walk_forward_score(frame_, columns_of(set), test_folds_, config_.gbt);
  }

 private:
  const Series& column(const FeatureSpec& f) const {
    const auto it = columns_.find(f.created_seq);
    if (it == columns_.end()) throw std::logic_error("no cached column for feature '" + f.name() + "'");
    return it->second;
  }
  std::vector<Series> columns_of(const std::vector<FeatureSpec>& set) const {
    std::vector<Series> cols;
    cols.reserve(set.size());
    for (const auto& f : set) cols.push_back(column(f));
    return cols;
  }

  const EngineConfig& config_;
  const TimeFrame& frame_;
  SplitSpec split_;
  std::vector<Fold> val_folds_;
  std::vector<Fold> test_folds_;
  std::map<std::uint64_t, Series> columns_;
};

std::string load_template(const EngineConfig& config) {
  if (config.prompt_template.empty()) return std::string(default_prompt_template());
  return read_text_file(config.prompt_template);
}

std::vector<std::string> names_of(const std::vector<FeatureSpec>& set) {
  std::vector<std::string> names;
  names.reserve(set.size());
  for (const auto& f : set) names.push_back(f.name());
  return names;
}

LoadedDataset load_dataset(const EngineConfig& config) {
  if (config.csv.empty()) throw ConfigError("'csv' is required");
  if (config.target.empty()) throw ConfigError("'target' is required");
  CsvOptions options;
  options.timestamp_column = config.timestamp_column;
  options.target_column = config.target;
  options.horizon = config.horizon;
  return load_csv(config.csv, config.description, options);
}

ordered_json number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

}  // namespace

LoadedDataset with_target_lag(const LoadedDataset& data) {
  LoadedDataset out;
  out.frame = attach_target_lag(data.frame);
  out.description = data.description;
  out.description.add_entry(target_lag_description(out.frame));
  return out;
}

LoadedDataset prepare_dataset(const EngineConfig& config) { return with_target_lag(load_dataset(config)); }

std::unique_ptr<llm::LlmBackend> make_backend(const EngineConfig& config) {
  if (config.backend == BackendKind::Mock) {
    if (config.mock_script.empty()) throw ConfigError("mock backend needs 'mock_script'");
    return std::make_unique<llm::MockBackend>(llm::MockBackend::from_file(config.mock_script));
  }
  if (config.endpoint.empty()) throw ConfigError("http backend needs 'endpoint'");
  llm::HttpOptions options;
  options.endpoint = config.endpoint;
  options.model = config.model;
  options.temperature = config.llm_temperature;
  options.timeout = std::chrono::milliseconds(static_cast<long long>(config.timeout_seconds * 1000.0));
  return std::make_unique<llm::HttpBackend>(options);
}

FitResult fit(const EngineConfig& config) {
  auto backend = make_backend(config);
  return fit(config, *backend);
}

FitResult fit(const EngineConfig& config, llm::LlmBackend& backend) {
  return fit(config, load_dataset(config), backend);
}

FitResult fit(const EngineConfig& config, const LoadedDataset& raw, llm::LlmBackend& backend) {
  check_config(config);
  const LoadedDataset data = with_target_lag(raw);
  const TimeFrame& frame = data.frame;
  const Schema schema = frame.feature_schema();
  Workspace ws(config, frame);

  FitResult result{FeatureDb(config.population, data.description.text, load_template(config)), RunReport{}};
  FeatureDb& db = result.db;
  RunReport& report = result.report;
  report.seed = config.seed;
  report.filter = config.filter == FilterMode::Shap ? "shap" : "fresh";
  report.base_validation_rmse = ws.validation_rmse({});

  std::uint64_t next_seq = 0;
  std::vector<CandidateCounts> counts(1);
  std::vector<double> seconds(1, 0.0);
  auto gen_start = Clock::now();
  std::size_t added_since_reset = 0;

  // A rollover that leaves the run unfinished has already filtered and reset
  // the population; the final one leaves that to the end of fit.
  const auto on_rollover = [&] {
    const auto now = Clock::now();
    seconds.back() = std::chrono::duration<double>(now - gen_start).count();
    gen_start = now;
    backend.clear_history();
    if (db.finished()) return;
    counts.emplace_back();
    seconds.push_back(0.0);
    added_since_reset = 0;
    ws.forget_unused(db.population());
  };

  // Seed features must be valid; dead ones are skipped.
  const auto seeds = config.seed_features.empty() ? default_seed_features() : config.seed_features;
  for (const auto& src : seeds) {
    FeatureSpec f = FeatureSpec::from_source(with_trailing_newline(src), next_seq++);
    const auto program = dsl::validate(f.program, schema);
    if (db.contains(f.name())) throw ConfigError("seed feature '" + f.name() + "' is defined twice");
    Series values = dsl::execute(program, frame);
    ws.score(f, values);
    if (f.scores->dead()) continue;
    ws.remember(f, std::move(values));
    ++report.seeded;
    ++added_since_reset;
    if (db.add_feature(std::move(f), ws)) on_rollover();
    if (db.finished()) break;
  }

  std::mt19937_64 rng(config.seed);
  std::size_t rounds = 0;
  std::size_t failures = 0;
  report.stop_reason = "generations";
  while (!db.finished()) {
    if (rounds >= config.max_rounds) {
      report.stop_reason = "max_rounds";
      break;
    }
    ++rounds;
    const std::string prompt = db.build_prompt(db.sample(rng));
    llm::LlmResponse response;
    try {
      response = backend.draw_samples(prompt, config.n_resp);
    } catch (const llm::LlmError&) {
      if (++failures >= kMaxConsecutiveLlmFailures) {
        report.stop_reason = "llm_failures";
        break;
      }
      continue;
    }
    failures = 0;
    report.tokens.prompt += response.usage.prompt;
    report.tokens.completion += response.usage.completion;
    if (response.texts.empty()) {
      report.stop_reason = "llm_exhausted";
      break;
    }

    for (const auto& text : response.texts) {
      if (db.finished()) break;
      CandidateCounts& c = counts.back();
      ++c.proposed;
      FeatureSpec f;
      try {
        f = FeatureSpec::from_source(with_trailing_newline(llm::extract_code(text)), next_seq);
      } catch (const dsl::DslError&) {
        ++c.parse_failed;
        continue;
      }
      std::optional<dsl::ValidatedProgram> program;
      try {
        program.emplace(dsl::validate(f.program, schema));
      } catch (const dsl::DslError&) {
        ++c.validation_failed;
        continue;
      }
      if (db.contains(f.name())) {
        ++c.duplicate;
        continue;
      }
      Series values = dsl::execute(*program, frame);
      ws.score(f, values);
      if (f.scores->dead()) {
        ++c.dead;
        continue;
      }
      ++c.accepted;
      ++next_seq;
      ws.remember(f, std::move(values));
      ++added_since_reset;
      if (db.add_feature(std::move(f), ws)) on_rollover();
    }
  }

  if (!db.finished()) seconds.back() = std::chrono::duration<double>(Clock::now() - gen_start).count();
  if (!db.population().empty() && (added_since_reset > 0 || db.residuals().empty())) {
    db.update_best_feature_set(ws);
  }

  const auto& residuals = db.residuals();
  for (std::size_t g = 0; g < residuals.size(); ++g) {
    GenerationReport gr;
    gr.residual = residuals[g];
    gr.best_set = names_of(db.best_sets()[g]);
    if (g < counts.size()) gr.counts = counts[g];
    if (g < seconds.size()) gr.seconds = seconds[g];
    report.generations.push_back(std::move(gr));
  }
  report.final_best_set = names_of(db.best_set());
  const auto base_test = ws.test_score({});
  report.base_test_rmse = base_test.rmse;
  report.base_test_mae = base_test.mae;
  const auto test = ws.test_score(db.best_set());
  report.test_rmse = test.rmse;
  report.test_mae = test.mae;

  if (!config.output_db.empty()) write_feature_set(config.output_db, db.best_set());
  if (!config.output_report.empty()) {
    write_text_file(config.output_report, report_to_json(report));
    auto timing = config.output_report;
    timing.replace_extension(".timing.json");
    write_text_file(timing, timing_to_json(report));
  }
  return result;
}

TimeFrame transform(const std::vector<FeatureSpec>& features, const TimeFrame& frame) {
  TimeFrame out = frame;
  const Schema schema = frame.feature_schema();
  for (const auto& f : features) {
    const auto program = dsl::validate(f.program, schema);
    out = out.with_column(f.name(), Column::make_numeric(dsl::execute(program, frame)));
  }
  return out;
}

std::vector<FeatureSpec> zero_shot(const EngineConfig& config, std::size_t k) {
  auto backend = make_backend(config);
  return zero_shot(config, load_dataset(config), k, *backend);
}

std::vector<FeatureSpec> zero_shot(const EngineConfig& config, const LoadedDataset& raw, std::size_t k,
                                   llm::LlmBackend& backend) {
  if (k == 0) return {};
  const LoadedDataset data = with_target_lag(raw);
  const Schema schema = data.frame.feature_schema();
  const FeatureDb db(config.population, data.description.text, load_template(config));
  const llm::LlmResponse response = backend.draw_samples(db.build_prompt({}), k);
  std::vector<FeatureSpec> out;
  std::uint64_t seq = 0;
  for (const auto& text : response.texts) {
    try {
      FeatureSpec f = FeatureSpec::from_source(with_trailing_newline(llm::extract_code(text)), seq);
      (void)dsl::validate(f.program, schema);
      const bool clash = std::any_of(out.begin(), out.end(), [&](const FeatureSpec& g) { return g.name() == f.name(); });
      if (clash) continue;
      out.push_back(std::move(f));
      ++seq;
    } catch (const dsl::DslError&) {
    }
  }
  return out;
}

std::string report_to_json(const RunReport& r) {
  ordered_json gens = ordered_json::array();
  for (std::size_t g = 0; g < r.generations.size(); ++g) {
    const auto& gr = r.generations[g];
    gens.push_back({{"generation", g},
                    {"validation_rmse", number(gr.residual)},
                    {"best_set", gr.best_set},
                    {"counts",
                     {{"proposed", gr.counts.proposed},
                      {"parse_failed", gr.counts.parse_failed},
                      {"validation_failed", gr.counts.validation_failed},
                      {"duplicate", gr.counts.duplicate},
                      {"dead", gr.counts.dead},
                      {"accepted", gr.counts.accepted}}}});
  }
  ordered_json doc = {
      {"format", "elate-run-report"},
      {"version", 1},
      {"seed", r.seed},
      {"filter", r.filter},
      {"seeded_features", r.seeded},
      {"stop_reason", r.stop_reason},
      {"base", {{"validation_rmse", number(r.base_validation_rmse)},
                {"test_rmse", number(r.base_test_rmse)},
                {"test_mae", number(r.base_test_mae)}}},
      {"generations", std::move(gens)},
      {"final", {{"best_set", r.final_best_set},
                 {"validation_rmse", number(r.generations.empty() ? r.base_validation_rmse
                                                                  : r.generations.back().residual)},
                 {"test_rmse", number(r.test_rmse)},
                 {"test_mae", number(r.test_mae)}}},
      {"tokens", {{"prompt", r.tokens.prompt}, {"completion", r.tokens.completion}}},
  };
  return doc.dump(2) + "\n";
}

std::string timing_to_json(const RunReport& r) {
  ordered_json secs = ordered_json::array();
  for (const auto& g : r.generations) secs.push_back(g.seconds);
  return ordered_json{{"generation_seconds", std::move(secs)}}.dump(2) + "\n";
}

}  // namespace elate
