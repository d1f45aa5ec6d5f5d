#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "elate/engine.hpp"
#include "elate/persistence.hpp"
#include "scenario.hpp"

namespace elate {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("elate_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string fenced(const std::string& src) { return "```\n" + src + "\n```"; }

// Small dataset: cheap enough for several full runs per test. The validation
// share is raised so evaluators see enough rows (MI needs 50, Granger 60).
LoadedDataset small_dataset() { return testing::lagged_mean_dataset(500, 5); }

EngineConfig small_config() {
  EngineConfig c;
  c.target = "y";
  c.population.max_gen = 2;
  c.population.n_max = 4;
  c.population.n_keep = 2;
  c.population.n_prompt = 2;
  c.n_resp = 3;
  c.gbt = {.trees = 20, .max_depth = 3, .learning_rate = 0.2, .min_samples_leaf = 10};
  c.val_frac = 0.2;
  c.test_frac = 0.2;
  c.val_folds = 3;
  c.test_folds = 3;
  c.seed = 11;
  return c;
}

class ThrowingBackend : public llm::LlmBackend {
 public:
  llm::LlmResponse draw_samples(const std::string&, std::size_t) override {
    ++calls;
    throw llm::LlmError("down");
  }
  void clear_history() override {}
  [[nodiscard]] const std::vector<llm::Message>& history() const override { return empty_; }
  int calls = 0;

 private:
  std::vector<llm::Message> empty_;
};

TEST(Config, ParsesEveryKey) {
  const auto c = parse_config(
      "# comment\n"
      "csv = data.csv\n"
      "description = /abs/desc.txt\n"
      "template = t.txt\n"
      "timestamp_column = when\n"
      "target = sales\n"
      "horizon = 2\n"
      "test_frac = 0.2\n"
      "val_frac = 0.15\n"
      "val_folds = 4\n"
      "test_folds = 3\n"
      "filter = fresh\n"
      "n_max = 30\n"
      "n_keep = 10\n"
      "generations = 4\n"
      "n_prompt = 2\n"
      "t0 = 5\n"
      "k_decay = 3\n"
      "eps = 0.2\n"
      "n_resp = 6\n"
      "backend = http\n"
      "mock_script = m.txt\n"
      "endpoint = http://localhost:8080/v1/chat/completions\n"
      "model = some-model\n"
      "llm_temperature = 0.7\n"
      "timeout = 12.5\n"
      "seed_feature = feature \"a\": x\n"
      "seed_feature = feature \"b\": lag(x, 1)\n"
      "seed = 99\n"
      "gbt_trees = 50\n"
      "gbt_max_depth = 3\n"
      "gbt_learning_rate = 0.05\n"
      "gbt_min_samples_leaf = 7\n"
      "lag_order = 2\n"
      "corr_threshold = 0.8\n"
      "max_rounds = 17\n"
      "output_db = out/fs.txt\n"
      "output_report = out/report.json\n",
      "/base");
  EXPECT_EQ(c.csv, fs::path("/base/data.csv"));
  EXPECT_EQ(c.description, fs::path("/abs/desc.txt"));
  EXPECT_EQ(c.prompt_template, fs::path("/base/t.txt"));
  EXPECT_EQ(c.timestamp_column, "when");
  EXPECT_EQ(c.target, "sales");
  EXPECT_EQ(c.horizon, 2U);
  EXPECT_EQ(c.test_frac, 0.2);
  EXPECT_EQ(c.val_frac, 0.15);
  EXPECT_EQ(c.val_folds, 4U);
  EXPECT_EQ(c.test_folds, 3U);
  EXPECT_EQ(c.filter, FilterMode::Fresh);
  EXPECT_EQ(c.population.n_max, 30U);
  EXPECT_EQ(c.population.n_keep, 10U);
  EXPECT_EQ(c.population.max_gen, 4U);
  EXPECT_EQ(c.population.n_prompt, 2U);
  EXPECT_EQ(c.population.t0, 5.0);
  EXPECT_EQ(c.population.k_decay, 3.0);
  EXPECT_EQ(c.population.eps, 0.2);
  EXPECT_EQ(c.n_resp, 6U);
  EXPECT_EQ(c.backend, BackendKind::Http);
  EXPECT_EQ(c.mock_script, fs::path("/base/m.txt"));
  EXPECT_EQ(c.endpoint, "http://localhost:8080/v1/chat/completions");
  EXPECT_EQ(c.model, "some-model");
  EXPECT_EQ(c.llm_temperature, 0.7);
  EXPECT_EQ(c.timeout_seconds, 12.5);
  EXPECT_EQ(c.seed_features, (std::vector<std::string>{"feature \"a\": x", "feature \"b\": lag(x, 1)"}));
  EXPECT_EQ(c.seed, 99U);
  EXPECT_EQ(c.gbt.trees, 50U);
  EXPECT_EQ(c.gbt.max_depth, 3U);
  EXPECT_EQ(c.gbt.learning_rate, 0.05);
  EXPECT_EQ(c.gbt.min_samples_leaf, 7U);
  EXPECT_EQ(c.lag_order, 2U);
  EXPECT_EQ(c.corr_threshold, 0.8);
  EXPECT_EQ(c.max_rounds, 17U);
  EXPECT_EQ(c.output_db, fs::path("/base/out/fs.txt"));
  EXPECT_EQ(c.output_report, fs::path("/base/out/report.json"));
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config("target = y\ncolour = red\n"), ConfigError);
  EXPECT_THROW(parse_config("target = y\nn_max = ten\n"), ConfigError);
  EXPECT_THROW(parse_config("target = y\nn_max = -3\n"), ConfigError);
  EXPECT_THROW(parse_config("target = y\nfilter = lasso\n"), ConfigError);
  EXPECT_THROW(parse_config("target = y\nn_max = 5\nn_keep = 6\n"), ConfigError);
  EXPECT_THROW(parse_config("target = y\ntest_frac = 0.6\nval_frac = 0.5\n"), ConfigError);
  EXPECT_THROW(parse_config("csv = a.csv\n"), ConfigError);
  EXPECT_THROW(parse_config("target = y\njust words\n"), ConfigError);
  EXPECT_NO_THROW(parse_config("target = y\n"));
}

TEST(Config, BackendSettingsCheckedWhenBuilt) {
  EngineConfig c = small_config();
  c.backend = BackendKind::Mock;
  EXPECT_THROW(make_backend(c), ConfigError);
  c.backend = BackendKind::Http;
  EXPECT_THROW(make_backend(c), ConfigError);
}

TEST(Config, DefaultSeedsCompileAgainstTargetLag) {
  const auto data = with_target_lag(small_dataset());
  for (const auto& src : default_seed_features())
    EXPECT_NO_THROW(dsl::compile(src, data.frame.feature_schema())) << src;
}

FeatureSpec scored(const std::string& src, std::uint64_t seq, double g, double mi) {
  FeatureSpec f = FeatureSpec::from_source(src, seq);
  f.scores = eval::EvalScore::from({{eval::kGranger, g}, {eval::kMutualInfo, mi}});
  return f;
}

TEST(Persistence, RoundTrip) {
  std::vector<FeatureSpec> set{
      scored("# first\nlet a = lag(x, 2)\n\nfeature \"f1\": a * 0.1\n", 3, 0.1 + 0.2, 1.0 / 3.0),
      FeatureSpec::from_source("feature \"f2\": x\n", 8),
  };
  set.push_back(FeatureSpec::from_source("# === not a separator\nfeature \"f3\": x + 1\n", 9));
  set.back().scores = eval::EvalScore::from({{eval::kKendall, 0.75}});
  set.back().p_value = 0.25;
  const std::string text = format_feature_set(set);
  const auto back = parse_feature_set(text);
  ASSERT_EQ(back.size(), 3U);
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_EQ(back[i].source, set[i].source);
    EXPECT_EQ(back[i].name(), set[i].name());
    EXPECT_EQ(back[i].created_seq, set[i].created_seq);
    EXPECT_EQ(back[i].p_value, set[i].p_value);
    EXPECT_EQ(back[i].scores.has_value(), set[i].scores.has_value());
    if (set[i].scores) {
      EXPECT_EQ(back[i].scores->per_evaluator, set[i].scores->per_evaluator);
      EXPECT_EQ(back[i].score(), set[i].score());
    }
  }
  EXPECT_EQ(format_feature_set(back), text);
}

TEST(Persistence, RejectsMalformed) {
  EXPECT_THROW(parse_feature_set("name: f\nseq: 1\nsource:\nfeature \"g\": x\n"), PersistenceError);
  EXPECT_THROW(parse_feature_set("name: f\nseq: x1\nsource:\nfeature \"f\": x\n"), PersistenceError);
  EXPECT_THROW(parse_feature_set("name f\nsource:\nfeature \"f\": x\n"), PersistenceError);
  EXPECT_THROW(parse_feature_set("name: f\nscore: abc\nsource:\nfeature \"f\": x\n"), PersistenceError);
  EXPECT_TRUE(parse_feature_set("").empty());
}

TEST(Persistence, ShortestNumbers) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(0.1 + 0.2), "0.30000000000000004");
  EXPECT_EQ(format_number(1e-300), "1e-300");
  EXPECT_EQ(format_number(std::numeric_limits<double>::quiet_NaN()), "nan");
}

TEST(Persistence, FilesWrittenWhole) {
  const fs::path dir = scratch_dir("persist");
  const fs::path p = dir / "set.txt";
  write_feature_set(p, {FeatureSpec::from_source("feature \"f\": x\n", 1)});
  const auto back = read_feature_set(p);
  ASSERT_EQ(back.size(), 1U);
  EXPECT_EQ(back[0].name(), "f");
  for (const auto& entry : fs::directory_iterator(dir)) EXPECT_EQ(entry.path().filename(), "set.txt");
  EXPECT_THROW(read_feature_set(dir / "missing.txt"), std::exception);
  fs::remove_all(dir);
}

TEST(Engine, SmallRunFollowsTheGenerationSchedule) {
  // Two seeds plus: parse failure, unknown column, duplicate name, a dead
  // (constant) feature, and then valid programs.
  std::vector<std::string> responses{
      "no code here at all (",
      fenced("feature \"bad\": nosuchcolumn + 1"),
      fenced("# copy of a seed name\nfeature \"tm1_diff\": x1"),
      fenced("# constant\nfeature \"flat\": x1 * 0"),
      fenced("feature \"a1\": rolling_mean(lag(x1, 1), 7)"),
      fenced("feature \"a2\": lag(x1, 1)"),
      fenced("feature \"a3\": lag(x1, 2)"),
      fenced("feature \"a4\": rolling_mean(x2, 3)"),
      fenced("feature \"a5\": lag(x1, 3)"),
      fenced("feature \"a6\": x2"),
  };
  llm::MockBackend mock(responses);
  const auto result = fit(small_config(), small_dataset(), mock);
  const RunReport& r = result.report;
  EXPECT_EQ(r.seeded, 2U);
  EXPECT_EQ(r.stop_reason, "generations");
  ASSERT_EQ(r.generations.size(), 2U);
  const CandidateCounts& g1 = r.generations[0].counts;
  EXPECT_EQ(g1.parse_failed, 1U);
  EXPECT_EQ(g1.validation_failed, 1U);
  EXPECT_EQ(g1.duplicate, 1U);
  EXPECT_EQ(g1.dead, 1U);
  EXPECT_EQ(g1.accepted, 2U);
  EXPECT_EQ(g1.proposed, 6U);
  // Gen 2 starts from the 2 kept and needs 2 more.
  EXPECT_EQ(r.generations[1].counts.accepted, 2U);
  EXPECT_EQ(result.db.generation(), 2U);
  EXPECT_EQ(result.db.residuals().size(), 2U);
  EXPECT_LE(result.db.residuals()[1], result.db.residuals()[0]);
  EXPECT_LE(r.final_best_set.size(), 2U);
  // Every prompt carried the description and at most n_prompt examples.
  for (const auto& p : mock.prompts()) EXPECT_NE(p.find("x1 (float, nan=no): driver signal"), std::string::npos);
}

TEST(Engine, OnlyInvalidProposalsStopWhenTheScriptRunsOut) {
  llm::MockBackend mock({"```\nfeature \"x\": 1 +\n```", "```\nfeature \"y2\": y\n```"});
  const auto result = fit(small_config(), small_dataset(), mock);
  EXPECT_EQ(result.report.stop_reason, "llm_exhausted");
  EXPECT_EQ(result.db.population().size(), 2U);  // the seeds
  ASSERT_EQ(result.report.generations.size(), 1U);
  EXPECT_EQ(result.report.generations[0].counts.parse_failed, 1U);
  EXPECT_EQ(result.report.generations[0].counts.validation_failed, 1U);
  EXPECT_EQ(result.report.generations[0].counts.accepted, 0U);
}

TEST(Engine, RepeatedBackendFailuresStopTheRun) {
  ThrowingBackend backend;
  const auto result = fit(small_config(), small_dataset(), backend);
  EXPECT_EQ(result.report.stop_reason, "llm_failures");
  EXPECT_EQ(backend.calls, 3);
}

TEST(Engine, RoundCap) {
  EngineConfig c = small_config();
  c.max_rounds = 2;
  std::vector<std::string> junk(20, "junk (");
  llm::MockBackend mock(junk);
  const auto result = fit(c, small_dataset(), mock);
  EXPECT_EQ(result.report.stop_reason, "max_rounds");
  EXPECT_EQ(mock.prompts().size(), 2U);
}

TEST(Engine, BadSeedFeatureIsAConfigurationError) {
  EngineConfig c = small_config();
  c.seed_features = {"feature \"s\": nosuch"};
  llm::MockBackend mock({});
  EXPECT_THROW(fit(c, small_dataset(), mock), dsl::DslError);
  c.seed_features = {"feature \"s\": x1", "feature \"s\": x2"};
  EXPECT_THROW(fit(c, small_dataset(), mock), ConfigError);
}

TEST(Engine, FreshModeStoresPValues) {
  EngineConfig c = small_config();
  c.filter = FilterMode::Fresh;
  llm::MockBackend mock({fenced("feature \"a1\": rolling_mean(lag(x1, 1), 7)"), fenced("feature \"a2\": x2"),
                         fenced("feature \"a3\": lag(x1, 1)"), fenced("feature \"a4\": lag(x2, 1)")});
  const auto result = fit(c, small_dataset(), mock);
  for (const auto& f : result.db.population()) {
    ASSERT_TRUE(f.p_value.has_value()) << f.name();
    EXPECT_NEAR(f.score(), 1.0 - *f.p_value, 1e-15);
  }
  EXPECT_EQ(result.report.filter, "fresh");
}

TEST(Engine, WritesFeatureSetReportAndTiming) {
  const fs::path dir = scratch_dir("outputs");
  EngineConfig c = small_config();
  c.output_db = dir / "best.txt";
  c.output_report = dir / "report.json";
  llm::MockBackend mock({fenced("feature \"a1\": rolling_mean(lag(x1, 1), 7)"), fenced("feature \"a2\": x2")});
  const auto result = fit(c, small_dataset(), mock);
  ASSERT_TRUE(fs::exists(dir / "best.txt"));
  ASSERT_TRUE(fs::exists(dir / "report.timing.json"));
  const json report = json::parse(read_text_file(dir / "report.json"));
  EXPECT_EQ(report.at("format"), "elate-run-report");
  EXPECT_EQ(report.at("version"), 1);
  EXPECT_EQ(report.at("seed"), 11);
  EXPECT_EQ(report.at("final").at("best_set").size(), result.report.final_best_set.size());
  EXPECT_FALSE(report.dump().find("seconds") != std::string::npos);
  const json timing = json::parse(read_text_file(dir / "report.timing.json"));
  EXPECT_EQ(timing.at("generation_seconds").size(), report.at("generations").size());
  EXPECT_EQ(read_feature_set(dir / "best.txt").size(), result.db.best_set().size());
  fs::remove_all(dir);
}

TEST(Engine, ReportNaNBecomesNull) {
  RunReport r;
  r.base_validation_rmse = std::numeric_limits<double>::quiet_NaN();
  const json doc = json::parse(report_to_json(r));
  EXPECT_TRUE(doc.at("base").at("validation_rmse").is_null());
}

TEST(Engine, SameSeedSameOutputs) {
  const auto run = [] {
    llm::MockBackend mock(testing::recoverability_responses());
    EngineConfig c = small_config();
    c.population.n_max = 6;
    c.population.n_keep = 3;
    const auto result = fit(c, small_dataset(), mock);
    return std::pair{format_feature_set(result.db.best_set()), report_to_json(result.report)};
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Transform, AppendsEveryFeature) {
  const auto data = with_target_lag(small_dataset());
  const std::vector<FeatureSpec> set{FeatureSpec::from_source("feature \"l1\": lag(x1, 1)\n"),
                                     FeatureSpec::from_source("feature \"m\": rolling_mean(Target_Tminus1, 2)\n")};
  const TimeFrame out = transform(set, data.frame);
  EXPECT_EQ(out.column_count(), data.frame.column_count() + 2);
  EXPECT_EQ(out.numeric("l1")[5], data.frame.numeric("x1")[4]);
  EXPECT_THROW(transform(set, small_dataset().frame), dsl::DslError);
}

TEST(ZeroShot, DropsInvalidAndDuplicateNames) {
  llm::MockBackend mock({fenced("feature \"a\": x1"), "nonsense (", fenced("feature \"a\": x2"),
                         fenced("feature \"b\": lag(Target_Tminus1, 2)"), fenced("feature \"c\": y")});
  const auto out = zero_shot(small_config(), small_dataset(), 5, mock);
  ASSERT_EQ(out.size(), 2U);
  EXPECT_EQ(out[0].name(), "a");
  EXPECT_EQ(out[1].name(), "b");
  ASSERT_EQ(mock.prompts().size(), 1U);
  EXPECT_EQ(mock.prompts()[0].find("```\nfeature"), std::string::npos);
}

}  // namespace
}  // namespace elate
