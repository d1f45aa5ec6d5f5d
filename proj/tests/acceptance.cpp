// Acceptance checks, one PASS/FAIL line each. Exit status is nonzero if any fails.

#include <unistd.h>

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include "dsl_fixtures.hpp"
#include "dsl_fuzz.hpp"
#include "elate/dsl.hpp"
#include "elate/engine.hpp"
#include "elate/evaluators.hpp"
#include "elate/filter.hpp"
#include "scenario.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace elate;
using testing::kNaN;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// The recoverability run is shared by criteria 1, 2, 9 and 10.
struct MockRun {
  FitResult result;
  std::vector<std::string> prompts;
  std::string feature_set;
  std::string report;
  double seconds = 0.0;
};

MockRun mock_run(const LoadedDataset& data, const EngineConfig& base, const fs::path& dir) {
  fs::create_directories(dir);
  EngineConfig c = base;
  c.output_db = dir / "best.txt";
  c.output_report = dir / "report.json";
  llm::MockBackend backend(testing::recoverability_responses());
  const auto start = Clock::now();
  FitResult r = fit(c, data, backend);
  MockRun run{std::move(r), backend.prompts(), "", "", seconds_since(start)};
  run.feature_set = slurp(c.output_db);
  run.report = slurp(c.output_report);
  return run;
}

fs::path fresh_dir() {
  const fs::path dir = fs::temp_directory_path() / ("elate_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

struct Shared {
  LoadedDataset data = testing::lagged_mean_dataset();
  EngineConfig config = testing::recoverability_config();
  fs::path dir = fresh_dir();
  MockRun first = mock_run(data, config, dir / "a");
  MockRun second = mock_run(data, config, dir / "b");

  ~Shared() { fs::remove_all(dir); }
};

Outcome synthetic_recoverability(const Shared& s) {
  // Oracle: the same validation folds scored with the true feature attached.
  const LoadedDataset prepared = with_target_lag(s.data);
  const TimeFrame& frame = prepared.frame;
  const SplitSpec split = chronological_split(frame, s.config.test_frac, s.config.val_frac, s.config.val_folds);
  const auto folds = walk_forward_folds(frame, split.validation(), s.config.val_folds, 0);
  const double base = model::walk_forward_score(frame, {}, folds, s.config.gbt).rmse;
  const Series truth = dsl::execute(dsl::compile(testing::true_program(), frame.feature_schema()), frame);
  const std::vector<Series> extra{truth};
  const double oracle = model::walk_forward_score(frame, extra, folds, s.config.gbt).rmse;

  const auto& residuals = s.first.result.db.residuals();
  const double final_rmse = residuals.empty() ? base : residuals.back();
  const double reported_base = s.first.result.report.base_validation_rmse;
  const auto& best = s.first.result.report.final_best_set;
  const bool has_true = std::find(best.begin(), best.end(), "x1_prev_mean7") != best.end();
  const double drop = 1.0 - final_rmse / reported_base;
  const bool pass = std::fabs(reported_base - base) < 1e-12 && drop >= 0.30 && s.first.seconds < 60.0;
  return {pass, fmt("base %.4f, engine %.4f (drop %.1f%%, true feature kept: %s), oracle %.4f (drop %.1f%%), %.1f s",
                    reported_base, final_rmse, 100.0 * drop, has_true ? "yes" : "no", oracle,
                    100.0 * (1.0 - oracle / base), s.first.seconds)};
}

bool non_increasing(const std::vector<double>& r) {
  for (std::size_t i = 1; i < r.size(); ++i)
    if (!(r[i] <= r[i - 1])) return false;
  return true;
}

Outcome monotonicity(const Shared& s) {
  std::vector<std::vector<double>> all{s.first.result.db.residuals(), s.second.result.db.residuals()};
  // A few more seeds on a shorter series, with the FRESH filter as well.
  for (std::uint64_t seed : {1U, 2U, 3U}) {
    const LoadedDataset data = testing::lagged_mean_dataset(800, seed);
    EngineConfig c = testing::recoverability_config(seed);
    if (seed == 3) c.filter = FilterMode::Fresh;
    llm::MockBackend backend(testing::recoverability_responses());
    all.push_back(fit(c, data, backend).db.residuals());
  }
  std::size_t steps = 0;
  bool ok = true;
  for (const auto& r : all) {
    ok = ok && !r.empty() && non_increasing(r);
    steps += r.size();
  }
  return {ok, fmt("%zu runs, %zu residuals, all non-increasing: %s", all.size(), steps, ok ? "yes" : "no")};
}

Series ar1(std::mt19937_64& rng, std::size_t n, double phi) {
  std::normal_distribution<double> e(0.0, 1.0);
  Series v(n);
  double prev = 0.0;
  for (std::size_t burn = 0; burn < 50; ++burn) prev = phi * prev + e(rng);
  for (double& x : v) x = prev = phi * prev + e(rng);
  return v;
}

Outcome granger_calibration() {
  const auto start = Clock::now();
  std::mt19937_64 rng(31337);
  std::size_t rejected = 0;
  for (int i = 0; i < 200; ++i) {
    const Series x = ar1(rng, 300, 0.5);
    const Series y = ar1(rng, 300, 0.5);
    if (eval::granger_test(x, y, 4).p_value < 0.05) ++rejected;
  }
  const double size = static_cast<double>(rejected) / 200.0;

  std::size_t nonzero = 0;
  double b1_sum = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Series x = testing::normals(rng, 500);
    const Series e = testing::normals(rng, 500);
    Series y(500);
    y[0] = e[0];
    for (std::size_t t = 1; t < 500; ++t) y[t] = 0.8 * x[t - 1] + e[t];
    const auto g = eval::granger_test(x, y, 4);
    if (g.score != 0.0) ++nonzero;
    b1_sum += std::fabs(g.b1);
  }
  const double power = static_cast<double>(nonzero) / 200.0;
  const double mean_b1 = b1_sum / 200.0;
  const double secs = seconds_since(start);
  const bool pass = size >= 0.02 && size <= 0.08 && power >= 0.95 && std::fabs(mean_b1 - 0.8) <= 0.05 && secs < 30.0;
  return {pass, fmt("null rejection %.3f, power %.3f, mean |b1| %.4f, %.2f s", size, power, mean_b1, secs)};
}

Outcome mi_calibration() {
  const auto start = Clock::now();
  std::mt19937_64 rng(8080);
  bool ok = true;
  std::string detail;
  for (double rho : {0.0, 0.5, 0.9}) {
    const Series a = testing::normals(rng, 5000);
    const Series b = testing::normals(rng, 5000);
    Series y(5000);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = rho * a[i] + std::sqrt(1.0 - rho * rho) * b[i];
    const double want = rho == 0.0 ? 0.0 : -0.5 * std::log(1.0 - rho * rho);
    const double got = eval::mi_score(a, y, 3);
    ok = ok && std::fabs(got - want) <= 0.1;
    detail += fmt("rho %.1f: %.4f vs %.4f; ", rho, got, want);
  }
  const double secs = seconds_since(start);
  return {ok && secs < 10.0, detail + fmt("%.2f s", secs)};
}

Outcome treeshap_exactness() {
  std::mt19937_64 rng(5150);
  double worst_phi = 0.0;
  double worst_sum = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t f = 1 + rng() % 8;
    const std::size_t n = 150;
    std::vector<Series> cols;
    for (std::size_t j = 0; j < f; ++j) cols.push_back(testing::normals(rng, n));
    Series y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = std::sin(cols[0][i]) + (cols[f - 1][i] > 0.3 ? 1.0 : 0.0) + cols[0][i] * cols[(trial + 1) % f][i];
      // Occasional missing cells exercise the imputed path.
      if (rng() % 25 == 0) cols[rng() % f][i] = kNaN;
    }
    const model::GbtParams params{.trees = 5 + rng() % 20, .max_depth = 1 + rng() % 5,
                                  .learning_rate = 0.05 + 0.5 * static_cast<double>(rng() % 100) / 100.0,
                                  .min_samples_leaf = 1 + rng() % 10};
    const model::Matrix x = model::Matrix::from_columns(cols, n);
    const auto m = model::fit_gbt(x, y, params);
    const model::Matrix imputed = m.impute(x);
    const std::size_t bg_rows = 1 + rng() % 20;
    const model::Matrix bg = imputed.slice_rows(0, bg_rows);
    const model::Matrix fg = imputed.slice_rows(n - 5, n);
    const auto shap = model::tree_shap(m, fg, bg);
    for (std::size_t r = 0; r < fg.rows(); ++r) {
      const auto want = testing::brute_force_shapley(m, fg.row(r), bg);
      double sum = shap.base_value;
      for (std::size_t j = 0; j < f; ++j) {
        worst_phi = std::max(worst_phi, std::fabs(shap.values(r, j) - want[j]));
        sum += shap.values(r, j);
      }
      worst_sum = std::max(worst_sum, std::fabs(sum - m.predict_row(fg.row(r))));
    }
  }
  return {worst_phi <= 1e-6 && worst_sum <= 1e-6,
          fmt("50 ensembles, max |phi - brute force| %.2e, max local accuracy gap %.2e", worst_phi, worst_sum)};
}

struct FilterCase {
  TimeFrame frame;
  std::vector<filter::Candidate> candidates;
  std::vector<Fold> folds;
};

FilterCase filter_case(std::size_t informative, std::size_t noise, std::uint64_t seed, std::size_t n = 600) {
  std::mt19937_64 rng(seed);
  FilterCase c;
  Series y = testing::normals(rng, n);
  for (double& v : y) v *= 0.5;
  for (std::size_t k = 0; k < informative + noise; ++k) {
    Series col = testing::normals(rng, n);
    if (k < informative)
      for (std::size_t i = 0; i < n; ++i) y[i] += col[i];
    c.candidates.push_back({(k < informative ? "inf" : "noise") + std::to_string(k), col, k, {}});
  }
  c.frame = testing::FrameBuilder{}.numeric("y", y).build("y");
  c.folds = walk_forward_folds(RowRange{n / 2, n}, 3);
  return c;
}

Outcome filter_recovery() {
  filter::FilterOptions opt;
  opt.gbt = {.trees = 50, .max_depth = 3, .learning_rate = 0.1, .min_samples_leaf = 10};
  std::size_t good_runs = 0;
  std::string counts;
  for (std::uint64_t run = 0; run < 20; ++run) {
    const FilterCase c = filter_case(10, 40, 1000 + run);
    const auto kept = filter::shap_filter(c.frame, c.candidates, 10, c.folds, opt);
    const auto informative = static_cast<std::size_t>(std::count_if(kept.begin(), kept.end(), [](std::size_t i) { return i < 10; }));
    if (informative >= 8) ++good_runs;
    counts += std::to_string(informative);
  }
  const FilterCase wide = filter_case(5, 95, 77);
  std::vector<std::size_t> trace;
  filter::shap_filter(wide.frame, wide.candidates, 50, wide.folds, opt, &trace);
  const std::vector<std::size_t> want{100, 90, 81, 73, 66, 60, 54, 50};
  std::string shown;
  for (auto t : trace) shown += (shown.empty() ? "" : ">") + std::to_string(t);
  return {good_runs >= 18 && trace == want,
          fmt("%zu/20 runs kept >= 8 informative (per run: %s), trace %s", good_runs, counts.c_str(), shown.c_str())};
}

// Accepts every feature in population order; never asked to judge here.
class KeepAll : public FeatureSetJudge {
 public:
  std::vector<FeatureSpec> select(const std::vector<FeatureSpec>& pop, std::size_t keep) override {
    return {pop.begin(), pop.begin() + static_cast<std::ptrdiff_t>(std::min(keep, pop.size()))};
  }
  double validation_rmse(const std::vector<FeatureSpec>&) override { return 1.0; }
};

FeatureSpec scored(const std::string& name, double score, std::uint64_t seq) {
  FeatureSpec f = FeatureSpec::from_source("feature \"" + name + "\": x + 1\n", seq);
  f.scores = eval::EvalScore::from({{eval::kGranger, score}, {eval::kMutualInfo, score}});
  return f;
}

double chi_square_p(const FeatureDb& db, std::size_t draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto probs = db.probabilities();
  std::vector<double> counts(probs.size(), 0.0);
  const auto& pop = db.population();
  for (std::size_t d = 0; d < draws; ++d) {
    const auto pick = db.sample(rng);
    for (std::size_t i = 0; i < pop.size(); ++i)
      if (pop[i].name() == pick.front().name()) counts[i] += 1.0;
  }
  double stat = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double expected = probs[i] * static_cast<double>(draws);
    stat += (counts[i] - expected) * (counts[i] - expected) / expected;
  }
  const boost::math::chi_squared dist(static_cast<double>(probs.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

Outcome temperature_and_sampling() {
  const FeatureDb defaults({}, "d", std::string(default_prompt_template()));
  const double t0 = defaults.temperature(0);
  const double t100 = defaults.temperature(100);
  const bool temps = std::fabs(t0 - 10.1) <= 1e-12 && std::fabs(t100 - (10.0 * std::exp(-5.0) + 0.1)) <= 1e-12;

  // Default schedule, and a cold one where the softmax is far from uniform.
  FeatureDb warm({.n_max = 100, .n_keep = 50, .max_gen = 1, .n_prompt = 1}, "d",
                 std::string(default_prompt_template()));
  FeatureDb cold({.n_max = 100, .n_keep = 50, .max_gen = 1, .n_prompt = 1, .t0 = 0.0, .k_decay = 5.0, .eps = 0.2},
                 "d", std::string(default_prompt_template()));
  KeepAll judge;
  for (std::uint64_t i = 0; i < 6; ++i) {
    warm.add_feature(scored("f" + std::to_string(i), 0.15 * static_cast<double>(i), i), judge);
    cold.add_feature(scored("f" + std::to_string(i), 0.15 * static_cast<double>(i), i), judge);
  }
  const double p_warm = chi_square_p(warm, 100000, 12);
  const double p_cold = chi_square_p(cold, 100000, 13);
  return {temps && p_warm > 0.01 && p_cold > 0.01,
          fmt("T(0) = %.15g, T(100) = %.15g, chi-square p = %.3f (default), %.3f (cold)", t0, t100, p_warm, p_cold)};
}

Outcome dsl_soundness() {
  testing::ProgramFuzzer fuzz(424242);
  const Schema schema = testing::ProgramFuzzer::fuzz_schema();
  std::size_t round_trips = 0;
  for (int i = 0; i < 1000; ++i) {
    const dsl::DslProgram p = fuzz.program();
    const std::string text = dsl::format(p);
    if (dsl::parse(text) == p && dsl::format(dsl::parse(text)) == text) ++round_trips;
  }

  // Causality: perturbing row t may only move rows t and later.
  constexpr std::size_t n = 40;
  std::mt19937_64 rng(515);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::size_t causal = 0;
  const std::size_t trials = 200;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Series x(n), z(n), w(n);
    std::vector<std::string> g(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = u(rng);
      z[i] = u(rng);
      w[i] = rng() % 7 == 0 ? kNaN : u(rng);
      g[i] = rng() % 2 == 0 ? "a" : "b";
    }
    const auto frame_of = [&] {
      return testing::FrameBuilder{}
          .numeric("x", x)
          .numeric("z", z)
          .numeric("w", w)
          .categorical("g", g)
          .numeric("y", Series(n, 0.0))
          .build("y");
    };
    const auto prog = dsl::validate(fuzz.program(), schema);
    const Series before = dsl::execute(prog, frame_of());
    const std::size_t t = 1 + rng() % (n - 1);
    x[t] += 10.0 + u(rng);
    z[t] = -z[t] - 1.0;
    w[t] = std::isnan(w[t]) ? 1.0 : kNaN;
    g[t] = g[t] == "a" ? "b" : "a";
    const Series after = dsl::execute(prog, frame_of());
    bool ok = true;
    for (std::size_t i = 0; i < t; ++i) ok = ok && testing::same(before[i], after[i]);
    if (ok) ++causal;
  }

  const TimeFrame frame = testing::five_rows();
  std::size_t matched = 0;
  for (const auto& f : testing::fixtures()) {
    const auto prog = dsl::compile("feature \"f\": " + f.source, frame.feature_schema());
    if (testing::same_series(dsl::execute(prog, frame), f.expected)) ++matched;
  }
  const std::size_t fixture_count = testing::fixtures().size();
  return {round_trips == 1000 && causal == trials && matched == fixture_count && fixture_count >= 25,
          fmt("round trips %zu/1000, causal %zu/%zu, fixtures %zu/%zu", round_trips, causal, trials, matched,
              fixture_count)};
}

Outcome determinism(const Shared& s) {
  const bool same_set = s.first.feature_set == s.second.feature_set;
  const bool same_report = s.first.report == s.second.report;
  return {same_set && same_report && !s.first.feature_set.empty(),
          fmt("feature set %zu bytes %s, report %zu bytes %s", s.first.feature_set.size(),
              same_set ? "identical" : "differs", s.first.report.size(), same_report ? "identical" : "differs")};
}

std::size_t count_matches(const std::string& text, const std::regex& re) {
  return static_cast<std::size_t>(std::distance(std::sregex_iterator(text.begin(), text.end(), re), std::sregex_iterator()));
}

Outcome prompt_contract(const Shared& s) {
  const std::string tmpl = "@@description@@\n<examples>\n@@examples@@\n</examples>\n<history>\n@@generated features@@\n</history>\n";
  const std::string description = "Daily sales. Columns:\nx (float, nan=no): units @@ $& \\1\n";
  const std::regex example("feature \"e[0-9]+\": x \\+ 1");
  const std::regex history("(^|\n)e[0-9]+: [0-9]+\\.[0-9]{4}");
  bool ok = true;
  std::string detail;

  // Example count is min(n_prompt, |population|).
  for (std::size_t pop_size : {0U, 1U, 2U, 3U, 7U}) {
    FeatureDb db({.n_max = 1000, .n_keep = 10, .max_gen = 1, .n_prompt = 3}, description, tmpl);
    KeepAll judge;
    for (std::size_t i = 0; i < pop_size; ++i) db.add_feature(scored("e" + std::to_string(i), 0.2, i), judge);
    std::mt19937_64 rng(pop_size);
    const std::string prompt = db.build_prompt(db.sample(rng));
    const std::string examples = prompt.substr(prompt.find("<examples>"), prompt.find("</examples>") - prompt.find("<examples>"));
    ok = ok && prompt.find(description) == 0 && count_matches(examples, example) == std::min<std::size_t>(3, pop_size);
  }
  // History holds the newest 250 lines.
  for (std::size_t total : {249U, 250U, 251U}) {
    FeatureDb db({.n_max = 1000, .n_keep = 10, .max_gen = 1, .n_prompt = 3}, description, tmpl);
    KeepAll judge;
    for (std::size_t i = 0; i < total; ++i) db.add_feature(scored("e" + std::to_string(i), 0.2, i), judge);
    const std::string prompt = db.build_prompt({});
    const std::string hist = prompt.substr(prompt.find("<history>"), prompt.find("</history>") - prompt.find("<history>"));
    const std::size_t lines = count_matches(hist, history);
    ok = ok && lines == std::min<std::size_t>(total, 250);
    detail += fmt("%zu added -> %zu lines; ", total, lines);
  }
  // Every prompt the engine sent carries the dataset description verbatim.
  const std::string engine_description = with_target_lag(s.data).description.text;
  std::size_t verbatim = 0;
  for (const auto& p : s.first.prompts)
    if (p.find(engine_description) != std::string::npos) ++verbatim;
  ok = ok && verbatim == s.first.prompts.size() && !s.first.prompts.empty();
  detail += fmt("engine prompts with description %zu/%zu", verbatim, s.first.prompts.size());
  return {ok, detail};
}

}  // namespace

int main() {
  int failures = 0;
  const auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
    Outcome o;
    const auto start = Clock::now();
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
  };

  std::unique_ptr<Shared> shared;
  const auto start = Clock::now();
  try {
    shared = std::make_unique<Shared>();
  } catch (const std::exception& e) {
    std::printf("mock runs failed: %s\n", e.what());
  }
  std::printf("shared mock runs: %.1f s\n", seconds_since(start));
  const auto with_shared = [&](Outcome (*f)(const Shared&)) {
    return [&shared, f] { return shared ? f(*shared) : Outcome{false, "mock runs unavailable"}; };
  };

  report(1, "synthetic recoverability", with_shared(synthetic_recoverability));
  report(2, "residual monotonicity", with_shared(monotonicity));
  report(3, "granger calibration", granger_calibration);
  report(4, "mutual information calibration", mi_calibration);
  report(5, "treeshap exactness", treeshap_exactness);
  report(6, "filter recovery", filter_recovery);
  report(7, "temperature and sampling", temperature_and_sampling);
  report(8, "dsl soundness", dsl_soundness);
  report(9, "determinism", with_shared(determinism));
  report(10, "prompt contract", with_shared(prompt_contract));
  return failures == 0 ? 0 : 1;
}
