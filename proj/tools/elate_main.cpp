#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "elate/config.hpp"
#include "elate/data.hpp"
#include "elate/engine.hpp"
#include "elate/persistence.hpp"

namespace {

int run_fit(const std::string& config_path) {
  const elate::EngineConfig config = elate::load_config(config_path);
  const elate::FitResult result = elate::fit(config);
  const auto& r = result.report;
  std::printf("stopped: %s after %zu generation(s)\n", r.stop_reason.c_str(), r.generations.size());
  std::printf("validation RMSE: base %.6g -> best %.6g\n", r.base_validation_rmse,
              r.generations.empty() ? r.base_validation_rmse : r.generations.back().residual);
  std::printf("test RMSE: base %.6g -> best %.6g (MAE %.6g -> %.6g)\n", r.base_test_rmse, r.test_rmse,
              r.base_test_mae, r.test_mae);
  std::printf("best set (%zu):", r.final_best_set.size());
  for (const auto& n : r.final_best_set) std::printf(" %s", n.c_str());
  std::printf("\n");
  if (!config.output_db.empty()) std::printf("feature set written to %s\n", config.output_db.string().c_str());
  if (!config.output_report.empty()) std::printf("report written to %s\n", config.output_report.string().c_str());
  return 0;
}

struct TransformArgs {
  std::string db;
  std::string data;
  std::string out;
  std::string config;
  std::string description;
  std::string timestamp = "date";
  std::string target;
  std::size_t horizon = 1;
};

int run_transform(const TransformArgs& a) {
  elate::CsvOptions options;
  std::string description = a.description;
  if (!a.config.empty()) {
    const auto config = elate::load_config(a.config);
    options.timestamp_column = config.timestamp_column;
    options.target_column = config.target;
    options.horizon = config.horizon;
    if (description.empty()) description = config.description.string();
  }
  if (!a.target.empty()) options.target_column = a.target;
  if (options.target_column.empty()) throw CLI::ValidationError("--target", "needed unless --config names one");
  if (a.config.empty()) {
    options.timestamp_column = a.timestamp;
    options.horizon = a.horizon;
  }
  const auto features = elate::read_feature_set(a.db);
  const auto data = elate::load_csv(a.data, description, options);
  const auto frame = elate::attach_target_lag(data.frame);
  const auto out = elate::transform(features, frame);
  elate::write_csv(out, a.out, options.timestamp_column);
  std::printf("wrote %zu rows x %zu columns to %s\n", out.rows(), out.column_count(), a.out.c_str());
  return 0;
}

int run_zero_shot(const std::string& config_path, std::size_t k) {
  const auto config = elate::load_config(config_path);
  const auto features = elate::zero_shot(config, k);
  std::cout << elate::format_feature_set(features);
  std::fprintf(stderr, "%zu of %zu requested programs are valid\n", features.size(), k);
  return 0;
}

int run_report(const std::string& db_path) {
  const auto features = elate::read_feature_set(db_path);
  std::printf("%zu feature(s) in %s\n", features.size(), db_path.c_str());
  for (const auto& f : features) {
    std::printf("\n%s  score=%s", f.name().c_str(), f.scores ? elate::format_number(f.score()).c_str() : "-");
    if (f.scores) {
      for (const auto& [ev, v] : f.scores->per_evaluator) std::printf("  %s=%s", ev.c_str(), elate::format_number(v).c_str());
    }
    if (f.p_value) std::printf("  p=%s", elate::format_number(*f.p_value).c_str());
    std::printf("\n%s", f.source.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evolutionary feature engineering for time series forecasting"};
  app.require_subcommand(1);

  std::string fit_config;
  auto* fit = app.add_subcommand("fit", "Run the generation loop and write the best feature set");
  fit->add_option("--config", fit_config, "Config file (key = value)")->required()->check(CLI::ExistingFile);

  TransformArgs ta;
  auto* transform = app.add_subcommand("transform", "Append the stored features to a CSV file");
  transform->add_option("--db", ta.db, "Feature-set file written by fit")->required()->check(CLI::ExistingFile);
  transform->add_option("--data", ta.data, "Input CSV")->required()->check(CLI::ExistingFile);
  transform->add_option("--out", ta.out, "Output CSV")->required();
  transform->add_option("--config", ta.config, "Take column settings from this fit config")->check(CLI::ExistingFile);
  transform->add_option("--description", ta.description, "Dataset description file")->check(CLI::ExistingFile);
  transform->add_option("--timestamp", ta.timestamp, "Timestamp column")->capture_default_str();
  transform->add_option("--target", ta.target, "Target column");
  transform->add_option("--horizon", ta.horizon, "Forecast horizon in rows")->capture_default_str();

  std::string zs_config;
  std::size_t zs_k = 0;
  auto* zero = app.add_subcommand("zero-shot", "Ask for k features in one prompt and print the valid ones");
  zero->add_option("--config", zs_config, "Config file")->required()->check(CLI::ExistingFile);
  zero->add_option("-k", zs_k, "Number of features to request")->required();

  std::string report_db;
  auto* report = app.add_subcommand("report", "Print a stored feature set");
  report->add_option("--db", report_db, "Feature-set file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (fit->parsed()) return run_fit(fit_config);
    if (transform->parsed()) return run_transform(ta);
    if (zero->parsed()) return run_zero_shot(zs_config, zs_k);
    if (report->parsed()) return run_report(report_db);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "elate: %s\n", e.what());
    return 1;
  }
  return 0;
}
