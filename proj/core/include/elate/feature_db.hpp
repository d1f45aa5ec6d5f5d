#pragma once

#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "elate/feature.hpp"

namespace elate {

struct FeatureDbParams {
  std::size_t n_max = 100;   // population size that ends a generation
  std::size_t n_keep = 50;   // size of the best set carried into the next one
  std::size_t max_gen = 10;
  std::size_t n_prompt = 3;  // examples per prompt
  double t0 = 10.0;
  double k_decay = 5.0;
  double eps = 0.1;
};

inline constexpr std::size_t kHistoryLines = 250;

inline constexpr std::string_view kDescriptionSlot = "@@description@@";
inline constexpr std::string_view kExamplesSlot = "@@examples@@";
inline constexpr std::string_view kHistorySlot = "@@generated features@@";

/// Prompt template used when none is configured.
std::string_view default_prompt_template();

/// Chooses the best set at the end of a generation and measures it.
class FeatureSetJudge {
 public:
  virtual ~FeatureSetJudge() = default;
  /// At most `keep` members of `population`, in population order.
  virtual std::vector<FeatureSpec> select(const std::vector<FeatureSpec>& population, std::size_t keep) = 0;
  /// Validation RMSE of the base features plus `set`.
  virtual double validation_rmse(const std::vector<FeatureSpec>& set) = 0;
};

/// The evolving population and its generation bookkeeping.
class FeatureDb {
 public:
  /// Throws std::invalid_argument for inconsistent parameters or a template
  /// missing one of the three slots.
  FeatureDb(FeatureDbParams params, std::string description, std::string prompt_template);

  [[nodiscard]] const FeatureDbParams& params() const { return params_; }
  [[nodiscard]] const std::vector<FeatureSpec>& population() const { return fts_; }
  [[nodiscard]] std::size_t generation() const { return gen_; }
  [[nodiscard]] bool finished() const { return gen_ >= params_.max_gen; }
  [[nodiscard]] const std::vector<double>& residuals() const { return residuals_; }
  [[nodiscard]] const std::vector<std::vector<FeatureSpec>>& best_sets() const { return best_sets_; }
  /// Latest stored best set; empty before the first update.
  [[nodiscard]] const std::vector<FeatureSpec>& best_set() const;
  [[nodiscard]] const std::deque<std::pair<std::string, double>>& history() const { return history_; }
  [[nodiscard]] bool contains(std::string_view name) const;

  /// T0 * exp(-K * n / N_max) + eps.
  [[nodiscard]] double temperature(std::size_t n_feat) const;
  /// Softmax of mean scores at the temperature for the current population size.
  [[nodiscard]] std::vector<double> probabilities() const;
  /// min(n_prompt, |population|) members drawn without replacement.
  std::vector<FeatureSpec> sample(std::mt19937_64& rng) const;
  /// Template with the three slots filled, followed by the grammar reference.
  [[nodiscard]] std::string build_prompt(const std::vector<FeatureSpec>& sampled) const;

  /// Appends to the population and history. Once the population reaches
  /// N_max the generation counter advances and, unless that was the last
  /// generation, the population is reset to the best set. Returns true on
  /// such a rollover.
  bool add_feature(FeatureSpec f, FeatureSetJudge& judge);
  void reset_generation(FeatureSetJudge& judge);
  /// Filters the population to a candidate best set and keeps it only if its
  /// validation RMSE is strictly below the last stored one.
  const std::vector<FeatureSpec>& update_best_feature_set(FeatureSetJudge& judge);

  /// Reinstates a persisted best-set history.
  void restore(std::vector<std::vector<FeatureSpec>> best_sets, std::vector<double> residuals,
               std::size_t generation);

 private:
  FeatureDbParams params_;
  std::string description_;
  std::string template_;
  std::vector<FeatureSpec> fts_;
  std::size_t gen_ = 0;
  std::vector<double> residuals_;
  std::vector<std::vector<FeatureSpec>> best_sets_;
  std::deque<std::pair<std::string, double>> history_;
};

/// "name: score" as listed in the prompt's history section.
std::string history_line(const std::string& name, double score);

}  // namespace elate
