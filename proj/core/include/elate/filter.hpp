#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elate/data.hpp"
#include "elate/model.hpp"

namespace elate::filter {

/// A candidate feature as the filters see it: its executed column over the
/// whole frame plus the bookkeeping used for tie-breaks.
struct Candidate {
  std::string name;
  Series values;
  std::uint64_t created_seq = 0;
  std::optional<double> p_value;  // only needed by fresh_filter
};

/// Mean share of |SHAP| per candidate. Base features take part in the model
/// and in the per-instance normalization but are reported only as
/// `base_share`, so candidate importances plus base_share sum to 1 whenever
/// any attribution is nonzero.
struct ImportanceTable {
  std::map<std::string, double> importance;
  double base_share = 0.0;
  std::size_t fold_count = 0;
  std::size_t instance_count = 0;

  [[nodiscard]] double at(const std::string& name) const;
};

struct FilterOptions {
  model::GbtParams gbt;
  double correlation_threshold = 0.9;
  std::size_t prune_divisor = 10;  // drop floor(len / prune_divisor) per round, at least 1
};

ImportanceTable aggregate_shap_importance(const TimeFrame& frame, std::span<const Candidate> candidates,
                                          std::span<const Fold> folds, const model::GbtParams& params = {});

/// Pearson correlation over rows [rows.begin, rows.end) where both values are
/// present. Constant or too-short input gives 0.
double pearson(std::span<const double> a, std::span<const double> b, RowRange rows);

/// Greedy correlation pruning. Walks candidates from most to least important
/// (ties: earlier created first) and drops any candidate whose |r| with an
/// already kept one exceeds `threshold`. Never drops below `min_keep`
/// survivors. Returns surviving indices into `candidates`, in input order.
std::vector<std::size_t> prune_correlated(std::span<const Candidate> candidates, const ImportanceTable& importance,
                                          double threshold, RowRange rows, std::size_t min_keep = 0);

/// Recursive elimination: importance, correlation pruning, then drop the
/// least important tenth (clamped so that exactly `keep` remain at the end).
/// Returns surviving indices, in input order. `trace`, when given, receives
/// the population size at the start of every round and the final size.
std::vector<std::size_t> shap_filter(const TimeFrame& frame, std::span<const Candidate> candidates,
                                     std::size_t keep, std::span<const Fold> folds,
                                     const FilterOptions& options = {},
                                     std::vector<std::size_t>* trace = nullptr);

/// The size sequence shap_filter goes through when nothing is correlated.
std::vector<std::size_t> elimination_trace(std::size_t count, std::size_t keep, std::size_t prune_divisor = 10);

/// Benjamini-Yekutieli adjusted p-values, smallest `keep` first (ties:
/// earlier created). Throws std::invalid_argument if a p-value is missing.
std::vector<std::size_t> fresh_filter(std::span<const Candidate> candidates, std::size_t keep);

}  // namespace elate::filter
