#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "elate/data.hpp"

namespace elate::eval {

inline constexpr const char* kGranger = "granger";
inline constexpr const char* kMutualInfo = "mutual_info";
inline constexpr const char* kKendall = "kendall";

/// Per-evaluator scores for one feature and their arithmetic mean.
struct EvalScore {
  std::map<std::string, double> per_evaluator;
  double mean = 0.0;

  static EvalScore from(std::map<std::string, double> scores);
  /// True when every evaluator returned exactly zero.
  [[nodiscard]] bool dead() const;
};

struct GrangerResult {
  double score = 0.0;     // |b_1| when significant, else 0
  double b1 = 0.0;        // coefficient on x_{t-1} in the unrestricted model
  double f_stat = 0.0;
  double p_value = 1.0;
  std::size_t observations = 0;
  bool valid = false;     // false when the test could not be run
};

/// Granger causality of x on y with lag order `lags`. Both models carry an
/// intercept; only rows whose current and lagged values are all present are
/// used.
GrangerResult granger_test(std::span<const double> x, std::span<const double> y, std::size_t lags = 4);

/// Zero unless the test rejects at 5%, otherwise |b_1|.
double granger_score(std::span<const double> x, std::span<const double> y, std::size_t lags = 4);

/// Kraskov-Stoegbauer-Grassberger mutual information (nats, k neighbours)
/// on rank-transformed marginals; clamped at zero. Needs 50 complete pairs.
double mi_score(std::span<const double> x, std::span<const double> y, std::size_t k = 3);

/// Granger + MI on min-max normalized copies of x and y.
EvalScore combined_score(std::span<const double> x, std::span<const double> y, std::size_t lags = 4);

/// Two-sided p-value of Kendall's tau-b (normal approximation, tie corrected).
/// Returns 1 for constant input or fewer than 30 complete pairs.
double kendall_pvalue(std::span<const double> x, std::span<const double> y);

/// Benjamini-Yekutieli step-up adjustment. Throws std::invalid_argument for
/// values outside [0, 1].
std::vector<double> benjamini_yekutieli(std::span<const double> pvalues);

/// Min-max scale to [0, 1]; constant or empty input maps to 0. NaN is kept.
Series min_max_normalize(std::span<const double> v);

}  // namespace elate::eval
