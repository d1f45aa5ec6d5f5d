#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "elate/data.hpp"

namespace elate::model {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles. NaN marks a missing cell.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  /// Builds from columns of equal length.
  static Matrix from_columns(std::span<const Series> columns, std::size_t rows);

  [[nodiscard]] std::size_t rows() const { return rows_; }
  [[nodiscard]] std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  [[nodiscard]] std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  [[nodiscard]] std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  /// Rows [begin, end).
  [[nodiscard]] Matrix slice_rows(std::size_t begin, std::size_t end) const;
  /// Selected rows, in the given order.
  [[nodiscard]] Matrix take_rows(std::span<const std::size_t> rows) const;
  /// Selected columns, in the given order.
  [[nodiscard]] Matrix take_cols(std::span<const std::size_t> cols) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct GbtParams {
  std::size_t trees = 100;
  std::size_t max_depth = 4;
  double learning_rate = 0.1;
  std::size_t min_samples_leaf = 20;
};

/// Binary regression tree node. Leaves have feature == -1. Rows with
/// value < threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  std::size_t cover = 0;

  [[nodiscard]] bool leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  [[nodiscard]] double predict(std::span<const double> x) const;
  /// Index of the leaf `x` falls into.
  [[nodiscard]] int leaf_index(std::span<const double> x) const;
};

/// Gradient-boosted squared-error regression trees.
/// prediction = base_score + learning_rate * sum of tree outputs.
struct GbtModel {
  std::vector<Tree> trees;
  double learning_rate = 0.1;
  double base_score = 0.0;
  std::vector<double> impute_values;
  std::vector<std::string> feature_names;

  [[nodiscard]] std::size_t feature_count() const { return impute_values.size(); }
  /// Copy of `x` with NaN replaced by the stored training medians.
  [[nodiscard]] Matrix impute(const Matrix& x) const;
  /// Prediction for an already imputed row.
  [[nodiscard]] double predict_row(std::span<const double> x) const;
};

/// Fits with exact greedy splits on median-imputed values. A constant target
/// yields a base-score-only model. Throws ModelError on an empty training
/// set, a length mismatch, or a column with no observed value.
GbtModel fit_gbt(const Matrix& x, std::span<const double> y, const GbtParams& params = {},
                 std::vector<std::string> feature_names = {});

/// Throws ModelError when the column count differs from training.
Series predict(const GbtModel& model, const Matrix& x);

struct ShapMatrix {
  Matrix values;            // instances x features
  double base_value = 0.0;  // mean prediction over the background rows
};

inline constexpr std::size_t kMaxBackgroundRows = 100;

/// Evenly spaced subsample of at most `limit` rows.
std::vector<std::size_t> background_rows(std::size_t rows, std::size_t limit = kMaxBackgroundRows);

/// Interventional (background-marginal) TreeSHAP: feature i's attribution on
/// instance x is the Shapley value of v(S) = mean_z f(x_S, z_notS) over the
/// background rows z. Exact; computed per (tree, background row) pair.
ShapMatrix tree_shap(const GbtModel& model, const Matrix& foreground, const Matrix& background);

struct FoldError {
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t count = 0;
};

struct ForecastScore {
  double rmse = 0.0;
  double mae = 0.0;
  std::vector<FoldError> folds;
};

/// Pooled RMSE/MAE of predictions against truth; NaN truth rows are skipped.
ForecastScore error_metrics(std::span<const double> truth, std::span<const double> predicted);

/// Design matrix for one fold after train-range scaling.
struct FoldData {
  Matrix train_x;
  Series train_y;
  Matrix eval_x;
  Series eval_y;                       // unscaled
  std::vector<std::size_t> eval_rows;  // frame rows behind eval_x
  double target_offset = 0.0;          // y = scaled * target_scale + target_offset
  double target_scale = 1.0;
};

/// Min-max scales every column and the target with statistics from the fold's
/// training rows, drops rows whose target is missing, and blanks out training
/// columns that have no observed value (constant 0). Throws ModelError if any
/// training timestamp is not strictly before every evaluation timestamp.
FoldData prepare_fold(const TimeFrame& frame, std::span<const Series> columns, std::span<const double> target,
                      const Fold& fold);

/// Walk-forward evaluation of base columns plus extra feature columns: fit on
/// each fold's training range, predict its evaluation block, pool the errors.
/// Predictions are mapped back to target units before scoring.
ForecastScore walk_forward_score(const TimeFrame& frame, std::span<const Series> extra_columns,
                                 std::span<const Fold> folds, const GbtParams& params = {});

/// Base numeric feature columns of `frame` followed by `extra`.
std::vector<Series> design_columns(const TimeFrame& frame, std::span<const Series> extra);

}  // namespace elate::model
