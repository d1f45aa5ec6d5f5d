#include <algorithm>
#include <cmath>
#include <limits>

#include "elate/model.hpp"

namespace elate::model {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Scaler {
  double lo = 0.0;
  double range = 0.0;
  bool observed = false;

  [[nodiscard]] double apply(double v) const {
    if (std::isnan(v)) return v;
    return range > 0.0 ? (v - lo) / range : 0.0;
  }
};

Scaler fit_scaler(std::span<const double> v, std::span<const std::size_t> rows) {
  Scaler s;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t r : rows) {
    if (std::isnan(v[r])) continue;
    lo = std::min(lo, v[r]);
    hi = std::max(hi, v[r]);
    s.observed = true;
  }
  if (s.observed) {
    s.lo = lo;
    s.range = hi - lo;
  }
  return s;
}

}  // namespace

Matrix Matrix::from_columns(std::span<const Series> columns, std::size_t rows) {
  Matrix m(rows, columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c].size() != rows) throw ModelError("column length differs from row count");
    for (std::size_t r = 0; r < rows; ++r) m(r, c) = columns[c][r];
  }
  return m;
}

Matrix Matrix::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows_) throw ModelError("row slice out of range");
  Matrix m(end - begin, cols_);
  std::copy(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
            data_.begin() + static_cast<std::ptrdiff_t>(end * cols_), m.data_.begin());
  return m;
}

Matrix Matrix::take_rows(std::span<const std::size_t> rows) const {
  Matrix m(rows.size(), cols_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= rows_) throw ModelError("row index out of range");
    const auto src = row(rows[i]);
    std::copy(src.begin(), src.end(), m.row(i).begin());
  }
  return m;
}

Matrix Matrix::take_cols(std::span<const std::size_t> cols) const {
  Matrix m(rows_, cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] >= cols_) throw ModelError("column index out of range");
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) m(r, j) = (*this)(r, cols[j]);
  }
  return m;
}

ForecastScore error_metrics(std::span<const double> truth, std::span<const double> predicted) {
  if (truth.size() != predicted.size()) throw ModelError("truth and prediction lengths differ");
  ForecastScore s;
  double sq = 0.0;
  double abs = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (std::isnan(truth[i])) continue;
    const double e = predicted[i] - truth[i];
    sq += e * e;
    abs += std::fabs(e);
    ++n;
  }
  if (n == 0) {
    s.rmse = kNaN;
    s.mae = kNaN;
    return s;
  }
  s.rmse = std::sqrt(sq / static_cast<double>(n));
  s.mae = abs / static_cast<double>(n);
  s.folds.push_back({s.rmse, s.mae, n});
  return s;
}

std::vector<Series> design_columns(const TimeFrame& frame, std::span<const Series> extra) {
  std::vector<Series> cols;
  for (const auto& name : frame.base_feature_names()) cols.push_back(frame.numeric(name));
  for (const auto& s : extra) {
    if (s.size() != frame.rows()) throw ModelError("feature column length differs from frame");
    cols.push_back(s);
  }
  return cols;
}

FoldData prepare_fold(const TimeFrame& frame, std::span<const Series> columns, std::span<const double> target,
                      const Fold& fold) {
  if (fold.train.end > frame.rows() || fold.eval.end > frame.rows() || fold.train.empty() || fold.eval.empty())
    throw ModelError("fold range out of bounds or empty");
  const auto& ts = frame.timestamps();
  std::int64_t train_max = std::numeric_limits<std::int64_t>::min();
  std::int64_t eval_min = std::numeric_limits<std::int64_t>::max();
  for (std::size_t r = fold.train.begin; r < fold.train.end; ++r) train_max = std::max(train_max, ts[r]);
  for (std::size_t r = fold.eval.begin; r < fold.eval.end; ++r) eval_min = std::min(eval_min, ts[r]);
  if (!(train_max < eval_min)) throw ModelError("training rows are not strictly before evaluation rows");

  std::vector<std::size_t> train_rows;
  for (std::size_t r = fold.train.begin; r < fold.train.end; ++r) {
    if (!std::isnan(target[r])) train_rows.push_back(r);
  }
  std::vector<std::size_t> eval_rows;
  for (std::size_t r = fold.eval.begin; r < fold.eval.end; ++r) {
    if (!std::isnan(target[r])) eval_rows.push_back(r);
  }
  if (train_rows.empty()) throw ModelError("fold has no training row with a target");

  FoldData out;
  out.train_x = Matrix(train_rows.size(), columns.size());
  out.eval_x = Matrix(eval_rows.size(), columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const Series& col = columns[c];
    const Scaler s = fit_scaler(col, train_rows);
    for (std::size_t i = 0; i < train_rows.size(); ++i)
      out.train_x(i, c) = s.observed ? s.apply(col[train_rows[i]]) : 0.0;
    for (std::size_t i = 0; i < eval_rows.size(); ++i)
      out.eval_x(i, c) = s.observed ? s.apply(col[eval_rows[i]]) : 0.0;
  }

  const Scaler ys = fit_scaler(target, train_rows);
  out.target_offset = ys.lo;
  out.target_scale = ys.range > 0.0 ? ys.range : 1.0;
  out.train_y.reserve(train_rows.size());
  for (std::size_t r : train_rows) out.train_y.push_back(ys.apply(target[r]));
  out.eval_y.reserve(eval_rows.size());
  for (std::size_t r : eval_rows) out.eval_y.push_back(target[r]);
  out.eval_rows = std::move(eval_rows);
  return out;
}

ForecastScore walk_forward_score(const TimeFrame& frame, std::span<const Series> extra_columns,
                                 std::span<const Fold> folds, const GbtParams& params) {
  const auto columns = design_columns(frame, extra_columns);
  const Series& target = frame.target();
  ForecastScore total;
  double sq = 0.0;
  double abs = 0.0;
  std::size_t n = 0;
  for (const auto& fold : folds) {
    const FoldData data = prepare_fold(frame, columns, target, fold);
    if (data.eval_y.empty()) continue;
    const GbtModel model = fit_gbt(data.train_x, data.train_y, params);
    Series pred = predict(model, data.eval_x);
    for (double& p : pred) p = p * data.target_scale + data.target_offset;
    const ForecastScore fs = error_metrics(data.eval_y, pred);
    total.folds.push_back(fs.folds.front());
    const double cnt = static_cast<double>(fs.folds.front().count);
    sq += fs.rmse * fs.rmse * cnt;
    abs += fs.mae * cnt;
    n += fs.folds.front().count;
  }
  if (n == 0) throw ModelError("no evaluation row with a target in any fold");
  total.rmse = std::sqrt(sq / static_cast<double>(n));
  total.mae = abs / static_cast<double>(n);
  return total;
}

}  // namespace elate::model
