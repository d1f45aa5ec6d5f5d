#include "elate/evaluators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/fisher_f.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace elate::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kGrangerAlpha = 0.05;

bool is_constant(std::span<const double> v) {
  double first = kNaN;
  for (double x : v) {
    if (std::isnan(x)) continue;
    if (std::isnan(first)) first = x;
    else if (x != first) return false;
  }
  return true;
}

double rss(const Eigen::MatrixXd& design, const Eigen::VectorXd& target, Eigen::VectorXd* coef,
           bool* full_rank) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  *full_rank = qr.rank() == design.cols();
  *coef = qr.solve(target);
  return (target - design * *coef).squaredNorm();
}

// Sum over tie groups of f(group size) for already-sorted values.
template <typename F>
double tie_sum(std::vector<double> values, F f) {
  std::sort(values.begin(), values.end());
  double total = 0.0;
  std::size_t i = 0;
  while (i < values.size()) {
    std::size_t j = i + 1;
    while (j < values.size() && values[j] == values[i]) ++j;
    const double t = static_cast<double>(j - i);
    if (j - i > 1) total += f(t);
    i = j;
  }
  return total;
}

}  // namespace

EvalScore EvalScore::from(std::map<std::string, double> scores) {
  EvalScore s;
  s.per_evaluator = std::move(scores);
  if (!s.per_evaluator.empty()) {
    double sum = 0.0;
    for (const auto& [name, v] : s.per_evaluator) sum += v;
    s.mean = sum / static_cast<double>(s.per_evaluator.size());
  }
  return s;
}

bool EvalScore::dead() const {
  return std::all_of(per_evaluator.begin(), per_evaluator.end(),
                     [](const auto& kv) { return kv.second == 0.0; });
}

GrangerResult granger_test(std::span<const double> x, std::span<const double> y, std::size_t lags) {
  GrangerResult result;
  if (lags == 0) return result;
  const std::size_t n_total = std::min(x.size(), y.size());
  if (is_constant(x.first(n_total))) return result;

  std::vector<std::size_t> rows;
  for (std::size_t t = lags; t < n_total; ++t) {
    bool ok = !std::isnan(y[t]);
    for (std::size_t i = 1; ok && i <= lags; ++i) ok = !std::isnan(y[t - i]) && !std::isnan(x[t - i]);
    if (ok) rows.push_back(t);
  }
  const std::size_t n = rows.size();
  result.observations = n;
  if (n < 10 * lags + 20) return result;

  const auto p = static_cast<Eigen::Index>(lags);
  Eigen::MatrixXd unrestricted(static_cast<Eigen::Index>(n), 1 + 2 * p);
  Eigen::VectorXd target(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t t = rows[r];
    const auto row = static_cast<Eigen::Index>(r);
    target(row) = y[t];
    unrestricted(row, 0) = 1.0;
    for (Eigen::Index i = 1; i <= p; ++i) {
      unrestricted(row, i) = y[t - static_cast<std::size_t>(i)];
      unrestricted(row, p + i) = x[t - static_cast<std::size_t>(i)];
    }
  }
  const Eigen::MatrixXd restricted = unrestricted.leftCols(1 + p);

  Eigen::VectorXd coef_u;
  Eigen::VectorXd coef_r;
  bool rank_u = false;
  bool rank_r = false;
  const double rss_u = rss(unrestricted, target, &coef_u, &rank_u);
  const double rss_r = rss(restricted, target, &coef_r, &rank_r);
  if (!rank_u || !rank_r) return result;

  const double df_num = static_cast<double>(lags);
  const double df_den = static_cast<double>(n) - 2.0 * static_cast<double>(lags) - 1.0;
  result.b1 = coef_u(p + 1);
  result.valid = true;
  const double gain = std::max(0.0, rss_r - rss_u);
  if (rss_u <= std::numeric_limits<double>::min() ||
      rss_u <= 1e-14 * std::max(rss_r, std::numeric_limits<double>::min())) {
    result.f_stat = std::numeric_limits<double>::infinity();
    result.p_value = gain > 0.0 ? 0.0 : 1.0;
  } else {
    result.f_stat = (gain / df_num) / (rss_u / df_den);
    const boost::math::fisher_f_distribution<double> dist(df_num, df_den);
    result.p_value = boost::math::cdf(boost::math::complement(dist, result.f_stat));
  }
  result.score = result.p_value < kGrangerAlpha ? std::fabs(result.b1) : 0.0;
  if (!std::isfinite(result.score)) result.score = 0.0;
  return result;
}

double granger_score(std::span<const double> x, std::span<const double> y, std::size_t lags) {
  return granger_test(x, y, lags).score;
}

Series min_max_normalize(std::span<const double> v) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v) {
    if (std::isnan(x)) continue;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  Series out(v.begin(), v.end());
  const double range = hi - lo;
  for (double& x : out) {
    if (std::isnan(x)) continue;
    x = range > 0.0 ? (x - lo) / range : 0.0;
  }
  return out;
}

EvalScore combined_score(std::span<const double> x, std::span<const double> y, std::size_t lags) {
  const Series xn = min_max_normalize(x);
  const Series yn = min_max_normalize(y);
  return EvalScore::from({{kGranger, granger_score(xn, yn, lags)}, {kMutualInfo, mi_score(xn, yn)}});
}

double kendall_pvalue(std::span<const double> x, std::span<const double> y) {
  std::vector<double> xs;
  std::vector<double> ys;
  const std::size_t n_total = std::min(x.size(), y.size());
  for (std::size_t i = 0; i < n_total; ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) continue;
    xs.push_back(x[i]);
    ys.push_back(y[i]);
  }
  const std::size_t n = xs.size();
  if (n < 30 || is_constant(xs) || is_constant(ys)) return 1.0;

  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = xs[i] - xs[j];
      const double dy = ys[i] - ys[j];
      s += static_cast<double>((dx > 0) - (dx < 0)) * static_cast<double>((dy > 0) - (dy < 0));
    }
  }

  const double nn = static_cast<double>(n);
  const auto v0_term = [](double t) { return t * (t - 1.0) * (2.0 * t + 5.0); };
  const auto pair_term = [](double t) { return t * (t - 1.0); };
  const auto triple_term = [](double t) { return t * (t - 1.0) * (t - 2.0); };
  const double vt = tie_sum(xs, v0_term);
  const double vu = tie_sum(ys, v0_term);
  const double var_s = (v0_term(nn) - vt - vu) / 18.0 +
                       tie_sum(xs, triple_term) * tie_sum(ys, triple_term) /
                           (9.0 * nn * (nn - 1.0) * (nn - 2.0)) +
                       tie_sum(xs, pair_term) * tie_sum(ys, pair_term) / (2.0 * nn * (nn - 1.0));
  if (!(var_s > 0.0)) return 1.0;
  const double z = s / std::sqrt(var_s);
  return std::min(1.0, std::erfc(std::fabs(z) / std::sqrt(2.0)));
}

std::vector<double> benjamini_yekutieli(std::span<const double> pvalues) {
  const std::size_t m = pvalues.size();
  for (double p : pvalues) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p-value outside [0, 1]");
  }
  std::vector<double> adjusted(m);
  if (m == 0) return adjusted;

  double harmonic = 0.0;
  for (std::size_t k = 1; k <= m; ++k) harmonic += 1.0 / static_cast<double>(k);

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });

  double running = 1.0;
  for (std::size_t r = m; r-- > 0;) {
    const std::size_t i = order[r];
    const double scaled =
        pvalues[i] * static_cast<double>(m) * harmonic / static_cast<double>(r + 1);
    running = std::min(running, std::min(1.0, scaled));
    adjusted[i] = running;
  }
  return adjusted;
}

}  // namespace elate::eval
