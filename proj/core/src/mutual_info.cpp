// Kraskov-Stoegbauer-Grassberger estimator (algorithm 1):
//   I = psi(k) + psi(N) - < psi(n_x + 1) + psi(n_y + 1) >
// with the max-norm in the joint space. Marginals are replaced by their
// normalized ranks first, which leaves I unchanged and makes the estimate
// depend only on the ordering of each variable.

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>

#include "elate/evaluators.hpp"

namespace elate::eval {

namespace {

constexpr std::size_t kMinPairs = 50;
constexpr double kJitter = 1e-10;
constexpr std::uint64_t kJitterSeed = 0x5eed'1234'abcdULL;

// Mid-ranks scaled to [0, 1).
std::vector<double> rank_transform(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && v[order[j]] == v[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j - 1);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = mid / static_cast<double>(n);
    i = j;
  }
  return ranks;
}

// Number of values in `sorted` strictly within distance `radius` of `centre`.
std::size_t count_within(const std::vector<double>& sorted, double centre, double radius) {
  const auto lo = std::upper_bound(sorted.begin(), sorted.end(), centre - radius);
  const auto hi = std::lower_bound(sorted.begin(), sorted.end(), centre + radius);
  return hi > lo ? static_cast<std::size_t>(hi - lo) : 0;
}

}  // namespace

double mi_score(std::span<const double> x, std::span<const double> y, std::size_t k) {
  std::vector<double> xs;
  std::vector<double> ys;
  const std::size_t n_total = std::min(x.size(), y.size());
  for (std::size_t i = 0; i < n_total; ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) continue;
    xs.push_back(x[i]);
    ys.push_back(y[i]);
  }
  const std::size_t n = xs.size();
  if (n < kMinPairs || k == 0 || k >= n) return 0.0;
  const auto [xmin, xmax] = std::minmax_element(xs.begin(), xs.end());
  const auto [ymin, ymax] = std::minmax_element(ys.begin(), ys.end());
  if (*xmin == *xmax || *ymin == *ymax) return 0.0;

  std::vector<double> rx = rank_transform(xs);
  std::vector<double> ry = rank_transform(ys);
  std::mt19937_64 rng(kJitterSeed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    rx[i] += kJitter * unit(rng);
    ry[i] += kJitter * unit(rng);
  }

  // Points ordered by x so the neighbour search can stop early.
  std::vector<std::size_t> by_x(n);
  std::iota(by_x.begin(), by_x.end(), 0);
  std::sort(by_x.begin(), by_x.end(), [&](std::size_t a, std::size_t b) { return rx[a] < rx[b]; });
  std::vector<double> sx(n);
  std::vector<double> sy_x(n);
  for (std::size_t i = 0; i < n; ++i) {
    sx[i] = rx[by_x[i]];
    sy_x[i] = ry[by_x[i]];
  }
  std::vector<double> sorted_y = ry;
  std::sort(sorted_y.begin(), sorted_y.end());

  double psi_sum = 0.0;
  std::priority_queue<double> heap;
  for (std::size_t pos = 0; pos < n; ++pos) {
    heap = {};
    const double cx = sx[pos];
    const double cy = sy_x[pos];
    std::size_t left = pos;
    std::size_t right = pos + 1;
    while (true) {
      const double dl = left > 0 ? cx - sx[left - 1] : std::numeric_limits<double>::infinity();
      const double dr = right < n ? sx[right] - cx : std::numeric_limits<double>::infinity();
      const double dx = std::min(dl, dr);
      if (!std::isfinite(dx)) break;
      if (heap.size() == k && dx >= heap.top()) break;
      std::size_t j = 0;
      if (dl <= dr) j = --left;
      else j = right++;
      const double d = std::max(dx, std::fabs(sy_x[j] - cy));
      if (heap.size() < k) {
        heap.push(d);
      } else if (d < heap.top()) {
        heap.pop();
        heap.push(d);
      }
    }
    const double eps = heap.top();
    const std::size_t nx = std::max<std::size_t>(1, count_within(sx, cx, eps)) - 1;
    const std::size_t ny = std::max<std::size_t>(1, count_within(sorted_y, cy, eps)) - 1;
    psi_sum += boost::math::digamma(static_cast<double>(nx) + 1.0) +
               boost::math::digamma(static_cast<double>(ny) + 1.0);
  }
  const double mi = boost::math::digamma(static_cast<double>(k)) +
                    boost::math::digamma(static_cast<double>(n)) - psi_sum / static_cast<double>(n);
  return std::max(0.0, mi);
}

}  // namespace elate::eval
