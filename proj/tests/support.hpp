#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "elate/data.hpp"
#include "elate/model.hpp"

namespace elate::testing {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ANSI C LCG; the Python oracle script uses the same stream.
class Lcg {
 public:
  explicit Lcg(std::uint64_t seed) : state_(seed) {}
  double next() {
    state_ = (state_ * 1103515245ULL + 12345ULL) % 2147483648ULL;
    return static_cast<double>(state_) / 2147483648.0 - 0.5;
  }

 private:
  std::uint64_t state_;
};

inline std::vector<double> normals(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> out(n);
  for (double& v : out) v = dist(rng);
  return out;
}

// Daily timestamps starting 2020-01-01.
inline std::vector<std::int64_t> daily(std::size_t n) {
  std::vector<std::int64_t> ts(n);
  for (std::size_t i = 0; i < n; ++i) ts[i] = 1577836800 + static_cast<std::int64_t>(i) * 86400;
  return ts;
}

struct FrameBuilder {
  std::vector<std::string> names;
  std::vector<Column> columns;
  std::set<std::string> groups;

  FrameBuilder& numeric(std::string name, Series v) {
    names.push_back(std::move(name));
    columns.push_back(Column::make_numeric(std::move(v)));
    return *this;
  }
  FrameBuilder& categorical(std::string name, std::vector<std::string> v) {
    groups.insert(name);
    names.push_back(std::move(name));
    columns.push_back(Column::make_categorical(std::move(v)));
    return *this;
  }
  TimeFrame build(const std::string& target, std::vector<std::int64_t> ts = {}, std::size_t horizon = 1) const {
    const std::size_t n = columns.empty() ? 0 : columns.front().size();
    if (ts.empty()) ts = daily(n);
    std::vector<std::string> labels;
    for (auto t : ts) labels.push_back(std::to_string(t));
    return TimeFrame(std::move(ts), std::move(labels), names, columns, target, horizon, groups);
  }
};

inline bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

inline bool same_series(const Series& a, const Series& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same(a[i], b[i])) return false;
  }
  return true;
}

// Shapley values by explicit enumeration of every coalition:
//   phi_i = sum_{S subset N\{i}} |S|! (n-|S|-1)! / n! (v(S u {i}) - v(S)),
//   v(S) = mean over background z of f(x_S, z_rest).
inline std::vector<double> brute_force_shapley(const model::GbtModel& m, std::span<const double> x,
                                               const model::Matrix& background) {
  const std::size_t n = x.size();
  const std::size_t subsets = std::size_t{1} << n;
  std::vector<double> value(subsets, 0.0);
  std::vector<double> mixed(n);
  for (std::size_t s = 0; s < subsets; ++s) {
    double acc = 0.0;
    for (std::size_t j = 0; j < background.rows(); ++j) {
      for (std::size_t i = 0; i < n; ++i) mixed[i] = (s >> i) & 1U ? x[i] : background(j, i);
      acc += m.predict_row(mixed);
    }
    value[s] = acc / static_cast<double>(background.rows());
  }
  std::vector<double> fact(n + 1, 1.0);
  for (std::size_t k = 1; k <= n; ++k) fact[k] = fact[k - 1] * static_cast<double>(k);
  std::vector<double> phi(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < subsets; ++s) {
      if ((s >> i) & 1U) continue;
      const auto size = static_cast<std::size_t>(__builtin_popcountll(s));
      const double w = fact[size] * fact[n - size - 1] / fact[n];
      phi[i] += w * (value[s | (std::size_t{1} << i)] - value[s]);
    }
  }
  return phi;
}

}  // namespace elate::testing
