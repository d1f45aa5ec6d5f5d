#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "elate/model.hpp"

namespace elate::model {

namespace {

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

// Per-node accumulators for one level-wise scan over a presorted feature.
struct NodeScan {
  double left_sum = 0.0;
  std::size_t left_count = 0;
  double last_value = 0.0;
  bool seen = false;
};

// Grows one tree level by level. Every feature is scanned once per level in
// presorted order; each active node keeps its own running left statistics.
Tree grow_tree(const Matrix& x, const std::vector<std::vector<std::size_t>>& sorted,
               const std::vector<double>& residual, const GbtParams& params) {
  const std::size_t n = x.rows();
  Tree tree;
  std::vector<int> node_of(n, 0);
  {
    TreeNode root;
    root.cover = n;
    root.value = std::accumulate(residual.begin(), residual.end(), 0.0) / static_cast<double>(n);
    tree.nodes.push_back(root);
  }
  std::vector<int> active{0};
  std::vector<double> node_sum{std::accumulate(residual.begin(), residual.end(), 0.0)};

  for (std::size_t depth = 0; depth < params.max_depth && !active.empty(); ++depth) {
    const std::size_t node_total = tree.nodes.size();
    std::vector<int> slot(node_total, -1);
    std::vector<int> splittable;
    for (int id : active) {
      if (tree.nodes[static_cast<std::size_t>(id)].cover >= 2 * params.min_samples_leaf) {
        slot[static_cast<std::size_t>(id)] = static_cast<int>(splittable.size());
        splittable.push_back(id);
      }
    }
    if (splittable.empty()) break;

    std::vector<SplitCandidate> best(splittable.size());
    std::vector<NodeScan> scan(splittable.size());
    for (std::size_t f = 0; f < x.cols(); ++f) {
      std::fill(scan.begin(), scan.end(), NodeScan{});
      for (std::size_t r : sorted[f]) {
        const int s = slot[static_cast<std::size_t>(node_of[r])];
        if (s < 0) continue;
        auto& st = scan[static_cast<std::size_t>(s)];
        const double v = x(r, f);
        if (st.seen && v > st.last_value) {
          const auto& node = tree.nodes[static_cast<std::size_t>(splittable[static_cast<std::size_t>(s)])];
          const std::size_t nl = st.left_count;
          const std::size_t nr = node.cover - nl;
          if (nl >= params.min_samples_leaf && nr >= params.min_samples_leaf) {
            const double total = node_sum[static_cast<std::size_t>(splittable[static_cast<std::size_t>(s)])];
            const double right_sum = total - st.left_sum;
            const double gain = st.left_sum * st.left_sum / static_cast<double>(nl) +
                                right_sum * right_sum / static_cast<double>(nr) -
                                total * total / static_cast<double>(node.cover);
            auto& b = best[static_cast<std::size_t>(s)];
            if (gain > b.gain) {
              double mid = st.last_value + 0.5 * (v - st.last_value);
              if (!(mid > st.last_value)) mid = v;
              b = {gain, static_cast<int>(f), mid};
            }
          }
        }
        st.left_sum += residual[r];
        ++st.left_count;
        st.last_value = v;
        st.seen = true;
      }
    }

    std::vector<int> next_active;
    std::vector<int> left_of(node_total, -1);
    for (std::size_t s = 0; s < splittable.size(); ++s) {
      if (best[s].feature < 0 || !(best[s].gain > 0.0)) continue;
      const int id = splittable[s];
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[static_cast<std::size_t>(id)];
      node.feature = best[s].feature;
      node.threshold = best[s].threshold;
      node.left = l;
      node.right = l + 1;
      left_of[static_cast<std::size_t>(id)] = l;
      next_active.push_back(l);
      next_active.push_back(l + 1);
    }
    if (next_active.empty()) break;

    node_sum.resize(tree.nodes.size(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const auto id = static_cast<std::size_t>(node_of[r]);
      if (id >= left_of.size() || left_of[id] < 0) continue;
      const auto& parent = tree.nodes[id];
      const int child = x(r, static_cast<std::size_t>(parent.feature)) < parent.threshold ? parent.left : parent.right;
      node_of[r] = child;
      auto& c = tree.nodes[static_cast<std::size_t>(child)];
      ++c.cover;
      node_sum[static_cast<std::size_t>(child)] += residual[r];
    }
    for (int id : next_active) {
      auto& c = tree.nodes[static_cast<std::size_t>(id)];
      c.value = node_sum[static_cast<std::size_t>(id)] / static_cast<double>(c.cover);
    }
    active = std::move(next_active);
  }
  return tree;
}

}  // namespace

int Tree::leaf_index(std::span<const double> x) const {
  int id = 0;
  while (!nodes[static_cast<std::size_t>(id)].leaf()) {
    const auto& node = nodes[static_cast<std::size_t>(id)];
    id = x[static_cast<std::size_t>(node.feature)] < node.threshold ? node.left : node.right;
  }
  return id;
}

double Tree::predict(std::span<const double> x) const {
  return nodes[static_cast<std::size_t>(leaf_index(x))].value;
}

Matrix GbtModel::impute(const Matrix& x) const {
  if (x.cols() != feature_count()) throw ModelError("column count differs from the fitted model");
  Matrix out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      if (std::isnan(out(r, c))) out(r, c) = impute_values[c];
    }
  }
  return out;
}

double GbtModel::predict_row(std::span<const double> x) const {
  double sum = 0.0;
  for (const auto& tree : trees) sum += tree.predict(x);
  return base_score + learning_rate * sum;
}

GbtModel fit_gbt(const Matrix& x, std::span<const double> y, const GbtParams& params,
                 std::vector<std::string> feature_names) {
  const std::size_t n = x.rows();
  if (n == 0) throw ModelError("empty training set");
  if (y.size() != n) throw ModelError("target length differs from row count");
  if (!feature_names.empty() && feature_names.size() != x.cols())
    throw ModelError("feature name count differs from column count");
  if (params.min_samples_leaf == 0) throw ModelError("min_samples_leaf must be positive");
  for (double v : y) {
    if (!std::isfinite(v)) throw ModelError("training target has a missing value");
  }

  GbtModel model;
  model.learning_rate = params.learning_rate;
  model.feature_names = std::move(feature_names);
  model.impute_values.resize(x.cols());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    std::vector<double> observed;
    observed.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
      if (!std::isnan(x(r, c))) observed.push_back(x(r, c));
    }
    if (observed.empty()) throw ModelError("training column " + std::to_string(c) + " has no observed value");
    model.impute_values[c] = median_of(std::move(observed));
  }
  const Matrix xi = model.impute(x);

  model.base_score = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  const bool constant = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
  if (constant || x.cols() == 0) return model;

  std::vector<std::vector<std::size_t>> sorted(x.cols());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    auto& order = sorted[c];
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xi(a, c) < xi(b, c); });
  }

  std::vector<double> pred(n, model.base_score);
  std::vector<double> residual(n);
  for (std::size_t t = 0; t < params.trees; ++t) {
    for (std::size_t r = 0; r < n; ++r) residual[r] = y[r] - pred[r];
    Tree tree = grow_tree(xi, sorted, residual, params);
    for (std::size_t r = 0; r < n; ++r) pred[r] += params.learning_rate * tree.predict(xi.row(r));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

Series predict(const GbtModel& model, const Matrix& x) {
  if (x.rows() == 0) return {};
  const Matrix xi = model.impute(x);
  Series out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = model.predict_row(xi.row(r));
  return out;
}

}  // namespace elate::model
