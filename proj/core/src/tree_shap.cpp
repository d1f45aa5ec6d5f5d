// Interventional TreeSHAP. For a fixed instance x and background row z the
// game v(S) = f(x_S, z_notS) on a single tree only depends on which features
// along a root-to-leaf path send x and z different ways. Following both
// branches at such a split (x's side puts the feature in A, z's side in B)
// enumerates every reachable leaf; a leaf reached with sets A and B is
// attained exactly by coalitions S with A in S and B disjoint from S, so its
// Shapley share is
//   +v (|A|-1)! |B|! / (|A|+|B|)!  for each i in A
//   -v |A|! (|B|-1)! / (|A|+|B|)!  for each i in B.

#include <cmath>
#include <vector>

#include "elate/model.hpp"

namespace elate::model {

namespace {

class PathWalker {
 public:
  PathWalker(std::span<const double> x, double scale, std::span<double> phi)
      : x_(x), scale_(scale), phi_(phi), side_(x.size(), 0), fact_(x.size() + 2, 1.0) {
    for (std::size_t k = 1; k < fact_.size(); ++k) fact_[k] = fact_[k - 1] * static_cast<double>(k);
  }

  void run(const Tree& tree, std::span<const double> z) {
    tree_ = &tree;
    z_ = z;
    walk(0);
  }

 private:
  // side_[i]: 0 unassigned, 1 in A (follows x), 2 in B (follows z).
  void walk(int id) {
    const auto& node = tree_->nodes[static_cast<std::size_t>(id)];
    if (node.leaf()) {
      credit(node.value);
      return;
    }
    const auto f = static_cast<std::size_t>(node.feature);
    const int dx = x_[f] < node.threshold ? node.left : node.right;
    const int dz = z_[f] < node.threshold ? node.left : node.right;
    if (dx == dz) {
      walk(dx);
      return;
    }
    if (side_[f] == 1) {
      walk(dx);
      return;
    }
    if (side_[f] == 2) {
      walk(dz);
      return;
    }
    side_[f] = 1;
    a_.push_back(f);
    walk(dx);
    a_.pop_back();
    side_[f] = 2;
    b_.push_back(f);
    walk(dz);
    b_.pop_back();
    side_[f] = 0;
  }

  void credit(double value) {
    const std::size_t a = a_.size();
    const std::size_t b = b_.size();
    if (a + b == 0) return;
    const double v = value * scale_;
    const double total = fact_[a + b];
    if (a > 0) {
      const double w = fact_[a - 1] * fact_[b] / total;
      for (std::size_t i : a_) phi_[i] += v * w;
    }
    if (b > 0) {
      const double w = fact_[a] * fact_[b - 1] / total;
      for (std::size_t i : b_) phi_[i] -= v * w;
    }
  }

  const Tree* tree_ = nullptr;
  std::span<const double> x_;
  std::span<const double> z_;
  double scale_;
  std::span<double> phi_;
  std::vector<unsigned char> side_;
  std::vector<std::size_t> a_;
  std::vector<std::size_t> b_;
  std::vector<double> fact_;  // k!, k <= feature count + 1
};

}  // namespace

std::vector<std::size_t> background_rows(std::size_t rows, std::size_t limit) {
  std::vector<std::size_t> out;
  if (rows == 0 || limit == 0) return out;
  if (rows <= limit) {
    out.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) out[i] = i;
    return out;
  }
  out.reserve(limit);
  for (std::size_t i = 0; i < limit; ++i) out.push_back(i * rows / limit);
  return out;
}

ShapMatrix tree_shap(const GbtModel& model, const Matrix& foreground, const Matrix& background) {
  if (background.rows() == 0) throw ModelError("SHAP needs at least one background row");
  if (background.cols() != model.feature_count() || foreground.cols() != model.feature_count())
    throw ModelError("SHAP input column count differs from the fitted model");

  const auto picked = background_rows(background.rows());
  const Matrix bg = model.impute(background.take_rows(picked));
  const Matrix fg = model.impute(foreground);

  ShapMatrix out;
  out.values = Matrix(fg.rows(), fg.cols(), 0.0);
  double base = 0.0;
  for (std::size_t j = 0; j < bg.rows(); ++j) base += model.predict_row(bg.row(j));
  out.base_value = base / static_cast<double>(bg.rows());

  const double scale = model.learning_rate / static_cast<double>(bg.rows());
  for (std::size_t r = 0; r < fg.rows(); ++r) {
    PathWalker walker(fg.row(r), scale, out.values.row(r));
    for (const auto& tree : model.trees) {
      for (std::size_t j = 0; j < bg.rows(); ++j) walker.run(tree, bg.row(j));
    }
  }
  return out;
}

}  // namespace elate::model
