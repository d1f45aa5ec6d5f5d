#include "elate/filter.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <stdexcept>

#include "elate/evaluators.hpp"

namespace elate::filter {

namespace {

struct FoldImportance {
  std::vector<double> share;  // per design column, summed over instances
  std::size_t instances = 0;
};

FoldImportance fold_importance(const TimeFrame& frame, std::span<const Series> columns, const Fold& fold,
                               const model::GbtParams& params) {
  const model::FoldData data = model::prepare_fold(frame, columns, frame.target(), fold);
  FoldImportance out;
  out.share.assign(columns.size(), 0.0);
  if (data.eval_x.rows() == 0) return out;
  const model::GbtModel m = model::fit_gbt(data.train_x, data.train_y, params);
  const model::ShapMatrix shap = model::tree_shap(m, data.eval_x, data.train_x);
  for (std::size_t r = 0; r < shap.values.rows(); ++r) {
    const auto phi = shap.values.row(r);
    double total = 0.0;
    for (double v : phi) total += std::fabs(v);
    if (total > 0.0) {
      for (std::size_t c = 0; c < phi.size(); ++c) out.share[c] += std::fabs(phi[c]) / total;
    }
  }
  out.instances = shap.values.rows();
  return out;
}

// Order from most to least important; ties go to the earlier-created one.
std::vector<std::size_t> importance_order(std::span<const Candidate> candidates, const ImportanceTable& table,
                                          std::span<const std::size_t> alive) {
  std::vector<std::size_t> order(alive.begin(), alive.end());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ia = table.at(candidates[a].name);
    const double ib = table.at(candidates[b].name);
    if (ia != ib) return ia > ib;
    return candidates[a].created_seq < candidates[b].created_seq;
  });
  return order;
}

RowRange fold_span(std::span<const Fold> folds) {
  RowRange r{0, 0};
  bool first = true;
  for (const auto& f : folds) {
    if (first) r.begin = f.train.begin;
    r.begin = std::min(r.begin, f.train.begin);
    r.end = std::max(r.end, f.eval.end);
    first = false;
  }
  return r;
}

}  // namespace

double ImportanceTable::at(const std::string& name) const {
  const auto it = importance.find(name);
  return it == importance.end() ? 0.0 : it->second;
}

ImportanceTable aggregate_shap_importance(const TimeFrame& frame, std::span<const Candidate> candidates,
                                          std::span<const Fold> folds, const model::GbtParams& params) {
  if (candidates.empty()) throw std::invalid_argument("importance needs at least one candidate");
  if (folds.empty()) throw std::invalid_argument("importance needs at least one fold");
  std::vector<Series> extra;
  extra.reserve(candidates.size());
  for (const auto& c : candidates) extra.push_back(c.values);
  const std::vector<Series> columns = model::design_columns(frame, extra);
  const std::size_t base_count = columns.size() - candidates.size();

  // Folds are independent; results are combined in fold order.
  std::vector<std::future<FoldImportance>> jobs;
  jobs.reserve(folds.size());
  for (const auto& fold : folds) {
    jobs.push_back(std::async(std::launch::async, [&, fold] { return fold_importance(frame, columns, fold, params); }));
  }
  std::vector<FoldImportance> results;
  results.reserve(jobs.size());
  for (auto& j : jobs) results.push_back(j.get());

  ImportanceTable table;
  std::vector<double> mean(columns.size(), 0.0);
  for (const auto& fi : results) {
    if (fi.instances == 0) continue;
    for (std::size_t c = 0; c < columns.size(); ++c) mean[c] += fi.share[c] / static_cast<double>(fi.instances);
    ++table.fold_count;
    table.instance_count += fi.instances;
  }
  if (table.fold_count > 0) {
    for (double& v : mean) v /= static_cast<double>(table.fold_count);
  }
  for (std::size_t c = 0; c < base_count; ++c) table.base_share += mean[c];
  for (std::size_t i = 0; i < candidates.size(); ++i) table.importance[candidates[i].name] = mean[base_count + i];
  return table;
}

double pearson(std::span<const double> a, std::span<const double> b, RowRange rows) {
  const std::size_t end = std::min({rows.end, a.size(), b.size()});
  double sa = 0.0;
  double sb = 0.0;
  std::size_t n = 0;
  for (std::size_t i = rows.begin; i < end; ++i) {
    if (std::isnan(a[i]) || std::isnan(b[i])) continue;
    sa += a[i];
    sb += b[i];
    ++n;
  }
  if (n < 2) return 0.0;
  const double ma = sa / static_cast<double>(n);
  const double mb = sb / static_cast<double>(n);
  double cab = 0.0;
  double caa = 0.0;
  double cbb = 0.0;
  for (std::size_t i = rows.begin; i < end; ++i) {
    if (std::isnan(a[i]) || std::isnan(b[i])) continue;
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    cab += da * db;
    caa += da * da;
    cbb += db * db;
  }
  if (!(caa > 0.0) || !(cbb > 0.0)) return 0.0;
  return std::clamp(cab / std::sqrt(caa * cbb), -1.0, 1.0);
}

std::vector<std::size_t> prune_correlated(std::span<const Candidate> candidates, const ImportanceTable& importance,
                                          double threshold, RowRange rows, std::size_t min_keep) {
  std::vector<std::size_t> all(candidates.size());
  std::iota(all.begin(), all.end(), 0);
  const auto order = importance_order(candidates, importance, all);
  std::size_t drops_left = candidates.size() > min_keep ? candidates.size() - min_keep : 0;
  std::vector<std::size_t> kept;
  std::vector<bool> survives(candidates.size(), false);
  for (std::size_t idx : order) {
    bool correlated = false;
    if (drops_left > 0) {
      for (std::size_t k : kept) {
        if (std::fabs(pearson(candidates[idx].values, candidates[k].values, rows)) > threshold) {
          correlated = true;
          break;
        }
      }
    }
    if (correlated) {
      --drops_left;
      continue;
    }
    kept.push_back(idx);
    survives[idx] = true;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (survives[i]) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> elimination_trace(std::size_t count, std::size_t keep, std::size_t prune_divisor) {
  std::vector<std::size_t> trace{count};
  while (count > keep) {
    const std::size_t n_prune = std::min(std::max<std::size_t>(1, count / prune_divisor), count - keep);
    count -= n_prune;
    trace.push_back(count);
  }
  return trace;
}

std::vector<std::size_t> shap_filter(const TimeFrame& frame, std::span<const Candidate> candidates,
                                     std::size_t keep, std::span<const Fold> folds, const FilterOptions& options,
                                     std::vector<std::size_t>* trace) {
  if (keep == 0) throw std::invalid_argument("shap_filter keep must be at least 1");
  if (options.prune_divisor == 0) throw std::invalid_argument("prune divisor must be positive");
  std::vector<std::size_t> alive(candidates.size());
  std::iota(alive.begin(), alive.end(), 0);
  if (trace) trace->assign(1, alive.size());
  const RowRange corr_rows = fold_span(folds);

  while (alive.size() > keep) {
    std::vector<Candidate> current;
    current.reserve(alive.size());
    for (std::size_t i : alive) current.push_back(candidates[i]);
    const ImportanceTable table = aggregate_shap_importance(frame, current, folds, options.gbt);

    const auto surviving = prune_correlated(current, table, options.correlation_threshold, corr_rows, keep);
    std::vector<std::size_t> next;
    next.reserve(surviving.size());
    for (std::size_t s : surviving) next.push_back(alive[s]);
    alive = std::move(next);

    if (alive.size() > keep) {
      const std::size_t len = alive.size();
      const std::size_t n_prune = std::min(std::max<std::size_t>(1, len / options.prune_divisor), len - keep);
      auto order = importance_order(candidates, table, alive);
      order.resize(len - n_prune);
      std::sort(order.begin(), order.end());
      alive = std::move(order);
    }
    if (trace) trace->push_back(alive.size());
  }
  return alive;
}

std::vector<std::size_t> fresh_filter(std::span<const Candidate> candidates, std::size_t keep) {
  if (keep == 0) throw std::invalid_argument("fresh_filter keep must be at least 1");
  std::vector<double> p;
  p.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (!c.p_value) throw std::invalid_argument("candidate '" + c.name + "' has no p-value");
    p.push_back(*c.p_value);
  }
  const std::vector<double> adjusted = eval::benjamini_yekutieli(p);
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (adjusted[a] != adjusted[b]) return adjusted[a] < adjusted[b];
    if (p[a] != p[b]) return p[a] < p[b];
    return candidates[a].created_seq < candidates[b].created_seq;
  });
  order.resize(std::min(keep, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace elate::filter
