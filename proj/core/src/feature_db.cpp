#include "elate/feature_db.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace elate {

FeatureDb::FeatureDb(FeatureDbParams params, std::string description, std::string prompt_template)
    : params_(params), description_(std::move(description)), template_(std::move(prompt_template)) {
  if (params_.n_max == 0) throw std::invalid_argument("n_max must be positive");
  if (params_.n_keep == 0 || params_.n_keep > params_.n_max)
    throw std::invalid_argument("n_keep must be in [1, n_max]");
  if (params_.max_gen == 0) throw std::invalid_argument("generation count must be positive");
  if (!(params_.t0 >= 0.0) || !(params_.eps > 0.0)) throw std::invalid_argument("temperature constants out of range");
  for (const auto slot : {kDescriptionSlot, kExamplesSlot, kHistorySlot}) {
    if (template_.find(slot) == std::string::npos)
      throw std::invalid_argument("prompt template has no " + std::string(slot) + " placeholder");
  }
}

const std::vector<FeatureSpec>& FeatureDb::best_set() const {
  static const std::vector<FeatureSpec> empty;
  return best_sets_.empty() ? empty : best_sets_.back();
}

bool FeatureDb::contains(std::string_view name) const {
  return std::any_of(fts_.begin(), fts_.end(), [&](const FeatureSpec& f) { return f.name() == name; });
}

double FeatureDb::temperature(std::size_t n_feat) const {
  return params_.t0 * std::exp(-params_.k_decay * static_cast<double>(n_feat) / static_cast<double>(params_.n_max)) +
         params_.eps;
}

std::vector<double> FeatureDb::probabilities() const {
  std::vector<double> p(fts_.size());
  if (fts_.empty()) return p;
  const double t = temperature(fts_.size());
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& f : fts_) top = std::max(top, f.score());
  double total = 0.0;
  for (std::size_t i = 0; i < fts_.size(); ++i) {
    p[i] = std::exp((fts_[i].score() - top) / t);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

std::vector<FeatureSpec> FeatureDb::sample(std::mt19937_64& rng) const {
  std::vector<double> weights = probabilities();
  const std::size_t count = std::min(params_.n_prompt, fts_.size());
  std::vector<FeatureSpec> out;
  out.reserve(count);
  for (std::size_t draw = 0; draw < count; ++draw) {
    double total = 0.0;
    for (double w : weights) total += w;
    // 53 random bits in [0, 1); avoids the library-defined canonical mapping.
    const double u = static_cast<double>(rng() >> 11) * 0x1p-53 * total;
    std::size_t pick = weights.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      acc += weights[i];
      pick = i;
      if (u < acc) break;
    }
    out.push_back(fts_[pick]);
    weights[pick] = 0.0;
  }
  return out;
}

bool FeatureDb::add_feature(FeatureSpec f, FeatureSetJudge& judge) {
  history_.emplace_back(f.name(), f.score());
  while (history_.size() > kHistoryLines) history_.pop_front();
  fts_.push_back(std::move(f));
  if (fts_.size() < params_.n_max) return false;
  ++gen_;
  if (gen_ < params_.max_gen) reset_generation(judge);
  return true;
}

void FeatureDb::reset_generation(FeatureSetJudge& judge) {
  std::vector<FeatureSpec> best = update_best_feature_set(judge);
  fts_ = std::move(best);
}

const std::vector<FeatureSpec>& FeatureDb::update_best_feature_set(FeatureSetJudge& judge) {
  std::vector<FeatureSpec> candidate = judge.select(fts_, params_.n_keep);
  const double error = judge.validation_rmse(candidate);
  if (residuals_.empty() || error < residuals_.back()) {
    residuals_.push_back(error);
    best_sets_.push_back(std::move(candidate));
  } else {
    residuals_.push_back(residuals_.back());
    best_sets_.push_back(best_sets_.back());
  }
  return best_sets_.back();
}

void FeatureDb::restore(std::vector<std::vector<FeatureSpec>> best_sets, std::vector<double> residuals,
                        std::size_t generation) {
  if (best_sets.size() != residuals.size()) throw std::invalid_argument("best sets and residuals differ in length");
  best_sets_ = std::move(best_sets);
  residuals_ = std::move(residuals);
  gen_ = generation;
  fts_ = best_set();
}

}  // namespace elate
