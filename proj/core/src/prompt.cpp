#include <algorithm>
#include <array>
#include <cstdio>

#include "elate/feature_db.hpp"

namespace elate {

namespace {

constexpr std::string_view kDefaultTemplate = R"(You are an expert in time series forecasting and feature engineering.
Your task is to write one new feature that helps a gradient-boosted tree model
predict the target column one step ahead.

Dataset description:
@@description@@

Every feature is a small program in the feature language described at the end
of this message. A program may define helper values with `let` and must end
with exactly one `feature "name": expression` line. Start the program with a
comment line explaining the idea behind the feature.

Example features:
@@examples@@

Features generated so far, with their scores (higher is better):
@@generated features@@

Write a new feature that is different from all of the above and is likely to
score higher. Reply with the program only, inside a single ``` fenced block.
)";

std::string_view trim_newlines(std::string_view s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == '\n' || s.front() == '\r')) s.remove_prefix(1);
  return s;
}

}  // namespace

std::string_view default_prompt_template() { return kDefaultTemplate; }

std::string history_line(const std::string& name, double score) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.4f", score);
  return name + ": " + buf.data();
}

std::string FeatureDb::build_prompt(const std::vector<FeatureSpec>& sampled) const {
  std::string examples;
  for (const auto& f : sampled) {
    if (!examples.empty()) examples += "\n\n";
    examples += trim_newlines(f.source);
  }
  std::string generated;
  const std::size_t skip = history_.size() > kHistoryLines ? history_.size() - kHistoryLines : 0;
  for (std::size_t i = skip; i < history_.size(); ++i) {
    if (!generated.empty()) generated += '\n';
    generated += history_line(history_[i].first, history_[i].second);
  }

  // Fill all slots in one left-to-right pass so substituted text is never rescanned.
  struct Fill {
    std::size_t pos;
    std::string_view slot;
    const std::string* text;
  };
  std::array<Fill, 3> fills{{{template_.find(kDescriptionSlot), kDescriptionSlot, &description_},
                             {template_.find(kExamplesSlot), kExamplesSlot, &examples},
                             {template_.find(kHistorySlot), kHistorySlot, &generated}}};
  std::sort(fills.begin(), fills.end(), [](const Fill& a, const Fill& b) { return a.pos < b.pos; });
  std::string out;
  std::size_t cursor = 0;
  for (const auto& f : fills) {
    out.append(template_, cursor, f.pos - cursor);
    out += *f.text;
    cursor = f.pos + f.slot.size();
  }
  out.append(template_, cursor);
  if (!out.empty() && out.back() != '\n') out += '\n';
  out += "\nFeature language reference:\n";
  out += dsl::grammar_reference();
  return out;
}

}  // namespace elate
