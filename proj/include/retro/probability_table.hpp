#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "retro/errors.hpp"

namespace retro {

enum class Direction { Predict, Postdict };

inline std::string_view to_string(Direction d) {
  return d == Direction::Predict ? "predict" : "postdict";
}

/// Separator for composite outcome labels: multi-factor outcomes ("0·1") and
/// outcomes of composed instruments.
inline constexpr std::string_view kLabelSeparator = "\xC2\xB7"; // U+00B7

inline std::string join_labels(std::span<const std::string> parts) {
  std::string out;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (k)
      out += kLabelSeparator;
    out += parts[k];
  }
  return out;
}

inline std::string join_labels(std::string_view a, std::string_view b) {
  std::string out(a);
  out += kLabelSeparator;
  out += b;
  return out;
}

inline std::string digits_label(std::span<const std::size_t> digits) {
  std::vector<std::string> parts;
  parts.reserve(digits.size());
  for (auto d : digits)
    parts.push_back(std::to_string(d));
  return join_labels(parts);
}

/// Outcome label -> probability, in basis-index order.
struct ProbabilityTable {
  std::string given;
  Direction direction = Direction::Predict;
  std::vector<std::string> labels;
  std::vector<double> probabilities;
  /// Multiplicative factor relating postdiction to prediction, when defined.
  std::optional<double> factor;
  /// |sum of entries - 1|.
  double normalization_defect = 0.0;

  std::size_t size() const noexcept { return labels.size(); }
  double operator[](std::size_t i) const { return probabilities.at(i); }

  double at(std::string_view label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == label)
        return probabilities[i];
    throw InvalidInput("ProbabilityTable: no entry labelled '" +
                       std::string(label) + "'");
  }

  bool contains(std::string_view label) const {
    for (const auto& l : labels)
      if (l == label)
        return true;
    return false;
  }

  double sum() const {
    return std::accumulate(probabilities.begin(), probabilities.end(), 0.0);
  }

  void push(std::string label, double p) {
    labels.push_back(std::move(label));
    probabilities.push_back(p);
  }

  void refresh_defect() { normalization_defect = std::abs(sum() - 1.0); }
};

/// Largest entrywise difference between two tables with identical label sets
/// (order may differ).
inline double max_table_diff(const ProbabilityTable& a,
                             const ProbabilityTable& b) {
  if (a.size() != b.size())
    throw InvalidInput("max_table_diff: tables have different sizes");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b.at(a.labels[i])));
  return worst;
}

/// Bayes inversion with an arbitrary prior. `rows[i]` is the prediction table
/// P(. | input i); the result is P(input | output label) over `input_labels`.
/// The inference tasks themselves always use the flat prior.
inline ProbabilityTable bayes_invert(std::span<const ProbabilityTable> rows,
                                     std::span<const double> prior,
                                     std::span<const std::string> input_labels,
                                     std::string_view output_label) {
  if (rows.size() != prior.size() || rows.size() != input_labels.size())
    throw InvalidInput("bayes_invert: rows, prior and labels differ in size");
  double evidence = 0.0;
  std::vector<double> joint(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (prior[i] < 0.0)
      throw InvalidInput("bayes_invert: negative prior weight");
    joint[i] = rows[i].at(output_label) * prior[i];
    evidence += joint[i];
  }
  if (evidence < 1e-12)
    throw UndefinedConditional("bayes_invert: outcome '" +
                               std::string(output_label) +
                               "' has zero probability under the prior");
  ProbabilityTable out;
  out.given = std::string(output_label);
  out.direction = Direction::Postdict;
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.push(input_labels[i], joint[i] / evidence);
  out.refresh_defect();
  return out;
}

} // namespace retro
