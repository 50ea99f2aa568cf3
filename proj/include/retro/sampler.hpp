#pragma once

// Monte Carlo ensembles of prepare-transform-measure trials. Each trial draws
// its preparation uniformly, propagates it through the transformation and
// samples the test; trial t uses the counter-based substream (seed, t), so
// counts do not depend on how trials are split across threads.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "retro/channels.hpp"
#include "retro/errors.hpp"
#include "retro/inference.hpp"
#include "retro/probability_table.hpp"
#include "retro/rng.hpp"
#include "retro/task.hpp"

namespace retro {

struct EnsembleResult {
  std::vector<std::string> input_labels;
  std::vector<std::string> output_labels;
  /// counts[i][j] for input_labels[i], output_labels[j].
  std::vector<std::vector<std::uint64_t>> counts;
  std::uint64_t shots = 0;
  std::uint64_t seed = 0;

  std::uint64_t count(const std::string& in, const std::string& out) const {
    return counts.at(index(input_labels, in)).at(index(output_labels, out));
  }

  std::map<std::pair<std::string, std::string>, std::uint64_t> joint_counts() const {
    std::map<std::pair<std::string, std::string>, std::uint64_t> out;
    for (std::size_t i = 0; i < input_labels.size(); ++i)
      for (std::size_t j = 0; j < output_labels.size(); ++j)
        out[{input_labels[i], output_labels[j]}] = counts[i][j];
    return out;
  }

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (const auto& row : counts)
      for (auto c : row)
        s += c;
    return s;
  }

  friend bool operator==(const EnsembleResult&, const EnsembleResult&) = default;

private:
  static std::size_t index(const std::vector<std::string>& labels,
                           const std::string& l) {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == l)
        return i;
    throw InvalidInput("EnsembleResult: unknown label '" + l + "'");
  }
};

namespace detail {

/// Inverse-CDF draw; falls back to the last positive cell on round-off.
inline std::size_t draw(const std::vector<double>& probs, double u) {
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0)
      continue;
    acc += probs[i];
    last = i;
    if (u < acc)
      return i;
  }
  return last;
}

inline std::vector<double> diagonal(const Operator& rho) {
  std::vector<double> d(static_cast<std::size_t>(rho.rows()));
  for (Eigen::Index i = 0; i < rho.rows(); ++i)
    d[static_cast<std::size_t>(i)] = std::max(0.0, rho(i, i).real());
  return d;
}

/// Per-preparation sampling model: an optional first stage over instrument
/// outcomes, then the test on the resulting state. Each leaf distribution is
/// over flat output indices and is mapped to an output label index.
struct Model {
  std::vector<std::size_t> input_label_of; // preparation -> input label index
  std::vector<std::vector<double>> stage_one;               // [prep][outcome]
  std::vector<std::vector<std::vector<double>>> stage_two;  // [prep][outcome][flat x]
  std::vector<std::vector<std::size_t>> output_label_of;    // [outcome][flat x]
  std::vector<std::string> input_labels;
  std::vector<std::string> output_labels;
};

inline std::vector<std::string> selection_labels(const DimsPartition& dims,
                                                 const std::vector<bool>& mask,
                                                 std::vector<std::size_t>& index_of) {
  const Selection sel(dims, mask);
  index_of.resize(dims.total());
  for (std::size_t i = 0; i < dims.total(); ++i)
    index_of[i] = sel.index(dims.decode(i));
  return sel.labels();
}

inline Model build_model(const InferenceTask& task) {
  Model m;
  const std::size_t n_prep = preparation_count(task);

  if (task.has_state_set()) {
    for (std::size_t i = 0; i < n_prep; ++i) {
      m.input_labels.push_back(state_label(i));
      m.input_label_of.push_back(i);
    }
  } else {
    m.input_labels = selection_labels(task.dims_in, task.known_input_mask,
                                      m.input_label_of);
  }

  std::vector<Operator> prepared;
  for (std::size_t p = 0; p < n_prep; ++p) {
    if (const auto* s = std::get_if<StateSet>(&task.preparation))
      prepared.push_back(projector(s->states[p]));
    else
      prepared.push_back(basis_projector(task.dims_in.total(), p));
  }

  if (const auto* inst = std::get_if<Instrument>(&task.transformation)) {
    m.output_labels = instrument_output_labels(*inst);
    for (std::size_t i = 0; i < inst->size(); ++i) {
      std::vector<std::size_t> row;
      for (std::size_t x = 0; x < inst->dim_out(); ++x)
        row.push_back(i * inst->dim_out() + x);
      m.output_label_of.push_back(std::move(row));
    }
    for (const auto& rho : prepared) {
      std::vector<double> first;
      std::vector<std::vector<double>> second;
      for (const auto& o : inst->outcomes()) {
        const Operator out = retro::apply(o.map, rho);
        const double p = out.trace().real();
        first.push_back(std::max(0.0, p));
        // state update, then the test on the updated state
        second.push_back(p > kProbabilityTol ? diagonal(out / p)
                                             : std::vector<double>(inst->dim_out(), 0.0));
      }
      m.stage_one.push_back(std::move(first));
      m.stage_two.push_back(std::move(second));
    }
    return m;
  }

  std::vector<std::size_t> out_index;
  m.output_labels = selection_labels(task.dims_out, task.known_output_mask, out_index);
  m.output_label_of.push_back(std::move(out_index));
  for (const auto& rho : prepared) {
    Operator out;
    if (const auto* u = std::get_if<Operator>(&task.transformation))
      out = (*u) * rho * u->adjoint();
    else
      out = retro::apply(std::get<QuantumMap>(task.transformation), rho);
    m.stage_one.push_back({1.0});
    m.stage_two.push_back({diagonal(out)});
  }
  return m;
}

} // namespace detail

/// Simulates `shots` trials. Identical (task, shots, seed) give identical
/// counts for any `threads`.
inline EnsembleResult run_ensemble(const InferenceTask& task, std::uint64_t shots,
                                   std::uint64_t seed, unsigned threads = 1) {
  if (shots == 0)
    throw InvalidInput("run_ensemble: shots must be positive");
  validate(task);
  const detail::Model model = detail::build_model(task);
  const std::size_t n_prep = model.stage_one.size();
  const std::size_t n_in = model.input_labels.size();
  const std::size_t n_out = model.output_labels.size();
  using Counts = std::vector<std::vector<std::uint64_t>>;

  auto run_range = [&](std::uint64_t begin, std::uint64_t end, Counts& counts) {
    counts.assign(n_in, std::vector<std::uint64_t>(n_out, 0));
    for (std::uint64_t t = begin; t < end; ++t) {
      CounterRng rng(seed, t);
      const auto prep = std::min<std::size_t>(
          n_prep - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n_prep)));
      const std::size_t outcome = detail::draw(model.stage_one[prep], rng.uniform());
      const std::size_t x = detail::draw(model.stage_two[prep][outcome], rng.uniform());
      ++counts[model.input_label_of[prep]][model.output_label_of[outcome][x]];
    }
  };

  threads = std::max(1u, threads);
  std::vector<Counts> partial(threads);
  if (threads == 1) {
    run_range(0, shots, partial[0]);
  } else {
    std::vector<std::thread> pool;
    const std::uint64_t chunk = (shots + threads - 1) / threads;
    for (unsigned k = 0; k < threads; ++k) {
      const std::uint64_t begin = std::min<std::uint64_t>(shots, k * chunk);
      const std::uint64_t end = std::min<std::uint64_t>(shots, begin + chunk);
      pool.emplace_back(run_range, begin, end, std::ref(partial[k]));
    }
    for (auto& th : pool)
      th.join();
  }

  EnsembleResult r;
  r.input_labels = model.input_labels;
  r.output_labels = model.output_labels;
  r.counts.assign(n_in, std::vector<std::uint64_t>(n_out, 0));
  for (const auto& part : partial)
    for (std::size_t i = 0; i < n_in; ++i)
      for (std::size_t j = 0; j < n_out; ++j)
        r.counts[i][j] += part[i][j];
  r.shots = shots;
  r.seed = seed;
  return r;
}

/// Empirical conditional table for one conditioning label: on the input
/// when predicting, on the output when postdicting.
inline ProbabilityTable empirical_conditional(const EnsembleResult& result,
                                              Direction direction,
                                              const std::string& given) {
  ProbabilityTable t;
  t.direction = direction;
  t.given = given;
  const bool predict = direction == Direction::Predict;
  const auto& cond_labels = predict ? result.input_labels : result.output_labels;
  const auto& free_labels = predict ? result.output_labels : result.input_labels;
  const auto it = std::find(cond_labels.begin(), cond_labels.end(), given);
  if (it == cond_labels.end())
    throw InvalidInput("empirical_conditional: unknown label '" + given + "'");
  const auto c = static_cast<std::size_t>(it - cond_labels.begin());
  auto cell = [&](std::size_t free) {
    return predict ? result.counts[c][free] : result.counts[free][c];
  };
  std::uint64_t total = 0;
  for (std::size_t f = 0; f < free_labels.size(); ++f)
    total += cell(f);
  if (total == 0)
    throw UndefinedConditional("empirical_conditional: no trials with '" + given + "'");
  for (std::size_t f = 0; f < free_labels.size(); ++f)
    t.push(free_labels[f], static_cast<double>(cell(f)) / static_cast<double>(total));
  t.refresh_defect();
  return t;
}

struct EmpiricalConditionals {
  std::vector<ProbabilityTable> tables;
  /// Conditioning labels that never occurred.
  std::vector<std::string> skipped;
};

inline EmpiricalConditionals empirical_conditionals(const EnsembleResult& result,
                                                    Direction direction) {
  EmpiricalConditionals out;
  const auto& cond = direction == Direction::Predict ? result.input_labels
                                                     : result.output_labels;
  for (const auto& label : cond) {
    try {
      out.tables.push_back(empirical_conditional(result, direction, label));
    } catch (const UndefinedConditional&) {
      out.skipped.push_back(label);
    }
  }
  return out;
}

struct CompareCell {
  std::string label;
  double empirical = 0.0;
  double analytic = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct CompareReport {
  double max_deviation = 0.0;
  bool pass = true;
  std::vector<CompareCell> cells;
};

/// Per-cell tolerance max(0.01, 4 sqrt(p (1 - p) / shots)).
inline double sampling_tolerance(double p, std::uint64_t shots) {
  const double q = std::clamp(p, 0.0, 1.0);
  return std::max(0.01, 4.0 * std::sqrt(q * (1.0 - q) / static_cast<double>(shots)));
}

/// `tolerance`, when set, replaces the per-cell bound.
inline CompareReport compare(const ProbabilityTable& empirical,
                             const ProbabilityTable& analytic,
                             std::uint64_t shots,
                             std::optional<double> tolerance = std::nullopt) {
  if (shots == 0)
    throw InvalidInput("compare: shots must be positive");
  if (empirical.size() != analytic.size())
    throw InvalidInput("compare: tables have different label sets");
  CompareReport r;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    if (!empirical.contains(analytic.labels[i]))
      throw InvalidInput("compare: empirical table lacks label '" +
                         analytic.labels[i] + "'");
    CompareCell cell;
    cell.label = analytic.labels[i];
    cell.analytic = analytic[i];
    cell.empirical = empirical.at(cell.label);
    cell.tolerance = tolerance ? *tolerance : sampling_tolerance(cell.analytic, shots);
    const double dev = std::abs(cell.empirical - cell.analytic);
    cell.pass = dev <= cell.tolerance;
    r.max_deviation = std::max(r.max_deviation, dev);
    r.pass = r.pass && cell.pass;
    r.cells.push_back(std::move(cell));
  }
  return r;
}

} // namespace retro
