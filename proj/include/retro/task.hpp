#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "retro/channels.hpp"
#include "retro/errors.hpp"
#include "retro/inference.hpp"
#include "retro/linalg.hpp"
#include "retro/probability_table.hpp"

namespace retro {

/// Preparation in the computational basis of the input space.
struct ComputationalBasis {
  friend bool operator==(const ComputationalBasis&, const ComputationalBasis&) = default;
};

/// Preparation of one of n pure states (column vectors), not necessarily
/// orthogonal.
struct StateSet {
  std::vector<Operator> states;
};

using Preparation = std::variant<ComputationalBasis, StateSet>;

/// Unitary matrix, channel in Kraus form, or instrument.
using Transformation = std::variant<Operator, QuantumMap, Instrument>;

/// A prepare-transform-measure inference task. Bases other than the
/// computational ones are absorbed into the transformation.
///
/// Masks have one entry per factor. On the data side (input when predicting,
/// output when postdicting) `true` marks a factor whose outcome is given and
/// `false` one that is unknown. On the guessed side `true` marks a factor
/// whose outcome is asked for and `false` one that is ignored.
struct InferenceTask {
  Transformation transformation;
  DimsPartition dims_in;
  DimsPartition dims_out;
  Preparation preparation = ComputationalBasis{};
  Direction direction = Direction::Predict;
  std::vector<bool> known_input_mask;
  std::vector<bool> known_output_mask;

  bool is_unitary() const { return std::holds_alternative<Operator>(transformation); }
  bool is_channel() const { return std::holds_alternative<QuantumMap>(transformation); }
  bool is_instrument() const { return std::holds_alternative<Instrument>(transformation); }
  bool has_state_set() const { return std::holds_alternative<StateSet>(preparation); }
};

inline std::size_t transformation_dim_in(const Transformation& t) {
  if (auto u = std::get_if<Operator>(&t))
    return static_cast<std::size_t>(u->cols());
  if (auto m = std::get_if<QuantumMap>(&t))
    return m->dim_in();
  return std::get<Instrument>(t).dim_in();
}

inline std::size_t transformation_dim_out(const Transformation& t) {
  if (auto u = std::get_if<Operator>(&t))
    return static_cast<std::size_t>(u->rows());
  if (auto m = std::get_if<QuantumMap>(&t))
    return m->dim_out();
  return std::get<Instrument>(t).dim_out();
}

inline bool all_true(const std::vector<bool>& mask) {
  for (bool b : mask)
    if (!b)
      return false;
  return true;
}

/// Throws InvalidInput when the task's parts do not fit together.
inline void validate(const InferenceTask& task) {
  if (transformation_dim_in(task.transformation) != task.dims_in.total())
    throw InvalidInput("task: transformation input dimension does not match dims_in");
  if (transformation_dim_out(task.transformation) != task.dims_out.total())
    throw InvalidInput("task: transformation output dimension does not match dims_out");
  if (task.known_input_mask.size() != task.dims_in.size())
    throw InvalidInput("task: input mask needs one entry per input factor");
  if (task.known_output_mask.size() != task.dims_out.size())
    throw InvalidInput("task: output mask needs one entry per output factor");
  if (auto u = std::get_if<Operator>(&task.transformation); u && !is_unitary(*u))
    throw InvalidInput("task: transformation matrix is not unitary");
  if (auto m = std::get_if<QuantumMap>(&task.transformation);
      m && !classify(*m).is_cptp())
    throw InvalidInput("task: channel is not CPTP");
  if (!task.is_unitary() &&
      !(all_true(task.known_input_mask) && all_true(task.known_output_mask)))
    throw InvalidInput("task: subsystem masks are only supported for unitary "
                       "transformations");
  if (const auto* s = std::get_if<StateSet>(&task.preparation)) {
    if (!task.is_unitary() || task.dims_in.size() != 1)
      throw InvalidInput("task: a state-set preparation needs a unitary on a "
                         "single input factor");
    detail::require_states(s->states, task.dims_in.total(), "task");
  }
}

/// Number of preparation alternatives drawn uniformly by the flat prior.
inline std::size_t preparation_count(const InferenceTask& task) {
  if (const auto* s = std::get_if<StateSet>(&task.preparation))
    return s->states.size();
  return task.dims_in.total();
}

/// Active time reversal: transformation replaced by its adjoint, preparation
/// and test bases and their masks swapped. Channels whose adjoint is not a
/// channel have no active reverse.
inline InferenceTask time_reverse(const InferenceTask& task) {
  validate(task);
  if (task.has_state_set())
    throw InvalidInput("time_reverse: state-set preparations have no test "
                       "counterpart");
  InferenceTask r;
  r.dims_in = task.dims_out;
  r.dims_out = task.dims_in;
  r.known_input_mask = task.known_output_mask;
  r.known_output_mask = task.known_input_mask;
  r.direction = task.direction;
  if (const auto* u = std::get_if<Operator>(&task.transformation)) {
    r.transformation = Operator(u->adjoint());
  } else if (const auto* m = std::get_if<QuantumMap>(&task.transformation)) {
    QuantumMap adj = adjoint_map(*m);
    const auto c = classify(adj);
    if (!c.is_cptp())
      throw NoActiveReverse(
          "time_reverse: the adjoint is not a channel (trace defect " +
          std::to_string(c.tp_defect) + "); no active time reversal exists");
    r.transformation = std::move(adj);
  } else {
    throw InvalidInput("time_reverse: instruments are not supported");
  }
  return r;
}

namespace detail {

/// P(i, x | a) = tr |x><x| O_i[|a><a|] as rows over (i, x).
inline std::vector<std::vector<double>> instrument_kernel(const Instrument& inst) {
  std::vector<std::vector<double>> rows;
  for (std::size_t a = 0; a < inst.dim_in(); ++a) {
    const Operator pa = basis_projector(inst.dim_in(), a);
    std::vector<double> row;
    for (const auto& o : inst.outcomes()) {
      const Operator out = retro::apply(o.map, pa);
      for (std::size_t x = 0; x < inst.dim_out(); ++x)
        row.push_back(out(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x)).real());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<std::string> instrument_output_labels(const Instrument& inst) {
  std::vector<std::string> labels;
  for (const auto& o : inst.outcomes())
    for (std::size_t x = 0; x < inst.dim_out(); ++x)
      labels.push_back(join_labels(o.label, std::to_string(x)));
  return labels;
}

inline PartialOutcome spread(const std::vector<bool>& mask,
                             const std::vector<std::size_t>& given) {
  PartialOutcome out(mask.size());
  std::size_t next = 0;
  for (std::size_t k = 0; k < mask.size(); ++k)
    if (mask[k]) {
      if (next >= given.size())
        throw InvalidInput("solve: not enough given outcomes for the mask");
      out[k] = given[next++];
    }
  if (next != given.size())
    throw InvalidInput("solve: more given outcomes than known factors");
  return out;
}

} // namespace detail

/// Solves the task for the given outcomes of the known data-side factors.
/// For instruments, postdiction takes {outcome index, output basis index}.
inline ProbabilityTable solve(const InferenceTask& task,
                              const std::vector<std::size_t>& given) {
  validate(task);
  const bool predict = task.direction == Direction::Predict;

  if (const auto* s = std::get_if<StateSet>(&task.preparation)) {
    const auto& u = std::get<Operator>(task.transformation);
    if (given.size() != 1)
      throw InvalidInput("solve: expected exactly one given outcome");
    if (predict) {
      if (given[0] >= s->states.size())
        throw InvalidInput("solve: preparation index out of range");
      return predict_general_prep(s->states, u)[given[0]];
    }
    return postdict_general_prep(s->states, u, given[0]);
  }

  if (const auto* u = std::get_if<Operator>(&task.transformation)) {
    if (predict)
      return predict_open(*u, task.dims_in, task.dims_out,
                          detail::spread(task.known_input_mask, given),
                          task.known_output_mask);
    return postdict_open(*u, task.dims_in, task.dims_out,
                         detail::spread(task.known_output_mask, given),
                         task.known_input_mask);
  }

  if (const auto* m = std::get_if<QuantumMap>(&task.transformation)) {
    if (given.size() != 1)
      throw InvalidInput("solve: expected exactly one given outcome");
    return predict ? predict_channel(*m, given[0]) : postdict_channel(*m, given[0]);
  }

  const auto& inst = std::get<Instrument>(task.transformation);
  const auto kernel = detail::instrument_kernel(inst);
  const auto out_labels = detail::instrument_output_labels(inst);
  ProbabilityTable t;
  t.direction = task.direction;
  if (predict) {
    if (given.size() != 1 || given[0] >= inst.dim_in())
      throw InvalidInput("solve: expected one preparation index in range");
    t.given = std::to_string(given[0]);
    for (std::size_t j = 0; j < out_labels.size(); ++j)
      t.push(out_labels[j], kernel[given[0]][j]);
  } else {
    if (given.size() != 2 || given[0] >= inst.size() || given[1] >= inst.dim_out())
      throw InvalidInput("solve: expected {outcome index, output index} in range");
    const std::size_t col = given[0] * inst.dim_out() + given[1];
    t.given = out_labels[col];
    double evidence = 0.0;
    for (const auto& row : kernel)
      evidence += row[col];
    if (evidence < kProbabilityTol)
      throw UndefinedConditional("solve: outcome '" + t.given +
                                 "' is impossible under the flat prior");
    for (std::size_t a = 0; a < kernel.size(); ++a)
      t.push(std::to_string(a), kernel[a][col] / evidence);
    t.factor = 1.0 / evidence;
  }
  t.refresh_defect();
  return t;
}

} // namespace retro
