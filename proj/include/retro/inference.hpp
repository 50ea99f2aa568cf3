#pragma once

// Prediction and postdiction solvers.
//
// Prediction conditions on preparation outcomes and returns probabilities of
// test outcomes; postdiction conditions on test outcomes and returns
// probabilities of preparation outcomes under a flat prior over the
// preparation alternatives. Unknown subsystems on the data side enter with
// weight 1/d (maximally mixed on the input, flat prior on the output);
// subsystems on the guessed side that are not asked about are summed over
// (the identity as discard).

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "retro/channels.hpp"
#include "retro/errors.hpp"
#include "retro/linalg.hpp"
#include "retro/probability_table.hpp"
#include "retro/purify.hpp"

namespace retro {

/// Per-factor outcome; nullopt marks a factor whose outcome is not given.
using PartialOutcome = std::vector<std::optional<std::size_t>>;

inline std::string partial_label(const PartialOutcome& outcome) {
  std::vector<std::string> parts;
  for (const auto& v : outcome)
    parts.push_back(v ? std::to_string(*v) : std::string("_"));
  return join_labels(parts);
}

namespace detail {

inline void require_unitary(const Operator& u, const char* who) {
  if (!is_unitary(u))
    throw InvalidInput(std::string(who) + ": transformation is not unitary");
}

inline void require_cptp(const QuantumMap& channel, const char* who) {
  if (!is_trace_preserving(channel))
    throw InvalidInput(std::string(who) + ": map is not trace preserving");
}

inline void require_dims(const Operator& u, const DimsPartition& dims_in,
                         const DimsPartition& dims_out, const char* who) {
  if (static_cast<std::size_t>(u.cols()) != dims_in.total() ||
      static_cast<std::size_t>(u.rows()) != dims_out.total())
    throw InvalidInput(std::string(who) +
                       ": unitary shape does not match the declared dims");
}

inline void require_partial(const PartialOutcome& o, const DimsPartition& dims,
                            const char* who) {
  if (o.size() != dims.size())
    throw InvalidInput(std::string(who) +
                       ": partial outcome has wrong number of factors");
  for (std::size_t k = 0; k < o.size(); ++k)
    if (o[k] && *o[k] >= dims[k])
      throw InvalidInput(std::string(who) + ": outcome " +
                         std::to_string(*o[k]) + " out of range for factor " +
                         std::to_string(k));
}

inline bool matches(const std::vector<std::size_t>& digits,
                    const PartialOutcome& known) {
  for (std::size_t k = 0; k < digits.size(); ++k)
    if (known[k] && *known[k] != digits[k])
      return false;
  return true;
}

/// Sub-partition and per-index labels of the factors selected by `mask`.
struct Selection {
  std::vector<std::size_t> factors;
  std::vector<std::size_t> dims;
  std::size_t total = 1;

  Selection(const DimsPartition& full, const std::vector<bool>& mask) {
    for (std::size_t k = 0; k < full.size(); ++k)
      if (mask[k]) {
        factors.push_back(k);
        dims.push_back(full[k]);
        total *= full[k];
      }
  }

  std::size_t index(const std::vector<std::size_t>& digits) const {
    std::size_t i = 0;
    for (std::size_t k = 0; k < factors.size(); ++k)
      i = i * dims[k] + digits[factors[k]];
    return i;
  }

  std::vector<std::string> labels() const {
    if (factors.empty())
      return {"discard"};
    std::vector<std::string> out;
    const DimsPartition sub(dims);
    for (std::size_t i = 0; i < total; ++i)
      out.push_back(digits_label(sub.decode(i)));
    return out;
  }
};

inline ProbabilityTable make_table(std::string given, Direction dir,
                                   std::vector<std::string> labels,
                                   std::vector<double> probs) {
  ProbabilityTable t;
  t.given = std::move(given);
  t.direction = dir;
  t.labels = std::move(labels);
  t.probabilities = std::move(probs);
  t.refresh_defect();
  return t;
}

} // namespace detail

/// |<x|U|a>|^2 for computational-basis indices.
inline double born_probability(const Operator& u, std::size_t a,
                               std::size_t x) {
  return std::norm(u(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(a)));
}

/// P_pre(x | a, U) = |<x|U|a>|^2 over x.
inline ProbabilityTable predict_closed(const Operator& u, std::size_t a,
                                       std::size_t d) {
  detail::require_unitary(u, "predict_closed");
  if (static_cast<std::size_t>(u.rows()) != d)
    throw InvalidInput("predict_closed: unitary dimension differs from d");
  if (a >= d)
    throw InvalidInput("predict_closed: preparation outcome out of range");
  std::vector<std::string> labels;
  std::vector<double> probs;
  for (std::size_t x = 0; x < d; ++x) {
    labels.push_back(std::to_string(x));
    probs.push_back(born_probability(u, a, x));
  }
  return detail::make_table(std::to_string(a), Direction::Predict,
                            std::move(labels), std::move(probs));
}

/// P_post(a | x, U) under the flat prior P(a) = 1/d. Since the evidence is
/// P(x) = 1/d for any unitary, this is again |<x|U|a>|^2.
inline ProbabilityTable postdict_closed(const Operator& u, std::size_t x,
                                        std::size_t d) {
  detail::require_unitary(u, "postdict_closed");
  if (static_cast<std::size_t>(u.rows()) != d)
    throw InvalidInput("postdict_closed: unitary dimension differs from d");
  if (x >= d)
    throw InvalidInput("postdict_closed: test outcome out of range");
  const double prior = 1.0 / static_cast<double>(d);
  double evidence = 0.0;
  for (std::size_t a = 0; a < d; ++a)
    evidence += prior * born_probability(u, a, x);
  std::vector<std::string> labels;
  std::vector<double> probs;
  for (std::size_t a = 0; a < d; ++a) {
    labels.push_back(std::to_string(a));
    probs.push_back(born_probability(u, a, x) * prior / evidence);
  }
  auto t = detail::make_table(std::to_string(x), Direction::Postdict,
                              std::move(labels), std::move(probs));
  t.factor = prior / evidence;
  return t;
}

/// Prediction on a partitioned closed system. Input factors without a known
/// outcome carry the maximally mixed state; output factors outside
/// `guessed_output_mask` are discarded.
inline ProbabilityTable predict_open(const Operator& u,
                                     const DimsPartition& dims_in,
                                     const DimsPartition& dims_out,
                                     const PartialOutcome& known_input,
                                     const std::vector<bool>& guessed_output_mask) {
  detail::require_unitary(u, "predict_open");
  detail::require_dims(u, dims_in, dims_out, "predict_open");
  detail::require_partial(known_input, dims_in, "predict_open");
  if (guessed_output_mask.size() != dims_out.size())
    throw InvalidInput("predict_open: output mask has wrong number of factors");

  const detail::Selection guessed(dims_out, guessed_output_mask);
  std::size_t unknown = 1;
  for (std::size_t k = 0; k < dims_in.size(); ++k)
    if (!known_input[k])
      unknown *= dims_in[k];
  const double weight = 1.0 / static_cast<double>(unknown);

  std::vector<double> probs(guessed.total, 0.0);
  for (std::size_t in = 0; in < dims_in.total(); ++in) {
    if (!detail::matches(dims_in.decode(in), known_input))
      continue;
    for (std::size_t out = 0; out < dims_out.total(); ++out)
      probs[guessed.index(dims_out.decode(out))] +=
          weight * born_probability(u, in, out);
  }
  return detail::make_table(partial_label(known_input), Direction::Predict,
                            guessed.labels(), std::move(probs));
}

/// Postdiction on a partitioned closed system. Output factors without a
/// known outcome carry a flat prior 1/d; input factors outside
/// `guessed_input_mask` are summed over.
inline ProbabilityTable postdict_open(const Operator& u,
                                      const DimsPartition& dims_in,
                                      const DimsPartition& dims_out,
                                      const PartialOutcome& known_output,
                                      const std::vector<bool>& guessed_input_mask) {
  detail::require_unitary(u, "postdict_open");
  detail::require_dims(u, dims_in, dims_out, "postdict_open");
  detail::require_partial(known_output, dims_out, "postdict_open");
  if (guessed_input_mask.size() != dims_in.size())
    throw InvalidInput("postdict_open: input mask has wrong number of factors");

  const detail::Selection guessed(dims_in, guessed_input_mask);
  std::size_t unknown = 1;
  for (std::size_t k = 0; k < dims_out.size(); ++k)
    if (!known_output[k])
      unknown *= dims_out[k];
  const double weight = 1.0 / static_cast<double>(unknown);

  std::vector<double> probs(guessed.total, 0.0);
  for (std::size_t out = 0; out < dims_out.total(); ++out) {
    if (!detail::matches(dims_out.decode(out), known_output))
      continue;
    for (std::size_t in = 0; in < dims_in.total(); ++in)
      probs[guessed.index(dims_in.decode(in))] +=
          weight * born_probability(u, in, out);
  }
  return detail::make_table(partial_label(known_output), Direction::Postdict,
                            guessed.labels(), std::move(probs));
}

/// P_pre(x | a, Phi) = tr |x><x| Phi[|a><a|].
inline ProbabilityTable predict_channel(const QuantumMap& channel,
                                        std::size_t a) {
  detail::require_cptp(channel, "predict_channel");
  if (a >= channel.dim_in())
    throw InvalidInput("predict_channel: preparation outcome out of range");
  const Operator out = retro::apply(channel, basis_projector(channel.dim_in(), a));
  std::vector<std::string> labels;
  std::vector<double> probs;
  for (std::size_t x = 0; x < channel.dim_out(); ++x) {
    labels.push_back(std::to_string(x));
    probs.push_back(out(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x)).real());
  }
  return detail::make_table(std::to_string(a), Direction::Predict,
                            std::move(labels), std::move(probs));
}

/// P_post(a | x, Phi) = tr |x><x| Phi[|a><a|] / tr |x><x| Phi[I_A], with the
/// factor f(x) = 1 / tr |x><x| Phi[I_A] recorded on the table.
inline ProbabilityTable postdict_channel(const QuantumMap& channel,
                                         std::size_t x) {
  detail::require_cptp(channel, "postdict_channel");
  if (x >= channel.dim_out())
    throw InvalidInput("postdict_channel: test outcome out of range");
  const auto xi = static_cast<Eigen::Index>(x);
  const double evidence =
      retro::apply(channel, identity(channel.dim_in()))(xi, xi).real();
  if (evidence < kProbabilityTol)
    throw UndefinedConditional("postdict_channel: outcome " +
                               std::to_string(x) +
                               " is impossible under the flat prior");
  std::vector<std::string> labels;
  std::vector<double> probs;
  for (std::size_t a = 0; a < channel.dim_in(); ++a) {
    labels.push_back(std::to_string(a));
    probs.push_back(
        retro::apply(channel, basis_projector(channel.dim_in(), a))(xi, xi).real() /
        evidence);
  }
  auto t = detail::make_table(std::to_string(x), Direction::Postdict,
                              std::move(labels), std::move(probs));
  t.factor = 1.0 / evidence;
  return t;
}

/// P_post(a | x, Phi) as P_post(ab | x, U) / P_post(b | x, U) on a dilation,
/// where b is the ancilla (any pure state; the input basis of B is chosen
/// to contain it).
inline ProbabilityTable postdict_via_purification(const Purification& p,
                                                  std::size_t x) {
  validate(p);
  if (x >= p.d_x())
    throw InvalidInput("postdict_via_purification: test outcome out of range");
  const Operator u =
      p.unitary * tensor(identity(p.d_a()), ancilla_basis(p));
  const PartialOutcome known{x, std::nullopt};
  const auto joint =
      postdict_open(u, p.dims_in, p.dims_out, known, {true, true});
  const auto ancilla =
      postdict_open(u, p.dims_in, p.dims_out, known, {false, true});
  const double pb = ancilla[0];
  if (pb < kProbabilityTol)
    throw UndefinedConditional("postdict_via_purification: outcome " +
                               std::to_string(x) +
                               " is impossible under the flat prior");
  std::vector<std::string> labels;
  std::vector<double> probs;
  for (std::size_t a = 0; a < p.d_a(); ++a) {
    labels.push_back(std::to_string(a));
    probs.push_back(joint[a * p.d_b()] / pb);
  }
  auto t = detail::make_table(std::to_string(x), Direction::Postdict,
                              std::move(labels), std::move(probs));
  t.factor = 1.0 / (static_cast<double>(p.d_y()) * pb);
  return t;
}

inline ProbabilityTable postdict_channel_via_purification(
    const QuantumMap& channel, std::size_t x) {
  return postdict_via_purification(stinespring(channel), x);
}

namespace detail {

inline void require_states(const std::vector<Operator>& states, std::size_t d,
                           const char* who) {
  if (states.empty())
    throw InvalidInput(std::string(who) + ": empty state set");
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& s = states[i];
    if (s.cols() != 1 || static_cast<std::size_t>(s.rows()) != d)
      throw InvalidInput(std::string(who) + ": state " + std::to_string(i) +
                         " is not a length-" + std::to_string(d) + " vector");
    if (std::abs(s.norm() - 1.0) > kStructuralTol)
      throw InvalidInput(std::string(who) + ": state " + std::to_string(i) +
                         " is not normalized");
  }
}

} // namespace detail

inline std::string state_label(std::size_t i) {
  return "psi" + std::to_string(i);
}

/// One table per preparation: P_pre(x | psi_i, U) = |<x|U|psi_i>|^2.
inline std::vector<ProbabilityTable>
predict_general_prep(const std::vector<Operator>& states, const Operator& u) {
  detail::require_unitary(u, "predict_general_prep");
  const auto d = static_cast<std::size_t>(u.rows());
  detail::require_states(states, d, "predict_general_prep");
  std::vector<ProbabilityTable> rows;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const Operator evolved = u * states[i];
    std::vector<std::string> labels;
    std::vector<double> probs;
    for (std::size_t x = 0; x < d; ++x) {
      labels.push_back(std::to_string(x));
      probs.push_back(std::norm(evolved(static_cast<Eigen::Index>(x), 0)));
    }
    rows.push_back(detail::make_table(state_label(i), Direction::Predict,
                                      std::move(labels), std::move(probs)));
  }
  return rows;
}

/// P_post(psi_i | x, U) = P_pre(x | psi_i, U) / (n tr |x><x| U[rho_A]) with
/// rho_A the uniform mixture of the preparations.
inline ProbabilityTable postdict_general_prep(const std::vector<Operator>& states,
                                              const Operator& u, std::size_t x) {
  detail::require_unitary(u, "postdict_general_prep");
  const auto d = static_cast<std::size_t>(u.rows());
  detail::require_states(states, d, "postdict_general_prep");
  if (x >= d)
    throw InvalidInput("postdict_general_prep: test outcome out of range");
  const auto n = static_cast<double>(states.size());
  Operator rho = zeros(d, d);
  for (const auto& s : states)
    rho += projector(s) / n;
  const auto xi = static_cast<Eigen::Index>(x);
  const double evidence = (u * rho * u.adjoint())(xi, xi).real();
  if (evidence < kProbabilityTol)
    throw UndefinedConditional("postdict_general_prep: outcome " +
                               std::to_string(x) + " is impossible");
  std::vector<std::string> labels;
  std::vector<double> probs;
  for (std::size_t i = 0; i < states.size(); ++i) {
    labels.push_back(state_label(i));
    probs.push_back(std::norm((u * states[i])(xi, 0)) / (n * evidence));
  }
  auto t = detail::make_table(std::to_string(x), Direction::Postdict,
                              std::move(labels), std::move(probs));
  t.factor = 1.0 / (n * evidence);
  return t;
}

} // namespace retro
