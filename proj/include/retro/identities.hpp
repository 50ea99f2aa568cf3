#pragma once

// Checks of the symmetry, time-reversal and no-signalling identities between
// inference tasks. Each check evaluates both sides through separate solver
// calls and reports the largest deviation.

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "retro/channels.hpp"
#include "retro/errors.hpp"
#include "retro/inference.hpp"
#include "retro/linalg.hpp"
#include "retro/purify.hpp"

namespace retro {

/// max over (a, x) of |P_post(a|x,U) - P_pre(x|a,U)|.
inline double closed_symmetry_defect(const Operator& u) {
  const auto d = static_cast<std::size_t>(u.rows());
  double worst = 0.0;
  for (std::size_t x = 0; x < d; ++x) {
    const auto post = postdict_closed(u, x, d);
    for (std::size_t a = 0; a < d; ++a)
      worst = std::max(worst, std::abs(post[a] - predict_closed(u, a, d)[x]));
  }
  return worst;
}

struct OpenRatioReport {
  double missing_output = 0.0; // P_post(ab|x) = P_pre(x|ab) / d_Y
  double missing_input = 0.0;  // P_post(a|xy) = d_B P_pre(xy|a)
  double missing_both = 0.0;   // d_Y P_post(a|x) = d_B P_pre(x|a)
  double max_defect() const {
    return std::max({missing_output, missing_input, missing_both});
  }
};

/// Ratio laws between prediction and postdiction when parts of the input
/// (B) and output (Y) are left out; dims are {d_A, d_B} and {d_X, d_Y}.
inline OpenRatioReport open_ratio_check(const Operator& u,
                                        const DimsPartition& dims_in,
                                        const DimsPartition& dims_out) {
  if (dims_in.size() != 2 || dims_out.size() != 2)
    throw InvalidInput("open_ratio_check: expected two input and two output factors");
  const std::size_t da = dims_in[0], db = dims_in[1];
  const std::size_t dx = dims_out[0], dy = dims_out[1];
  const auto fdb = static_cast<double>(db), fdy = static_cast<double>(dy);
  OpenRatioReport r;

  for (std::size_t x = 0; x < dx; ++x) {
    const auto post = postdict_open(u, dims_in, dims_out, {x, std::nullopt}, {true, true});
    for (std::size_t a = 0; a < da; ++a)
      for (std::size_t b = 0; b < db; ++b) {
        const auto pre = predict_open(u, dims_in, dims_out, {a, b}, {true, false});
        r.missing_output = std::max(
            r.missing_output, std::abs(post[a * db + b] - pre[x] / fdy));
      }
  }

  for (std::size_t a = 0; a < da; ++a) {
    const auto pre = predict_open(u, dims_in, dims_out, {a, std::nullopt}, {true, true});
    for (std::size_t x = 0; x < dx; ++x)
      for (std::size_t y = 0; y < dy; ++y) {
        const auto post = postdict_open(u, dims_in, dims_out, {x, y}, {true, false});
        r.missing_input = std::max(
            r.missing_input, std::abs(post[a] - fdb * pre[x * dy + y]));
      }
  }

  for (std::size_t x = 0; x < dx; ++x) {
    const auto post = postdict_open(u, dims_in, dims_out, {x, std::nullopt}, {true, false});
    for (std::size_t a = 0; a < da; ++a) {
      const auto pre = predict_open(u, dims_in, dims_out, {a, std::nullopt}, {true, false});
      r.missing_both =
          std::max(r.missing_both, std::abs(fdy * post[a] - fdb * pre[x]));
    }
  }
  return r;
}

/// The four readings of one Born-rule number: prediction and postdiction
/// with the transformation and with its adjoint.
struct FourTaskReport {
  double born = 0.0;          // reference value
  double predict = 0.0;       // P_pre(x|a, T)
  double postdict = 0.0;      // P_post(a|x, T)
  double predict_rev = 0.0;   // P_pre(a|x, T^dagger)
  double postdict_rev = 0.0;  // P_post(x|a, T^dagger)

  double max_defect() const {
    return std::max({std::abs(predict - born), std::abs(postdict - born),
                     std::abs(predict_rev - born), std::abs(postdict_rev - born)});
  }
};

inline FourTaskReport four_task_check(const Operator& u, std::size_t a,
                                      std::size_t x) {
  detail::require_unitary(u, "four_task_check");
  const auto d = static_cast<std::size_t>(u.rows());
  if (a >= d || x >= d)
    throw InvalidInput("four_task_check: outcome out of range");
  const Operator ud = u.adjoint();
  FourTaskReport r;
  r.born = std::norm(
      (basis_ket(d, x).adjoint() * u * basis_ket(d, a))(0, 0));
  r.predict = predict_closed(u, a, d)[x];
  r.postdict = postdict_closed(u, x, d)[a];
  r.predict_rev = predict_closed(ud, x, d)[a];
  r.postdict_rev = postdict_closed(ud, a, d)[x];
  return r;
}

/// Bistochastic variant: the reference is tr |x><x| Phi[|a><a|]. Throws
/// NoActiveReverse when the adjoint is not a channel.
inline FourTaskReport four_task_check(const QuantumMap& channel, std::size_t a,
                                      std::size_t x) {
  const QuantumMap reversed = adjoint_map(channel);
  if (!is_trace_preserving(reversed))
    throw NoActiveReverse("four_task_check: adjoint channel is not trace "
                          "preserving; the channel is not unital");
  const auto xi = static_cast<Eigen::Index>(x);
  FourTaskReport r;
  r.born = retro::apply(channel, basis_projector(channel.dim_in(), a))(xi, xi).real();
  r.predict = predict_channel(channel, a)[x];
  r.postdict = postdict_channel(channel, x)[a];
  r.predict_rev = predict_channel(reversed, x)[a];
  r.postdict_rev = postdict_channel(reversed, a)[x];
  return r;
}

/// Time-reversed open tasks (transformation U^dagger from X (x) Y to A (x) B)
/// against the forward tasks.
struct OpenReversalReport {
  double pre_a_xy = 0.0;  // P_pre(a|xy,U^dag)  = P_post(a|xy,U)
  double pre_ab_x = 0.0;  // P_pre(ab|x,U^dag)  = P_post(ab|x,U)
  double post_xy_a = 0.0; // P_post(xy|a,U^dag) = P_pre(xy|a,U)
  double post_x_ab = 0.0; // P_post(x|ab,U^dag) = P_pre(x|ab,U)
  double pre_a_x = 0.0;   // P_pre(a|x,U^dag)   = P_post(a|x,U)
  double post_x_a = 0.0;  // P_post(x|a,U^dag)  = P_pre(x|a,U)
  double max_defect() const {
    return std::max({pre_a_xy, pre_ab_x, post_xy_a, post_x_ab, pre_a_x, post_x_a});
  }
};

inline OpenReversalReport open_reversal_check(const Operator& u,
                                              const DimsPartition& dims_in,
                                              const DimsPartition& dims_out) {
  if (dims_in.size() != 2 || dims_out.size() != 2)
    throw InvalidInput("open_reversal_check: expected two input and two output factors");
  const Operator ud = u.adjoint();
  const std::size_t da = dims_in[0], db = dims_in[1];
  const std::size_t dx = dims_out[0], dy = dims_out[1];
  const auto none = std::nullopt;
  auto worst = [](double& slot, double lhs, double rhs) {
    slot = std::max(slot, std::abs(lhs - rhs));
  };
  OpenReversalReport r;

  for (std::size_t x = 0; x < dx; ++x)
    for (std::size_t y = 0; y < dy; ++y) {
      const auto lhs = predict_open(ud, dims_out, dims_in, {x, y}, {true, false});
      const auto rhs = postdict_open(u, dims_in, dims_out, {x, y}, {true, false});
      for (std::size_t a = 0; a < da; ++a)
        worst(r.pre_a_xy, lhs[a], rhs[a]);
    }

  for (std::size_t x = 0; x < dx; ++x) {
    const auto lhs = predict_open(ud, dims_out, dims_in, {x, none}, {true, true});
    const auto rhs = postdict_open(u, dims_in, dims_out, {x, none}, {true, true});
    for (std::size_t i = 0; i < da * db; ++i)
      worst(r.pre_ab_x, lhs[i], rhs[i]);
    const auto lhs2 = predict_open(ud, dims_out, dims_in, {x, none}, {true, false});
    const auto rhs2 = postdict_open(u, dims_in, dims_out, {x, none}, {true, false});
    for (std::size_t a = 0; a < da; ++a)
      worst(r.pre_a_x, lhs2[a], rhs2[a]);
  }

  for (std::size_t a = 0; a < da; ++a) {
    const auto lhs = postdict_open(ud, dims_out, dims_in, {a, none}, {true, true});
    const auto rhs = predict_open(u, dims_in, dims_out, {a, none}, {true, true});
    for (std::size_t i = 0; i < dx * dy; ++i)
      worst(r.post_xy_a, lhs[i], rhs[i]);
    const auto lhs2 = postdict_open(ud, dims_out, dims_in, {a, none}, {true, false});
    const auto rhs2 = predict_open(u, dims_in, dims_out, {a, none}, {true, false});
    for (std::size_t x = 0; x < dx; ++x)
      worst(r.post_x_a, lhs2[x], rhs2[x]);
    for (std::size_t b = 0; b < db; ++b) {
      const auto lhs3 = postdict_open(ud, dims_out, dims_in, {a, b}, {true, false});
      const auto rhs3 = predict_open(u, dims_in, dims_out, {a, b}, {true, false});
      for (std::size_t x = 0; x < dx; ++x)
        worst(r.post_x_ab, lhs3[x], rhs3[x]);
    }
  }
  return r;
}

/// Dilation unitary with the ancilla rotated to input basis element 0 of B.
inline Operator ancilla_aligned_unitary(const Purification& p) {
  return p.unitary * tensor(identity(p.d_a()), ancilla_basis(p));
}

struct TowardPastReport {
  double channel_value = 0.0;   // tr |x><x| Phi[|a><a|]
  double reversed_value = 0.0;  // P_post(x|ab, U_Phi^dagger)
  double defect() const { return std::abs(channel_value - reversed_value); }
};

/// The channel's Born value as a postdiction for the reversed dilation. This
/// holds whether or not the channel has an active time reverse.
inline TowardPastReport channel_toward_past_check(const QuantumMap& channel,
                                                  const Purification& p,
                                                  std::size_t a, std::size_t x) {
  const Operator ud = ancilla_aligned_unitary(p).adjoint();
  TowardPastReport r;
  r.channel_value = predict_channel(channel, a)[x];
  r.reversed_value =
      postdict_open(ud, p.dims_out, p.dims_in, {a, std::size_t{0}}, {true, false})[x];
  return r;
}

inline TowardPastReport channel_toward_past_check(const QuantumMap& channel,
                                                  std::size_t a, std::size_t x) {
  return channel_toward_past_check(channel, stinespring(channel), a, x);
}

/// max over (a, x) of the toward-the-past defect on the canonical dilation.
inline double channel_toward_past_defect(const QuantumMap& channel) {
  const auto p = stinespring(channel);
  double worst = 0.0;
  for (std::size_t a = 0; a < channel.dim_in(); ++a)
    for (std::size_t x = 0; x < channel.dim_out(); ++x)
      worst = std::max(worst, channel_toward_past_check(channel, p, a, x).defect());
  return worst;
}

/// max over x of |postdict_channel - postdict_via_purification|; outcomes
/// that are impossible under the flat prior are skipped.
inline double post_channel_ratio_defect(const QuantumMap& channel,
                                        const Purification& p) {
  double worst = 0.0;
  for (std::size_t x = 0; x < channel.dim_out(); ++x) {
    ProbabilityTable direct;
    try {
      direct = postdict_channel(channel, x);
    } catch (const UndefinedConditional&) {
      continue;
    }
    const auto purified = postdict_via_purification(p, x);
    worst = std::max(worst, max_table_diff(direct, purified));
  }
  return worst;
}

struct NoSignallingReport {
  /// |sum_y P(x,y | rho, F o E) - P(x | rho, E)|
  double channel_defect = 0.0;
  /// |sum_y P_post(xy | abc, U_E^dag U_F^dag) - P_post(x | abc, U_E^dag)|
  double purified_defect = 0.0;
  /// |P_post(xy | abc, U_E^dag U_F^dag) - tr F_y[E_x[|a><a|]]|
  double purified_joint_defect = 0.0;
  /// |P(x | y) from the joint table - tr F_y[E_x[rho]] / tr F_y[E[rho]]|
  double conditional_defect = 0.0;
  ProbabilityTable marginal; // P(x | rho, E)
  std::vector<ProbabilityTable> conditionals; // P(x | y, rho, F o E)
};

/// Unitary W on A (x) B (x) C realising F after E, with the ancillas of both
/// dilations at basis element 0. Output factors: (Z, P_F, Z_F, P_E, Z_E).
struct ComposedDilation {
  Operator unitary;
  DimsPartition dims_in;
  DimsPartition dims_out;
};

inline ComposedDilation compose_dilations(const Purification& pe,
                                          const Purification& pf) {
  if (!pe.pointer_dims || !pf.pointer_dims)
    throw InvalidInput("compose_dilations: instrument dilations required");
  if (pe.d_x() != pf.d_a())
    throw InvalidInput("compose_dilations: dimension mismatch between E and F");
  const std::size_t d_d = pe.d_x();
  const std::size_t ne = (*pe.pointer_dims)[0], re = (*pe.pointer_dims)[1];
  const std::size_t d_c = pf.d_b();
  const Operator ue = ancilla_aligned_unitary(pe);
  const Operator uf = ancilla_aligned_unitary(pf);

  const Operator first = tensor(ue, identity(d_c)); // -> (D, P_E, Z_E, C)
  const std::size_t perm[] = {0, 3, 1, 2};          // -> (D, C, P_E, Z_E)
  const Operator reorder =
      permutation_operator(DimsPartition{d_d, ne, re, d_c}, perm);
  const Operator second = tensor(uf, identity(ne * re));
  ComposedDilation w;
  w.unitary = second * reorder * first;
  w.dims_in = DimsPartition{pe.d_a(), pe.d_b(), d_c};
  w.dims_out = DimsPartition{pf.d_x(), (*pf.pointer_dims)[0],
                             (*pf.pointer_dims)[1], ne, re};
  return w;
}

/// No signalling from the later operation F on the statistics of E, read as
/// prediction on rho and, via dilations, as postdiction from the reversed
/// unitaries; plus the conditional table P(x | y).
inline NoSignallingReport no_signalling_check(const Instrument& e,
                                              const Instrument& f,
                                              const Operator& rho) {
  if (e.dim_out() != f.dim_in())
    throw InvalidInput("no_signalling_check: E output dimension " +
                       std::to_string(e.dim_out()) +
                       " does not match F input dimension " +
                       std::to_string(f.dim_in()));
  NoSignallingReport r;
  const Instrument fe = compose_sequential(e, f);
  const auto joint = outcome_probabilities(fe, rho);
  r.marginal = outcome_probabilities(e, rho);
  const std::size_t ne = e.size(), nf = f.size();

  // (i) marginal of the joint table
  for (std::size_t x = 0; x < ne; ++x) {
    double sum = 0.0;
    for (std::size_t y = 0; y < nf; ++y)
      sum += joint[x * nf + y];
    r.channel_defect = std::max(r.channel_defect, std::abs(sum - r.marginal[x]));
  }

  // (iii) conditioning on the later outcome
  const Operator mixed = retro::apply(coarse_grain(e), rho);
  for (std::size_t y = 0; y < nf; ++y) {
    double py = 0.0;
    for (std::size_t x = 0; x < ne; ++x)
      py += joint[x * nf + y];
    if (py <= kProbabilityTol)
      continue;
    const auto& fy = f.outcomes()[y].map;
    const double denom = retro::apply(fy, mixed).trace().real();
    ProbabilityTable cond;
    cond.given = f.outcomes()[y].label;
    cond.direction = Direction::Predict;
    for (std::size_t x = 0; x < ne; ++x) {
      const double from_joint = joint[x * nf + y] / py;
      const double direct =
          retro::apply(fy, retro::apply(e.outcomes()[x].map, rho)).trace().real() / denom;
      r.conditional_defect =
          std::max(r.conditional_defect, std::abs(from_joint - direct));
      cond.push(e.outcomes()[x].label, from_joint);
    }
    cond.refresh_defect();
    r.conditionals.push_back(std::move(cond));
  }

  // (ii) postdiction through the reversed dilations
  const auto pe = purify_instrument(e);
  const auto pf = purify_instrument(f);
  const auto w = compose_dilations(pe, pf);
  const Operator wd = w.unitary.adjoint();
  const Operator ued = ancilla_aligned_unitary(pe).adjoint();
  const DimsPartition e_out{pe.d_x(), (*pe.pointer_dims)[0], (*pe.pointer_dims)[1]};
  const std::vector<bool> guess_xy{false, true, false, true, false};
  for (std::size_t a = 0; a < e.dim_in(); ++a) {
    const auto both = postdict_open(wd, w.dims_out, w.dims_in,
                                    {a, std::size_t{0}, std::size_t{0}}, guess_xy);
    const auto only_x = postdict_open(ued, e_out, pe.dims_in,
                                      {a, std::size_t{0}}, {false, true, false});
    const Operator pa = basis_projector(e.dim_in(), a);
    for (std::size_t x = 0; x < ne; ++x) {
      double sum = 0.0;
      const Operator ex = retro::apply(e.outcomes()[x].map, pa);
      for (std::size_t y = 0; y < nf; ++y) {
        const double pxy = both[y * ne + x];
        sum += pxy;
        const double direct =
            retro::apply(f.outcomes()[y].map, ex).trace().real();
        r.purified_joint_defect =
            std::max(r.purified_joint_defect, std::abs(pxy - direct));
      }
      r.purified_defect = std::max(r.purified_defect, std::abs(sum - only_x[x]));
    }
  }
  return r;
}

struct InferenceSymmetryReport {
  bool unital = false;
  bool adjoint_cptp = false;
  bool table_symmetric = false;
  double unital_defect = 0.0;
  /// max |P_pre(x_i|a_j) - P_post(a_j|x_i)| over the sampled basis pairs.
  double max_table_defect = 0.0;

  bool consistent() const {
    return unital == adjoint_cptp && unital == table_symmetric;
  }
};

/// Unital criterion cross-checked against the adjoint and against direct
/// comparison of prediction and postdiction tables in the computational
/// bases and `rotations` Haar-random basis pairs.
inline InferenceSymmetryReport inference_symmetry_report(
    const QuantumMap& channel, double tol = kStructuralTol,
    std::size_t rotations = 5, std::uint64_t seed = 0x5EED) {
  detail::require_cptp(channel, "inference_symmetry_report");
  InferenceSymmetryReport r;
  const auto c = classify(channel);
  r.unital_defect = c.unital_defect;
  r.unital = c.unital_defect < tol;
  r.adjoint_cptp = classify(adjoint_map(channel)).is_cptp();

  bool impossible_outcome = false;
  for (std::size_t k = 0; k <= rotations; ++k) {
    const std::size_t din = channel.dim_in(), dout = channel.dim_out();
    const Operator wa = k == 0 ? identity(din) : haar_random_unitary(din, mix64(seed) + 2 * k);
    const Operator wx = k == 0 ? identity(dout) : haar_random_unitary(dout, mix64(seed) + 2 * k + 1);
    std::vector<Operator> kraus;
    for (const auto& kr : channel.kraus())
      kraus.push_back(wx.adjoint() * kr * wa);
    const QuantumMap rotated(std::move(kraus), din, dout);
    for (std::size_t x = 0; x < dout; ++x) {
      ProbabilityTable post;
      try {
        post = postdict_channel(rotated, x);
      } catch (const UndefinedConditional&) {
        impossible_outcome = true;
        continue;
      }
      for (std::size_t a = 0; a < din; ++a)
        r.max_table_defect = std::max(
            r.max_table_defect, std::abs(predict_channel(rotated, a)[x] - post[a]));
    }
  }
  r.table_symmetric = !impossible_outcome && r.max_table_defect < tol;
  return r;
}

/// A channel is inference symmetric exactly when it preserves the identity.
inline bool is_inference_symmetric(const QuantumMap& channel,
                                   double tol = kStructuralTol) {
  detail::require_cptp(channel, "is_inference_symmetric");
  return classify(channel).unital_defect < tol;
}

struct DeterministicEffectReport {
  std::vector<double> weights;      // least-squares solution
  std::size_t rank = 0;             // rank of the constraint system
  std::size_t unknowns = 0;         // d_X
  double solution_defect = 0.0;     // max |w(x) - 1|
  double smallest_singular = 0.0;   // min residual of a unit-distance alternative
  double min_candidate_residual = std::numeric_limits<double>::infinity();

  bool unique_discard(double alt_threshold = 1e-6) const {
    return rank == unknowns && solution_defect < 1e-10 &&
           smallest_singular > alt_threshold &&
           min_candidate_residual > alt_threshold;
  }
};

/// Solves sum_x w(x) <x|Phi[E_ij]|x> = delta_ij over the matrix units E_ij,
/// i.e. "the effect diag(w) has probability 1 on every input". The discard
/// w = 1 always solves it; the report shows whether it is the only solution.
/// Explicit alternatives tried: w = 1 +/- e_x and w = d_X e_x.
inline DeterministicEffectReport deterministic_effect_check(const QuantumMap& channel) {
  detail::require_cptp(channel, "deterministic_effect_check");
  const std::size_t din = channel.dim_in(), dout = channel.dim_out();
  const auto rows = static_cast<Eigen::Index>(2 * din * din);
  const auto cols = static_cast<Eigen::Index>(dout);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows);
  const auto units = matrix_units(din);
  for (std::size_t u = 0; u < units.size(); ++u) {
    const Operator out = retro::apply(channel, units[u]);
    const auto re = static_cast<Eigen::Index>(2 * u), im = re + 1;
    for (std::size_t x = 0; x < dout; ++x) {
      const auto xi = static_cast<Eigen::Index>(x);
      m(re, xi) = out(xi, xi).real();
      m(im, xi) = out(xi, xi).imag();
    }
    rhs(re) = (u / din == u % din) ? 1.0 : 0.0;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  DeterministicEffectReport r;
  r.unknowns = dout;
  const double cutoff = 1e-9 * std::max(1.0, sv.size() ? sv(0) : 0.0);
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > cutoff)
      ++r.rank;
  r.smallest_singular = sv.size() ? sv(sv.size() - 1) : 0.0;
  const Eigen::VectorXd w = svd.solve(rhs);
  for (Eigen::Index x = 0; x < w.size(); ++x) {
    r.weights.push_back(w(x));
    r.solution_defect = std::max(r.solution_defect, std::abs(w(x) - 1.0));
  }

  auto residual = [&](const Eigen::VectorXd& cand) { return (m * cand - rhs).norm(); };
  for (std::size_t x = 0; x < dout; ++x) {
    for (double step : {1.0, -1.0}) {
      Eigen::VectorXd cand = Eigen::VectorXd::Ones(cols);
      cand(static_cast<Eigen::Index>(x)) += step;
      r.min_candidate_residual = std::min(r.min_candidate_residual, residual(cand));
    }
    Eigen::VectorXd peaked = Eigen::VectorXd::Zero(cols);
    peaked(static_cast<Eigen::Index>(x)) = static_cast<double>(dout);
    if (dout > 1)
      r.min_candidate_residual = std::min(r.min_candidate_residual, residual(peaked));
  }
  return r;
}

struct GeneralPrepReport {
  std::vector<double> direct;    // P_post(psi_i | x, U)
  std::vector<double> purified;  // P_post(a_1 b_i | x, U') / P_post(a_1 | x, U')
  double prediction_defect = 0.0; // |P_pre(x|a_1 b_i,U') - P_pre(x|psi_i,U)|
  double max_defect = 0.0;
};

/// Controlled preparation U_P: |a_1>|b_i> -> |psi_i>|b_i> on A (x) B with
/// dim B = number of states, completed to a unitary.
inline Operator controlled_preparation(const std::vector<Operator>& states,
                                       std::size_t d) {
  detail::require_states(states, d, "controlled_preparation");
  const std::size_t n = states.size();
  Operator up = zeros(d * n, d * n);
  std::vector<bool> fixed(d * n, false);
  for (std::size_t i = 0; i < n; ++i) {
    up.col(static_cast<Eigen::Index>(i)) = tensor(states[i], basis_ket(n, i));
    fixed[i] = true;
  }
  return complete_to_unitary(std::move(up), fixed);
}

/// Postdiction over non-orthogonal preparations as a ratio of open-system
/// postdictions on U' = (U (x) I_B) U_P.
inline GeneralPrepReport general_prep_purified_check(
    const std::vector<Operator>& states, const Operator& u, std::size_t x) {
  detail::require_unitary(u, "general_prep_purified_check");
  const auto d = static_cast<std::size_t>(u.rows());
  const std::size_t n = states.size();
  const Operator uprime = tensor(u, identity(n)) * controlled_preparation(states, d);
  const DimsPartition dims{d, n};

  GeneralPrepReport r;
  const auto direct = postdict_general_prep(states, u, x);
  const auto joint = postdict_open(uprime, dims, dims, {x, std::nullopt}, {true, true});
  const auto first = postdict_open(uprime, dims, dims, {x, std::nullopt}, {true, false});
  if (first[0] < kProbabilityTol)
    throw UndefinedConditional("general_prep_purified_check: outcome " +
                               std::to_string(x) + " is impossible");
  const auto rows = predict_general_prep(states, u);
  for (std::size_t i = 0; i < n; ++i) {
    r.direct.push_back(direct[i]);
    r.purified.push_back(joint[i] / first[0]);
    r.max_defect = std::max(r.max_defect, std::abs(r.direct.back() - r.purified.back()));
    const double pre_prime =
        predict_open(uprime, dims, dims, {std::size_t{0}, i}, {true, false})[x];
    r.prediction_defect = std::max(r.prediction_defect, std::abs(pre_prime - rows[i][x]));
  }
  return r;
}

} // namespace retro
