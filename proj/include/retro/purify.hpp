#pragma once

// Canonical unitary dilations of channels and instruments.
//
// A channel with Kraus operators K_0..K_{r-1} (d_X x d_A) is dilated through
// the isometry V = sum_k K_k (x) |k>_Y, padded with zero Kraus operators until
// d_B = d_X r / d_A is an integer. V fills the columns |a>|0>_B of the
// unitary; the remaining columns are completed by Gram-Schmidt on the
// standard basis. Instruments use the same construction with Y split into a
// pointer factor (one slot per outcome) and a discarded factor Z.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "retro/channels.hpp"
#include "retro/errors.hpp"
#include "retro/linalg.hpp"

namespace retro {

struct Purification {
  /// Unitary on A (x) B, read as a map onto X (x) Y.
  Operator unitary;
  /// Pure density operator |b><b| of the ancilla B.
  Operator ancilla_state;
  DimsPartition dims_in;  // {d_A, d_B}
  DimsPartition dims_out; // {d_X, d_Y}
  /// For instruments: Y = pointer (x) discard.
  std::optional<DimsPartition> pointer_dims;

  std::size_t d_a() const { return dims_in[0]; }
  std::size_t d_b() const { return dims_in[1]; }
  std::size_t d_x() const { return dims_out[0]; }
  std::size_t d_y() const { return dims_out[1]; }
};

/// Throws InvalidInput if any structural invariant fails.
inline void validate(const Purification& p) {
  if (p.dims_in.size() != 2 || p.dims_out.size() != 2)
    throw InvalidInput("Purification: dims must be {d_A, d_B} and {d_X, d_Y}");
  if (p.dims_in.total() != p.dims_out.total())
    throw InvalidInput("Purification: d_A * d_B != d_X * d_Y");
  if (static_cast<std::size_t>(p.unitary.rows()) != p.dims_in.total() ||
      !is_unitary(p.unitary))
    throw InvalidInput("Purification: unitary has wrong size or is not unitary");
  if (static_cast<std::size_t>(p.ancilla_state.rows()) != p.d_b() ||
      !is_pure_state(p.ancilla_state))
    throw InvalidInput("Purification: ancilla is not a pure state on B");
  if (p.pointer_dims && p.pointer_dims->total() != p.d_y())
    throw InvalidInput("Purification: pointer partition does not factor Y");
}

/// Smallest padded block count >= `count` making (d_x * blocks * count) a
/// multiple of d_a.
inline std::size_t padded_kraus_count(std::size_t count, std::size_t d_x,
                                       std::size_t blocks, std::size_t d_a) {
  std::size_t r = count;
  while ((d_x * blocks * r) % d_a != 0)
    ++r;
  return r;
}

/// V = sum_k K_k (x) |k>_Y for a (padded) Kraus list; output ordering X (x) Y.
inline Operator kraus_isometry(const std::vector<Operator>& kraus,
                               std::size_t dim_in, std::size_t dim_out,
                               std::size_t padded_count) {
  if (padded_count < kraus.size())
    throw InvalidInput("kraus_isometry: padded count below Kraus count");
  Operator v = zeros(dim_out * padded_count, dim_in);
  for (std::size_t k = 0; k < kraus.size(); ++k)
    v += tensor(kraus[k], basis_ket(padded_count, k));
  return v;
}

namespace detail {

inline Purification dilate(const Operator& isometry, std::size_t d_a,
                           std::size_t d_x, std::size_t d_y) {
  const std::size_t total = d_x * d_y;
  const std::size_t d_b = total / d_a;
  Operator u = zeros(total, total);
  std::vector<bool> fixed(total, false);
  for (std::size_t a = 0; a < d_a; ++a) {
    const auto col = static_cast<Eigen::Index>(a * d_b);
    u.col(col) = isometry.col(static_cast<Eigen::Index>(a));
    fixed[a * d_b] = true;
  }
  Purification p;
  p.unitary = complete_to_unitary(std::move(u), fixed);
  p.ancilla_state = basis_projector(d_b, 0);
  p.dims_in = DimsPartition{d_a, d_b};
  p.dims_out = DimsPartition{d_x, d_y};
  return p;
}

} // namespace detail

/// Canonical Stinespring dilation with ancilla |0>_B.
inline Purification stinespring(const QuantumMap& channel) {
  const auto c = classify(channel);
  if (!c.is_cptp())
    throw InvalidInput("stinespring: map is not CPTP (trace defect " +
                       std::to_string(c.tp_defect) + ")");
  const std::size_t d_a = channel.dim_in(), d_x = channel.dim_out();
  const std::size_t r =
      padded_kraus_count(channel.kraus().size(), d_x, 1, d_a);
  const Operator v = kraus_isometry(channel.kraus(), d_a, d_x, r);
  return detail::dilate(v, d_a, d_x, r);
}

/// Ozawa-style dilation: Y = pointer (dimension = number of outcomes) (x) Z.
inline Purification purify_instrument(const Instrument& inst) {
  const std::size_t d_a = inst.dim_in(), d_x = inst.dim_out();
  const std::size_t n = inst.size();
  std::size_t r_max = 1;
  for (const auto& o : inst.outcomes())
    r_max = std::max(r_max, o.map.kraus().size());
  const std::size_t r = padded_kraus_count(r_max, d_x, n, d_a);

  // V = sum_{i,k} K_{ik} (x) |i>_Y (x) |k>_Z
  Operator v = zeros(d_x * n * r, d_a);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& kraus = inst.outcomes()[i].map.kraus();
    for (std::size_t k = 0; k < kraus.size(); ++k)
      v += tensor({kraus[k], basis_ket(n, i), basis_ket(r, k)});
  }
  auto p = detail::dilate(v, d_a, d_x, n * r);
  p.pointer_dims = DimsPartition{n, r};
  return p;
}

/// Pure ket b with |b><b| = ancilla_state (global phase fixed by the largest
/// component being real positive).
inline Operator ancilla_ket(const Purification& p) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
      Eigen::MatrixXcd(p.ancilla_state));
  const auto n = es.eigenvalues().size();
  Eigen::VectorXcd v = es.eigenvectors().col(n - 1);
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  v *= std::abs(v(arg)) / v(arg);
  return Operator(v);
}

/// Unitary on B whose first column is the ancilla ket, so that the ancilla is
/// basis element 0 of the input basis {V|j>} of B.
inline Operator ancilla_basis(const Purification& p) {
  const Operator b = ancilla_ket(p);
  Operator m = zeros(p.d_b(), p.d_b());
  m.col(0) = b;
  std::vector<bool> fixed(p.d_b(), false);
  fixed[0] = true;
  return complete_to_unitary(std::move(m), fixed);
}

/// U (rho (x) b) U^dagger on X (x) Y.
inline Operator purified_output(const Purification& p, const Operator& rho) {
  if (static_cast<std::size_t>(rho.rows()) != p.d_a() || !is_square(rho))
    throw InvalidInput("purified_output: operator does not act on A");
  return p.unitary * tensor(rho, p.ancilla_state) * p.unitary.adjoint();
}

/// tr_Y U[rho (x) b]
inline Operator purified_action(const Purification& p, const Operator& rho) {
  return partial_trace(purified_output(p, rho), p.dims_out, {0});
}

/// tr_{YZ}((|i><i|_Y (x) I_Z) U[rho (x) b]) for pointer value i.
inline Operator purified_outcome(const Purification& p, const Operator& rho,
                                 std::size_t pointer) {
  if (!p.pointer_dims)
    throw InvalidInput("purified_outcome: purification has no pointer factor");
  const std::size_t n = (*p.pointer_dims)[0], r = (*p.pointer_dims)[1];
  if (pointer >= n)
    throw InvalidInput("purified_outcome: pointer value out of range");
  const Operator proj =
      tensor({identity(p.d_x()), basis_projector(n, pointer), identity(r)});
  const Operator sigma = proj * purified_output(p, rho) * proj;
  return partial_trace(sigma, DimsPartition{p.d_x(), n, r}, {0});
}

/// Another valid dilation: U' = (I_X (x) W) U (I_A (x) V^dagger) with ancilla
/// V b V^dagger. `input_rotation` acts on B, `output_rotation` on Y.
inline Purification rotate_ancilla(const Purification& p,
                                   const Operator& input_rotation,
                                   const Operator& output_rotation) {
  if (!is_unitary(input_rotation) ||
      static_cast<std::size_t>(input_rotation.rows()) != p.d_b())
    throw InvalidInput("rotate_ancilla: input rotation is not a unitary on B");
  if (!is_unitary(output_rotation) ||
      static_cast<std::size_t>(output_rotation.rows()) != p.d_y())
    throw InvalidInput("rotate_ancilla: output rotation is not a unitary on Y");
  Purification q = p;
  q.unitary = tensor(identity(p.d_x()), output_rotation) * p.unitary *
              tensor(identity(p.d_a()), input_rotation.adjoint());
  q.ancilla_state =
      input_rotation * p.ancilla_state * input_rotation.adjoint();
  q.pointer_dims.reset();
  return q;
}

struct PurificationReport {
  double max_defect = 0.0;
  std::size_t evaluations = 0;
};

/// Round-trip defect of a channel dilation on the matrix units of A plus
/// `trials` random states.
inline PurificationReport verify_purification(const QuantumMap& original,
                                              const Purification& p,
                                              std::size_t trials,
                                              std::uint64_t seed) {
  if (original.dim_in() != p.d_a() || original.dim_out() != p.d_x())
    throw InvalidInput("verify_purification: dimensions do not match");
  PurificationReport report;
  auto check = [&](const Operator& rho) {
    report.max_defect = std::max(
        report.max_defect,
        max_abs_diff(purified_action(p, rho), retro::apply(original, rho)));
    ++report.evaluations;
  };
  for (const auto& e : matrix_units(p.d_a()))
    check(e);
  for (std::size_t t = 0; t < trials; ++t)
    check(random_density(p.d_a(), mix64(seed) + t));
  return report;
}

/// Per-outcome round-trip defect of an instrument dilation.
inline PurificationReport verify_purification(const Instrument& original,
                                              const Purification& p,
                                              std::size_t trials,
                                              std::uint64_t seed) {
  if (original.dim_in() != p.d_a() || original.dim_out() != p.d_x())
    throw InvalidInput("verify_purification: dimensions do not match");
  if (!p.pointer_dims || (*p.pointer_dims)[0] != original.size())
    throw InvalidInput(
        "verify_purification: pointer dimension differs from outcome count");
  PurificationReport report;
  auto check = [&](const Operator& rho) {
    for (std::size_t i = 0; i < original.size(); ++i)
      report.max_defect =
          std::max(report.max_defect,
                   max_abs_diff(purified_outcome(p, rho, i),
                                retro::apply(original.outcomes()[i].map, rho)));
    ++report.evaluations;
  };
  for (const auto& e : matrix_units(p.d_a()))
    check(e);
  for (std::size_t t = 0; t < trials; ++t)
    check(random_density(p.d_a(), mix64(seed) + t));
  return report;
}

} // namespace retro
