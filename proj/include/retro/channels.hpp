#pragma once

// Quantum maps in Kraus form, instruments, and their composition and
// classification.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "retro/errors.hpp"
#include "retro/linalg.hpp"
#include "retro/probability_table.hpp"

namespace retro {

/// Completely positive map rho -> sum_k K_k rho K_k^dagger.
///
/// Construction only checks Kraus shapes. Trace non-increase is a property of
/// the maps inside an Instrument and is checked there; the adjoint of a
/// channel is representable here even when it is not a quantum map.
class QuantumMap {
public:
  QuantumMap(std::vector<Operator> kraus, std::size_t dim_in,
             std::size_t dim_out)
      : kraus_(std::move(kraus)), dim_in_(dim_in), dim_out_(dim_out) {
    if (kraus_.empty())
      throw InvalidInput("QuantumMap: Kraus list is empty");
    if (dim_in_ == 0 || dim_out_ == 0)
      throw InvalidInput("QuantumMap: dimensions must be positive");
    for (std::size_t k = 0; k < kraus_.size(); ++k)
      if (static_cast<std::size_t>(kraus_[k].rows()) != dim_out_ ||
          static_cast<std::size_t>(kraus_[k].cols()) != dim_in_)
        throw InvalidInput("QuantumMap: Kraus operator " + std::to_string(k) +
                           " has shape " + std::to_string(kraus_[k].rows()) +
                           "x" + std::to_string(kraus_[k].cols()) +
                           ", expected " + std::to_string(dim_out_) + "x" +
                           std::to_string(dim_in_));
  }

  /// Dimensions taken from the first Kraus operator.
  static QuantumMap from_kraus(std::vector<Operator> kraus) {
    if (kraus.empty())
      throw InvalidInput("QuantumMap: Kraus list is empty");
    const auto out = static_cast<std::size_t>(kraus.front().rows());
    const auto in = static_cast<std::size_t>(kraus.front().cols());
    return QuantumMap(std::move(kraus), in, out);
  }

  const std::vector<Operator>& kraus() const noexcept { return kraus_; }
  std::size_t dim_in() const noexcept { return dim_in_; }
  std::size_t dim_out() const noexcept { return dim_out_; }

private:
  std::vector<Operator> kraus_;
  std::size_t dim_in_;
  std::size_t dim_out_;
};

inline Operator apply(const QuantumMap& map, const Operator& rho) {
  if (!is_square(rho) || static_cast<std::size_t>(rho.rows()) != map.dim_in())
    throw InvalidInput("apply: operator of shape " + std::to_string(rho.rows()) +
                       "x" + std::to_string(rho.cols()) +
                       " does not match map input dimension " +
                       std::to_string(map.dim_in()));
  Operator out = zeros(map.dim_out(), map.dim_out());
  for (const auto& k : map.kraus())
    out.noalias() += k * rho * k.adjoint();
  return out;
}

/// sum_k K_k^dagger K_k; equals the identity iff the map is trace preserving.
inline Operator kraus_gram(const QuantumMap& map) {
  Operator g = zeros(map.dim_in(), map.dim_in());
  for (const auto& k : map.kraus())
    g.noalias() += k.adjoint() * k;
  return g;
}

inline bool is_trace_non_increasing(const QuantumMap& map,
                                    double tol = kStructuralTol) {
  return max_eigenvalue(kraus_gram(map)) <= 1.0 + tol;
}

inline bool is_trace_preserving(const QuantumMap& map,
                                double tol = kStructuralTol) {
  return max_abs_diff(kraus_gram(map), identity(map.dim_in())) <= tol;
}

/// Largest deviation between the actions of two maps on the matrix units;
/// Kraus lists themselves are not unique and are never compared.
inline double action_distance(const QuantumMap& a, const QuantumMap& b) {
  if (a.dim_in() != b.dim_in() || a.dim_out() != b.dim_out())
    return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (const auto& e : matrix_units(a.dim_in()))
    worst = std::max(worst, max_abs_diff(retro::apply(a, e), retro::apply(b, e)));
  return worst;
}

struct Outcome {
  std::string label;
  QuantumMap map;
};

/// Outcome-labelled quantum maps whose sum is trace preserving.
class Instrument {
public:
  explicit Instrument(std::vector<Outcome> outcomes)
      : outcomes_(std::move(outcomes)) {
    if (outcomes_.empty())
      throw InvalidInput("Instrument: no outcomes");
    dim_in_ = outcomes_.front().map.dim_in();
    dim_out_ = outcomes_.front().map.dim_out();
    Operator gram = zeros(dim_in_, dim_in_);
    for (std::size_t i = 0; i < outcomes_.size(); ++i) {
      const auto& o = outcomes_[i];
      if (o.map.dim_in() != dim_in_ || o.map.dim_out() != dim_out_)
        throw InvalidInput("Instrument: outcome '" + o.label +
                           "' has mismatched dimensions");
      for (std::size_t j = 0; j < i; ++j)
        if (outcomes_[j].label == o.label)
          throw InvalidInput("Instrument: duplicate outcome label '" + o.label +
                             "'");
      gram += kraus_gram(o.map);
    }
    completeness_defect_ = max_abs_diff(gram, identity(dim_in_));
    if (completeness_defect_ > kStructuralTol)
      throw InvalidInput("Instrument: completeness violated (max deviation " +
                         std::to_string(completeness_defect_) + ")");
  }

  const std::vector<Outcome>& outcomes() const noexcept { return outcomes_; }
  std::size_t size() const noexcept { return outcomes_.size(); }
  std::size_t dim_in() const noexcept { return dim_in_; }
  std::size_t dim_out() const noexcept { return dim_out_; }
  double completeness_defect() const noexcept { return completeness_defect_; }

  std::size_t index_of(const std::string& label) const {
    for (std::size_t i = 0; i < outcomes_.size(); ++i)
      if (outcomes_[i].label == label)
        return i;
    throw InvalidInput("Instrument: no outcome labelled '" + label + "'");
  }

  const QuantumMap& map(const std::string& label) const {
    return outcomes_[index_of(label)].map;
  }

private:
  std::vector<Outcome> outcomes_;
  std::size_t dim_in_ = 0;
  std::size_t dim_out_ = 0;
  double completeness_defect_ = 0.0;
};

/// Single-outcome instrument; throws unless the map is trace preserving.
inline Instrument as_instrument(const QuantumMap& channel,
                                std::string label = "id") {
  return Instrument({Outcome{std::move(label), channel}});
}

/// P(i | rho) = tr O_i[rho].
inline ProbabilityTable outcome_probabilities(const Instrument& inst,
                                              const Operator& rho) {
  if (!is_square(rho) || static_cast<std::size_t>(rho.rows()) != inst.dim_in())
    throw InvalidInput("outcome_probabilities: state dimension mismatch");
  if (!is_state(rho))
    throw InvalidInput("outcome_probabilities: input is not a density operator");
  ProbabilityTable t;
  t.direction = Direction::Predict;
  t.given = "rho";
  for (const auto& o : inst.outcomes())
    t.push(o.label, retro::apply(o.map, rho).trace().real());
  t.refresh_defect();
  return t;
}

/// O_i[rho] / tr O_i[rho].
inline Operator state_update(const Instrument& inst, const Operator& rho,
                             const std::string& label) {
  const Operator unnormalized = retro::apply(inst.map(label), rho);
  const double p = unnormalized.trace().real();
  if (p <= kProbabilityTol)
    throw UndefinedConditional("state_update: outcome '" + label +
                               "' has probability " + std::to_string(p));
  return unnormalized / p;
}

/// The channel obtained by ignoring the outcome.
inline QuantumMap coarse_grain(const Instrument& inst) {
  std::vector<Operator> kraus;
  for (const auto& o : inst.outcomes())
    kraus.insert(kraus.end(), o.map.kraus().begin(), o.map.kraus().end());
  return QuantumMap(std::move(kraus), inst.dim_in(), inst.dim_out());
}

/// M o O with outcome labels "i·j".
inline Instrument compose_sequential(const Instrument& first,
                                     const Instrument& second) {
  if (first.dim_out() != second.dim_in())
    throw InvalidInput("compose_sequential: output dimension " +
                       std::to_string(first.dim_out()) +
                       " does not match input dimension " +
                       std::to_string(second.dim_in()));
  std::vector<Outcome> out;
  for (const auto& o : first.outcomes())
    for (const auto& m : second.outcomes()) {
      std::vector<Operator> kraus;
      for (const auto& km : m.map.kraus())
        for (const auto& ko : o.map.kraus())
          kraus.push_back(km * ko);
      out.push_back({join_labels(o.label, m.label),
                     QuantumMap(std::move(kraus), first.dim_in(),
                                second.dim_out())});
    }
  return Instrument(std::move(out));
}

/// a (x) b on the joint space, `a` on the first factor.
inline Instrument compose_parallel(const Instrument& a, const Instrument& b) {
  std::vector<Outcome> out;
  for (const auto& oa : a.outcomes())
    for (const auto& ob : b.outcomes()) {
      std::vector<Operator> kraus;
      for (const auto& ka : oa.map.kraus())
        for (const auto& kb : ob.map.kraus())
          kraus.push_back(tensor(ka, kb));
      out.push_back({join_labels(oa.label, ob.label),
                     QuantumMap(std::move(kraus), a.dim_in() * b.dim_in(),
                                a.dim_out() * b.dim_out())});
    }
  return Instrument(std::move(out));
}

/// sum_ij |i><j| (x) Phi[|i><j|]
inline Operator choi_matrix(const QuantumMap& map) {
  const std::size_t din = map.dim_in(), dout = map.dim_out();
  Operator choi = zeros(din * dout, din * dout);
  for (std::size_t i = 0; i < din; ++i)
    for (std::size_t j = 0; j < din; ++j) {
      Operator e = zeros(din, din);
      e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
      choi.block(static_cast<Eigen::Index>(i * dout),
                 static_cast<Eigen::Index>(j * dout),
                 static_cast<Eigen::Index>(dout),
                 static_cast<Eigen::Index>(dout)) = retro::apply(map, e);
    }
  return choi;
}

struct ChannelClassification {
  bool is_cp = false;
  bool is_tp = false;
  bool is_unital = false;
  double choi_min_eigenvalue = 0.0;
  /// max |Phi[I] - I|; infinite when input and output dimensions differ.
  double unital_defect = 0.0;
  double tp_defect = 0.0;

  bool is_cptp() const noexcept { return is_cp && is_tp; }
};

inline ChannelClassification classify(const QuantumMap& map) {
  ChannelClassification c;
  c.choi_min_eigenvalue = min_eigenvalue(choi_matrix(map));
  c.is_cp = c.choi_min_eigenvalue >= -kStructuralTol;
  c.tp_defect = max_abs_diff(kraus_gram(map), identity(map.dim_in()));
  c.is_tp = c.tp_defect < kStructuralTol;
  if (map.dim_in() == map.dim_out())
    c.unital_defect =
        max_abs_diff(retro::apply(map, identity(map.dim_in())), identity(map.dim_out()));
  else
    c.unital_defect = std::numeric_limits<double>::infinity();
  c.is_unital = c.unital_defect < kStructuralTol;
  return c;
}

/// Hilbert-Schmidt adjoint: Kraus list {K_k^dagger}.
inline QuantumMap adjoint_map(const QuantumMap& map) {
  std::vector<Operator> kraus;
  kraus.reserve(map.kraus().size());
  for (const auto& k : map.kraus())
    kraus.push_back(k.adjoint());
  return QuantumMap(std::move(kraus), map.dim_out(), map.dim_in());
}

inline QuantumMap identity_channel(std::size_t d) {
  return QuantumMap({identity(d)}, d, d);
}

inline QuantumMap make_unitary_channel(const Operator& u) {
  if (!is_unitary(u))
    throw InvalidInput("make_unitary_channel: matrix is not unitary");
  return QuantumMap({u}, static_cast<std::size_t>(u.rows()),
                    static_cast<std::size_t>(u.rows()));
}

/// rho -> sum_i <i|rho|i> |i><i|
inline QuantumMap make_dephasing(std::size_t d = 2) {
  std::vector<Operator> kraus;
  for (std::size_t i = 0; i < d; ++i)
    kraus.push_back(basis_projector(d, i));
  return QuantumMap(std::move(kraus), d, d);
}

/// rho -> tr_B U[rho (x) I_B / d_B] with dims = {d_A, d_B}.
inline QuantumMap make_noisy_operation(const Operator& u,
                                       const DimsPartition& dims) {
  if (dims.size() != 2)
    throw InvalidInput("make_noisy_operation: expected dims {d_A, d_B}");
  if (!is_unitary(u))
    throw InvalidInput("make_noisy_operation: matrix is not unitary");
  if (static_cast<std::size_t>(u.rows()) != dims.total())
    throw InvalidInput("make_noisy_operation: unitary dimension does not "
                       "match d_A * d_B");
  const std::size_t da = dims[0], db = dims[1];
  const double w = 1.0 / std::sqrt(static_cast<double>(db));
  std::vector<Operator> kraus;
  kraus.reserve(db * db);
  // K_{jk} = (I_A (x) <j|) U (I_A (x) |k>) / sqrt(d_B)
  for (std::size_t j = 0; j < db; ++j)
    for (std::size_t k = 0; k < db; ++k) {
      const Operator left = tensor(identity(da), basis_ket(db, j).adjoint());
      const Operator right = tensor(identity(da), basis_ket(db, k));
      kraus.push_back(w * left * u * right);
    }
  return QuantumMap(std::move(kraus), da, da);
}

/// Qubit amplitude damping: K0 = diag(1, sqrt(1-g)), K1 = sqrt(g) |0><1|.
inline QuantumMap make_amplitude_damping(double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw InvalidInput("make_amplitude_damping: gamma must lie in [0, 1]");
  Operator k0 = zeros(2, 2), k1 = zeros(2, 2);
  k0(0, 0) = 1.0;
  k0(1, 1) = std::sqrt(1.0 - gamma);
  k1(0, 1) = std::sqrt(gamma);
  return QuantumMap({k0, k1}, 2, 2);
}

/// Amplitude damping with the two Kraus branches as outcomes "0" and "1".
inline Instrument amplitude_damping_instrument(double gamma) {
  const auto ad = make_amplitude_damping(gamma);
  return Instrument({{"0", QuantumMap({ad.kraus()[0]}, 2, 2)},
                     {"1", QuantumMap({ad.kraus()[1]}, 2, 2)}});
}

/// Nondestructive projective measurement onto the columns of `basis`.
inline Instrument projective_measurement(const Operator& basis,
                                         std::vector<std::string> labels = {}) {
  if (!is_unitary(basis))
    throw InvalidInput("projective_measurement: basis matrix is not unitary");
  const auto d = static_cast<std::size_t>(basis.rows());
  if (labels.empty())
    for (std::size_t i = 0; i < d; ++i)
      labels.push_back(std::to_string(i));
  if (labels.size() != d)
    throw InvalidInput("projective_measurement: one label per basis vector");
  std::vector<Outcome> out;
  for (std::size_t i = 0; i < d; ++i)
    out.push_back({labels[i],
                   QuantumMap({projector(basis.col(static_cast<Eigen::Index>(i)))},
                              d, d)});
  return Instrument(std::move(out));
}

inline Instrument computational_measurement(std::size_t d) {
  return projective_measurement(identity(d));
}

inline Instrument identity_instrument(std::size_t d) {
  return as_instrument(identity_channel(d));
}

/// Test (instrument into the trivial space) from positive effects summing to
/// the identity. Each effect sigma = sum_k l_k |v_k><v_k| becomes the Kraus
/// rows sqrt(l_k) <v_k|, so K^dagger K reproduces sigma.
inline Instrument make_test(const std::vector<Operator>& effects,
                            std::vector<std::string> labels = {}) {
  if (effects.empty())
    throw InvalidInput("make_test: no effects");
  const auto d = static_cast<std::size_t>(effects.front().rows());
  if (labels.empty())
    for (std::size_t i = 0; i < effects.size(); ++i)
      labels.push_back(std::to_string(i));
  if (labels.size() != effects.size())
    throw InvalidInput("make_test: one label per effect");
  std::vector<Outcome> out;
  for (std::size_t i = 0; i < effects.size(); ++i) {
    const auto& e = effects[i];
    if (!is_hermitian(e) || static_cast<std::size_t>(e.rows()) != d)
      throw InvalidInput("make_test: effect " + std::to_string(i) +
                         " is not a Hermitian operator of dimension " +
                         std::to_string(d));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
        Eigen::MatrixXcd(0.5 * (e + e.adjoint())));
    std::vector<Operator> rows;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
      const double lambda = es.eigenvalues()(k);
      if (lambda < -kStructuralTol)
        throw InvalidInput("make_test: effect " + std::to_string(i) +
                           " is not positive semidefinite");
      if (lambda <= kStructuralTol)
        continue;
      rows.push_back(std::sqrt(lambda) * Operator(es.eigenvectors().col(k).adjoint()));
    }
    if (rows.empty())
      rows.push_back(zeros(1, d));
    out.push_back({labels[i], QuantumMap(std::move(rows), d, 1)});
  }
  return Instrument(std::move(out));
}

/// The test with the single effect I: marginalises over the output.
inline Instrument discard_test(std::size_t d) {
  return make_test({identity(d)}, {"discard"});
}

/// Instrument with `outcomes` outcomes of `kraus_per_outcome` Kraus operators
/// each, cut from the first d_in columns of a Haar unitary (a random
/// isometry d_in -> d_out * outcomes * kraus_per_outcome).
inline Instrument random_instrument(std::size_t d_in, std::size_t d_out,
                                    std::size_t outcomes,
                                    std::size_t kraus_per_outcome,
                                    std::uint64_t seed) {
  const std::size_t blocks = outcomes * kraus_per_outcome;
  if (d_in == 0 || d_out == 0 || blocks == 0)
    throw InvalidInput("random_instrument: dimensions and counts must be positive");
  if (d_out * blocks < d_in)
    throw InvalidInput("random_instrument: too few Kraus operators for an "
                       "isometry");
  const Operator u = haar_random_unitary(d_out * blocks, seed);
  const auto rows = static_cast<Eigen::Index>(d_out);
  const auto cols = static_cast<Eigen::Index>(d_in);
  std::vector<Outcome> out;
  for (std::size_t i = 0; i < outcomes; ++i) {
    std::vector<Operator> kraus;
    for (std::size_t k = 0; k < kraus_per_outcome; ++k) {
      const auto block = static_cast<Eigen::Index>(i * kraus_per_outcome + k);
      kraus.push_back(u.block(block * rows, 0, rows, cols));
    }
    out.push_back({std::to_string(i), QuantumMap(std::move(kraus), d_in, d_out)});
  }
  return Instrument(std::move(out));
}

inline QuantumMap random_channel(std::size_t d_in, std::size_t d_out,
                                 std::size_t kraus_count, std::uint64_t seed) {
  return coarse_grain(random_instrument(d_in, d_out, 1, kraus_count, seed));
}

} // namespace retro
