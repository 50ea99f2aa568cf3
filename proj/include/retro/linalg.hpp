#pragma once

// Dense complex-matrix kernel shared by every other header: tensor products,
// partial traces over multi-factor spaces, structural predicates and seeded
// random generators.

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "retro/errors.hpp"
#include "retro/rng.hpp"

namespace retro {

using Complex = std::complex<double>;
using Operator =
    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Unitarity, Hermiticity, trace and completeness checks.
inline constexpr double kStructuralTol = 1e-10;
/// Probability identities.
inline constexpr double kProbabilityTol = 1e-12;

/// Ordered subsystem dimensions of a composite space. The first factor is the
/// most significant digit of the flat index, so |ab> has index a * d_B + b.
class DimsPartition {
public:
  DimsPartition() = default;

  DimsPartition(std::initializer_list<std::size_t> factors)
      : DimsPartition(std::vector<std::size_t>(factors)) {}

  explicit DimsPartition(std::vector<std::size_t> factors)
      : factors_(std::move(factors)) {
    if (factors_.empty())
      throw InvalidInput("DimsPartition: at least one factor required");
    for (auto f : factors_)
      if (f == 0)
        throw InvalidInput("DimsPartition: factor dimensions must be positive");
    total_ = std::accumulate(factors_.begin(), factors_.end(), std::size_t{1},
                             std::multiplies<>());
  }

  std::size_t total() const noexcept { return total_; }
  std::size_t size() const noexcept { return factors_.size(); }
  std::size_t operator[](std::size_t k) const { return factors_.at(k); }
  const std::vector<std::size_t>& factors() const noexcept { return factors_; }

  std::size_t stride(std::size_t k) const {
    std::size_t s = 1;
    for (std::size_t j = k + 1; j < factors_.size(); ++j)
      s *= factors_[j];
    return s;
  }

  std::size_t encode(std::span<const std::size_t> digits) const {
    if (digits.size() != factors_.size())
      throw InvalidInput("DimsPartition::encode: wrong number of digits");
    std::size_t index = 0;
    for (std::size_t k = 0; k < factors_.size(); ++k) {
      if (digits[k] >= factors_[k])
        throw InvalidInput("DimsPartition::encode: digit out of range");
      index = index * factors_[k] + digits[k];
    }
    return index;
  }

  std::vector<std::size_t> decode(std::size_t index) const {
    if (index >= total_)
      throw InvalidInput("DimsPartition::decode: index out of range");
    std::vector<std::size_t> digits(factors_.size());
    for (std::size_t k = factors_.size(); k-- > 0;) {
      digits[k] = index % factors_[k];
      index /= factors_[k];
    }
    return digits;
  }

  friend bool operator==(const DimsPartition&, const DimsPartition&) = default;

private:
  std::vector<std::size_t> factors_{1};
  std::size_t total_ = 1;
};

inline Operator identity(std::size_t d) {
  return Operator::Identity(static_cast<Eigen::Index>(d),
                            static_cast<Eigen::Index>(d));
}

inline Operator zeros(std::size_t rows, std::size_t cols) {
  return Operator::Zero(static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
}

/// Column vector |i> in dimension d.
inline Operator basis_ket(std::size_t d, std::size_t i) {
  if (d == 0)
    throw InvalidInput("basis_ket: dimension must be positive");
  if (i >= d)
    throw InvalidInput("basis_ket: index " + std::to_string(i) +
                       " out of range for dimension " + std::to_string(d));
  Operator k = zeros(d, 1);
  k(static_cast<Eigen::Index>(i), 0) = 1.0;
  return k;
}

/// |psi><psi| for a column vector psi.
inline Operator projector(const Operator& ket) {
  if (ket.cols() != 1)
    throw InvalidInput("projector: expected a column vector");
  return ket * ket.adjoint();
}

inline Operator basis_projector(std::size_t d, std::size_t i) {
  return projector(basis_ket(d, i));
}

inline Operator dagger(const Operator& op) { return op.adjoint(); }

inline Complex trace(const Operator& op) {
  if (op.rows() != op.cols())
    throw InvalidInput("trace: operator is not square");
  return op.trace();
}

/// Kronecker product; `a` acts on the first (most significant) factor.
inline Operator tensor(const Operator& a, const Operator& b) {
  const auto br = b.rows(), bc = b.cols();
  Operator out(a.rows() * br, a.cols() * bc);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * br, j * bc, br, bc) = a(i, j) * b;
  return out;
}

inline Operator tensor(std::initializer_list<Operator> ops) {
  if (ops.size() == 0)
    return identity(1);
  auto it = ops.begin();
  Operator out = *it++;
  for (; it != ops.end(); ++it)
    out = tensor(out, *it);
  return out;
}

/// Reduced operator on the factors listed in `keep` (kept in ascending factor
/// order); every other factor is traced out.
inline Operator partial_trace(const Operator& op, const DimsPartition& dims,
                              std::span<const std::size_t> keep) {
  if (op.rows() != op.cols())
    throw InvalidInput("partial_trace: operator is not square");
  if (static_cast<std::size_t>(op.rows()) != dims.total())
    throw InvalidInput("partial_trace: operator dimension " +
                       std::to_string(op.rows()) +
                       " does not match partition total " +
                       std::to_string(dims.total()));
  std::vector<bool> kept(dims.size(), false);
  for (auto k : keep) {
    if (k >= dims.size())
      throw InvalidInput("partial_trace: factor index out of range");
    kept[k] = true;
  }

  // Flat-index offsets contributed by the kept and traced digits.
  auto offsets = [&](bool want_kept) {
    std::vector<std::size_t> out{0};
    for (std::size_t f = 0; f < dims.size(); ++f) {
      if (kept[f] != want_kept)
        continue;
      const std::size_t stride = dims.stride(f);
      std::vector<std::size_t> next;
      next.reserve(out.size() * dims[f]);
      for (auto base : out)
        for (std::size_t v = 0; v < dims[f]; ++v)
          next.push_back(base + v * stride);
      out = std::move(next);
    }
    return out;
  };
  const auto kept_off = offsets(true);
  const auto traced_off = offsets(false);

  const auto n = static_cast<Eigen::Index>(kept_off.size());
  Operator out = Operator::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) {
      Complex acc = 0.0;
      for (auto t : traced_off)
        acc += op(static_cast<Eigen::Index>(kept_off[r] + t),
                  static_cast<Eigen::Index>(kept_off[c] + t));
      out(r, c) = acc;
    }
  return out;
}

inline Operator partial_trace(const Operator& op, const DimsPartition& dims,
                              std::initializer_list<std::size_t> keep) {
  return partial_trace(op, dims,
                       std::span<const std::size_t>(keep.begin(), keep.size()));
}

/// Permutes tensor factors: output factor k is input factor perm[k].
inline Operator permutation_operator(const DimsPartition& dims,
                                     std::span<const std::size_t> perm) {
  if (perm.size() != dims.size())
    throw InvalidInput("permutation_operator: permutation size mismatch");
  std::vector<std::size_t> sorted(perm.begin(), perm.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 0; k < sorted.size(); ++k)
    if (sorted[k] != k)
      throw InvalidInput("permutation_operator: not a permutation");

  std::vector<std::size_t> out_factors(dims.size());
  for (std::size_t k = 0; k < dims.size(); ++k)
    out_factors[k] = dims[perm[k]];
  const DimsPartition out_dims(out_factors);

  Operator p = zeros(dims.total(), dims.total());
  std::vector<std::size_t> out_digits(dims.size());
  for (std::size_t in = 0; in < dims.total(); ++in) {
    const auto digits = dims.decode(in);
    for (std::size_t k = 0; k < dims.size(); ++k)
      out_digits[k] = digits[perm[k]];
    p(static_cast<Eigen::Index>(out_dims.encode(out_digits)),
      static_cast<Eigen::Index>(in)) = 1.0;
  }
  return p;
}

inline double max_abs(const Operator& op) {
  return op.size() == 0 ? 0.0 : op.cwiseAbs().maxCoeff();
}

inline double max_abs_diff(const Operator& a, const Operator& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidInput("max_abs_diff: shape mismatch");
  return max_abs(a - b);
}

inline bool is_square(const Operator& op) { return op.rows() == op.cols(); }

inline bool is_hermitian(const Operator& op, double tol = kStructuralTol) {
  return is_square(op) && max_abs_diff(op, op.adjoint()) <= tol;
}

inline bool is_unitary(const Operator& op, double tol = kStructuralTol) {
  if (!is_square(op) || op.rows() == 0)
    return false;
  return max_abs_diff(op.adjoint() * op, identity(op.rows())) <= tol;
}

/// Smallest eigenvalue of the Hermitian part of a square operator.
inline double min_eigenvalue(const Operator& op) {
  if (!is_square(op))
    throw InvalidInput("min_eigenvalue: operator is not square");
  const Eigen::MatrixXcd h = 0.5 * (op + op.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double max_eigenvalue(const Operator& op) {
  if (!is_square(op))
    throw InvalidInput("max_eigenvalue: operator is not square");
  const Eigen::MatrixXcd h = 0.5 * (op + op.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

/// Density operator: Hermitian, positive semidefinite and unit trace.
inline bool is_state(const Operator& op, double tol = kStructuralTol) {
  if (!is_hermitian(op, tol) || op.rows() == 0)
    return false;
  if (std::abs(op.trace() - 1.0) > tol)
    return false;
  return min_eigenvalue(op) >= -tol;
}

inline bool is_pure_state(const Operator& op, double tol = kStructuralTol) {
  return is_state(op, tol) && std::abs((op * op).trace() - 1.0) <= tol;
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases of
/// diag(R) moved into Q. Same (d, seed) gives a bit-identical matrix.
inline Operator haar_random_unitary(std::size_t d, std::uint64_t seed) {
  if (d == 0)
    throw InvalidInput("haar_random_unitary: dimension must be positive");
  CounterRng rng(seed, 0x4841415255ULL);
  const auto n = static_cast<Eigen::Index>(d);
  Eigen::MatrixXcd z(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double re = rng.gaussian();
      const double im = rng.gaussian();
      z(i, j) = Complex(re, im) * std::sqrt(0.5);
    }
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(z);
  Eigen::MatrixXcd q = qr.householderQ();
  const Eigen::MatrixXcd& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < n; ++j) {
    const Complex rjj = r(j, j);
    const double mag = std::abs(rjj);
    const Complex phase = mag > 0.0 ? rjj / mag : Complex(1.0);
    q.col(j) *= phase;
  }
  return q;
}

/// Haar-random pure state as a column vector.
inline Operator random_ket(std::size_t d, std::uint64_t seed) {
  return haar_random_unitary(d, seed).col(0);
}

/// Random full-rank density operator G G^dagger / tr(G G^dagger).
inline Operator random_density(std::size_t d, std::uint64_t seed) {
  if (d == 0)
    throw InvalidInput("random_density: dimension must be positive");
  CounterRng rng(seed, 0x444E53ULL);
  const auto n = static_cast<Eigen::Index>(d);
  Operator g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double re = rng.gaussian();
      const double im = rng.gaussian();
      g(i, j) = Complex(re, im);
    }
  Operator rho = g * g.adjoint();
  return rho / rho.trace();
}

/// Random operator with independent Gaussian entries; not Hermitian.
inline Operator random_operator(std::size_t rows, std::size_t cols,
                                std::uint64_t seed) {
  CounterRng rng(seed, 0x4F50ULL);
  Operator g(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      const double re = rng.gaussian();
      const double im = rng.gaussian();
      g(i, j) = Complex(re, im);
    }
  return g;
}

/// Matrix units |i><j|, the standard operator basis of L(C^d).
inline std::vector<Operator> matrix_units(std::size_t d) {
  std::vector<Operator> out;
  out.reserve(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      Operator e = zeros(d, d);
      e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
      out.push_back(std::move(e));
    }
  return out;
}

/// Completes a square matrix whose `fixed` columns are orthonormal to a
/// unitary. Free columns are filled, left to right, by Gram-Schmidt on the
/// standard basis vectors e_0, e_1, ... skipping any already in the span.
inline Operator complete_to_unitary(Operator partial,
                                    const std::vector<bool>& fixed) {
  if (!is_square(partial))
    throw InvalidInput("complete_to_unitary: matrix is not square");
  const auto n = partial.rows();
  if (fixed.size() != static_cast<std::size_t>(n))
    throw InvalidInput("complete_to_unitary: mask size mismatch");

  std::vector<Eigen::Index> basis_cols;
  for (Eigen::Index j = 0; j < n; ++j)
    if (fixed[static_cast<std::size_t>(j)])
      basis_cols.push_back(j);
  for (auto a : basis_cols)
    for (auto b : basis_cols) {
      const Complex ip = partial.col(a).dot(partial.col(b));
      const Complex expect = a == b ? 1.0 : 0.0;
      if (std::abs(ip - expect) > kStructuralTol)
        throw InvalidInput(
            "complete_to_unitary: fixed columns are not orthonormal");
    }

  // Accept a candidate only if this much of it survives projection.
  constexpr double kSpanThreshold = 1e-6;
  Eigen::Index candidate = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (fixed[static_cast<std::size_t>(j)])
      continue;
    for (;; ++candidate) {
      if (candidate >= n)
        throw InvalidInput("complete_to_unitary: ran out of basis vectors");
      Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
      v(candidate) = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (auto b : basis_cols)
          v -= partial.col(b).dot(v) * Eigen::VectorXcd(partial.col(b));
      const double norm = v.norm();
      if (norm > kSpanThreshold) {
        partial.col(j) = v / norm;
        basis_cols.push_back(j);
        ++candidate;
        break;
      }
    }
  }
  return partial;
}

} // namespace retro
