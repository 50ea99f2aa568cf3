#pragma once

#include <cmath>

#include "retro/linalg.hpp"

namespace retro::gates {

inline Operator pauli_x() {
  Operator m(2, 2);
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}

inline Operator pauli_z() {
  Operator m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}

inline Operator hadamard() {
  const double s = 1.0 / std::sqrt(2.0);
  Operator m(2, 2);
  m << s, s, s, -s;
  return m;
}

/// Control on the first factor, target on the second.
inline Operator cnot() {
  Operator m = zeros(4, 4);
  m(0, 0) = 1.0;
  m(1, 1) = 1.0;
  m(2, 3) = 1.0;
  m(3, 2) = 1.0;
  return m;
}

inline Operator swap(std::size_t d = 2) {
  const std::size_t perm[] = {1, 0};
  return permutation_operator(DimsPartition{d, d}, perm);
}

/// (|0> + |1>) / sqrt(2)
inline Operator plus_ket() { return hadamard().col(0); }

/// (|00> + |11>) / sqrt(2)
inline Operator bell_ket() {
  Operator k = zeros(4, 1);
  k(0, 0) = 1.0 / std::sqrt(2.0);
  k(3, 0) = 1.0 / std::sqrt(2.0);
  return k;
}

} // namespace retro::gates
