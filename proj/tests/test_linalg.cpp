#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "retro/errors.hpp"
#include "retro/gates.hpp"
#include "retro/linalg.hpp"
#include "retro/rng.hpp"

using namespace retro;

TEST(DimsPartition, EncodeDecodeRoundTrip) {
  const DimsPartition d{2, 3, 4};
  EXPECT_EQ(d.total(), 24u);
  for (std::size_t i = 0; i < d.total(); ++i)
    EXPECT_EQ(d.encode(d.decode(i)), i);
  // first factor is the most significant digit
  EXPECT_EQ(d.encode(std::vector<std::size_t>{1, 0, 0}), 12u);
  EXPECT_EQ(d.encode(std::vector<std::size_t>{0, 1, 0}), 4u);
}

TEST(DimsPartition, RejectsBadInput) {
  EXPECT_THROW(DimsPartition(std::vector<std::size_t>{}), InvalidInput);
  EXPECT_THROW((DimsPartition{2, 0}), InvalidInput);
  const DimsPartition d{2, 2};
  EXPECT_THROW(d.decode(4), InvalidInput);
  EXPECT_THROW(d.encode(std::vector<std::size_t>{2, 0}), InvalidInput);
}

TEST(Tensor, IdentityTimesIdentity) {
  EXPECT_EQ(tensor(identity(2), identity(2)), identity(4));
}

TEST(Tensor, BasisKetsCompose) {
  const Operator k = tensor(basis_ket(2, 0), basis_ket(2, 1));
  ASSERT_EQ(k.rows(), 4);
  EXPECT_EQ(k, basis_ket(4, 1));
}

TEST(Tensor, PauliEntriesMatchFourIndexDefinition) {
  const Operator xz = tensor(gates::pauli_x(), gates::pauli_z());
  EXPECT_EQ(xz(0, 2), Complex(1.0));
  EXPECT_EQ(xz(1, 3), Complex(-1.0));
  const auto ref = oracle::kron(oracle::from(gates::pauli_x()), oracle::from(gates::pauli_z()));
  EXPECT_EQ(oracle::max_diff(xz, ref), 0.0);
}

TEST(Tensor, RectangularMatchesOracle) {
  const Operator a = random_operator(2, 3, 11);
  const Operator b = random_operator(3, 2, 12);
  const auto ref = oracle::kron(oracle::from(a), oracle::from(b));
  EXPECT_LT(oracle::max_diff(tensor(a, b), ref), 1e-15);
}

TEST(Tensor, AssociativeExactlyOnIntegerMatrices) {
  Operator a(2, 2), b(2, 3), c(3, 1);
  a << 1, 2, 3, 4;
  b << 0, -1, 2, 5, 1, 1;
  c << 2, -3, 7;
  EXPECT_EQ(tensor(tensor(a, b), c), tensor(a, tensor(b, c)));
  EXPECT_EQ(tensor({a, b, c}), tensor(a, tensor(b, c)));
}

TEST(PartialTrace, ProductStateFactorizes) {
  const Operator rho = random_density(2, 1);
  const Operator sigma = random_density(3, 2);
  const Operator r = partial_trace(tensor(rho, sigma), DimsPartition{2, 3}, {0});
  EXPECT_LT(max_abs_diff(r, rho), 1e-12);
  const Operator s = partial_trace(tensor(rho, sigma), DimsPartition{2, 3}, {1});
  EXPECT_LT(max_abs_diff(s, sigma), 1e-12);
}

TEST(PartialTrace, BellStateIsMaximallyMixed) {
  const Operator bell = projector(gates::bell_ket());
  EXPECT_LT(max_abs_diff(partial_trace(bell, DimsPartition{2, 2}, {0}), identity(2) / 2.0),
            1e-15);
  EXPECT_LT(max_abs_diff(partial_trace(bell, DimsPartition{2, 2}, {1}), identity(2) / 2.0),
            1e-15);
}

TEST(PartialTrace, HermitianInputMatchesIndexSummation) {
  Operator g = random_operator(6, 6, 5);
  const Operator h = g + g.adjoint();
  const auto ref_a = oracle::trace_second(oracle::from(h), 2, 3);
  const auto ref_b = oracle::trace_first(oracle::from(h), 2, 3);
  EXPECT_LT(oracle::max_diff(partial_trace(h, DimsPartition{2, 3}, {0}), ref_a), 1e-13);
  EXPECT_LT(oracle::max_diff(partial_trace(h, DimsPartition{2, 3}, {1}), ref_b), 1e-13);
}

TEST(PartialTrace, PreservesTrace) {
  const Operator rho = random_density(12, 9);
  const DimsPartition d{2, 3, 2};
  for (auto keep : {std::vector<std::size_t>{0}, {1}, {2}, {0, 2}, {1, 2}, {0, 1, 2}}) {
    const Operator r = partial_trace(rho, d, keep);
    EXPECT_LT(std::abs(trace(r) - trace(rho)), 1e-12);
  }
  EXPECT_LT(std::abs(partial_trace(rho, d, std::vector<std::size_t>{})(0, 0) - 1.0), 1e-12);
}

TEST(PartialTrace, ProductPropertyOverRandomStates) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Operator rho = random_density(3, 100 + s);
    const Operator sigma = random_operator(2, 2, 200 + s); // not normalised
    const Operator r = partial_trace(tensor(rho, sigma), DimsPartition{3, 2}, {0});
    EXPECT_LT(max_abs_diff(r, rho * trace(sigma)), 1e-12);
  }
}

TEST(PartialTrace, RejectsDimensionMismatch) {
  EXPECT_THROW(partial_trace(identity(4), DimsPartition{2, 3}, {0}), InvalidInput);
  EXPECT_THROW(partial_trace(zeros(4, 2), DimsPartition{2, 2}, {0}), InvalidInput);
  EXPECT_THROW(partial_trace(identity(4), DimsPartition{2, 2}, {2}), InvalidInput);
}

TEST(Permutation, SwapMatchesExplicitMap) {
  const Operator s = permutation_operator(DimsPartition{2, 3}, std::vector<std::size_t>{1, 0});
  EXPECT_TRUE(is_unitary(s));
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 3; ++b) {
      const Operator in = tensor(basis_ket(2, a), basis_ket(3, b));
      const Operator out = tensor(basis_ket(3, b), basis_ket(2, a));
      EXPECT_EQ(Operator(s * in), out);
    }
  EXPECT_EQ(gates::swap(), permutation_operator(DimsPartition{2, 2}, std::vector<std::size_t>{1, 0}));
}

TEST(Haar, DimensionOneIsUnitModulus) {
  for (std::uint64_t seed : {0ull, 1ull, 99ull})
    EXPECT_NEAR(std::abs(haar_random_unitary(1, seed)(0, 0)), 1.0, 1e-14);
}

TEST(Haar, SameSeedIsBitIdentical) {
  EXPECT_EQ(haar_random_unitary(4, 7), haar_random_unitary(4, 7));
  EXPECT_NE(haar_random_unitary(4, 7), haar_random_unitary(4, 8));
}

TEST(Haar, UnitarityAndDeterminant) {
  for (std::size_t d = 1; d <= 8; ++d)
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Operator u = haar_random_unitary(d, seed);
      const auto ref = oracle::mul(oracle::dag(oracle::from(u)), oracle::from(u));
      EXPECT_LT(oracle::max_diff(ref, oracle::eye(d)), 1e-10);
      EXPECT_NEAR(std::abs(Eigen::MatrixXcd(u).determinant()), 1.0, 1e-9);
    }
}

TEST(Haar, EntriesSpreadOverThePlane) {
  // first-moment check: E|U_00|^2 = 1/d
  const std::size_t d = 3, n = 2000;
  double acc = 0.0;
  for (std::uint64_t s = 0; s < n; ++s)
    acc += std::norm(haar_random_unitary(d, s)(0, 0));
  EXPECT_NEAR(acc / n, 1.0 / d, 0.02);
}

TEST(BasisKet, Examples) {
  Operator e(2, 1);
  e << 1, 0;
  EXPECT_EQ(basis_ket(2, 0), e);
  e << 0, 1;
  EXPECT_EQ(basis_ket(2, 1), e);
  Operator f(3, 1);
  f << 0, 0, 1;
  EXPECT_EQ(basis_ket(3, 2), f);
  EXPECT_THROW(basis_ket(3, 3), InvalidInput);
}

TEST(BasisKet, PairwiseOrthonormalExactly) {
  for (std::size_t d = 1; d <= 5; ++d)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        EXPECT_EQ((basis_ket(d, i).adjoint() * basis_ket(d, j))(0, 0),
                  Complex(i == j ? 1.0 : 0.0));
}

TEST(Predicates, StatesAndUnitaries) {
  EXPECT_TRUE(is_state(random_density(4, 3)));
  EXPECT_TRUE(is_pure_state(projector(random_ket(3, 4))));
  EXPECT_FALSE(is_pure_state(identity(2) / 2.0));
  EXPECT_FALSE(is_state(identity(2)));            // trace 2
  EXPECT_FALSE(is_state(Operator(gates::pauli_z()))); // not PSD
  Operator nh(2, 2);
  nh << 0.5, 1, 0, 0.5;
  EXPECT_FALSE(is_hermitian(nh));
  EXPECT_FALSE(is_state(nh));
  EXPECT_TRUE(is_unitary(gates::hadamard()));
  EXPECT_FALSE(is_unitary(nh));
}

TEST(CompleteToUnitary, KeepsFixedColumnsAndIsDeterministic) {
  const Operator v = random_ket(4, 21);
  Operator m = zeros(4, 4);
  m.col(2) = v;
  std::vector<bool> fixed{false, false, true, false};
  const Operator u = complete_to_unitary(m, fixed);
  EXPECT_TRUE(is_unitary(u));
  EXPECT_EQ(Operator(u.col(2)), v);
  EXPECT_EQ(u, complete_to_unitary(m, fixed));
}

TEST(CompleteToUnitary, StandardBasisCompletionIsLexicographic) {
  Operator m = zeros(3, 3);
  m.col(0) = basis_ket(3, 1);
  const Operator u = complete_to_unitary(m, {true, false, false});
  EXPECT_EQ(Operator(u.col(1)), basis_ket(3, 0));
  EXPECT_EQ(Operator(u.col(2)), basis_ket(3, 2));
}

TEST(CompleteToUnitary, RejectsNonOrthonormal) {
  Operator m = zeros(2, 2);
  m(0, 0) = 2.0;
  EXPECT_THROW(complete_to_unitary(m, {true, false}), InvalidInput);
}

TEST(MatrixUnits, SpanAndCount) {
  const auto units = matrix_units(3);
  ASSERT_EQ(units.size(), 9u);
  Operator sum = zeros(3, 3);
  for (const auto& e : units)
    sum += e;
  EXPECT_EQ(sum, Operator::Ones(3, 3));
}

TEST(Rng, DeterministicAndSubstreamsDiffer) {
  CounterRng a(42, 3), b(42, 3), c(42, 4), d(43, 3);
  std::set<std::uint64_t> firsts;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    firsts.insert(x);
  }
  EXPECT_EQ(firsts.size(), 100u);
  EXPECT_NE(CounterRng(42, 3).next_u64(), c.next_u64());
  EXPECT_NE(CounterRng(42, 3).next_u64(), d.next_u64());
}

TEST(Rng, UniformInUnitIntervalWithCorrectMean) {
  CounterRng r(1, 0);
  double sum = 0.0, sq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
  EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12.0, 0.003);
}

TEST(Rng, GaussianMoments) {
  CounterRng r(5, 1);
  double sum = 0.0, sq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double g = r.gaussian();
    sum += g;
    sq += g * g;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.02);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}
