#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "retro/errors.hpp"
#include "retro/gates.hpp"
#include "retro/identities.hpp"
#include "retro/task.hpp"

using namespace retro;

namespace {

std::vector<QuantumMap> unital_suite() {
  std::vector<QuantumMap> out{make_dephasing(), identity_channel(3),
                              make_unitary_channel(gates::hadamard())};
  for (std::uint64_t s = 0; s < 20; ++s) {
    const std::size_t da = 2 + s % 2;
    out.push_back(make_noisy_operation(haar_random_unitary(da * 2, s), DimsPartition{da, 2}));
  }
  return out;
}

} // namespace

// --- closed / open -----------------------------------------------------

TEST(ClosedSymmetry, DefectVanishesForHaarUnitaries) {
  for (std::size_t d = 2; d <= 8; ++d)
    EXPECT_LT(closed_symmetry_defect(haar_random_unitary(d, d)), 1e-12);
}

TEST(OpenRatio, LawsHoldOnHaarUnitaries) {
  const std::vector<std::pair<std::size_t, std::size_t>> shapes{{2, 2}, {2, 3}, {3, 2}};
  for (auto [da, db] : shapes)
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Operator u = haar_random_unitary(da * db, 77 * s + da);
      // same input partition on both sides, and the swapped output partition
      EXPECT_LT(open_ratio_check(u, {da, db}, {da, db}).max_defect(), 1e-12);
      EXPECT_LT(open_ratio_check(u, {da, db}, {db, da}).max_defect(), 1e-12);
    }
}

TEST(OpenRatio, MissingOutputAgainstLoopOracle) {
  // P_post(ab|x) = sum_y |<xy|U|ab>|^2 / d_Y computed by hand on 2x3
  const Operator u = haar_random_unitary(6, 5);
  const auto m = oracle::from(u);
  for (std::size_t x = 0; x < 2; ++x) {
    const auto post = postdict_open(u, {2, 3}, {2, 3}, {x, std::nullopt}, {true, true});
    for (std::size_t ab = 0; ab < 6; ++ab) {
      double pre = 0.0;
      for (std::size_t y = 0; y < 3; ++y)
        pre += oracle::born(m, ab, x * 3 + y);
      EXPECT_NEAR(post[ab], pre / 3.0, 1e-12);
    }
  }
}

// --- four-task square --------------------------------------------------

TEST(FourTask, Examples) {
  const auto id = four_task_check(identity(2), 0, 0);
  EXPECT_EQ(id.predict, 1.0);
  EXPECT_EQ(id.postdict, 1.0);
  EXPECT_EQ(id.predict_rev, 1.0);
  EXPECT_EQ(id.postdict_rev, 1.0);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t x = 0; x < 2; ++x) {
      const auto h = four_task_check(gates::hadamard(), a, x);
      EXPECT_NEAR(h.predict, 0.5, 1e-15);
      EXPECT_NEAR(h.postdict, 0.5, 1e-15);
      EXPECT_NEAR(h.predict_rev, 0.5, 1e-15);
      EXPECT_NEAR(h.postdict_rev, 0.5, 1e-15);
    }
}

TEST(FourTask, HaarAgainstInnerProduct) {
  const Operator u = haar_random_unitary(4, 12);
  const auto r = four_task_check(u, 1, 3);
  EXPECT_NEAR(r.born, oracle::born(oracle::from(u), 1, 3), 1e-15);
  EXPECT_LT(r.max_defect(), 1e-12);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Operator v = haar_random_unitary(3, 500 + s);
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t x = 0; x < 3; ++x)
        EXPECT_LT(four_task_check(v, a, x).max_defect(), 1e-12);
  }
}

TEST(FourTask, BistochasticChannels) {
  for (const auto& ch : unital_suite())
    for (std::size_t a = 0; a < ch.dim_in(); ++a)
      for (std::size_t x = 0; x < ch.dim_out(); ++x)
        EXPECT_LT(four_task_check(ch, a, x).max_defect(), 1e-12);
}

TEST(FourTask, NonUnitalChannelHasNoActiveReverse) {
  EXPECT_THROW(four_task_check(make_amplitude_damping(0.5), 0, 0), NoActiveReverse);
}

// --- open reversal -----------------------------------------------------

TEST(OpenReversal, IdentityIsExact) {
  EXPECT_EQ(open_reversal_check(identity(4), {2, 2}, {2, 2}).max_defect(), 0.0);
}

TEST(OpenReversal, CnotAndHaar) {
  EXPECT_LT(open_reversal_check(gates::cnot(), {2, 2}, {2, 2}).max_defect(), 1e-12);
  for (std::uint64_t s = 0; s < 20; ++s) {
    EXPECT_LT(open_reversal_check(haar_random_unitary(6, s), {2, 3}, {2, 3}).max_defect(), 1e-12);
    EXPECT_LT(open_reversal_check(haar_random_unitary(6, s), {2, 3}, {3, 2}).max_defect(), 1e-12);
  }
}

// --- toward the past ---------------------------------------------------

TEST(TowardPast, UnitaryDephasingAndAmplitudeDamping) {
  const Operator u = haar_random_unitary(3, 1);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t x = 0; x < 3; ++x) {
      const auto r = channel_toward_past_check(make_unitary_channel(u), a, x);
      EXPECT_NEAR(r.reversed_value, four_task_check(u, a, x).born, 1e-10);
    }
  EXPECT_LT(channel_toward_past_defect(make_dephasing()), 1e-10);
  EXPECT_LT(channel_toward_past_defect(make_amplitude_damping(0.5)), 1e-10);
}

TEST(TowardPast, RandomChannelsAndRotatedDilations) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto ch = random_channel(2 + s % 2, 2, 2 + s % 2, s);
    EXPECT_LT(channel_toward_past_defect(ch), 1e-10);
    const auto p = rotate_ancilla(stinespring(ch), haar_random_unitary(stinespring(ch).d_b(), s + 1),
                                  haar_random_unitary(stinespring(ch).d_y(), s + 2));
    for (std::size_t a = 0; a < ch.dim_in(); ++a)
      for (std::size_t x = 0; x < ch.dim_out(); ++x)
        EXPECT_LT(channel_toward_past_check(ch, p, a, x).defect(), 1e-10);
  }
}

TEST(PostChannelRatio, CanonicalAndRotated) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto ch = random_channel(3, 2, 2, 40 + s);
    const auto p = stinespring(ch);
    EXPECT_LT(post_channel_ratio_defect(ch, p), 1e-10);
    const auto q = rotate_ancilla(p, haar_random_unitary(p.d_b(), s), haar_random_unitary(p.d_y(), s + 9));
    EXPECT_LT(post_channel_ratio_defect(ch, q), 1e-10);
  }
}

// --- no signalling -----------------------------------------------------

TEST(NoSignalling, IdentityLaterInstrument) {
  const auto e = random_instrument(2, 2, 3, 1, 3);
  const auto r = no_signalling_check(e, identity_instrument(2), random_density(2, 4));
  EXPECT_LT(r.channel_defect, 1e-12);
  EXPECT_LT(r.purified_defect, 1e-10);
}

TEST(NoSignalling, ZThenXOnZero) {
  const auto e = computational_measurement(2);
  const auto f = projective_measurement(gates::hadamard(), {"+", "-"});
  const auto r = no_signalling_check(e, f, basis_projector(2, 0));
  EXPECT_NEAR(r.marginal.at("0"), 1.0, 1e-15);
  EXPECT_NEAR(r.marginal.at("1"), 0.0, 1e-15);
  ASSERT_FALSE(r.conditionals.empty());
  EXPECT_EQ(r.conditionals[0].given, "+");
  EXPECT_NEAR(r.conditionals[0].at("0"), 1.0, 1e-12);
  EXPECT_LT(r.channel_defect, 1e-12);
  EXPECT_LT(r.conditional_defect, 1e-12);
  EXPECT_LT(r.purified_defect, 1e-10);
  EXPECT_LT(r.purified_joint_defect, 1e-10);
}

TEST(NoSignalling, MarginalIndependentOfFiveLaterInstruments) {
  const auto e = random_instrument(2, 2, 2, 2, 90);
  const Operator rho = random_density(2, 91);
  const auto reference = outcome_probabilities(e, rho);
  for (std::uint64_t k = 0; k < 5; ++k) {
    const auto f = random_instrument(2, 2, 2 + k % 2, 1 + k % 2, 100 + k);
    const auto r = no_signalling_check(e, f, rho);
    EXPECT_LT(max_table_diff(r.marginal, reference), 1e-15);
    EXPECT_LT(r.channel_defect, 1e-12);
    EXPECT_LT(r.purified_defect, 1e-10);
  }
}

TEST(NoSignalling, RandomPairsAtQubitDimension) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto e = random_instrument(2, 2, 2, 1, 1000 + s);
    const auto f = random_instrument(2, 2, 2, 1, 2000 + s);
    const auto r = no_signalling_check(e, f, random_density(2, s));
    EXPECT_LT(r.channel_defect, 1e-12);
    EXPECT_LT(r.conditional_defect, 1e-12);
    EXPECT_LT(r.purified_defect, 1e-10);
    EXPECT_LT(r.purified_joint_defect, 1e-10);
  }
}

TEST(NoSignalling, RejectsDimensionMismatch) {
  EXPECT_THROW(no_signalling_check(computational_measurement(2), computational_measurement(3),
                                   basis_projector(2, 0)),
               InvalidInput);
}

// --- inference symmetry ------------------------------------------------

TEST(InferenceSymmetry, Examples) {
  EXPECT_TRUE(is_inference_symmetric(make_dephasing()));
  EXPECT_FALSE(is_inference_symmetric(make_amplitude_damping(0.5)));
  EXPECT_TRUE(is_inference_symmetric(make_noisy_operation(haar_random_unitary(4, 6), DimsPartition{2, 2})));
}

TEST(InferenceSymmetry, AmplitudeDampingTablesDisagreeAtZero) {
  const auto ad = make_amplitude_damping(0.5);
  const auto post = postdict_channel(ad, 0);
  EXPECT_GT(std::abs(post.at("1") - predict_channel(ad, 1).at("0")), 0.1);
}

TEST(InferenceSymmetry, ThreePredicatesAgree) {
  for (const auto& ch : unital_suite()) {
    const auto r = inference_symmetry_report(ch);
    EXPECT_TRUE(r.unital);
    EXPECT_TRUE(r.consistent()) << r.max_table_defect;
  }
  for (double g : {0.25, 0.5, 0.9}) {
    const auto r = inference_symmetry_report(make_amplitude_damping(g));
    EXPECT_FALSE(r.unital);
    EXPECT_TRUE(r.consistent());
  }
}

// --- deterministic effect ----------------------------------------------

TEST(DeterministicEffect, DiscardIsTheOnlySolution) {
  std::vector<QuantumMap> maps{make_dephasing(), make_amplitude_damping(0.5), identity_channel(3)};
  for (std::uint64_t s = 0; s < 20; ++s)
    maps.push_back(random_channel(2 + s % 2, 2 + (s / 2) % 2, 2, s));
  for (const auto& ch : maps) {
    const auto r = deterministic_effect_check(ch);
    EXPECT_TRUE(r.unique_discard()) << "rank " << r.rank << " sv " << r.smallest_singular;
    for (double w : r.weights)
      EXPECT_NEAR(w, 1.0, 1e-10);
    EXPECT_GT(r.min_candidate_residual, 1e-6);
  }
}

// --- general preparation -----------------------------------------------

TEST(GeneralPrepPurified, Examples) {
  const std::vector<Operator> ortho{basis_ket(2, 0), basis_ket(2, 1)};
  const Operator u = haar_random_unitary(2, 3);
  for (std::size_t x = 0; x < 2; ++x) {
    const auto r = general_prep_purified_check(ortho, u, x);
    const auto closed = postdict_closed(u, x, 2);
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_NEAR(r.direct[i], closed[i], 1e-12);
      EXPECT_NEAR(r.purified[i], closed[i], 1e-10);
    }
  }
  const std::vector<Operator> zp{basis_ket(2, 0), gates::plus_ket()};
  const auto r0 = general_prep_purified_check(zp, identity(2), 0);
  EXPECT_NEAR(r0.direct[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r0.purified[0], 2.0 / 3.0, 1e-10);
  const auto rh = general_prep_purified_check(zp, gates::hadamard(), 0);
  EXPECT_LT(rh.max_defect, 1e-10);
  EXPECT_LT(rh.prediction_defect, 1e-12);
}

TEST(GeneralPrepPurified, RandomStateSets) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    std::vector<Operator> states;
    for (std::uint64_t k = 0; k < 3; ++k)
      states.push_back(random_ket(2, 10 * s + k));
    const Operator u = haar_random_unitary(2, s);
    for (std::size_t x = 0; x < 2; ++x)
      EXPECT_LT(general_prep_purified_check(states, u, x).max_defect, 1e-10);
  }
}

TEST(ControlledPreparation, MapsPointerStatesToPreparations) {
  const std::vector<Operator> states{basis_ket(2, 0), gates::plus_ket()};
  const Operator up = controlled_preparation(states, 2);
  EXPECT_TRUE(is_unitary(up));
  for (std::size_t i = 0; i < 2; ++i)
    EXPECT_LT(max_abs_diff(Operator(up * tensor(basis_ket(2, 0), basis_ket(2, i))),
                           tensor(states[i], basis_ket(2, i))),
              1e-12);
}

// --- time reversal on tasks --------------------------------------------

TEST(TimeReverse, IdentityUnchangedUpToSwap) {
  InferenceTask t{identity(2), DimsPartition{2}, DimsPartition{2}};
  t.known_input_mask = {true};
  t.known_output_mask = {true};
  const auto r = time_reverse(t);
  EXPECT_EQ(std::get<Operator>(r.transformation), identity(2));
  EXPECT_EQ(r.dims_in, t.dims_out);
}

TEST(TimeReverse, UnitaryPredictionsSwapRoles) {
  const Operator u = haar_random_unitary(3, 17);
  InferenceTask t{u, DimsPartition{3}, DimsPartition{3}};
  t.known_input_mask = {true};
  t.known_output_mask = {true};
  const auto r = time_reverse(t);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t x = 0; x < 3; ++x)
      EXPECT_NEAR(solve(r, {x})[a], solve(t, {a})[x], 1e-12);
}

TEST(TimeReverse, DephasingReversesToItself) {
  InferenceTask t{make_dephasing(), DimsPartition{2}, DimsPartition{2}};
  t.known_input_mask = {true};
  t.known_output_mask = {true};
  const auto r = time_reverse(t);
  EXPECT_LT(action_distance(std::get<QuantumMap>(r.transformation), make_dephasing()), 1e-15);
  EXPECT_TRUE(classify(std::get<QuantumMap>(r.transformation)).is_cptp());
}

TEST(TimeReverse, AmplitudeDampingHasNoActiveReverse) {
  InferenceTask t{make_amplitude_damping(0.5), DimsPartition{2}, DimsPartition{2}};
  t.known_input_mask = {true};
  t.known_output_mask = {true};
  EXPECT_THROW(time_reverse(t), NoActiveReverse);
}

// --- solve --------------------------------------------------------------

TEST(Solve, InstrumentPostdictionConditionsOnOutcomeAndOutput) {
  InferenceTask t{amplitude_damping_instrument(0.5), DimsPartition{2}, DimsPartition{2}};
  t.known_input_mask = {true};
  t.known_output_mask = {true};
  t.direction = Direction::Postdict;
  // outcome "1" always leaves |0>, and only |1> can produce it
  const auto r = solve(t, {1, 0});
  EXPECT_NEAR(r.at("0"), 0.0, 1e-15);
  EXPECT_NEAR(r.at("1"), 1.0, 1e-15);
  EXPECT_THROW(solve(t, {1, 1}), UndefinedConditional);
}

TEST(Solve, OpenMasksDispatch) {
  InferenceTask t{gates::cnot(), DimsPartition{2, 2}, DimsPartition{2, 2}};
  t.known_input_mask = {true, false};
  t.known_output_mask = {true, true};
  const auto r = solve(t, {0});
  EXPECT_NEAR(r.sum(), 1.0, 1e-12);
  EXPECT_LT(max_table_diff(r, predict_open(gates::cnot(), {2, 2}, {2, 2}, {0, std::nullopt}, {true, true})),
            1e-15);
}
