#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "lumpcheck/consistency.hpp"
#include "lumpcheck/h2.hpp"
#include "oracles.hpp"
#include "pairs.hpp"

using namespace lumpcheck;
using lumpcheck::testing::chain;
using lumpcheck::testing::two_mass_chain;
using lumpcheck::testing::unit_bar_pair;

namespace {

RomFamily family_of(const StateSpaceSystem& rom, double certified, double fom_h2) {
  RomFamily f;
  f.fom_h2 = fom_h2;
  f.target_met = true;
  f.steps.push_back({rom.states(), rom, certified, h2_norm(rom), {}});
  return f;
}

CureOptions cure(double target, Index max_order) {
  CureOptions c;
  c.target_rel = target;
  c.max_order = max_order;
  return c;
}

}  // namespace

TEST(MassMatch, Arithmetic) {
  EXPECT_TRUE(check_mass_match(5.0, 5.0, 1e-6).pass);
  const MassCheck off = check_mass_match(5.0, 5.4, 0.05);
  EXPECT_FALSE(off.pass);
  EXPECT_EQ(off.lpm_mass, 5.0);
  EXPECT_EQ(off.dpm_mass, 5.4);
  EXPECT_TRUE(check_mass_match(5.0, 5.4, 0.1).pass);
}

TEST(MassMatch, BracketAgainstBarOfEqualMass) {
  LpmNetwork lpm;
  lpm.masses = {{"m1", 3.8465e5, 0, 0}, {"m2", 3.512e3, 0, 0}};
  lpm.springs = {{"k1", "m1", "ground", 3.316e4}, {"k2", "m1", "m2", 4.688e3}};
  lpm.signals.emplace_back("f1", InputSignal::step(1.0, 1.0));
  lpm.sources.push_back({"m2", "f1", 1.0});
  lpm.boi.push_back({"y", {{"m2", 1.0}}});
  BarParameters bar;
  bar.density = 3.88162e5;
  bar.elements = 25;
  bar.clamped = false;
  const MassCheck c = check_mass_match(lpm, assemble_bar_fem(bar), 1e-12);
  EXPECT_TRUE(c.pass);
  EXPECT_NEAR(c.dpm_mass, 3.88162e5, 1e-12 * 3.88162e5);
}

TEST(SourceMatch, MatchedPairAtRest) {
  const auto pair = unit_bar_pair(20, InputSignal::step(1.0, 4.0));
  const ProjectionSet proj = resolve_projections(pair.lpm, pair.dpm);
  EXPECT_EQ(proj.gamma_n, Matrix::Ones(1, 1));
  EXPECT_EQ(proj.gamma_i, Matrix::Zero(2, 20));
  const SourceCheck c = check_ic_source_match(pair.lpm, pair.dpm, proj, 1e-12);
  EXPECT_EQ(c.ic_residual, 0.0);
  EXPECT_EQ(c.source_residual, 0.0);
  EXPECT_TRUE(c.symbolic);
  EXPECT_TRUE(c.pass);
}

TEST(SourceMatch, UniformPressureOverEndNodes) {
  // Pressure 3 on area 2 split over 4 nodes: 1.5 each, total 6.
  const int N = 4;
  auto pair = unit_bar_pair(12, InputSignal::step(6.0, 2.0));
  Matrix F = Matrix::Zero(12, N);
  pair.dpm.signals.clear();
  pair.dpm.input_signals.clear();
  for (int j = 0; j < N; ++j) {
    F(11 - j, j) = 1.0;
    const std::string id = "p" + std::to_string(j);
    pair.dpm.signals.emplace_back(id, InputSignal::step(3.0 * 2.0 / N, 2.0));
    pair.dpm.input_signals.push_back(id);
  }
  pair.dpm.system = pair.dpm.system.with_input(F);
  pair.dpm.projections.gamma_n = Matrix::Ones(1, N);
  const ProjectionSet proj = resolve_projections(pair.lpm, pair.dpm);
  const SourceCheck c = check_ic_source_match(pair.lpm, pair.dpm, proj, 1e-12);
  EXPECT_EQ(c.source_residual, 0.0);
  EXPECT_TRUE(c.pass);

  // Shares may also be unequal.
  const std::vector<InputSignal> parts{InputSignal::step(1.0, 2.0), InputSignal::step(5.0, 2.0)};
  const std::vector<double> ones{1.0, 1.0};
  EXPECT_EQ(source_residual(InputSignal::step(6.0, 2.0), parts, ones), 0.0);
  EXPECT_DOUBLE_EQ(source_residual(InputSignal::step(7.0, 2.0), parts, ones), 1.0);
}

TEST(SourceMatch, DifferentKindsAreIncomparable) {
  const std::vector<InputSignal> sine{InputSignal::sine_burst(1.0, 3.0, 2.0)};
  const std::vector<double> w{1.0};
  EXPECT_THROW(source_residual(InputSignal::step(1.0, 2.0), sine, w), IncomparableSourcesError);

  auto pair = unit_bar_pair(10, InputSignal::step(1.0, 2.0));
  pair.dpm.signals.front().second = sine.front();
  const ProjectionSet proj = resolve_projections(pair.lpm, pair.dpm);
  EXPECT_THROW(check_ic_source_match(pair.lpm, pair.dpm, proj, 1e-9), IncomparableSourcesError);
}

TEST(SourceMatch, ZeroSignalsCompareWithAnything) {
  const std::vector<InputSignal> sine{InputSignal::sine_burst(0.0, 3.0, 2.0)};
  const std::vector<double> w{1.0};
  EXPECT_EQ(source_residual(InputSignal::zero(), sine, w), 0.0);
  EXPECT_DOUBLE_EQ(source_residual(InputSignal::step(2.5, 1.0), sine, w), 2.5);
}

TEST(SourceMatch, RetimedSignalsUseTheSupNorm) {
  // Rise over 1 s against rise over 2 s: largest gap 1 - 1/2 at t = 1.
  const std::vector<InputSignal> slow{InputSignal::ramp_hold(1.0, 2.0, 4.0)};
  const std::vector<double> w{1.0};
  bool symbolic = true;
  EXPECT_NEAR(source_residual(InputSignal::ramp_hold(1.0, 1.0, 4.0), slow, w, &symbolic), 0.5,
              1e-12);
  EXPECT_FALSE(symbolic);

  // A sampled table reproducing the ramp.
  const std::vector<InputSignal> table{
      InputSignal::sampled({0.0, 2.0, 4.0, 4.0 + 1e-12}, {0.0, 1.0, 1.0, 0.0})};
  EXPECT_LT(source_residual(slow.front(), table, w), 1e-9);
}

TEST(SourceMatch, InitialStateThroughGammaI) {
  auto pair = unit_bar_pair(10, InputSignal::step(1.0, 2.0));
  pair.dpm.x0 = Vector::Constant(10, 0.2);
  pair.dpm.projections.gamma_i = {{"m2", {7, 8, 9}, {}}};
  pair.lpm.masses[1].x0 = 0.2;
  ProjectionSet proj = resolve_projections(pair.lpm, pair.dpm);
  EXPECT_NEAR(proj.gamma_i.row(1).sum(), 1.0, 1e-15);
  SourceCheck c = check_ic_source_match(pair.lpm, pair.dpm, proj, 1e-12);
  EXPECT_LT(c.ic_residual, 1e-15);
  EXPECT_TRUE(c.pass);

  pair.lpm.masses[1].v0 = 0.5;
  c = check_ic_source_match(pair.lpm, pair.dpm, proj, 1e-12);
  EXPECT_DOUBLE_EQ(c.ic_residual, 0.5);
  EXPECT_FALSE(c.pass);
}

TEST(Projections, DefaultsAndDimensionErrors) {
  auto pair = unit_bar_pair(10, InputSignal::step(1.0, 2.0));
  pair.dpm.projections.gamma_n.reset();
  EXPECT_EQ(resolve_projections(pair.lpm, pair.dpm).gamma_n, Matrix::Identity(1, 1));
  pair.dpm.projections.gamma_n = Matrix::Ones(2, 1);
  EXPECT_THROW(resolve_projections(pair.lpm, pair.dpm), DimensionError);
}

TEST(SubstituteSource, HandProducts) {
  const auto lpm = second_order_to_state_space(two_mass_chain(1, 2, 3, 4, 0.5, 0.25));
  EXPECT_EQ(substitute_source(lpm, Matrix::Ones(1, 1), 1).B(), lpm.B());

  Matrix shares(1, 3);
  shares << 0.2, 0.3, 0.5;
  const auto three = substitute_source(lpm, shares, 3);
  ASSERT_EQ(three.B().cols(), 3);
  Matrix Bexp = Matrix::Zero(4, 3);
  Bexp.row(3) = lpm.B()(3, 0) * shares;
  EXPECT_EQ(three.B(), Bexp);
  EXPECT_EQ(three.C(), lpm.C());

  const auto zero = substitute_source(lpm, Matrix::Zero(1, 2), 2);
  EXPECT_EQ(zero.B(), Matrix::Zero(4, 2));
  EXPECT_EQ(h2_norm(zero), 0.0);

  EXPECT_THROW(substitute_source(lpm, Matrix::Ones(1, 3), 2), DimensionError);
}

TEST(LinfFactor, InputEnergy) {
  EXPECT_DOUBLE_EQ(linf_bound_factor(InputSignal::step(1.0, 4.0)), 2.0);
  EXPECT_EQ(linf_bound_factor(InputSignal::zero()), 0.0);
  EXPECT_THROW(linf_bound_factor(InputSignal::step(1.0)), InfiniteEnergyError);
  const std::vector<InputSignal> two{InputSignal::step(1.0, 4.0), InputSignal::step(2.0, 1.0)};
  EXPECT_DOUBLE_EQ(linf_bound_factor(two), std::sqrt(8.0));
  // sin^2 over whole periods averages 1/2.
  const double w = 2.0 * M_PI;
  EXPECT_NEAR(linf_bound_factor(InputSignal::sine_burst(2.0, w, 3.0)), std::sqrt(6.0), 1e-12);
  // Ramp over 3 s then hold to 5 s: 3/3 + 2 = 3.
  EXPECT_NEAR(linf_bound_factor(InputSignal::ramp_hold(1.0, 3.0, 5.0)), std::sqrt(3.0), 1e-12);
}

TEST(ConsistencyBound, SelfComparisonIsZero) {
  const auto sys = second_order_to_state_space(two_mass_chain(1, 2, 3, 4, 0.5, 0.25));
  const std::vector<InputSignal> in{InputSignal::step(1.0, 4.0)};
  const auto r = consistency_bound(sys, sys, family_of(sys, 0.0, h2_norm(sys)), in, 1e-12);
  EXPECT_EQ(r.eps1, 0.0);
  EXPECT_LT(r.eps2, 1e-12 * r.lpm_h2);
  EXPECT_LT(r.eps_rel, 1e-12);
  EXPECT_TRUE(r.consistent);
  EXPECT_TRUE(r.failures.empty());
  EXPECT_DOUBLE_EQ(r.linf_factor, 2.0);
}

TEST(ConsistencyBound, VerdictNamesFailedConditions) {
  const auto a = second_order_to_state_space(two_mass_chain(1, 2, 3, 4, 0.5, 0.25));
  const auto b = second_order_to_state_space(two_mass_chain(1, 2, 3, 5, 0.5, 0.25));
  const std::vector<InputSignal> in{InputSignal::step(1.0, 4.0)};
  auto r = consistency_bound(a, b, family_of(b, 0.0, h2_norm(b)), in, 0.05);
  const double exact = h2_error(a, b);
  EXPECT_DOUBLE_EQ(r.eps2, exact);
  EXPECT_DOUBLE_EQ(r.eps_rel, exact / h2_norm(a));
  EXPECT_GT(r.eps_rel, 0.05);
  EXPECT_FALSE(r.consistent);
  EXPECT_EQ(r.failures, std::vector<std::string>{"C3"});

  r.c1 = check_mass_match(5.0, 5.4, 0.05);
  r.c2 = SourceCheck{};
  r.c2->pass = true;
  r.update_verdict();
  EXPECT_EQ(r.failures, (std::vector<std::string>{"C1", "C3"}));
  EXPECT_NE(r.to_json().find("\"C1\""), std::string::npos);
  EXPECT_NE(r.summary().find("C1"), std::string::npos);
}

TEST(ConsistencyBound, UnendingInputHasNoLinfBound) {
  const auto sys = second_order_to_state_space(two_mass_chain(1, 2, 3, 4, 0.5, 0.25));
  const std::vector<InputSignal> in{InputSignal::step(1.0)};
  const auto r = consistency_bound(sys, sys, family_of(sys, 0.0, h2_norm(sys)), in, 0.05);
  EXPECT_TRUE(std::isinf(r.linf_bound));
  EXPECT_TRUE(r.consistent);
}

TEST(ConsistencyBound, EmptyFamilyUsesTheZeroModel) {
  const auto a = second_order_to_state_space(two_mass_chain(1, 2, 3, 4, 0.5, 0.25));
  RomFamily empty;
  empty.fom_h2 = h2_norm(a);
  const std::vector<InputSignal> in{InputSignal::step(1.0, 1.0)};
  const auto r = consistency_bound(a, a, empty, in, 0.05);
  EXPECT_DOUBLE_EQ(r.eps_rel, 2.0);
  EXPECT_FALSE(r.consistent);
}

TEST(ConsistencyBound, UnstableLpmIsRejected) {
  Matrix M = Matrix::Identity(1, 1), K = Matrix::Zero(1, 1), R = Matrix::Zero(1, 1);
  const SecondOrderSystem undamped(M.sparseView(), K.sparseView(), R.sparseView(),
                                   Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  const auto lpm = second_order_to_state_space(undamped);
  const auto dpm = second_order_to_state_space(two_mass_chain(1, 2, 3, 4, 0.5, 0.25));
  const std::vector<InputSignal> in{InputSignal::step(1.0, 1.0)};
  EXPECT_THROW(consistency_bound(lpm, dpm, family_of(dpm, 0.0, 1.0), in, 0.05),
               UnstableSystemError);
  EXPECT_THROW(consistency_bound(dpm, dpm, family_of(lpm, 0.0, 1.0), in, 0.05),
               UnstableSystemError);
}

TEST(ConsistencyBound, TriangleInequalityDominatesTheExactError) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.1, 10.0), damp(0.005, 0.05);
  std::uniform_int_distribution<int> size(20, 80);
  for (int trial = 0; trial < 8; ++trial) {
    const auto dpm = second_order_to_state_space(chain(size(rng), damp(rng), damp(rng)));
    const auto lpm = second_order_to_state_space(two_mass_chain(u(rng), u(rng), u(rng), u(rng),
                                                                u(rng), u(rng)));
    const RomFamily family = cure_accumulate(dpm, cure(0.05, 12));
    const std::vector<InputSignal> in{InputSignal::step(1.0, 2.0)};
    const auto r = consistency_bound(lpm, dpm, family, in, 0.05);
    const double exact = h2_error(dpm, lpm);
    EXPECT_GE(r.eps_abs, exact) << "trial " << trial;
    for (const DecayRow& row : r.decay) EXPECT_GE(row.eps1 + row.eps2, exact);
  }
}

TEST(ConsistencyReport, DeterministicSerialization) {
  const auto pair = unit_bar_pair(40, InputSignal::step(1.0, 4.0));
  const auto dpm = second_order_to_state_space(pair.dpm.system);
  const auto lpm = second_order_to_state_space(assemble_lpm(pair.lpm));
  const std::vector<InputSignal> in = pair.dpm.input_channels();
  const auto a = consistency_bound(lpm, dpm, cure_accumulate(dpm, cure(0.01, 20)), in, 0.05);
  const auto b = consistency_bound(lpm, dpm, cure_accumulate(dpm, cure(0.01, 20)), in, 0.05);
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_EQ(a.summary(), b.summary());
  EXPECT_EQ(a.error_decay_csv(), b.error_decay_csv());
  EXPECT_TRUE(a.consistent);
  EXPECT_LT(a.eps_rel, 0.05);
  const std::string csv = a.error_decay_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "rom_order,eps1,eps2,eps_rel");
  EXPECT_EQ(a.decay.size() + 1, static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')));
}
