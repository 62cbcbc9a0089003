#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lumpcheck/dpm.hpp"
#include "lumpcheck/sim.hpp"
#include "oracles.hpp"

using namespace lumpcheck;
using lumpcheck::testing::chain;
using lumpcheck::testing::oscillator;

namespace {

StateSpaceSystem scalar_decay() {
  const Matrix one = Matrix::Ones(1, 1);
  return StateSpaceSystem(one, Matrix(-one), Matrix::Zero(1, 1), one);
}

}  // namespace

TEST(BackwardEuler, ZeroInputZeroStateStaysZero) {
  const auto sys = second_order_to_state_space(chain(6, 0.1, 0.01));
  const auto traj = backward_euler(sys, InputSignal::zero(), Vector(), 0.05, 2.0);
  ASSERT_EQ(traj.times.size(), 41u);
  EXPECT_EQ(traj.outputs, Matrix::Zero(41, 1));
}

TEST(BackwardEuler, ScalarDecayOneStep) {
  const Vector x0 = Vector::Ones(1);
  const auto traj = backward_euler(scalar_decay(), InputSignal::zero(), x0, 0.1, 0.1);
  ASSERT_EQ(traj.times.size(), 2u);
  EXPECT_EQ(traj.times[1], 0.1);
  EXPECT_EQ(traj.outputs(0, 0), 1.0);
  EXPECT_NEAR(traj.outputs(1, 0), 1.0 / 1.1, 1e-15);
}

TEST(BackwardEuler, FirstOrderConvergence) {
  const Vector x0 = Vector::Ones(1);
  double prev = 0.0;
  for (const double dt : {0.01, 0.005, 0.0025}) {
    const auto traj = backward_euler(scalar_decay(), InputSignal::zero(), x0, dt, 1.0);
    const double err = std::abs(traj.outputs(traj.outputs.rows() - 1, 0) - std::exp(-1.0));
    if (prev > 0.0) EXPECT_NEAR(prev / err, 2.0, 0.02);
    prev = err;
  }
}

TEST(BackwardEuler, ConvergesToDcGain) {
  const auto sys = second_order_to_state_space(chain(5, 0.2, 0.02));
  const auto traj = backward_euler(sys, InputSignal::step(2.0), Vector(), 0.05, 250.0);
  // Static solve of the descriptor system: y = -C A^{-1} B h.
  const Matrix A = sys.A().dense();
  const double dc = -(sys.C() * A.partialPivLu().solve(sys.B()))(0, 0) * 2.0;
  EXPECT_NEAR(dc, 10.0, 1e-12);  // five unit springs in series
  EXPECT_NEAR(traj.outputs(traj.outputs.rows() - 1, 0), dc, 1e-6);
}

TEST(BackwardEuler, SparseAndDenseAgree) {
  BarParameters bar;
  bar.elements = 30;
  bar.beta = 0.05;
  const auto sparse = second_order_to_state_space(assemble_bar_fem(bar));
  ASSERT_TRUE(sparse.A().is_sparse());
  const StateSpaceSystem dense(sparse.E().dense(), sparse.A().dense(), sparse.B(), sparse.C());
  const auto in = InputSignal::ramp_hold(1.0, 0.5, 2.0);
  const auto a = backward_euler(sparse, in, Vector(), 0.01, 3.0);
  const auto b = backward_euler(dense, in, Vector(), 0.01, 3.0);
  EXPECT_LT((a.outputs - b.outputs).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(BackwardEuler, LargeStepsStayBounded) {
  const auto sys = second_order_to_state_space(chain(10, 0.01, 0.0));
  Vector x0 = Vector::Zero(20);
  x0.head(10).setOnes();
  for (const double dt : {0.1, 10.0, 1000.0}) {
    const auto traj = backward_euler(sys, InputSignal::zero(), x0, dt, 50.0 * dt);
    EXPECT_LE(traj.outputs.cwiseAbs().maxCoeff(), 10.0) << "dt " << dt;
  }
}

TEST(BackwardEuler, MultiChannelInput) {
  Matrix F = Matrix::Zero(4, 2);
  F(3, 0) = 1.0;
  F(1, 1) = 1.0;
  const auto sys = second_order_to_state_space(chain(4, 0.1, 0.01).with_input(F));
  const std::vector<InputSignal> in{InputSignal::step(1.0, 1.0), InputSignal::step(-1.0, 1.0)};
  const auto both = backward_euler(sys, in, Vector(), 0.01, 2.0);
  const auto one = backward_euler(sys.with_input(sys.B().col(0)), in[0], Vector(), 0.01, 2.0);
  const auto two = backward_euler(sys.with_input(sys.B().col(1)), in[1], Vector(), 0.01, 2.0);
  EXPECT_LT((both.outputs - one.outputs - two.outputs).norm(), 1e-12);
}

TEST(BackwardEuler, RejectsBadArguments) {
  const auto sys = scalar_decay();
  EXPECT_THROW(backward_euler(sys, InputSignal::zero(), Vector(), 0.0, 1.0), Error);
  EXPECT_THROW(backward_euler(sys, InputSignal::zero(), Vector(), -0.1, 1.0), Error);
  EXPECT_THROW(backward_euler(sys, InputSignal::zero(), Vector(), 0.1, 0.01), Error);
  EXPECT_THROW(backward_euler(sys, InputSignal::zero(), Vector::Ones(2), 0.1, 1.0), DimensionError);
  const std::vector<InputSignal> two{InputSignal::zero(), InputSignal::zero()};
  EXPECT_THROW(backward_euler(sys, two, Vector(), 0.1, 1.0), DimensionError);
}

TEST(BackwardEuler, SingularPencilNamesTheStep) {
  // E - dt A = 1 - dt at dt = 1.
  const Matrix one = Matrix::Ones(1, 1);
  const StateSpaceSystem growth(one, one, one, one);
  try {
    backward_euler(growth, InputSignal::zero(), Vector(), 1.0, 2.0);
    FAIL() << "expected SingularSolveError";
  } catch (const SingularSolveError& e) {
    EXPECT_NE(std::string(e.what()).find("dt"), std::string::npos) << e.what();
  }
}

TEST(CompareOutputs, Arithmetic) {
  std::vector<double> t(11);
  for (int i = 0; i <= 10; ++i) t[i] = 0.1 * i;
  const Matrix y = Matrix::Random(11, 2);
  auto same = compare_outputs(y, y, t);
  EXPECT_EQ(same.rmse, 0.0);
  EXPECT_EQ(same.linf_max_dev, 0.0);
  const auto off = compare_outputs(y, (y.array() - 0.25).matrix(), t);
  EXPECT_NEAR(off.rmse, 0.25, 1e-15);
  EXPECT_NEAR(off.linf_max_dev, 0.25, 1e-15);
}

TEST(CompareOutputs, SineAgainstZero) {
  const int n = 100000;
  std::vector<double> t(n);
  Matrix y(n, 1);
  for (int i = 0; i < n; ++i) {
    t[i] = 2.0 * M_PI * i / n;
    y(i, 0) = std::sin(t[i]);
  }
  const auto c = compare_outputs(y, Matrix::Zero(n, 1), t);
  EXPECT_NEAR(c.rmse, 1.0 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(c.linf_max_dev, 1.0, 1e-8);
}

TEST(CompareOutputs, GridMismatch) {
  Trajectory a{{0.0, 0.1, 0.2}, Matrix::Zero(3, 1)};
  Trajectory b{{0.0, 0.1}, Matrix::Zero(2, 1)};
  EXPECT_THROW(compare_outputs(a, b), DimensionError);
  b = Trajectory{{0.0, 0.1, 0.25}, Matrix::Zero(3, 1)};
  EXPECT_THROW(compare_outputs(a, b), DimensionError);
  const std::vector<double> t{0.0, 0.1, 0.2};
  EXPECT_THROW(compare_outputs(Matrix::Zero(3, 1), Matrix::Zero(3, 2), t), DimensionError);
  EXPECT_THROW(compare_outputs(Matrix::Zero(2, 1), Matrix::Zero(2, 1), t), DimensionError);
}

TEST(Defaults, OscillatorTimeScales) {
  // Poles of s^2 + s + 1 have modulus 1 and real part -1/2.
  const auto sys = second_order_to_state_space(oscillator(1.0, 1.0, 1.0));
  const TimeScales ts = time_scales(sys);
  EXPECT_NEAR(ts.shortest, 1.0, 1e-12);
  EXPECT_NEAR(ts.slowest_decay, 2.0, 1e-12);
  EXPECT_NEAR(default_time_step(ts), 0.02, 1e-14);
  const std::vector<InputSignal> in{InputSignal::step(1.0, 4.0)};
  EXPECT_NEAR(default_horizon(ts, in), 14.0, 1e-11);
}

TEST(TrajectoryCsv, HeaderAndFullPrecision) {
  const auto dir = std::filesystem::temp_directory_path() / "lumpcheck_sim_csv";
  std::filesystem::create_directories(dir);
  Trajectory traj{{0.0, 0.1, 0.2}, Matrix(3, 2)};
  traj.outputs << 1.0 / 3.0, -2.0, M_PI, 1e-300, 0.0, 7.25;
  write_trajectory_csv(dir / "t.csv", traj);
  std::ifstream in(dir / "t.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,y1,y2");
  for (int i = 0; i < 3; ++i) {
    ASSERT_TRUE(std::getline(in, line));
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    EXPECT_EQ(std::stod(cell), traj.times[i]);
    for (int j = 0; j < 2; ++j) {
      std::getline(ss, cell, ',');
      EXPECT_EQ(std::stod(cell), traj.outputs(i, j));
    }
  }
  EXPECT_FALSE(std::getline(in, line));
  write_trajectory_csv(dir / "l.csv", traj, {"tip", "root"});
  std::ifstream labelled(dir / "l.csv");
  std::getline(labelled, line);
  EXPECT_EQ(line, "t,tip,root");
}
