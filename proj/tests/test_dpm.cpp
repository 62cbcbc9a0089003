#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "lumpcheck/dpm.hpp"
#include "lumpcheck/h2.hpp"
#include "oracles.hpp"

using namespace lumpcheck;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("lumpcheck_dpm_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

double first_frequency(const SecondOrderSystem& sys) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> eig(Matrix(sys.K()), Matrix(sys.M()));
  return std::sqrt(eig.eigenvalues()(0));
}

}  // namespace

TEST(MatrixMarket, IdentityCoordinate) {
  const auto X = parse_matrix_market(
      "%%MatrixMarket matrix coordinate real general\n% comment\n2 2 2\n1 1 1\n2 2 1\n", "id");
  EXPECT_EQ(Matrix(X), Matrix::Identity(2, 2));
}

TEST(MatrixMarket, EntryOutsideDeclaredSize) {
  try {
    parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 5.0\n", "bad.mtx");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.where(), "bad.mtx:3");
    EXPECT_NE(e.message().find("(3,1)"), std::string::npos) << e.what();
  }
}

TEST(MatrixMarket, SymmetricStorageIsExpanded) {
  const auto X = parse_matrix_market(
      "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 2\n2 1 1\n2 2 2\n", "s");
  Matrix expected(2, 2);
  expected << 2, 1, 1, 2;
  EXPECT_EQ(Matrix(X), expected);
  const auto Y = parse_matrix_market("%%MatrixMarket matrix array real symmetric\n2 2\n2\n1\n2\n", "a");
  EXPECT_EQ(Matrix(Y), expected);
}

TEST(MatrixMarket, ArrayIsColumnMajor) {
  const auto X = parse_matrix_market("%%MatrixMarket matrix array real general\n2 3\n1\n2\n3\n4\n5\n6\n", "a");
  Matrix expected(2, 3);
  expected << 1, 3, 5, 2, 4, 6;
  EXPECT_EQ(Matrix(X), expected);
}

TEST(MatrixMarket, RejectsMalformedInput) {
  const char* bad[] = {
      "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n",
      "%%MatrixMarket matrix coordinate pattern general\n1 1 1\n1 1\n",
      "%%MatrixMarket matrix coordinate real hermitian\n1 1 1\n1 1 1\n",
      "%%MatrixMarket vector coordinate real general\n1 1 1\n1 1 1\n",
      "%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 1\n",
      "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n",
      "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1\n2 2 1\n",
      "%%MatrixMarket matrix coordinate real general\n2 2\n",
      "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1\n",
      "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 abc\n",
      "",
  };
  for (const char* text : bad) EXPECT_THROW(parse_matrix_market(text, "x"), ParseError) << text;
}

TEST(MatrixMarket, WriteReadRoundTripIsExact) {
  const auto dir = scratch("roundtrip");
  Matrix D(3, 2);
  D << 1.0 / 3.0, -2e-300, std::numbers::pi, 0.0, 1e300, -7.25;
  write_matrix_market(dir / "d.mtx", D);
  EXPECT_EQ(Matrix(read_matrix_market(dir / "d.mtx")), D);
  const SparseMatrix S = D.sparseView();
  write_matrix_market(dir / "s.mtx", S);
  EXPECT_EQ(Matrix(read_matrix_market(dir / "s.mtx")), D);
}

TEST(BarFem, SingleLumpedElement) {
  const auto sys = assemble_bar_fem(1.0, 1.0, 1.0, 1.0, 1, 0.0, 0.0, MassModel::lumped);
  EXPECT_EQ(Matrix(sys.M()), Matrix::Constant(1, 1, 0.5));
  EXPECT_EQ(Matrix(sys.K()), Matrix::Constant(1, 1, 1.0));
  EXPECT_EQ(Matrix(sys.R()), Matrix::Zero(1, 1));
  EXPECT_DOUBLE_EQ(dpm_total_mass(sys), 0.5);
}

TEST(BarFem, TwoConsistentElements) {
  // EA/L_e = 1 with L = 2, two elements
  const auto sys = assemble_bar_fem(2.0, 1.0, 1.0, 1.0, 2, 0.0, 0.0, MassModel::consistent);
  Matrix K(2, 2), M(2, 2);
  K << 2, -1, -1, 1;
  M << 4.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 2.0 / 6.0;
  EXPECT_LT((Matrix(sys.K()) - K).norm(), 1e-15);
  EXPECT_LT((Matrix(sys.M()) - M).norm(), 1e-15);
  EXPECT_EQ(sys.F(), Eigen::Vector2d(0, 1));
  EXPECT_EQ(sys.Cout(), Eigen::RowVector2d(0, 1));
}

TEST(BarFem, RayleighDamping) {
  const auto sys = assemble_bar_fem(1.5, 0.2, 3.0, 2.0, 7, 0.3, 0.01, MassModel::consistent);
  const Matrix R = 0.3 * Matrix(sys.M()) + 0.01 * Matrix(sys.K());
  EXPECT_LT((Matrix(sys.R()) - R).norm(), 1e-14 * R.norm());
  EXPECT_TRUE(is_classically_damped(sys));

  // modal damping ratios (alpha / w + beta w) / 2
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> eig(Matrix(sys.K()), Matrix(sys.M()));
  const Matrix& Phi = eig.eigenvectors();
  const Matrix modal_r = Phi.transpose() * Matrix(sys.R()) * Phi;
  for (Index i = 0; i < 7; ++i) {
    const double w = std::sqrt(eig.eigenvalues()(i));
    EXPECT_NEAR(modal_r(i, i) / (2.0 * w), (0.3 / w + 0.01 * w) / 2.0, 1e-12);
  }
}

TEST(BarFem, TotalMass) {
  BarParameters bar;
  bar.length = 2.5;
  bar.area = 1.0;
  bar.density = 2.0;  // rho A L = 5
  for (int n : {1, 3, 10}) {
    bar.elements = n;
    bar.clamped = false;
    bar.mass_model = MassModel::consistent;
    EXPECT_NEAR(dpm_total_mass(assemble_bar_fem(bar)), 5.0, 1e-13);
    bar.mass_model = MassModel::lumped;
    EXPECT_NEAR(dpm_total_mass(assemble_bar_fem(bar)), 5.0, 1e-13);
  }
  SparseMatrix M(2, 2);
  M.insert(0, 0) = 2.0;
  M.insert(1, 1) = 3.0;
  SparseMatrix I(2, 2);
  I.setIdentity();
  EXPECT_EQ(dpm_total_mass(SecondOrderSystem(M, I, I, Matrix::Ones(2, 1), Matrix::Ones(1, 2))), 5.0);
}

TEST(BarFem, DefinitenessAndSymmetry) {
  for (auto model : {MassModel::consistent, MassModel::lumped}) {
    const auto sys = assemble_bar_fem(1.0, 0.1, 200.0, 7.8, 25, 0.0, 0.0, model);
    const Matrix K = sys.K(), M = sys.M();
    EXPECT_EQ(K, K.transpose());
    EXPECT_EQ(M, M.transpose());
    EXPECT_EQ(Eigen::LLT<Matrix>(K).info(), Eigen::Success);
    EXPECT_EQ(Eigen::LLT<Matrix>(M).info(), Eigen::Success);
  }
}

TEST(BarFem, FirstFrequencyConvergesAtSecondOrder) {
  BarParameters bar;
  bar.length = 2.0;
  bar.area = 0.01;
  bar.youngs_modulus = 70e9;
  bar.density = 2700.0;
  const double exact = 0.5 * std::numbers::pi * std::sqrt(bar.youngs_modulus / bar.density) / bar.length;
  EXPECT_DOUBLE_EQ(bar_first_frequency(bar), exact);
  double err[3];
  for (int k = 0; k < 3; ++k) {
    bar.elements = 8 << k;
    err[k] = std::abs(first_frequency(assemble_bar_fem(bar)) - exact);
  }
  const double order = std::log2((err[0] - err[1]) / (err[1] - err[2]));
  EXPECT_GE(order, 2.0);
  EXPECT_LT(err[2] / exact, 0.01);
}

TEST(BoiSelector, Normalization) {
  const Index nodes1[] = {4, 5};
  RowVector expected = RowVector::Zero(8);
  expected(4) = expected(5) = 0.5;
  EXPECT_EQ(build_boi_selector(8, nodes1), expected);

  const Index nodes2[] = {0};
  EXPECT_EQ(build_boi_selector(3, nodes2), RowVector::Unit(3, 0));

  const Index nodes3[] = {1, 2, 3};
  const double w[] = {1, 2, 1};
  EXPECT_EQ(build_boi_selector(5, nodes3, w), (RowVector(5) << 0, 0.25, 0.5, 0.25, 0).finished());

  const double zero[] = {0, 0, 0};
  EXPECT_THROW(build_boi_selector(5, nodes3, zero), InvalidModelError);
  EXPECT_THROW(build_boi_selector(5, std::span<const Index>()), InvalidModelError);
  const Index outside[] = {5};
  EXPECT_THROW(build_boi_selector(5, outside), InvalidModelError);
}

TEST(Manifest, MatrixFilesWithSourcesAndBoi) {
  const auto dir = scratch("files");
  const auto sys = assemble_bar_fem(1.0, 1.0, 1.0, 1.0, 4, 0.1, 0.01, MassModel::consistent);
  write_matrix_market(dir / "M.mtx", sys.M());
  write_matrix_market(dir / "K.mtx", sys.K());
  write_matrix_market(dir / "R.mtx", sys.R());
  write(dir / "dpm.json", R"({
    "format": 1,
    "matrices": {"M": "M.mtx", "K": "K.mtx", "R": "R.mtx"},
    "signals": [{"id": "p", "kind": "step", "amplitude": 0.5, "horizon": 2}],
    "sources": [{"signal": "p", "nodes": [2, 3], "weights": [1, 1]}],
    "boi": [{"label": "end", "nodes": [2, 3]}],
    "x0": [0, 0, 0, 0.1],
    "total_mass": 1.0,
    "projections": {"gamma_n": [[2.0]], "gamma_i": [{"mass": "m1", "nodes": [3]}]}
  })");
  const DpmModel m = load_dpm_manifest(dir / "dpm.json");
  EXPECT_EQ(m.system.dofs(), 4);
  EXPECT_EQ(m.system.F(), (Matrix(4, 1) << 0, 0, 1, 1).finished());
  EXPECT_EQ(m.system.Cout(), (Matrix(1, 4) << 0, 0, 0.5, 0.5).finished());
  EXPECT_EQ(m.input_signals, std::vector<std::string>{"p"});
  EXPECT_EQ(m.x0(3), 0.1);
  EXPECT_EQ(m.v0, Vector::Zero(4));
  EXPECT_EQ(m.mass_for_matching(), 1.0);
  ASSERT_TRUE(m.projections.gamma_n);
  EXPECT_EQ((*m.projections.gamma_n)(0, 0), 2.0);
  ASSERT_EQ(m.projections.gamma_i.size(), 1u);
  EXPECT_EQ(m.projections.gamma_i[0].mass, "m1");

  // save and reload reproduces the model bit for bit
  save_dpm(dir / "copy", m);
  const DpmModel again = load_dpm_manifest(dir / "copy" / "dpm.json");
  EXPECT_EQ(Matrix(again.system.K()), Matrix(m.system.K()));
  EXPECT_EQ(Matrix(again.system.R()), Matrix(m.system.R()));
  EXPECT_EQ(again.system.F(), m.system.F());
  EXPECT_EQ(again.x0, m.x0);
  EXPECT_EQ(again.total_mass, m.total_mass);
  EXPECT_EQ(again.input_signals, m.input_signals);
}

TEST(Manifest, BarGenerator) {
  const auto dir = scratch("bar");
  write(dir / "dpm.json", R"({"format": 1,
    "bar": {"length": 1, "area": 1, "youngs_modulus": 1, "density": 1, "elements": 10,
            "beta": 0.05, "mass": "lumped"},
    "signals": [{"id": "f", "kind": "step", "amplitude": 1, "horizon": 4}],
    "inputs": ["f"]})");
  const DpmModel m = load_dpm_manifest(dir / "dpm.json");
  EXPECT_EQ(m.system.dofs(), 10);
  EXPECT_NEAR(m.mass_for_matching(), 0.95, 1e-14);
  ASSERT_TRUE(m.bar);
  EXPECT_EQ(m.bar->mass_model, MassModel::lumped);
}

TEST(Manifest, ErrorsNameTheFileAndField) {
  const auto dir = scratch("errors");
  write(dir / "a.json", R"({"format": 1, "bar": {"length": 1}})");
  try {
    load_dpm_manifest(dir / "a.json");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("a.json"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("/bar"), std::string::npos) << e.what();
  }
  write(dir / "b.json", R"({"format": 1, "matrices": {"M": "missing.mtx", "K": "missing.mtx"}})");
  EXPECT_THROW(load_dpm_manifest(dir / "b.json"), ParseError);
  EXPECT_THROW(load_dpm_manifest(dir / "nope.json"), ParseError);
}

TEST(RomFamilyIo, RoundTrip) {
  const auto dir = scratch("family");
  RomFamily f;
  f.fom_ref = "bar";
  f.fom_h2 = 0.7;
  f.target_rel = 0.01;
  f.target_met = true;
  f.stop_reason = "target reached";
  Matrix A(2, 2);
  A << -1, 2, -2, -1;
  f.steps.push_back(RomStep{2, StateSpaceSystem(Matrix(Matrix::Identity(2, 2)), A, Matrix::Ones(2, 1),
                                                 Matrix::Ones(1, 2)),
                            0.1, 0.69, {Complex(1, 2), Complex(1, -2)}});
  save_rom_family(dir, f);
  const RomFamily g = load_rom_family(dir);
  ASSERT_EQ(g.steps.size(), 1u);
  EXPECT_EQ(g.steps[0].order, 2);
  EXPECT_EQ(g.steps[0].rom.A().dense(), A);
  EXPECT_EQ(g.steps[0].certified_error, 0.1);
  EXPECT_EQ(g.steps[0].shifts, f.steps[0].shifts);
  EXPECT_EQ(g.fom_h2, 0.7);
  EXPECT_TRUE(g.target_met);
}
