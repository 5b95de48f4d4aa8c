#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <stepstab/lyapunov.hpp>
#include <stepstab/sdp.hpp>
#include <stepstab/simulator.hpp>

#include "support/examples.hpp"

using namespace stepstab;

namespace {

Matrix random_symmetric(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> g;
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = g(rng);
  return 0.5 * (m + m.transpose());
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct BinaryCertificate {
  SystemData sys = examples::binary();
  Certificate cert;
  BinaryCertificate() {
    const auto lmi = build_lmi(sys);
    const auto r = solve(encode(sys, lmi), sys);
    if (r.status != SolveStatus::Certified) throw Error("binary example did not certify: " + r.diagnostic);
    cert = r.certificate;
  }
};

const BinaryCertificate& binary_certificate() {
  static const BinaryCertificate bc;
  return bc;
}

}  // namespace

TEST(EvalAt, ZeroStateWithZeroOffsetUsesSelectionBlock) {
  std::mt19937_64 rng(3);
  const auto sys = make_system(Matrix::Identity(2, 2), Matrix::Ones(2, 2), Matrix::Identity(2, 2), Vector::Ones(2),
                               Vector::Zero(2));
  const Matrix P = random_symmetric(rng, 8);
  const LyapunovEvaluator ev(sys, P);
  const Vector s = vec2(0.25, 0.8);
  const Matrix Pss = P.block(2, 2, 2, 2);
  EXPECT_NEAR(ev.eval_at(Vector::Zero(2), s), s.dot(Pss * s), 1e-14);
}

TEST(EvalAt, MatchesHandLiftForPrintedBinaryP) {
  const auto sys = examples::binary();
  const Matrix P = examples::printed_P_binary();
  const LyapunovEvaluator ev(sys, P);
  const Vector x = vec2(0.3, 0.3);
  const double u = examples::plant_k().dot(x) - 1.0;  // 2.1195
  Vector z(5);
  z << 0.3, 0.3, 1.0, 0.0, u;
  EXPECT_NEAR(ev.eval_at(x, Vector::Ones(1)), z.dot(P * z), 1e-12);
  EXPECT_NEAR(ev.W(x), z.dot(P * z), 1e-12);
}

TEST(EvalAt, QuadraticScalingAtZeroOffset) {
  // z = (a x, s, a lambda_bar) keeps s fixed, so homogeneity needs P to
  // ignore the selection block.
  std::mt19937_64 rng(5);
  Matrix K(2, 2);
  K << 1.0, -2.0, 0.5, 3.0;
  const auto sys = make_system(Matrix::Identity(2, 2), Matrix::Ones(2, 2), K, Vector::Ones(2), Vector::Zero(2));
  Matrix P = random_symmetric(rng, 8);
  P.middleRows(2, 2).setZero();
  P.middleCols(2, 2).setZero();
  const LyapunovEvaluator ev(sys, P);
  const Vector x = vec2(0.7, -0.4);
  const Vector s = kkt::step(K * x);
  for (double a : {0.5, 2.0, 13.0}) EXPECT_NEAR(ev.eval_at(a * x, s), a * a * ev.eval_at(x, s), 1e-10 * a * a);
}

TEST(EvalAt, RejectsForeignSelection) {
  const auto sys = examples::binary();
  const LyapunovEvaluator ev(sys, examples::printed_P_binary());
  EXPECT_THROW(ev.eval_at(vec2(0.3, 0.3), Vector::Zero(1)), SelectionNotInStepSet);
  EXPECT_THROW(ev.eval_at(vec2(0.3, 0.3), Vector::Ones(2)), DimensionError);
}

TEST(Evaluator, RejectsBadP) {
  const auto sys = examples::binary();
  EXPECT_THROW(LyapunovEvaluator(sys, Matrix::Identity(4, 4)), DimensionError);
  Matrix P = Matrix::Identity(5, 5);
  P(0, 1) = 1e-3;
  EXPECT_THROW(LyapunovEvaluator(sys, P), DimensionError);
}

TEST(SupV, SingletonBranch) {
  const auto sys = examples::ternary();
  const LyapunovEvaluator ev(sys, examples::printed_P_ternary());
  const Vector x = vec2(5, 5);
  const auto r = ev.sup_V(x);
  EXPECT_EQ(r.selection, kkt::step(sys.step_input(x)));
  EXPECT_DOUBLE_EQ(r.value, ev.eval_at(x, r.selection));
}

TEST(SupV, PrototypeSegment) {
  const LyapunovEvaluator ev(examples::prototype_system(), examples::prototype_P());
  const Vector one = Vector::Ones(1);
  // At x = 1 the values 1 + s^2 fill [1, 2].
  EXPECT_DOUBLE_EQ(ev.eval_at(one, Vector::Zero(1)), 1.0);
  EXPECT_DOUBLE_EQ(ev.eval_at(one, Vector::Constant(1, 0.5)), 1.25);
  const auto r = ev.sup_V(one);
  EXPECT_DOUBLE_EQ(r.value, 2.0);
  EXPECT_DOUBLE_EQ(r.selection(0), 1.0);
  EXPECT_DOUBLE_EQ(ev.W(Vector::Constant(1, 2.0)), 5.0);
  EXPECT_DOUBLE_EQ(ev.W(Vector::Zero(1)), 0.0);
}

TEST(SupV, InteriorMaximumIsFound) {
  // q(s) = -(s - 0.3)^2 + const on the free coordinate.
  Matrix P = Matrix::Zero(4, 4);
  P(1, 1) = -1.0;
  P(0, 1) = P(1, 0) = 0.3;
  const LyapunovEvaluator ev(examples::prototype_system(), P);
  const auto r = ev.sup_V(Vector::Ones(1));
  EXPECT_NEAR(r.selection(0), 0.3, 1e-12);
  EXPECT_NEAR(r.value, 0.09, 1e-12);
}

TEST(SupV, AgreesWithDenseGrid) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  Matrix K(2, 2);
  K << 1.0, 0.4, -0.3, 1.2;
  const auto sys = make_system(Matrix::Identity(2, 2), Matrix::Ones(2, 2), K, vec2(1.0, 2.0), Vector::Zero(2));
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix P = random_symmetric(rng, 8);
    const LyapunovEvaluator ev(sys, P);
    const bool both = trial % 20 == 0;
    Vector x = Vector::Zero(2);
    int free_row = 0;
    if (!both) {
      // A state on the surface of row free_row only.
      free_row = trial % 2;
      const Vector r = K.row(free_row).transpose();
      x = vec2(-r(1), r(0)) * g(rng);
    }
    const Vector base = kkt::step(sys.step_input(x));
    double brute = -INFINITY;
    if (both) {
      const int n = 1001;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          brute = std::max(brute, ev.eval_at(x, vec2(a / double(n - 1), b / double(n - 1))));
      EXPECT_NEAR(ev.W(x), brute, 1e-5 * (1 + std::abs(brute))) << trial;
      EXPECT_GE(ev.W(x), brute - 1e-12);
    } else {
      const int n = 10000;
      for (int a = 0; a < n; ++a) {
        Vector s = base;
        s(free_row) = a / double(n - 1);
        brute = std::max(brute, ev.eval_at(x, s));
      }
      EXPECT_NEAR(ev.W(x), brute, 1e-6 * (1 + std::abs(brute))) << trial;
    }
  }
}

TEST(SupV, SampledSearchAgreesOnManyFreeComponents) {
  // Twelve free components exceed the enumeration limit; a concave form
  // with its peak inside the box is still found.
  const Index nu = 12;
  const auto sys = make_system(Matrix::Identity(1, 1), Matrix::Zero(1, nu), Matrix::Zero(nu, 1), Vector::Ones(nu),
                               Vector::Zero(nu));
  Matrix P = Matrix::Zero(1 + 3 * nu, 1 + 3 * nu);
  for (Index i = 0; i < nu; ++i) {
    P(1 + i, 1 + i) = -1.0;
    P(0, 1 + i) = P(1 + i, 0) = 0.5;
  }
  const LyapunovEvaluator ev(sys, P);
  // With x = 1: q(s) = 1*0 + sum(-s_i^2 + s_i), maximized at s_i = 0.5.
  const auto r = ev.sup_V(Vector::Ones(1));
  EXPECT_NEAR(r.value, 0.25 * nu, 1e-9);
}

TEST(LevelGrid, ZeroPGivesZeroGrid) {
  const auto sys = examples::ternary();
  const LyapunovEvaluator ev(sys, Matrix::Zero(8, 8));
  const auto g = ev.level_grid({-6, 6, -6, 6}, 7, 5);
  EXPECT_EQ(g.W.rows(), 5);
  EXPECT_EQ(g.W.cols(), 7);
  EXPECT_EQ(g.W.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(g.x1(0), -6.0);
  EXPECT_DOUBLE_EQ(g.x1(6), 6.0);
}

TEST(LevelGrid, NodesMatchPointwiseEvaluation) {
  const auto sys = examples::ternary();
  const LyapunovEvaluator ev(sys, examples::printed_P_ternary());
  const auto g = ev.level_grid({-1, 2, -3, 1}, 9, 4);
  for (Index j = 0; j < 4; ++j)
    for (Index i = 0; i < 9; ++i) EXPECT_EQ(g.W(j, i), ev.W(vec2(g.x1(i), g.x2(j))));
}

TEST(LevelGrid, RejectsNonPlanarState) {
  const LyapunovEvaluator ev(examples::prototype_system(), examples::prototype_P());
  EXPECT_THROW(ev.level_grid({0, 1, 0, 1}, 2, 2), NonPlanarState);
}

TEST(LevelGrid, CsvFormat) {
  LevelGrid g;
  g.x1 = vec2(0.0, 1.0);
  g.x2 = Vector::Constant(1, -0.5);
  g.W = Matrix(1, 2);
  g.W << 1.0 / 3.0, 2.0;
  const std::string path = ::testing::TempDir() + "grid.csv";
  write_level_csv(g, path);
  EXPECT_EQ(slurp(path), "x1,x2,W\n0,-0.5,0.333333333333\n1,-0.5,2\n");
}

TEST(Sandwich, HoldsForSolvedBinaryCertificate) {
  const auto& bc = binary_certificate();
  const LyapunovEvaluator ev(bc.sys, bc.cert.P);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int k = 0; k < 10000; ++k) {
    const Vector x = vec2(u(rng), u(rng));
    const double w = ev.W(x), nx = x.squaredNorm(), tol = 1e-6 * (1 + nx);
    ASSERT_GE(w, bc.cert.c1 * nx - tol) << x.transpose();
    ASSERT_LE(w, bc.cert.c2 * nx + tol) << x.transpose();
  }
}

TEST(Decrease, HoldsForSolvedBinaryCertificate) {
  const auto& bc = binary_certificate();
  const LyapunovEvaluator ev(bc.sys, bc.cert.P);
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  const Vector k = examples::plant_k();
  for (int n = 0; n < 10000; ++n) {
    Vector x = vec2(u(rng), u(rng));
    if (n % 4 == 0) x += (1.0 - k.dot(x)) / k.squaredNorm() * k;  // land on the switching line
    const Vector uin = bc.sys.step_input(x);
    const auto set = kkt::step_set(uin, LyapunovEvaluator::kZeroTol);
    std::vector<Vector> choices{kkt::step(uin)};
    if (!set.free_components().empty()) choices = {Vector::Zero(1), Vector::Ones(1)};
    for (const auto& s : choices) {
      const double tol = 1e-6 * (1 + x.squaredNorm());
      const double lhs = ev.W(bc.sys.successor(x, s)) - ev.eval_at(x, s);
      ASSERT_LE(lhs, -bc.cert.c3 * x.squaredNorm() + tol) << x.transpose();
    }
  }
}

TEST(Simulate, ZeroDynamicsStayAtZero) {
  const auto sys = make_system(Matrix::Zero(2, 2), Matrix::Ones(2, 1), Matrix::Ones(1, 2), Vector::Ones(1),
                               Vector::Zero(1));
  const auto t = simulate(sys, Vector::Zero(2), 5, SelectionPolicy::Deterministic);
  ASSERT_EQ(t.length(), 6);
  for (const auto& x : t.states) EXPECT_EQ(x, Vector::Zero(2));
  EXPECT_FALSE(t.lyap_values.has_value());
}

TEST(Simulate, RecordedStepsReproduceStates) {
  const auto sys = examples::ternary();
  for (auto policy : {SelectionPolicy::Deterministic, SelectionPolicy::UniformRandom, SelectionPolicy::WorstCase}) {
    const auto t = simulate(sys, vec2(5, 5), 60, policy, 9);
    ASSERT_EQ(t.states.size(), 61u);
    ASSERT_EQ(t.selections.size(), 61u);
    for (std::size_t j = 0; j + 1 < t.states.size(); ++j) {
      EXPECT_EQ(t.states[j + 1], sys.successor(t.states[j], t.selections[j]));
      EXPECT_TRUE(kkt::step_set(sys.step_input(t.states[j]), kPolicyZeroTol).contains(t.selections[j]));
    }
  }
}

TEST(Simulate, TernarySpiralsIn) {
  const auto t = simulate(examples::ternary(), vec2(5, 5), 200, SelectionPolicy::Deterministic);
  EXPECT_LT(t.states.back().norm(), 0.05 * t.states.front().norm());
  // The state turns around the origin: both coordinates change sign.
  int flips = 0;
  for (std::size_t j = 0; j + 1 < t.states.size(); ++j) flips += t.states[j](0) * t.states[j + 1](0) < 0.0;
  EXPECT_GE(flips, 4);
}

TEST(Simulate, RandomPolicyReplays) {
  // x = 0 with d = 0 keeps the input on the switching surface for one step.
  const auto sys = make_system(Matrix::Zero(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Vector::Ones(1),
                               Vector::Zero(1));
  const auto a = simulate(sys, Vector::Zero(1), 3, SelectionPolicy::UniformRandom, 42);
  const auto b = simulate(sys, Vector::Zero(1), 3, SelectionPolicy::UniformRandom, 42);
  const auto c = simulate(sys, Vector::Zero(1), 3, SelectionPolicy::UniformRandom, 43);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.selections, b.selections);
  EXPECT_NE(a.selections[0], c.selections[0]);
  const auto w = simulate(sys, Vector::Zero(1), 1, SelectionPolicy::WorstCase);
  EXPECT_EQ(w.selections[0](0), 1.0);
}

TEST(CounterRng, StreamDependsOnSeedAndCounterOnly) {
  CounterRng a(5), b(5);
  for (int k = 0; k < 100; ++k) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
  EXPECT_EQ(a.counter(), 100u);
  // SplitMix64 reference value for seed 0, first draw.
  CounterRng z(0);
  EXPECT_EQ(z.next_u64(), 0xE220A8397B1DCDAFULL);
}

TEST(AttachLyapunov, ZeroTrajectoryIsConstant) {
  const auto sys = make_system(Matrix::Zero(2, 2), Matrix::Ones(2, 1), Matrix::Ones(1, 2), Vector::Ones(1),
                               -Vector::Ones(1));
  std::mt19937_64 rng(2);
  const LyapunovEvaluator ev(sys, random_symmetric(rng, 5));
  const auto t = attach_lyapunov(simulate(sys, Vector::Zero(2), 4, SelectionPolicy::Deterministic), ev);
  ASSERT_TRUE(t.lyap_values.has_value());
  for (double w : *t.lyap_values) EXPECT_EQ(w, ev.W(Vector::Zero(2)));
}

TEST(FitDecay, GeometricSequence) {
  Trajectory t;
  for (int j = 0; j < 30; ++j) {
    t.states.push_back(std::pow(0.5, j) * vec2(1, 0));
    t.selections.push_back(Vector::Zero(1));
  }
  const auto d = fit_decay(t);
  EXPECT_NEAR(d.lambda, std::log(2.0), 1e-9);
  EXPECT_NEAR(d.kappa, 1.0, 1e-9);
  EXPECT_LT(d.fit_residual, 1e-9);
  EXPECT_TRUE(d.pass);
}

TEST(FitDecay, ConstantTrajectoryFails) {
  Trajectory t;
  for (int j = 0; j < 10; ++j) t.states.push_back(vec2(1, 1));
  const auto d = fit_decay(t);
  EXPECT_NEAR(d.lambda, 0.0, 1e-12);
  EXPECT_FALSE(d.pass);
}

TEST(FitDecay, ResidualIsTightEnvelopeSlack) {
  const auto t = simulate(examples::ternary(), vec2(5, 5), 60, SelectionPolicy::Deterministic);
  const auto d = fit_decay(t);
  const double n0 = t.states.front().norm();
  double tightest = INFINITY;
  for (std::size_t j = 0; j < t.states.size(); ++j) {
    const double bound = d.kappa * std::exp(d.fit_residual - d.lambda * double(j)) * n0;
    EXPECT_LE(t.states[j].norm(), bound * (1 + 1e-12)) << j;
    tightest = std::min(tightest, bound / t.states[j].norm());
  }
  EXPECT_NEAR(tightest, 1.0, 1e-12);
}

TEST(FitDecay, DegenerateInputs) {
  Trajectory t;
  t.states = {vec2(1, 0), vec2(0.5, 0)};
  EXPECT_THROW(fit_decay(t), DegenerateTrajectory);
  t.states = {Vector::Zero(2), Vector::Zero(2), Vector::Zero(2)};
  EXPECT_THROW(fit_decay(t), DegenerateTrajectory);
  t.states = {vec2(1, 0), Vector::Zero(2), Vector::Zero(2)};
  EXPECT_THROW(fit_decay(t), DegenerateTrajectory);
}

TEST(FitDecay, TernaryFromFiveFive) {
  const auto d = fit_decay(simulate(examples::ternary(), vec2(5, 5), 60, SelectionPolicy::Deterministic));
  EXPECT_GT(d.lambda, 0.0);
  EXPECT_TRUE(d.pass);
}

TEST(TrajectoryCsv, Format) {
  Trajectory t;
  t.states = {vec2(1, 2), vec2(0.5, 0.25)};
  t.selections = {Vector::Ones(1), Vector::Zero(1)};
  const std::string path = ::testing::TempDir() + "traj.csv";
  write_trajectory_csv(t, path);
  EXPECT_EQ(slurp(path), "j,x1,x2,s_1,W\n0,1,2,1,nan\n1,0.5,0.25,0,nan\n");
  t.lyap_values = std::vector<double>{3.0, 1.5};
  write_trajectory_csv(t, path);
  EXPECT_EQ(slurp(path), "j,x1,x2,s_1,W\n0,1,2,1,3\n1,0.5,0.25,0,1.5\n");
}
