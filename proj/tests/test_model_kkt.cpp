#include <gtest/gtest.h>

#include <random>

#include <stepstab/kkt.hpp>
#include <stepstab/model.hpp>

#include "support/examples.hpp"

using namespace stepstab;

namespace {

Vector random_vector(std::mt19937_64& rng, Index n, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

// Random member of S(u): exact pattern outside zeros, uniform on zeros.
Vector random_selection(std::mt19937_64& rng, const Vector& u) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector s = kkt::step(u);
  for (Index i : kkt::step_set(u).free_components()) s(i) = unit(rng);
  return s;
}

}  // namespace

TEST(Model, TernaryExampleValidates) {
  const auto sys = examples::ternary();
  EXPECT_TRUE(validate(sys).ok());
  EXPECT_EQ(sys.n_p(), 2);
  EXPECT_EQ(sys.n_u(), 2);
  Matrix B(2, 2), K(2, 2);
  B << 0.0049, -0.0049, 0.0959, -0.0959;
  K << 9.9, 0.495, -9.9, -0.495;
  EXPECT_EQ(sys.B, B);
  EXPECT_EQ(sys.K, K);
  EXPECT_EQ(sys.d, -Vector::Ones(2));
  EXPECT_EQ(sys.Delta, Matrix::Identity(2, 2));
}

TEST(Model, InconsistentShapesAreReported) {
  SystemData sys{Matrix::Identity(2, 2), Matrix::Zero(3, 1), Matrix::Zero(1, 2), Matrix::Identity(1, 1),
                 Vector::Zero(1)};
  const auto rep = validate(sys);
  EXPECT_FALSE(rep.ok());
  EXPECT_NE(rep.summary().find("B must be"), std::string::npos);
  EXPECT_THROW(require_valid(sys), DimensionError);
}

TEST(Model, OffDiagonalDeltaIsRejected) {
  auto sys = examples::ternary();
  sys.Delta(0, 1) = 0.5;
  const auto rep = validate(sys);
  EXPECT_FALSE(rep.ok());
  EXPECT_NE(rep.summary().find("diagonal"), std::string::npos);
}

TEST(Model, NonFiniteEntriesAreRejected) {
  auto sys = examples::binary();
  sys.A(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(validate(sys).ok());
  EXPECT_THROW(make_system(sys.A, sys.B, sys.K, Vector::Ones(1), sys.d), DimensionError);
}

TEST(Model, ZeroInputMapGivesOpenLoop) {
  const auto sys = ternary_embed(examples::plant_A(), Vector::Zero(2), examples::plant_k());
  EXPECT_TRUE(validate(sys).ok());
  EXPECT_EQ(sys.B, Matrix::Zero(2, 2));
}

TEST(Model, TernaryEmbedRejectsBadShapes) {
  EXPECT_THROW(ternary_embed(Matrix::Identity(2, 2), Vector::Zero(3), Vector::Zero(2)), DimensionError);
  EXPECT_THROW(ternary_embed(Matrix::Zero(2, 3), Vector::Zero(2), Vector::Zero(2)), DimensionError);
}

TEST(Model, TernaryEmbeddingMatchesDirectQuantizer) {
  const auto sys = examples::ternary();
  const Matrix A = examples::plant_A();
  const Vector b = examples::plant_b();
  const Vector k = examples::plant_k();
  std::mt19937_64 rng(7);
  for (int n = 0; n < 10000; ++n) {
    const Vector x = random_vector(rng, 2, -10.0, 10.0);
    const double v = k.dot(x);
    if (std::abs(v) == 1.0) continue;
    const Vector direct = A * x + b * ternary(v);
    const Vector embedded = sys.successor(x, kkt::step(sys.step_input(x)));
    ASSERT_EQ(direct, embedded) << "x = " << x.transpose();
  }
}

TEST(Step, SignCases) {
  Vector u(2);
  u << 2, -3;
  EXPECT_EQ(kkt::step(u), (Vector(2) << 1, 0).finished());
  EXPECT_EQ(kkt::step(Vector::Zero(1)), Vector::Zero(1));
  EXPECT_EQ(kkt::step(Vector::Constant(1, 1e-300)), Vector::Ones(1));
}

TEST(StepSet, Cases) {
  Vector u(3);
  u << 0.5, -0.5, 0;
  const auto set = kkt::step_set(u);
  ASSERT_EQ(set.size(), 3);
  EXPECT_EQ(set.components[0], kkt::StepKind::Fixed1);
  EXPECT_EQ(set.components[1], kkt::StepKind::Fixed0);
  EXPECT_EQ(set.components[2], kkt::StepKind::Interval);
  for (auto c : kkt::step_set(Vector::Zero(4)).components) EXPECT_EQ(c, kkt::StepKind::Interval);
}

TEST(StepSet, ContainsSingleValuedStep) {
  std::mt19937_64 rng(11);
  for (int n = 0; n < 1000; ++n) {
    const Vector u = random_vector(rng, 3, -1.0, 1.0);
    EXPECT_TRUE(kkt::step_set(u).contains(kkt::step(u)));
  }
  EXPECT_TRUE(kkt::step_set(Vector::Zero(2)).contains(kkt::step(Vector::Zero(2))));
}

TEST(StepSet, SignOfInputIsExact) {
  const Vector tiny = Vector::Constant(1, 1e-300);
  EXPECT_FALSE(kkt::step_set(tiny).contains(Vector::Constant(1, 0.5)));
  EXPECT_TRUE(kkt::step_set(tiny).contains(Vector::Constant(1, 1.0 - 1e-13)));
  EXPECT_FALSE(kkt::step_set(Vector::Zero(1)).contains(Vector::Constant(1, 1.0 + 1e-9)));
}

TEST(Ramp, Definition) {
  Vector u(2);
  u << 3, -2;
  EXPECT_EQ(kkt::ramp(u), (Vector(2) << 3, 0).finished());
  EXPECT_EQ(kkt::ramp(Vector::Zero(2)), Vector::Zero(2));
  std::mt19937_64 rng(3);
  for (int n = 0; n < 1000; ++n) {
    const Vector v = random_vector(rng, 3, -5.0, 5.0);
    EXPECT_LE((kkt::ramp(v) - kkt::ramp(-v) - v).cwiseAbs().maxCoeff(), 0.0);
    const double a = std::uniform_real_distribution<double>(0.0, 4.0)(rng);
    EXPECT_LE((kkt::ramp(a * v) - a * kkt::ramp(v)).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(LambdaBar, Values) {
  Vector u(2);
  u << -1, 2;
  const auto [l1, l2] = kkt::lambda_bar(u);
  EXPECT_EQ(l1, (Vector(2) << 1, 0).finished());
  EXPECT_EQ(l2, (Vector(2) << 0, 2).finished());
  const auto [z1, z2] = kkt::lambda_bar(Vector::Zero(3));
  EXPECT_EQ(z1, Vector::Zero(3));
  EXPECT_EQ(z2, Vector::Zero(3));
}

TEST(BuildChi, Examples) {
  const auto c = kkt::build_chi(Vector::Ones(1), Vector::Ones(1));
  EXPECT_EQ(c.stacked(), (Vector(5) << 0, 1, 1, 0, 1).finished());
  EXPECT_THROW(kkt::build_chi(-Vector::Ones(1), Vector::Ones(1)), SelectionNotInStepSet);
  const auto z = kkt::build_chi(Vector::Zero(1), Vector::Constant(1, 0.4));
  EXPECT_EQ(z.stacked(), (Vector(5) << 0, 0, 0.4, 0.6, 0).finished());
  EXPECT_THROW(kkt::build_chi(Vector::Zero(2), Vector::Zero(1)), DimensionError);
}

TEST(BuildChi, StackRoundTrip) {
  Vector u(2);
  u << 0.0, -4.0;
  const auto c = kkt::build_chi(u, (Vector(2) << 0.25, 0).finished());
  const auto back = kkt::KktVector::from_stacked(c.stacked());
  EXPECT_EQ(back.stacked(), c.stacked());
  EXPECT_EQ(back.s_comp, Vector::Ones(2) - back.s);
}

TEST(KktResidual, Examples) {
  EXPECT_EQ(kkt::kkt_residual(kkt::KktVector::from_stacked((Vector(5) << 0, 0, 0.5, 0.5, 0).finished())), 0.0);
  EXPECT_EQ(kkt::kkt_residual(kkt::KktVector::from_stacked((Vector(5) << 1, 0, 1, 0, 1).finished())), 2.0);
}

TEST(KktResidual, ForwardDirectionOnRandomDraws) {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution zero(0.2);
  for (int n = 0; n < 10000; ++n) {
    const Index nu = 1 + n % 3;
    Vector u = random_vector(rng, nu, -10.0, 10.0);
    for (Index i = 0; i < nu; ++i)
      if (zero(rng)) u(i) = 0.0;
    const Vector s = random_selection(rng, u);
    const auto chi = kkt::build_chi(u, s);
    ASSERT_LE(kkt::kkt_residual(chi), 1e-12);
    ASSERT_LE((kkt::build_L(nu) * chi.stacked()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(KktResidual, ReverseDirectionOnGrid) {
  int satisfied = 0;
  for (double u : {-1.0, 0.0, 1.0})
    for (int si = 0; si <= 4; ++si)
      for (double l1 : {0.0, 0.5, 1.0})
        for (double l2 : {0.0, 0.5, 1.0}) {
          const double s = 0.25 * si;
          kkt::KktVector c{Vector::Constant(1, l1), Vector::Constant(1, l2), Vector::Constant(1, s),
                           Vector::Constant(1, 1.0 - s), Vector::Constant(1, u)};
          if (kkt::kkt_residual(c) <= 1e-9) {
            ++satisfied;
            EXPECT_TRUE(kkt::step_set(c.u).contains(c.s)) << "u=" << u << " s=" << s;
          }
        }
  // u = 1 with s = 1; u = -1 with s = 0; u = 0 with every s.
  EXPECT_EQ(satisfied, 7);
}

TEST(BuildL, Structure) {
  Matrix L1 = kkt::build_L(1);
  EXPECT_EQ(L1, (Matrix(1, 5) << -1, 1, 0, 0, -1).finished());
  Matrix L2 = kkt::build_L(2);
  Matrix expect = Matrix::Zero(2, 10);
  expect(0, 0) = -1, expect(0, 2) = 1, expect(0, 8) = -1;
  expect(1, 1) = -1, expect(1, 3) = 1, expect(1, 9) = -1;
  EXPECT_EQ(L2, expect);
  EXPECT_THROW(kkt::build_L(0), DimensionError);
}
