#pragma once

#include <string>

#include "kkt.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "types.hpp"

// Constant matrices of the generalized-quadratic stability test.
//
// The test vector is theta = (x, chi(Kx+d, s), chi(K g + d, s_psi), 1) with
// g = A x + B Delta s, of length n_theta = n_p + 10 n_u + 1. Each chi block is
// laid out as (lambda1, lambda2, s, 1-s, u), n_u entries each.

namespace stepstab {

/// Offsets into theta.
struct ThetaLayout {
  Index n_p = 0;
  Index n_u = 0;

  Index size() const { return n_p + 10 * n_u + 1; }
  Index x() const { return 0; }
  Index chi(int which) const { return n_p + (which == 0 ? 0 : 5 * n_u); }
  Index lambda1(int which) const { return chi(which); }
  Index lambda2(int which) const { return chi(which) + n_u; }
  Index s(int which) const { return chi(which) + 2 * n_u; }
  Index s_comp(int which) const { return chi(which) + 3 * n_u; }
  Index u(int which) const { return chi(which) + 4 * n_u; }
  Index one() const { return n_p + 10 * n_u; }
};

struct LmiData {
  Index n_p = 0;
  Index n_u = 0;
  Index n_theta = 0;

  Matrix V_plus;  // (n_p+3n_u) x (n_p+6n_u)
  Matrix Pi1;     // (n_p+6n_u) x n_theta
  Matrix Pi2;     // (n_p+3n_u) x n_theta
  Matrix F;       // (8n_u+1) x n_theta
  Matrix H;       // n_u x 5n_u
  Matrix X;       // n_theta x n_theta
  Matrix T;       // 10n_u x n_theta
  Matrix R;       // 4n_u x n_theta
  Matrix E;       // n_u x 5n_u
  Matrix Z;       // n_u x 5n_u
  Matrix J;       // n_u x 5n_u
  Matrix L;       // n_u x 5n_u
  Matrix W;       // 6n_u x n_theta
  Matrix W_perp;  // n_theta x k
  Index rank_W = 0;
  bool degenerate_kernel = false;

  ThetaLayout layout() const { return {n_p, n_u}; }
  Index n_lyap() const { return n_p + 3 * n_u; }
  Index n_mult() const { return 8 * n_u + 1; }
};

inline LmiData build_lmi(const SystemData& sys, double rank_rel_tol = 1e-12) {
  require_valid(sys);
  const Index np = sys.n_p();
  const Index nu = sys.n_u();
  LmiData d;
  d.n_p = np;
  d.n_u = nu;
  d.n_theta = np + 10 * nu + 1;
  const Index nt = d.n_theta;
  auto I = [](Index n) { return Matrix::Identity(n, n); };

  d.H = Matrix::Zero(nu, 5 * nu);
  d.H.block(0, 2 * nu, nu, nu) = I(nu);
  d.J = d.H;
  d.E = Matrix::Zero(nu, 5 * nu);
  d.E.block(0, 2 * nu, nu, nu) = I(nu);
  d.E.block(0, 3 * nu, nu, nu) = I(nu);
  d.Z = Matrix::Zero(nu, 5 * nu);
  d.Z.block(0, 4 * nu, nu, nu) = I(nu);
  d.L = kkt::build_L(nu);

  // Pi1 theta = (x, s, s_psi, lambda_bar(Kx+d), lambda_bar(Kg+d)).
  const Index c1 = np;           // chi of the current step
  const Index c2 = np + 5 * nu;  // chi of the successor
  d.Pi1 = Matrix::Zero(np + 6 * nu, nt);
  d.Pi1.block(0, 0, np, np) = I(np);
  d.Pi1.block(np, c1, nu, 5 * nu) = d.H;
  d.Pi1.block(np + nu, c2, nu, 5 * nu) = d.H;
  d.Pi1.block(np + 2 * nu, c1, 2 * nu, 2 * nu) = I(2 * nu);
  d.Pi1.block(np + 4 * nu, c2, 2 * nu, 2 * nu) = I(2 * nu);

  // V_plus Pi1 theta = (A x + B Delta s, s_psi, lambda_bar(Kg+d)).
  d.V_plus = Matrix::Zero(np + 3 * nu, np + 6 * nu);
  d.V_plus.block(0, 0, np, np) = sys.A;
  d.V_plus.block(0, np, np, nu) = sys.B * sys.Delta;
  d.V_plus.block(np, np + nu, nu, nu) = I(nu);
  d.V_plus.block(np + nu, np + 4 * nu, 2 * nu, 2 * nu) = I(2 * nu);

  // Pi2 theta = (x, s, lambda_bar(Kx+d)).
  Matrix sel = Matrix::Zero(np + 3 * nu, np + 6 * nu);
  sel.block(0, 0, np + nu, np + nu) = I(np + nu);
  sel.block(np + nu, np + 2 * nu, 2 * nu, 2 * nu) = I(2 * nu);
  d.Pi2 = sel * d.Pi1;

  // F theta collects the sign-constrained entries of both chi blocks and 1.
  d.F = Matrix::Zero(8 * nu + 1, nt);
  d.F.block(0, c1, 4 * nu, 4 * nu) = I(4 * nu);
  d.F.block(4 * nu, c2, 4 * nu, 4 * nu) = I(4 * nu);
  d.F(8 * nu, nt - 1) = 1.0;

  d.X = Matrix::Zero(nt, nt);
  d.X.block(0, 0, np, np) = I(np);

  d.T = Matrix::Zero(10 * nu, nt);
  d.T.block(0, np, 10 * nu, 10 * nu) = I(10 * nu);

  // Rows: u = Kx + d, u_psi = K(Ax + B Delta s) + d, s + (1-s) = 1 twice.
  // The zero blocks of the last two rows span 5 n_u columns.
  d.R = Matrix::Zero(4 * nu, nt);
  d.R.block(0, 0, nu, np) = sys.K;
  d.R.block(0, c1, nu, 5 * nu) = -d.Z;
  d.R.block(0, nt - 1, nu, 1) = sys.d;
  d.R.block(nu, 0, nu, np) = sys.K * sys.A;
  d.R.block(nu, c1, nu, 5 * nu) = sys.K * sys.B * sys.Delta * d.J;
  d.R.block(nu, c2, nu, 5 * nu) = -d.Z;
  d.R.block(nu, nt - 1, nu, 1) = sys.d;
  d.R.block(2 * nu, c1, nu, 5 * nu) = d.E;
  d.R.block(2 * nu, nt - 1, nu, 1) = -Vector::Ones(nu);
  d.R.block(3 * nu, c2, nu, 5 * nu) = d.E;
  d.R.block(3 * nu, nt - 1, nu, 1) = -Vector::Ones(nu);

  d.W = Matrix::Zero(6 * nu, nt);
  d.W.topRows(4 * nu) = d.R;
  d.W.bottomRows(2 * nu) = linalg::kron(I(2), d.L) * d.T;

  auto kb = linalg::kernel_basis(d.W, rank_rel_tol);
  d.W_perp = kb.basis;
  d.rank_W = kb.rank;
  d.degenerate_kernel = kb.degenerate;
  return d;
}

/// theta for a concrete state and pair of selections.
inline Vector build_theta(const SystemData& sys, const Vector& x, const Vector& s,
                          const Vector& s_psi) {
  require_valid(sys);
  if (x.size() != sys.n_p()) throw DimensionError("build_theta: x has wrong length");
  const Vector u = sys.step_input(x);
  const auto chi1 = kkt::build_chi(u, s);
  const Vector g = sys.successor(x, s);
  const auto chi2 = kkt::build_chi(sys.step_input(g), s_psi);
  const ThetaLayout lay{sys.n_p(), sys.n_u()};
  Vector th(lay.size());
  th << x, chi1.stacked(), chi2.stacked(), 1.0;
  return th;
}

/// Psi(G) = He( (+)_{j=1,2} [0 G_j 0; 0 0 0] ), pairing (lambda1, lambda2)
/// with (s, 1-s) inside each chi block. Inputs are the diagonals of G_1, G_2.
inline Matrix psi_of(const Vector& g1, const Vector& g2) {
  if (g1.size() != g2.size() || g1.size() % 2 != 0)
    throw DimensionError("psi_of: diagonals must both have length 2 n_u");
  const Index nu = g1.size() / 2;
  Matrix blk = Matrix::Zero(10 * nu, 10 * nu);
  for (int j = 0; j < 2; ++j) {
    const Vector& g = j == 0 ? g1 : g2;
    const Index off = 5 * nu * j;
    for (Index i = 0; i < 2 * nu; ++i) blk(off + i, off + 2 * nu + i) = g(i);
  }
  return linalg::he(blk);
}

/// Matrix overload; rejects non-diagonal input.
inline Matrix psi_of(const Matrix& G1, const Matrix& G2) {
  auto diag_of = [](const Matrix& g) {
    if (g.rows() != g.cols()) throw DimensionError("psi_of: G must be square");
    Matrix off = g;
    off.diagonal().setZero();
    if (off.cwiseAbs().maxCoeff() != 0.0) throw DimensionError("psi_of: G must be diagonal");
    return Vector(g.diagonal());
  };
  return psi_of(diag_of(G1), diag_of(G2));
}

struct ObjectiveBlocks {
  Matrix Xi;
  Matrix Vl;
  Matrix Vu;
};

/// Max |P - P^T| accepted and silently symmetrized.
inline constexpr double kSymmetryTol = 1e-12;

inline Matrix checked_symmetric(const Matrix& P, Index n, const char* who) {
  if (P.rows() != n || P.cols() != n)
    throw DimensionError(std::string(who) + ": P must be " + std::to_string(n) + "x" +
                         std::to_string(n) + ", got " + shape_of(P));
  if (linalg::max_asymmetry(P) > kSymmetryTol)
    throw DimensionError(std::string(who) + ": P is not symmetric");
  return 0.5 * (P + P.transpose());
}

inline ObjectiveBlocks build_objective_blocks(const LmiData& lmi, const Matrix& P, double c1,
                                              double c2, double c3) {
  const Matrix Ps = checked_symmetric(P, lmi.n_lyap(), "build_objective_blocks");
  const Matrix next = lmi.V_plus * lmi.Pi1;
  const Matrix cur = lmi.Pi2.transpose() * Ps * lmi.Pi2;
  ObjectiveBlocks out;
  out.Xi = next.transpose() * Ps * next - cur + c3 * lmi.X;
  out.Vl = -cur + c1 * lmi.X;
  out.Vu = cur - c2 * lmi.X;
  return out;
}

}  // namespace stepstab
