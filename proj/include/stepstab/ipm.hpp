#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "types.hpp"

// Infeasible-start primal-dual interior point method for block-diagonal
// semidefinite programs with one linear (diagonal) block:
//
//   primal:  min <C, X>   s.t.  <A_i, X> = b_i,  X >= 0
//   dual:    max b^T y    s.t.  sum_i y_i A_i + S = C,  S >= 0
//
// HKM search direction with a Mehrotra predictor-corrector.

namespace stepstab::ipm {

struct SdpBlock {
  Index n = 0;
  Matrix C;
  std::vector<std::pair<Index, Matrix>> A;  // (variable, coefficient), symmetric
};

struct LpBlock {
  Vector C;  // length = number of rows
  Matrix A;  // rows x m
  Index size() const { return C.size(); }
};

struct Problem {
  Index m = 0;
  Vector b;
  std::vector<SdpBlock> sdp;
  LpBlock lp;
};

struct Options {
  int max_iterations = 200;
  double tolerance = 1e-9;
  double step_fraction = 0.95;
  double time_limit_seconds = 60.0;
  std::ostream* log = nullptr;  // per-iteration trace when set
};

// Stalled: the dual iterate is feasible and its objective has stopped moving
// while the primal side does not close, as happens on problems without a
// primal interior.
enum class Status { Converged, Stalled, MaxIterations, TimeLimit, NumericalFailure };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Converged: return "converged";
    case Status::Stalled: return "stalled";
    case Status::MaxIterations: return "max-iterations";
    case Status::TimeLimit: return "time-limit";
    case Status::NumericalFailure: return "numerical-failure";
  }
  return "?";
}

struct Result {
  Status status = Status::NumericalFailure;
  Vector y;
  std::vector<Matrix> X;
  std::vector<Matrix> S;
  Vector x_lp;
  Vector s_lp;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double relative_gap = INFINITY;
  double primal_infeasibility = INFINITY;
  double dual_infeasibility = INFINITY;
  int iterations = 0;
};

namespace detail {

// Largest alpha in (0, inf] with X + alpha dX >= 0, given chol(X).
inline double max_step(const Eigen::LLT<Matrix>& chol, const Matrix& dX) {
  if (dX.size() == 0) return INFINITY;
  const Matrix Linv_dX = chol.matrixL().solve(dX);
  Matrix M = chol.matrixL().solve(Linv_dX.transpose());
  M = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  return lmin >= 0.0 ? INFINITY : -1.0 / lmin;
}

inline double max_step_lp(const Vector& x, const Vector& dx) {
  double a = INFINITY;
  for (Index i = 0; i < x.size(); ++i)
    if (dx(i) < 0.0) a = std::min(a, -x(i) / dx(i));
  return a;
}

inline double inner(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).sum(); }

}  // namespace detail

class Solver {
 public:
  explicit Solver(const Problem& p) : p_(p) {}

  Result run(const Options& opt) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    init();
    Result res;
    const Index m = p_.m;
    const double b_norm = p_.b.norm();
    double c_norm2 = p_.lp.C.squaredNorm();
    for (const auto& blk : p_.sdp) c_norm2 += blk.C.squaredNorm();
    const double c_norm = std::sqrt(c_norm2);
    const double n_total = total_dimension();
    int stalls = 0;
    std::vector<double> dobj_history;

    for (int it = 0; it <= opt.max_iterations; ++it) {
      res.iterations = it;
      // Residuals.
      Vector rp = p_.b - apply_A(X_, x_);
      std::vector<Matrix> Rd(p_.sdp.size());
      double rd2 = 0.0;
      for (std::size_t k = 0; k < p_.sdp.size(); ++k) {
        Rd[k] = p_.sdp[k].C - S_[k] - adjoint_block(k, y_);
        rd2 += Rd[k].squaredNorm();
      }
      Vector rd_lp = p_.lp.C - s_ - p_.lp.A * y_;
      rd2 += rd_lp.squaredNorm();

      double xs = x_.dot(s_);
      double pobj = p_.lp.C.dot(x_);
      for (std::size_t k = 0; k < p_.sdp.size(); ++k) {
        xs += detail::inner(X_[k], S_[k]);
        pobj += detail::inner(p_.sdp[k].C, X_[k]);
      }
      const double dobj = p_.b.dot(y_);
      const double mu = xs / n_total;
      res.primal_infeasibility = rp.norm() / (1.0 + b_norm);
      res.dual_infeasibility = std::sqrt(rd2) / (1.0 + c_norm);
      res.relative_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
      res.primal_objective = pobj;
      res.dual_objective = dobj;
      store(res);
      if (opt.log)
        *opt.log << "it " << it << " pobj " << pobj << " dobj " << dobj << " pinf " << res.primal_infeasibility
                 << " dinf " << res.dual_infeasibility << " gap " << res.relative_gap << " mu " << mu << "\n";

      if (res.primal_infeasibility < opt.tolerance && res.dual_infeasibility < opt.tolerance &&
          res.relative_gap < opt.tolerance) {
        res.status = Status::Converged;
        return res;
      }
      dobj_history.push_back(dobj);
      if (it >= 8 && res.dual_infeasibility < opt.tolerance && mu < 1e-8 * (1.0 + std::abs(dobj))) {
        const double before = dobj_history[dobj_history.size() - 6];
        if (std::abs(dobj - before) <= 1e-10 * (1.0 + std::abs(dobj))) {
          res.status = Status::Stalled;
          return res;
        }
      }
      if (it == opt.max_iterations) {
        res.status = Status::MaxIterations;
        return res;
      }
      if (std::chrono::duration<double>(clock::now() - t0).count() > opt.time_limit_seconds) {
        res.status = Status::TimeLimit;
        return res;
      }

      // Factorizations.
      std::vector<Eigen::LLT<Matrix>> cholS(p_.sdp.size()), cholX(p_.sdp.size());
      std::vector<Matrix> Sinv(p_.sdp.size());
      for (std::size_t k = 0; k < p_.sdp.size(); ++k) {
        cholS[k].compute(S_[k]);
        cholX[k].compute(X_[k]);
        if (cholS[k].info() != Eigen::Success || cholX[k].info() != Eigen::Success) {
          if (opt.log) *opt.log << "   factorization of block " << k << " failed\n";
          res.status = Status::NumericalFailure;
          return res;
        }
        Sinv[k] = cholS[k].solve(Matrix::Identity(p_.sdp[k].n, p_.sdp[k].n));
        Sinv[k] = 0.5 * (Sinv[k] + Sinv[k].transpose());
      }
      Matrix M = schur(cholX, cholS);
      Eigen::LLT<Matrix> cholM(M);
      if (cholM.info() != Eigen::Success) {
        const double reg = 1e-14 * std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
        M.diagonal().array() += reg;
        cholM.compute(M);
        if (cholM.info() != Eigen::Success) {
          if (opt.log) *opt.log << "   schur factorization failed\n";
          res.status = Status::NumericalFailure;
          return res;
        }
      }

      // Predictor.
      Direction aff = direction(cholM, Sinv, Rd, rd_lp, 0.0, nullptr);
      double ap = opt.step_fraction * primal_step(cholX, aff);
      double ad = opt.step_fraction * dual_step(cholS, aff);
      ap = std::min(1.0, ap);
      ad = std::min(1.0, ad);
      double xs_aff = (x_ + ap * aff.dx).dot(s_ + ad * aff.ds);
      for (std::size_t k = 0; k < p_.sdp.size(); ++k)
        xs_aff += detail::inner(X_[k] + ap * aff.dX[k], S_[k] + ad * aff.dS[k]);
      const double mu_aff = std::max(0.0, xs_aff / n_total);
      double sigma = std::pow(mu_aff / mu, 3);
      sigma = std::clamp(sigma, 0.0, 1.0);

      // Corrector.
      Direction dir = direction(cholM, Sinv, Rd, rd_lp, sigma * mu, &aff);
      ap = std::min(1.0, opt.step_fraction * primal_step(cholX, dir));
      ad = std::min(1.0, opt.step_fraction * dual_step(cholS, dir));
      if (opt.log) *opt.log << "   sigma " << sigma << " ap " << ap << " ad " << ad << "\n";
      if (ap < 1e-12 && ad < 1e-12) {
        if (++stalls > 3) {
          res.status = Status::NumericalFailure;
          return res;
        }
      } else {
        stalls = 0;
      }

      for (std::size_t k = 0; k < p_.sdp.size(); ++k) {
        X_[k] += ap * dir.dX[k];
        X_[k] = 0.5 * (X_[k] + X_[k].transpose());
        S_[k] += ad * dir.dS[k];
        S_[k] = 0.5 * (S_[k] + S_[k].transpose());
      }
      x_ += ap * dir.dx;
      s_ += ad * dir.ds;
      y_ += ad * dir.dy;
      (void)m;
    }
    res.status = Status::MaxIterations;
    return res;
  }

 private:
  struct Direction {
    Vector dy;
    std::vector<Matrix> dX, dS;
    Vector dx, ds;
  };

  const Problem& p_;
  std::vector<Matrix> X_, S_;
  Vector x_, s_, y_;

  double total_dimension() const {
    double n = static_cast<double>(p_.lp.size());
    for (const auto& blk : p_.sdp) n += static_cast<double>(blk.n);
    return std::max(1.0, n);
  }

  void init() {
    const Index m = p_.m;
    y_ = Vector::Zero(m);
    // Per-coefficient norms for the starting point scale.
    Vector anorm = Vector::Zero(m);
    for (const auto& blk : p_.sdp)
      for (const auto& [i, Ai] : blk.A) anorm(i) += Ai.squaredNorm();
    if (p_.lp.size() > 0) anorm += p_.lp.A.colwise().squaredNorm().transpose();
    anorm = anorm.cwiseSqrt();

    X_.clear();
    S_.clear();
    for (const auto& blk : p_.sdp) {
      const double n = static_cast<double>(blk.n);
      double xi = std::max(10.0, std::sqrt(n));
      double eta = std::max({10.0, std::sqrt(n), blk.C.norm()});
      for (const auto& [i, Ai] : blk.A) {
        const double an = Ai.norm();
        xi = std::max(xi, n * (1.0 + std::abs(p_.b(i))) / (1.0 + an));
        eta = std::max(eta, an);
      }
      X_.push_back(xi * Matrix::Identity(blk.n, blk.n));
      S_.push_back(eta * Matrix::Identity(blk.n, blk.n));
    }
    const Index nl = p_.lp.size();
    if (nl > 0) {
      double xi = 10.0, eta = std::max(10.0, p_.lp.C.cwiseAbs().maxCoeff());
      for (Index i = 0; i < m; ++i) {
        const double an = p_.lp.A.col(i).norm();
        if (an > 0.0) {
          xi = std::max(xi, (1.0 + std::abs(p_.b(i))) / (1.0 + an));
          eta = std::max(eta, an);
        }
      }
      x_ = Vector::Constant(nl, xi);
      s_ = Vector::Constant(nl, eta);
    } else {
      x_ = Vector(0);
      s_ = Vector(0);
    }
  }

  Matrix adjoint_block(std::size_t k, const Vector& y) const {
    const auto& blk = p_.sdp[k];
    Matrix out = Matrix::Zero(blk.n, blk.n);
    for (const auto& [i, Ai] : blk.A)
      if (y(i) != 0.0) out += y(i) * Ai;
    return out;
  }

  // A(X) for a collection of (possibly nonsymmetric) block matrices.
  Vector apply_A(const std::vector<Matrix>& Xb, const Vector& xl) const {
    Vector out = Vector::Zero(p_.m);
    for (std::size_t k = 0; k < p_.sdp.size(); ++k)
      for (const auto& [i, Ai] : p_.sdp[k].A) out(i) += detail::inner(Ai, Xb[k]);
    if (p_.lp.size() > 0) out += p_.lp.A.transpose() * xl;
    return out;
  }

  // Gram form: with X = Lx Lx^T and S = Ls Ls^T,
  // tr(A_i X A_j S^-1) = <Ls^-1 A_i Lx, Ls^-1 A_j Lx>.
  Matrix schur(const std::vector<Eigen::LLT<Matrix>>& cholX, const std::vector<Eigen::LLT<Matrix>>& cholS) const {
    const Index m = p_.m;
    Matrix M = Matrix::Zero(m, m);
    for (std::size_t k = 0; k < p_.sdp.size(); ++k) {
      const auto& blk = p_.sdp[k];
      const Index nt = static_cast<Index>(blk.A.size());
      if (nt == 0) continue;
      const Index n2 = blk.n * blk.n;
      const Matrix Lx = cholX[k].matrixL();
      Matrix G(n2, nt);
      for (Index t = 0; t < nt; ++t) {
        const Matrix& Ai = blk.A[static_cast<std::size_t>(t)].second;
        const Matrix Gi = cholS[k].matrixL().solve(Ai * Lx);
        G.col(t) = Eigen::Map<const Vector>(Gi.data(), n2);
      }
      const Matrix sub = G.transpose() * G;
      for (Index a = 0; a < nt; ++a)
        for (Index c = 0; c < nt; ++c)
          M(blk.A[static_cast<std::size_t>(a)].first, blk.A[static_cast<std::size_t>(c)].first) +=
              sub(a, c);
    }
    if (p_.lp.size() > 0) {
      const Vector w = x_.cwiseQuotient(s_).cwiseSqrt();
      const Matrix WA = w.asDiagonal() * p_.lp.A;
      M.noalias() += WA.transpose() * WA;
    }
    return 0.5 * (M + M.transpose());
  }

  Direction direction(const Eigen::LLT<Matrix>& cholM, const std::vector<Matrix>& Sinv,
                      const std::vector<Matrix>& Rd, const Vector& rd_lp, double target,
                      const Direction* aff) const {
    const std::size_t nb = p_.sdp.size();
    std::vector<Matrix> Yb(nb);
    for (std::size_t k = 0; k < nb; ++k) {
      Matrix Y = X_[k] * Rd[k] * Sinv[k] - target * Sinv[k];
      if (aff) Y += aff->dX[k] * aff->dS[k] * Sinv[k];
      Yb[k] = std::move(Y);
    }
    Vector yl(p_.lp.size());
    for (Index r = 0; r < p_.lp.size(); ++r) {
      double v = x_(r) * rd_lp(r) - target;
      if (aff) v += aff->dx(r) * aff->ds(r);
      yl(r) = v / s_(r);
    }
    const Vector rhs = p_.b + apply_A(Yb, yl);
    Direction d;
    d.dy = cholM.solve(rhs);
    d.dS.resize(nb);
    d.dX.resize(nb);
    for (std::size_t k = 0; k < nb; ++k) {
      d.dS[k] = Rd[k] - adjoint_block(k, d.dy);
      Matrix num = X_[k] * d.dS[k];
      if (aff) num += aff->dX[k] * aff->dS[k];
      Matrix dX = target * Sinv[k] - X_[k] - num * Sinv[k];
      d.dX[k] = 0.5 * (dX + dX.transpose());
    }
    if (p_.lp.size() > 0) {
      d.ds = rd_lp - p_.lp.A * d.dy;
      d.dx.resize(p_.lp.size());
      for (Index r = 0; r < p_.lp.size(); ++r) {
        double num = x_(r) * d.ds(r);
        if (aff) num += aff->dx(r) * aff->ds(r);
        d.dx(r) = (target - num) / s_(r) - x_(r);
      }
    } else {
      d.ds = Vector(0);
      d.dx = Vector(0);
    }
    return d;
  }

  double primal_step(const std::vector<Eigen::LLT<Matrix>>& cholX, const Direction& d) const {
    double a = detail::max_step_lp(x_, d.dx);
    for (std::size_t k = 0; k < p_.sdp.size(); ++k) a = std::min(a, detail::max_step(cholX[k], d.dX[k]));
    return a;
  }

  double dual_step(const std::vector<Eigen::LLT<Matrix>>& cholS, const Direction& d) const {
    double a = detail::max_step_lp(s_, d.ds);
    for (std::size_t k = 0; k < p_.sdp.size(); ++k) a = std::min(a, detail::max_step(cholS[k], d.dS[k]));
    return a;
  }

  void store(Result& r) const {
    r.y = y_;
    r.X = X_;
    r.S = S_;
    r.x_lp = x_;
    r.s_lp = s_;
  }
};

inline Result solve(const Problem& p, const Options& opt = {}) { return Solver(p).run(opt); }

}  // namespace stepstab::ipm
