#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ipm.hpp"
#include "linalg.hpp"
#include "types.hpp"

// Affine matrix inequalities in a vector of scalar unknowns y:
//
//   C_b + sum_i y_i A_bi  <=  0      (negative semidefinite, per block)
//   a_r^T y  >=  beta_r              (linear rows)
//
// plus a reduction layer that removes directions known to lie in the null
// space of every solution, and a phase-I driver that minimizes the largest
// eigenvalue t over a bounded box of unknowns.

namespace stepstab::conic {

struct AffineLmi {
  Matrix constant;
  std::vector<std::pair<Index, Matrix>> terms;  // sorted by variable index

  Index dim() const { return constant.rows(); }

  Matrix evaluate(const Vector& y) const {
    Matrix out = constant;
    for (const auto& [i, Ai] : terms) out += y(i) * Ai;
    return 0.5 * (out + out.transpose());
  }
};

struct LinearRow {
  std::vector<std::pair<Index, double>> coeffs;
  double lower = 0.0;

  double slack(const Vector& y) const {
    double v = -lower;
    for (const auto& [i, a] : coeffs) v += a * y(i);
    return v;
  }
};

struct Problem {
  Index num_vars = 0;
  std::vector<AffineLmi> lmis;
  std::vector<LinearRow> rows;
};

/// Known structure of every solution: for block b the columns of null[b]
/// must lie in the kernel of the block, and variables in `fixed` take the
/// given values.
struct ReductionHints {
  std::vector<Matrix> null;
  std::map<Index, double> fixed;
};

enum class Goal {
  MinMargin,       // minimize t with each block <= t I
  MaximizeLinear,  // maximize w^T y with each block <= 0
};

struct Options {
  Goal goal = Goal::MinMargin;
  Vector weights;  // for MaximizeLinear
  double variable_bound = 1e3;
  ipm::Options ipm;
};

struct Outcome {
  Vector y;
  double t = INFINITY;  // optimal margin (MinMargin) or 0
  ipm::Status status = ipm::Status::NumericalFailure;
  int iterations = 0;
  double primal_infeasibility = INFINITY;
  double dual_infeasibility = INFINITY;
  double relative_gap = INFINITY;
  bool reduction_consistent = true;
  double reduction_residual = 0.0;
  Index reduced_vars = 0;
  std::vector<Index> reduced_dims;
  std::vector<double> max_eigenvalues;  // of the full blocks at y
  double min_row_slack = INFINITY;
};

inline std::vector<double> block_max_eigenvalues(const Problem& p, const Vector& y) {
  std::vector<double> out;
  for (const auto& l : p.lmis) out.push_back(linalg::max_eigenvalue(l.evaluate(y)));
  return out;
}

inline double min_row_slack(const Problem& p, const Vector& y) {
  double m = INFINITY;
  for (const auto& r : p.rows) m = std::min(m, r.slack(y));
  return m;
}

namespace detail {

struct Parametrization {
  Vector y0;
  Matrix Z;  // y = y0 + Z z
  bool consistent = true;
  double residual = 0.0;
};

// Solves the equality system C y = e in least squares and returns its
// affine solution set. Columns of C that are identically zero stay free.
inline Parametrization parametrize(const Matrix& C, const Vector& e, Index n) {
  Parametrization out;
  out.y0 = Vector::Zero(n);
  std::vector<Index> involved, free;
  for (Index i = 0; i < n; ++i)
    (C.rows() > 0 && C.col(i).cwiseAbs().maxCoeff() > 0.0 ? involved : free).push_back(i);
  Matrix Zi(0, 0);
  if (!involved.empty()) {
    Matrix Ci(C.rows(), static_cast<Index>(involved.size()));
    for (std::size_t k = 0; k < involved.size(); ++k) Ci.col(static_cast<Index>(k)) = C.col(involved[k]);
    Eigen::JacobiSVD<Matrix> svd(Ci, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& sv = svd.singularValues();
    const double thr = static_cast<double>(std::max(Ci.rows(), Ci.cols())) * sv(0) * 1e-12;
    Index r = 0;
    for (Index k = 0; k < sv.size(); ++k)
      if (sv(k) > thr) ++r;
    const Matrix& U = svd.matrixU();
    const Matrix& V = svd.matrixV();
    Vector yi = V.leftCols(r) * (U.leftCols(r).transpose() * e).cwiseQuotient(sv.head(r));
    out.residual = (Ci * yi - e).cwiseAbs().maxCoeff();
    out.consistent = out.residual <= 1e-9 * (1.0 + e.cwiseAbs().maxCoeff());
    for (std::size_t k = 0; k < involved.size(); ++k) out.y0(involved[k]) = yi(static_cast<Index>(k));
    Zi = V.rightCols(Ci.cols() - r);
  }
  const Index q = Zi.cols() + static_cast<Index>(free.size());
  out.Z = Matrix::Zero(n, q);
  for (std::size_t k = 0; k < involved.size(); ++k) out.Z.row(involved[k]).head(Zi.cols()) = Zi.row(static_cast<Index>(k));
  for (std::size_t k = 0; k < free.size(); ++k) out.Z(free[k], Zi.cols() + static_cast<Index>(k)) = 1.0;
  return out;
}

}  // namespace detail

inline Outcome solve(const Problem& p, const ReductionHints& hints, const Options& opt) {
  const Index n = p.num_vars;
  const std::size_t nb = p.lmis.size();
  if (nb == 0 && p.rows.empty()) throw Error("conic::solve: empty problem");
  Outcome out;

  // Per-block split into the hinted null space and its complement.
  std::vector<Matrix> Q(nb), N(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const Index k = p.lmis[b].dim();
    if (b < hints.null.size() && hints.null[b].cols() > 0) {
      auto sp = linalg::split_range(hints.null[b]);
      N[b] = sp.range;
      Q[b] = sp.complement;
    } else {
      N[b] = Matrix(k, 0);
      Q[b] = Matrix::Identity(k, k);
    }
  }

  // Equalities: block(y) N = 0 and fixed values.
  Index neq = static_cast<Index>(hints.fixed.size());
  for (std::size_t b = 0; b < nb; ++b) neq += p.lmis[b].dim() * N[b].cols();
  Matrix C = Matrix::Zero(neq, n);
  Vector e = Vector::Zero(neq);
  Index row = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    const auto& l = p.lmis[b];
    const Index k = l.dim();
    for (Index j = 0; j < N[b].cols(); ++j) {
      e.segment(row, k) = -l.constant * N[b].col(j);
      for (const auto& [i, Ai] : l.terms) C.block(row, i, k, 1) += Ai * N[b].col(j);
      row += k;
    }
  }
  for (const auto& [i, v] : hints.fixed) {
    C(row, i) = 1.0;
    e(row) = v;
    ++row;
  }
  // Drop numerically empty coefficients so untouched variables stay free.
  const double cscale = C.size() > 0 ? C.cwiseAbs().maxCoeff() : 0.0;
  C = C.unaryExpr([cscale](double v) { return std::abs(v) <= 1e-14 * cscale ? 0.0 : v; });
  auto par = detail::parametrize(C, e, n);
  out.reduction_consistent = par.consistent;
  out.reduction_residual = par.residual;
  const Index q = par.Z.cols();
  out.reduced_vars = q;

  const bool margin = opt.goal == Goal::MinMargin;
  const Index m = q + (margin ? 1 : 0);
  ipm::Problem ip;
  ip.m = m;
  ip.b = Vector::Zero(m);
  if (margin) {
    ip.b(q) = -1.0;
  } else {
    if (opt.weights.size() != n) throw DimensionError("conic::solve: weights must have num_vars entries");
    ip.b = par.Z.transpose() * opt.weights;
  }

  for (std::size_t b = 0; b < nb; ++b) {
    const auto& l = p.lmis[b];
    const Index kr = Q[b].cols();
    out.reduced_dims.push_back(kr);
    if (kr == 0) continue;
    ipm::SdpBlock blk;
    blk.n = kr;
    Matrix F0 = l.constant;
    for (const auto& [i, Ai] : l.terms)
      if (par.y0(i) != 0.0) F0 += par.y0(i) * Ai;
    Matrix c0 = -Q[b].transpose() * F0 * Q[b];
    blk.C = 0.5 * (c0 + c0.transpose());
    // Reduced coefficients: sum_i Z_il A_bi projected onto the complement.
    std::vector<Matrix> proj(l.terms.size());
    for (std::size_t t = 0; t < l.terms.size(); ++t) proj[t] = Q[b].transpose() * l.terms[t].second * Q[b];
    for (Index c = 0; c < q; ++c) {
      Matrix acc = Matrix::Zero(kr, kr);
      bool any = false;
      for (std::size_t t = 0; t < l.terms.size(); ++t) {
        const double z = par.Z(l.terms[t].first, c);
        if (z != 0.0) {
          acc += z * proj[t];
          any = true;
        }
      }
      if (any && acc.cwiseAbs().maxCoeff() > 0.0) blk.A.emplace_back(c, 0.5 * (acc + acc.transpose()));
    }
    if (margin) blk.A.emplace_back(q, -Matrix::Identity(kr, kr));
    ip.sdp.push_back(std::move(blk));
  }

  // Linear rows: a^T (y0 + Z z) - beta >= 0  <=>  s = C_r - A_r z with
  // C_r = a^T y0 - beta and A_r = -a^T Z.
  std::vector<Vector> lp_a;
  std::vector<double> lp_c;
  double const_violation = 0.0;
  for (const auto& r : p.rows) {
    Vector a = Vector::Zero(q);
    double c0 = -r.lower;
    for (const auto& [i, v] : r.coeffs) {
      a += v * par.Z.row(i).transpose();
      c0 += v * par.y0(i);
    }
    if (a.cwiseAbs().maxCoeff() <= 1e-14) {
      const_violation = std::max(const_violation, -c0);
      continue;
    }
    lp_a.push_back(-a);
    lp_c.push_back(c0);
  }
  for (Index i = 0; i < n; ++i) {
    const Vector zi = par.Z.row(i).transpose();
    if (zi.cwiseAbs().maxCoeff() == 0.0) continue;
    lp_a.push_back(zi);
    lp_c.push_back(opt.variable_bound - par.y0(i));
    lp_a.push_back(-zi);
    lp_c.push_back(opt.variable_bound + par.y0(i));
  }
  if (const_violation > 1e-9) out.reduction_consistent = false;
  ip.lp.C.resize(static_cast<Index>(lp_c.size()));
  ip.lp.A = Matrix::Zero(static_cast<Index>(lp_c.size()), m);
  for (std::size_t r = 0; r < lp_c.size(); ++r) {
    ip.lp.C(static_cast<Index>(r)) = lp_c[r];
    ip.lp.A.row(static_cast<Index>(r)).head(q) = lp_a[r].transpose();
  }

  auto res = ipm::solve(ip, opt.ipm);
  out.status = res.status;
  out.iterations = res.iterations;
  out.primal_infeasibility = res.primal_infeasibility;
  out.dual_infeasibility = res.dual_infeasibility;
  out.relative_gap = res.relative_gap;
  out.y = par.y0 + par.Z * res.y.head(q);
  out.t = margin ? res.y(q) : 0.0;
  out.max_eigenvalues = block_max_eigenvalues(p, out.y);
  out.min_row_slack = min_row_slack(p, out.y);
  return out;
}

}  // namespace stepstab::conic
