#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "linalg.hpp"
#include "types.hpp"

// Step nonlinearity, its set-valued regularization, and the KKT system of the
// box LP  min_{w in [0,1]} -v w  whose solution set is exactly s(v).

namespace stepstab::kkt {

/// Tolerance applied to the [0, 1] bounds of a selection; the sign of u is
/// always tested exactly.
inline constexpr double kSelectionTol = 1e-12;

/// Single-valued step: 1 where u_i > 0, else 0.
inline Vector step(const Vector& u) {
  Vector s(u.size());
  for (Index i = 0; i < u.size(); ++i) s(i) = u(i) > 0.0 ? 1.0 : 0.0;
  return s;
}

enum class StepKind { Fixed0, Fixed1, Interval };

/// Cartesian-product description of S(u).
struct SetDescription {
  std::vector<StepKind> components;

  Index size() const { return static_cast<Index>(components.size()); }

  bool contains(const Vector& s, double tol = kSelectionTol) const {
    if (s.size() != size()) return false;
    for (Index i = 0; i < size(); ++i) {
      const double v = s(i);
      if (!std::isfinite(v)) return false;
      switch (components[static_cast<std::size_t>(i)]) {
        case StepKind::Fixed0:
          if (std::abs(v) > tol) return false;
          break;
        case StepKind::Fixed1:
          if (std::abs(v - 1.0) > tol) return false;
          break;
        case StepKind::Interval:
          if (v < -tol || v > 1.0 + tol) return false;
          break;
      }
    }
    return true;
  }

  /// Indices of the components equal to the whole interval [0, 1].
  std::vector<Index> free_components() const {
    std::vector<Index> out;
    for (Index i = 0; i < size(); ++i)
      if (components[static_cast<std::size_t>(i)] == StepKind::Interval) out.push_back(i);
    return out;
  }
};

/// S(u); components with |u_i| <= zero_tol are treated as u_i = 0.
inline SetDescription step_set(const Vector& u, double zero_tol = 0.0) {
  SetDescription d;
  d.components.reserve(static_cast<std::size_t>(u.size()));
  for (Index i = 0; i < u.size(); ++i) {
    const double v = u(i);
    if (std::abs(v) <= zero_tol)
      d.components.push_back(StepKind::Interval);
    else
      d.components.push_back(v > 0.0 ? StepKind::Fixed1 : StepKind::Fixed0);
  }
  return d;
}

inline Vector ramp(const Vector& u) { return u.cwiseMax(0.0); }

/// Explicit multipliers (r(-u), r(u)).
inline std::pair<Vector, Vector> lambda_bar(const Vector& u) { return {ramp(-u), ramp(u)}; }

/// Stacked lambda_bar(u) as a single 2 n_u vector.
inline Vector lambda_bar_stacked(const Vector& u) {
  Vector out(2 * u.size());
  out << ramp(-u), ramp(u);
  return out;
}

/// chi = (lambda1, lambda2, s, 1 - s, u).
struct KktVector {
  Vector lambda1;
  Vector lambda2;
  Vector s;
  Vector s_comp;
  Vector u;

  Index n_u() const { return u.size(); }

  Vector stacked() const {
    const Index n = n_u();
    Vector out(5 * n);
    out << lambda1, lambda2, s, s_comp, u;
    return out;
  }

  static KktVector from_stacked(const Vector& chi) {
    if (chi.size() % 5 != 0) throw DimensionError("chi length must be a multiple of 5");
    const Index n = chi.size() / 5;
    return {chi.segment(0, n), chi.segment(n, n), chi.segment(2 * n, n), chi.segment(3 * n, n),
            chi.segment(4 * n, n)};
  }
};

inline KktVector build_chi(const Vector& u, const Vector& s) {
  if (u.size() != s.size())
    throw DimensionError("build_chi: u and s have different lengths");
  if (!step_set(u).contains(s))
    throw SelectionNotInStepSet("build_chi: selection is not a member of S(u)");
  auto [l1, l2] = lambda_bar(u);
  return {l1, l2, s, Vector::Ones(s.size()) - s, u};
}

/// Infinity-norm residual of the KKT system (stationarity, complementarity,
/// sign constraints). Zero iff chi certifies s in S(u).
inline double kkt_residual(const KktVector& c) {
  double r = 0.0;
  auto upd = [&r](double v) { r = std::max(r, v); };
  const Index n = c.n_u();
  for (Index i = 0; i < n; ++i) {
    upd(std::abs(-c.u(i) - c.lambda1(i) + c.lambda2(i)));
    upd(std::abs(c.lambda1(i) * c.s(i)));
    upd(std::abs(c.lambda2(i) * (1.0 - c.s(i))));
    upd(std::max(0.0, -c.lambda1(i)));
    upd(std::max(0.0, -c.lambda2(i)));
    upd(std::max(0.0, -c.s(i)));
    upd(std::max(0.0, c.s(i) - 1.0));
  }
  return r;
}

/// L = [-1 1 0 0 -1] (x) I_{n_u}; L chi = 0 is the stationarity row.
inline Matrix build_L(Index n_u) {
  if (n_u < 1) throw DimensionError("build_L: n_u must be >= 1");
  Matrix row(1, 5);
  row << -1, 1, 0, 0, -1;
  return linalg::kron(row, Matrix::Identity(n_u, n_u));
}

}  // namespace stepstab::kkt
