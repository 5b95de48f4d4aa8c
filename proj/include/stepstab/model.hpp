#pragma once

#include <string>
#include <vector>

#include "linalg.hpp"
#include "types.hpp"

namespace stepstab {

/// Closed loop x+ = A x + B Delta S(K x + d).
struct SystemData {
  Matrix A;
  Matrix B;
  Matrix K;
  Matrix Delta;  // diagonal n_u x n_u
  Vector d;

  Index n_p() const { return A.rows(); }
  Index n_u() const { return B.cols(); }

  /// One step of the regularized dynamics with an explicit selection s.
  Vector successor(const Vector& x, const Vector& s) const { return A * x + B * (Delta * s); }

  /// Argument of the step nonlinearity, K x + d.
  Vector step_input(const Vector& x) const { return K * x + d; }
};

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
  std::string summary() const {
    std::string s;
    for (const auto& v : violations) {
      if (!s.empty()) s += "; ";
      s += v;
    }
    return s.empty() ? "ok" : s;
  }
};

inline ValidationReport validate(const SystemData& sys) {
  ValidationReport r;
  const Index np = sys.A.rows();
  const Index nu = sys.B.cols();
  auto check = [&](bool cond, const std::string& msg) {
    if (!cond) r.violations.push_back(msg);
  };
  check(np > 0, "n_p must be positive");
  check(nu > 0, "n_u must be positive");
  check(sys.A.cols() == np, "A must be square, got " + shape_of(sys.A));
  check(sys.B.rows() == np, "B must be n_p x n_u, got " + shape_of(sys.B));
  check(sys.K.rows() == nu && sys.K.cols() == np, "K must be n_u x n_p, got " + shape_of(sys.K));
  check(sys.Delta.rows() == nu && sys.Delta.cols() == nu,
        "Delta must be n_u x n_u, got " + shape_of(sys.Delta));
  check(sys.d.size() == nu, "d must have length n_u, got " + std::to_string(sys.d.size()));
  if (sys.Delta.rows() == sys.Delta.cols()) {
    for (Index i = 0; i < sys.Delta.rows(); ++i)
      for (Index j = 0; j < sys.Delta.cols(); ++j)
        if (i != j && sys.Delta(i, j) != 0.0) {
          check(false, "Delta must be diagonal, entry (" + std::to_string(i) + "," +
                           std::to_string(j) + ") is nonzero");
          i = sys.Delta.rows();
          break;
        }
  }
  check(sys.A.allFinite(), "A has non-finite entries");
  check(sys.B.allFinite(), "B has non-finite entries");
  check(sys.K.allFinite(), "K has non-finite entries");
  check(sys.Delta.allFinite(), "Delta has non-finite entries");
  check(sys.d.allFinite(), "d has non-finite entries");
  return r;
}

/// Builds and validates; throws DimensionError with the full report otherwise.
inline SystemData make_system(Matrix A, Matrix B, Matrix K, const Vector& delta_diag, Vector d) {
  SystemData sys{std::move(A), std::move(B), std::move(K), delta_diag.asDiagonal(), std::move(d)};
  auto rep = validate(sys);
  if (!rep.ok()) throw DimensionError(rep.summary());
  return sys;
}

inline void require_valid(const SystemData& sys) {
  auto rep = validate(sys);
  if (!rep.ok()) throw DimensionError(rep.summary());
}

/// Rewrites x+ = A x + b tau(k x), tau the ternary quantizer with dead zone
/// [-1, 1], as a two-channel step system: B = [b, -b], K = [k; -k], d = -1, Delta = I.
inline SystemData ternary_embed(const Matrix& A, const Vector& b, const Vector& k) {
  const Index n = A.rows();
  if (A.cols() != n) throw DimensionError("ternary_embed: A must be square, got " + shape_of(A));
  if (b.size() != n || k.size() != n)
    throw DimensionError("ternary_embed: b and k must have length " + std::to_string(n));
  Matrix B(n, 2);
  B.col(0) = b;
  B.col(1) = -b;
  Matrix K(2, n);
  K.row(0) = k.transpose();
  K.row(1) = -k.transpose();
  return make_system(A, B, K, Vector::Ones(2), -Vector::Ones(2));
}

/// Ternary quantizer: 1 above 1, -1 below -1, 0 on the dead zone.
inline double ternary(double v) {
  if (v > 1.0) return 1.0;
  if (v < -1.0) return -1.0;
  return 0.0;
}

}  // namespace stepstab
