#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "types.hpp"

namespace stepstab::linalg {

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Block-diagonal direct sum of the given matrices.
inline Matrix direct_sum(const std::vector<Matrix>& blocks) {
  Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

inline Matrix he(const Matrix& m) { return m + m.transpose(); }

inline double max_asymmetry(const Matrix& m) {
  if (m.rows() != m.cols()) return INFINITY;
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline double max_eigenvalue(const Matrix& sym) {
  if (sym.size() == 0) return -INFINITY;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sym + sym.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

inline double min_eigenvalue(const Matrix& sym) {
  if (sym.size() == 0) return INFINITY;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sym + sym.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

struct KernelBasis {
  Matrix basis;  // columns: orthonormal basis of ker W
  Index rank = 0;
  double threshold = 0.0;
  bool degenerate = false;  // true when the kernel is trivial
};

/// Orthonormal basis of ker(w). Rank is decided on singular values with
/// threshold max(m, n) * sigma_max * rel_tol.
inline KernelBasis kernel_basis(const Matrix& w, double rel_tol = 1e-12) {
  KernelBasis out;
  const Index n = w.cols();
  if (n == 0) {
    out.basis = Matrix(0, 0);
    out.degenerate = true;
    return out;
  }
  if (w.rows() == 0) {
    out.basis = Matrix::Identity(n, n);
    return out;
  }
  // Pad to a square system so the SVD returns a full right basis.
  Matrix padded = Matrix::Zero(std::max(w.rows(), n), n);
  padded.topRows(w.rows()) = w;
  Eigen::JacobiSVD<Matrix> svd(padded, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  out.threshold = static_cast<double>(std::max(w.rows(), w.cols())) * smax * rel_tol;
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > out.threshold) ++rank;
  out.rank = rank;
  out.basis = svd.matrixV().rightCols(n - rank);
  out.degenerate = out.basis.cols() == 0;
  return out;
}

/// Orthonormal basis of range(m) and of its orthogonal complement.
struct RangeSplit {
  Matrix range;
  Matrix complement;
};

inline RangeSplit split_range(const Matrix& m, double rel_tol = 1e-9) {
  const Index n = m.rows();
  RangeSplit out;
  if (m.cols() == 0 || n == 0) {
    out.range = Matrix(n, 0);
    out.complement = Matrix::Identity(n, n);
    return out;
  }
  Matrix padded = Matrix::Zero(n, std::max(n, m.cols()));
  padded.leftCols(m.cols()) = m;
  Eigen::JacobiSVD<Matrix> svd(padded, Eigen::ComputeFullU);
  const Vector& sv = svd.singularValues();
  const double thr = static_cast<double>(std::max(n, m.cols())) * sv(0) * rel_tol;
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > thr) ++r;
  out.range = svd.matrixU().leftCols(r);
  out.complement = svd.matrixU().rightCols(n - r);
  return out;
}

/// Upper-triangular (row-major) packing of symmetric n x n matrices.
inline Index svec_size(Index n) { return n * (n + 1) / 2; }

inline Vector svec(const Matrix& s) {
  const Index n = s.rows();
  Vector v(svec_size(n));
  Index k = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) v(k++) = s(i, j);
  return v;
}

inline Matrix smat(const Vector& v, Index n) {
  Matrix s(n, n);
  Index k = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) {
      s(i, j) = v(k);
      s(j, i) = v(k);
      ++k;
    }
  return s;
}

}  // namespace stepstab::linalg
