#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "kkt.hpp"
#include "lmi_builder.hpp"
#include "model.hpp"
#include "types.hpp"

// Set-valued Lyapunov function V(x) = { z^T P z : z = (x, s, lambda_bar(Kx+d)),
// s in S(Kx+d) } and its envelope W(x) = sup V(x).

namespace stepstab {

struct SupResult {
  double value = 0.0;
  Vector selection;
};

struct Rect {
  double x1_min, x1_max, x2_min, x2_max;
};

struct LevelGrid {
  Vector x1;  // nx node coordinates
  Vector x2;  // ny node coordinates
  Matrix W;   // ny x nx, W(j, i) at (x1(i), x2(j))
};

class LyapunovEvaluator {
 public:
  /// Components of Kx + d with magnitude at most this are set-valued.
  static constexpr double kZeroTol = 1e-10;
  /// Above this many free components the face enumeration is replaced by a
  /// sampled search.
  static constexpr Index kExactLimit = 10;

  LyapunovEvaluator(SystemData sys, const Matrix& P, int interval_grid = 101)
      : sys_(std::move(sys)),
        P_(checked_symmetric(P, sys_.n_p() + 3 * sys_.n_u(), "LyapunovEvaluator")),
        grid_(interval_grid) {
    require_valid(sys_);
    if (grid_ < 2) throw Error("LyapunovEvaluator: interval_grid must be at least 2");
  }

  const SystemData& system() const { return sys_; }
  const Matrix& P() const { return P_; }

  /// z = (x, s, lambda_bar(Kx+d)).
  Vector lifted(const Vector& x, const Vector& s) const {
    const Vector u = input(x);
    if (s.size() != u.size()) throw DimensionError("LyapunovEvaluator: selection has wrong length");
    Vector z(P_.rows());
    z << x, s, kkt::lambda_bar_stacked(u);
    return z;
  }

  /// One member of V(x).
  double eval_at(const Vector& x, const Vector& s) const {
    const Vector u = input(x);
    if (s.size() != u.size()) throw DimensionError("LyapunovEvaluator: selection has wrong length");
    if (!kkt::step_set(u, kZeroTol).contains(s))
      throw SelectionNotInStepSet("eval_at: selection is not a member of S(Kx+d)");
    const Vector z = lifted(x, s);
    return z.dot(P_ * z);
  }

  /// W(x) with an argmax selection.
  SupResult sup_V(const Vector& x) const {
    const Vector u = input(x);
    const auto set = kkt::step_set(u, kZeroTol);
    const auto free = set.free_components();
    Vector s = kkt::step(u);
    for (Index i : free) s(i) = 0.0;
    if (free.empty()) return {lifted(x, s).dot(P_ * lifted(x, s)), s};

    // W restricted to the free coordinates: q(t) = t^T Q t + 2 b^T t + c.
    const Index m = static_cast<Index>(free.size());
    const Vector z0 = lifted(x, s);
    const Index off = sys_.n_p();
    Matrix Q(m, m);
    Vector b(m);
    for (Index a = 0; a < m; ++a) {
      b(a) = P_.row(off + free[static_cast<std::size_t>(a)]).dot(z0);
      for (Index c = 0; c < m; ++c)
        Q(a, c) = P_(off + free[static_cast<std::size_t>(a)], off + free[static_cast<std::size_t>(c)]);
    }
    const double c0 = z0.dot(P_ * z0);
    auto q = [&](const Vector& t) { return t.dot(Q * t) + 2.0 * b.dot(t) + c0; };

    Vector best_t = Vector::Zero(m);
    double best = q(best_t);
    auto consider = [&](const Vector& t) {
      const double v = q(t);
      if (v > best) {
        best = v;
        best_t = t;
      }
    };
    if (m <= kExactLimit)
      enumerate_faces(Q, b, consider);
    else
      sampled_search(Q, b, consider);
    for (Index a = 0; a < m; ++a) s(free[static_cast<std::size_t>(a)]) = best_t(a);
    return {best, s};
  }

  double W(const Vector& x) const { return sup_V(x).value; }

  LevelGrid level_grid(const Rect& box, Index nx, Index ny) const {
    if (sys_.n_p() != 2) throw NonPlanarState("level_grid: the state must be two-dimensional");
    if (nx < 1 || ny < 1) throw Error("level_grid: resolution must be positive");
    LevelGrid g;
    g.x1 = nodes(box.x1_min, box.x1_max, nx);
    g.x2 = nodes(box.x2_min, box.x2_max, ny);
    g.W.resize(ny, nx);
    Vector x(2);
    for (Index j = 0; j < ny; ++j)
      for (Index i = 0; i < nx; ++i) {
        x << g.x1(i), g.x2(j);
        g.W(j, i) = W(x);
      }
    return g;
  }

 private:
  SystemData sys_;
  Matrix P_;
  int grid_;

  Vector input(const Vector& x) const {
    if (x.size() != sys_.n_p()) throw DimensionError("LyapunovEvaluator: state has wrong length");
    return sys_.step_input(x);
  }

  static Vector nodes(double lo, double hi, Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i)
      v(i) = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
  }

  // Every face of [0,1]^m fixes each coordinate to 0, to 1, or leaves it
  // free. A maximizer lies at a stationary point of q restricted to the
  // relative interior of some face, so visiting those points is exact.
  template <class F>
  static void enumerate_faces(const Matrix& Q, const Vector& b, F&& consider) {
    const Index m = Q.rows();
    std::vector<int> state(static_cast<std::size_t>(m), 0);
    while (true) {
      std::vector<Index> fr;
      Vector t(m);
      for (Index a = 0; a < m; ++a) {
        const int st = state[static_cast<std::size_t>(a)];
        t(a) = st == 1 ? 1.0 : 0.0;
        if (st == 2) fr.push_back(a);
      }
      bool ok = true;
      if (!fr.empty()) {
        const Index k = static_cast<Index>(fr.size());
        Matrix Qf(k, k);
        Vector rhs(k);
        for (Index a = 0; a < k; ++a) {
          rhs(a) = -b(fr[static_cast<std::size_t>(a)]);
          for (Index c = 0; c < m; ++c)
            if (state[static_cast<std::size_t>(c)] == 1) rhs(a) -= Q(fr[static_cast<std::size_t>(a)], c);
          for (Index c = 0; c < k; ++c) Qf(a, c) = Q(fr[static_cast<std::size_t>(a)], fr[static_cast<std::size_t>(c)]);
        }
        Eigen::FullPivLU<Matrix> lu(Qf);
        // Singular faces contain no isolated maximizer: q is constant along
        // the null direction or unbounded, so a smaller face attains the max.
        if (!lu.isInvertible()) {
          ok = false;
        } else {
          const Vector tf = lu.solve(rhs);
          for (Index a = 0; a < k; ++a) {
            const double v = tf(a);
            if (v < 0.0 || v > 1.0) ok = false;
            t(fr[static_cast<std::size_t>(a)]) = std::clamp(v, 0.0, 1.0);
          }
        }
      }
      if (ok) consider(t);
      Index a = 0;
      while (a < m && state[static_cast<std::size_t>(a)] == 2) state[static_cast<std::size_t>(a++)] = 0;
      if (a == m) break;
      ++state[static_cast<std::size_t>(a)];
    }
  }

  // Coordinate ascent from sampled starts; each 1-D subproblem is solved in
  // closed form on [0, 1].
  template <class F>
  void sampled_search(const Matrix& Q, const Vector& b, F&& consider) const {
    const Index m = Q.rows();
    for (int k = 0; k < grid_; ++k) {
      Vector t = Vector::Constant(m, static_cast<double>(k) / static_cast<double>(grid_ - 1));
      for (int sweep = 0; sweep < 100; ++sweep) {
        double moved = 0.0;
        for (Index a = 0; a < m; ++a) {
          const double g = b(a) + Q.row(a).dot(t) - Q(a, a) * t(a);
          double cand[3] = {0.0, 1.0, 0.0};
          int nc = 2;
          if (Q(a, a) < 0.0) cand[nc++] = std::clamp(-g / Q(a, a), 0.0, 1.0);
          double bestv = -INFINITY, bestx = t(a);
          for (int c = 0; c < nc; ++c) {
            const double v = Q(a, a) * cand[c] * cand[c] + 2.0 * g * cand[c];
            if (v > bestv) {
              bestv = v;
              bestx = cand[c];
            }
          }
          moved = std::max(moved, std::abs(bestx - t(a)));
          t(a) = bestx;
        }
        if (moved < 1e-14) break;
      }
      consider(t);
    }
  }
};

inline void write_level_csv(const LevelGrid& g, std::FILE* f) {
  std::fprintf(f, "x1,x2,W\n");
  for (Index j = 0; j < g.x2.size(); ++j)
    for (Index i = 0; i < g.x1.size(); ++i) std::fprintf(f, "%.12g,%.12g,%.12g\n", g.x1(i), g.x2(j), g.W(j, i));
}

inline void write_level_csv(const LevelGrid& g, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot open " + path + " for writing");
  write_level_csv(g, f);
  if (std::fclose(f) != 0) throw IoError("write to " + path + " failed");
}

}  // namespace stepstab
