#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "kkt.hpp"
#include "lyapunov.hpp"
#include "model.hpp"
#include "types.hpp"

namespace stepstab {

/// SplitMix64 evaluated at seed + k * gamma for the k-th draw, so a stream is
/// fully determined by (seed, k) on every platform.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

enum class SelectionPolicy { Deterministic, UniformRandom, WorstCase };

/// Components of Kx + d at most this large in magnitude are set-valued.
inline constexpr double kPolicyZeroTol = 1e-10;

inline Vector select(const SystemData& sys, const Vector& x, SelectionPolicy policy, CounterRng& rng) {
  const Vector u = sys.step_input(x);
  Vector s = kkt::step(u);
  if (policy == SelectionPolicy::Deterministic) return s;
  const auto free = kkt::step_set(u, kPolicyZeroTol).free_components();
  if (policy == SelectionPolicy::UniformRandom) {
    for (Index i : free) s(i) = rng.uniform();
    return s;
  }
  // The successor is affine in s, so its norm is maximized at a vertex.
  Vector best = s;
  double best_norm = -1.0;
  const std::size_t count = std::size_t{1} << free.size();
  for (std::size_t mask = 0; mask < count; ++mask) {
    Vector c = s;
    for (std::size_t k = 0; k < free.size(); ++k) c(free[k]) = (mask >> k) & 1U ? 1.0 : 0.0;
    const double nrm = sys.successor(x, c).norm();
    if (nrm > best_norm) {
      best_norm = nrm;
      best = c;
    }
  }
  return best;
}

struct Trajectory {
  std::vector<Vector> states;      // phi(0..J)
  std::vector<Vector> selections;  // s(j) applied at phi(j); the last one is the next choice
  std::optional<std::vector<double>> lyap_values;

  Index length() const { return static_cast<Index>(states.size()); }
};

inline Trajectory simulate(const SystemData& sys, const Vector& x0, Index steps, SelectionPolicy policy,
                           std::uint64_t seed = 0) {
  require_valid(sys);
  if (steps < 0) throw Error("simulate: steps must be nonnegative");
  if (x0.size() != sys.n_p()) throw DimensionError("simulate: x0 has wrong length");
  CounterRng rng(seed);
  Trajectory t;
  t.states.reserve(static_cast<std::size_t>(steps + 1));
  t.selections.reserve(static_cast<std::size_t>(steps + 1));
  Vector x = x0;
  for (Index j = 0; j <= steps; ++j) {
    const Vector s = select(sys, x, policy, rng);
    t.states.push_back(x);
    t.selections.push_back(s);
    if (j < steps) x = sys.successor(x, s);
  }
  return t;
}

inline Trajectory attach_lyapunov(Trajectory t, const LyapunovEvaluator& ev) {
  std::vector<double> w;
  w.reserve(t.states.size());
  for (const auto& x : t.states) w.push_back(ev.W(x));
  t.lyap_values = std::move(w);
  return t;
}

struct DecayEstimate {
  double kappa = 0.0;
  double lambda = 0.0;
  double fit_residual = 0.0;  // smallest r with log|phi(j)| <= log(kappa |phi(0)|) - lambda j + r
  Index points = 0;
  bool pass = false;          // lambda > 0
};

/// Least-squares fit of log(|phi(j)| / |phi(0)|) = log(kappa) - lambda j over
/// the prefix where |phi(j)| > 1e-12. The residual is the largest excess of
/// the data over the fitted envelope, so the bound |phi(j)| <= kappa
/// e^{-lambda j} |phi(0)| holds with kappa inflated by e^{fit_residual}.
inline DecayEstimate fit_decay(const Trajectory& t) {
  if (t.length() < 3) throw DegenerateTrajectory("fit_decay: need at least 3 states");
  const double n0 = t.states.front().norm();
  if (!(n0 > 1e-12)) throw DegenerateTrajectory("fit_decay: initial state is zero");
  std::vector<double> js, ys;
  for (Index j = 0; j < t.length(); ++j) {
    const double nj = t.states[static_cast<std::size_t>(j)].norm();
    if (!(nj > 1e-12)) break;
    js.push_back(static_cast<double>(j));
    ys.push_back(std::log(nj / n0));
  }
  if (js.size() < 2) throw DegenerateTrajectory("fit_decay: fewer than two states above threshold");
  const Index n = static_cast<Index>(js.size());
  Matrix Am(n, 2);
  Vector y(n);
  for (Index k = 0; k < n; ++k) {
    Am(k, 0) = 1.0;
    Am(k, 1) = -js[static_cast<std::size_t>(k)];
    y(k) = ys[static_cast<std::size_t>(k)];
  }
  const Vector coef = Am.colPivHouseholderQr().solve(y);
  DecayEstimate d;
  d.kappa = std::exp(coef(0));
  d.lambda = coef(1);
  d.fit_residual = std::max(0.0, (y - Am * coef).maxCoeff());
  d.points = n;
  d.pass = d.lambda > 0.0;
  return d;
}

inline void write_trajectory_csv(const Trajectory& t, std::FILE* f) {
  const Index np = t.states.empty() ? 0 : t.states.front().size();
  const Index nu = t.selections.empty() ? 0 : t.selections.front().size();
  std::fprintf(f, "j");
  for (Index i = 1; i <= np; ++i) std::fprintf(f, ",x%ld", static_cast<long>(i));
  for (Index i = 1; i <= nu; ++i) std::fprintf(f, ",s_%ld", static_cast<long>(i));
  std::fprintf(f, ",W\n");
  for (std::size_t j = 0; j < t.states.size(); ++j) {
    std::fprintf(f, "%zu", j);
    for (Index i = 0; i < np; ++i) std::fprintf(f, ",%.12g", t.states[j](i));
    for (Index i = 0; i < nu; ++i) std::fprintf(f, ",%.12g", t.selections[j](i));
    if (t.lyap_values)
      std::fprintf(f, ",%.12g\n", (*t.lyap_values)[j]);
    else
      std::fprintf(f, ",nan\n");
  }
}

inline void write_trajectory_csv(const Trajectory& t, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot open " + path + " for writing");
  write_trajectory_csv(t, f);
  if (std::fclose(f) != 0) throw IoError("write to " + path + " failed");
}

}  // namespace stepstab
