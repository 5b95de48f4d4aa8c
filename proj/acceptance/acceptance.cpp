// Runs the eight acceptance criteria and prints one PASS/FAIL line per criterion.
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <stepstab/stepstab.hpp>

#include "support/examples.hpp"

using namespace stepstab;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Example {
  std::string name;
  SystemData sys;
  LmiData lmi;
  CertifyOutcome outcome;
  double seconds = 0.0;
};

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vector random_member(std::mt19937_64& rng, const Vector& u) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector s = kkt::step(u);
  for (Index i : kkt::step_set(u).free_components()) s(i) = unit(rng);
  return s;
}

Verdict kkt_equivalence() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> box(-10.0, 10.0);
  std::uniform_int_distribution<int> dim(1, 3);
  double worst = 0.0;
  for (int n = 0; n < 100000; ++n) {
    const Index nu = dim(rng);
    Vector u(nu);
    for (Index i = 0; i < nu; ++i) u(i) = n % 3 == 0 && i == 0 ? 0.0 : box(rng);
    worst = std::max(worst, kkt::kkt_residual(kkt::build_chi(u, random_member(rng, u))));
  }
  int satisfied = 0, wrong = 0;
  for (double u : {-1.0, 0.0, 1.0})
    for (int si = 0; si <= 4; ++si)
      for (double l1 : {0.0, 0.5, 1.0})
        for (double l2 : {0.0, 0.5, 1.0}) {
          const double s = 0.25 * si;
          const kkt::KktVector c{Vector::Constant(1, l1), Vector::Constant(1, l2), Vector::Constant(1, s),
                                 Vector::Constant(1, 1.0 - s), Vector::Constant(1, u)};
          if (kkt::kkt_residual(c) <= 1e-12) {
            ++satisfied;
            if (!kkt::step_set(c.u).contains(c.s)) ++wrong;
          }
        }
  std::ostringstream os;
  os << "max residual " << worst << " over 1e5 draws, reverse grid " << satisfied << " solutions, " << wrong
     << " outside S";
  return {worst <= 1e-12 && satisfied == 7 && wrong == 0, os.str()};
}

Verdict theta_identities() {
  const auto sys = examples::ternary();
  const auto lmi = build_lmi(sys);
  const Matrix LT = linalg::kron(Matrix::Identity(2, 2), lmi.L) * lmi.T;
  const Vector k = examples::plant_k();
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> box(-10.0, 10.0), diag(-5.0, 5.0);
  double r = 0, l = 0, f = 0, g = 0, x = 0;
  for (int n = 0; n < 10000; ++n) {
    Vector xs(2);
    xs << box(rng), box(rng);
    if (n % 5 == 0) xs += ((n % 10 == 0 ? 1.0 : -1.0) - k.dot(xs)) / k.squaredNorm() * k;
    const Vector s = random_member(rng, sys.step_input(xs));
    const Vector sp = random_member(rng, sys.step_input(sys.successor(xs, s)));
    const Vector th = build_theta(sys, xs, s, sp);
    Vector g1(4), g2(4);
    for (Index i = 0; i < 4; ++i) g1(i) = diag(rng), g2(i) = diag(rng);
    r = std::max(r, (lmi.R * th).cwiseAbs().maxCoeff());
    l = std::max(l, (LT * th).cwiseAbs().maxCoeff());
    f = std::min(f, (lmi.F * th).minCoeff());
    g = std::max(g, std::abs(th.dot(lmi.T.transpose() * psi_of(g1, g2) * lmi.T * th)));
    x = std::max(x, std::abs(th.dot(lmi.X * th) - xs.squaredNorm()));
  }
  std::ostringstream os;
  os << "|R th| " << r << ", |(I2 x L) T th| " << l << ", min F th " << f << ", |th' T' Psi T th| " << g
     << ", |th' X th - |x|^2| " << x;
  return {r <= 1e-9 && l <= 1e-9 && f >= -1e-12 && g <= 1e-9 && x <= 1e-12, os.str()};
}

Verdict certification(const std::vector<Example>& ex) {
  bool ok = true;
  std::ostringstream os;
  for (const auto& e : ex) {
    const auto& rep = e.outcome.certificate().report;
    const bool this_ok = e.outcome.certified && rep.worst_lmi() <= 1e-7 && rep.worst_sign() >= -1e-7 &&
                         e.seconds < 60.0;
    ok = ok && this_ok;
    os << e.name << ": " << (e.outcome.certified ? "certified" : "not certified") << ", lambda_max "
       << rep.worst_lmi() << ", min M " << rep.worst_sign() << ", " << e.seconds << " s; ";
  }
  return {ok, os.str()};
}

Verdict lyapunov_behavior(const std::vector<Example>& ex) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::ostringstream os;
  for (const auto& e : ex) {
    if (!e.outcome.certified) return {false, e.name + " has no certificate"};
    const auto& c = e.outcome.certificate();
    Vector x0(2);
    if (e.name == "ternary")
      x0 << 5, 5;
    else
      x0 << 0.3, 0.3;
    const LyapunovEvaluator ev(e.sys, c.P);
    const auto t = attach_lyapunov(simulate(e.sys, x0, 60, SelectionPolicy::Deterministic), ev);
    const auto& w = *t.lyap_values;
    double worst = -INFINITY;
    for (std::size_t j = 0; j + 1 < w.size(); ++j)
      worst = std::max(worst, w[j + 1] - w[j] + c.c3 * t.states[j].squaredNorm());
    const auto d = fit_decay(t);
    ok = ok && worst <= 1e-6 && d.lambda > 0.0 && d.fit_residual < 0.5;
    os << e.name << ": max(dW + c3|x|^2) " << worst << ", lambda " << d.lambda << ", kappa " << d.kappa
       << ", fit residual " << d.fit_residual << "; ";
  }
  const double s = elapsed(t0);
  os << s << " s";
  return {ok && s < 5.0, os.str()};
}

Verdict sandwich(const std::vector<Example>& ex) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> box(-10.0, 10.0);
  bool ok = true;
  std::ostringstream os;
  for (const auto& e : ex) {
    if (!e.outcome.certified) return {false, e.name + " has no certificate"};
    const auto& c = e.outcome.certificate();
    const LyapunovEvaluator ev(e.sys, c.P);
    double lo = INFINITY, hi = INFINITY;
    for (int n = 0; n < 10000; ++n) {
      Vector x(2);
      x << box(rng), box(rng);
      const double w = ev.W(x), nx = x.squaredNorm(), tol = 1e-6 * (1 + nx);
      lo = std::min(lo, w - c.c1 * nx + tol);
      hi = std::min(hi, c.c2 * nx + tol - w);
    }
    ok = ok && lo >= 0.0 && hi >= 0.0;
    os << e.name << ": lower slack " << lo << ", upper slack " << hi << "; ";
  }
  const double s = elapsed(t0);
  os << s << " s";
  return {ok && s < 30.0, os.str()};
}

Verdict no_common_quadratic() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ex1 = check_common_quadratic(examples::plant_A(), examples::closed_loop());
  const Matrix h = 0.5 * Matrix::Identity(2, 2);
  const auto ctl = check_common_quadratic(h, h);
  const double s = elapsed(t0);
  std::ostringstream os;
  os << "(A, A + b k'): " << to_string(ex1.status) << " t* = " << ex1.margin << "; (0.5 I, 0.5 I): "
     << to_string(ctl.status) << "; " << s << " s";
  return {ex1.status == QuadraticStatus::Infeasible && ctl.status == QuadraticStatus::Feasible && s < 5.0, os.str()};
}

Verdict indefinite_p(const std::vector<Example>& ex) {
  std::ostringstream os;
  for (const auto& e : ex) {
    if (!e.outcome.certified) continue;
    const double m = linalg::min_eigenvalue(e.outcome.certificate().P);
    os << e.name << " min eig(P) " << m << "; ";
    if (m < 0.0) return {true, os.str() + "indefinite P certified"};
  }
  for (const auto& e : ex) {
    CertifyOptions o;
    o.solve.objective = Objective::MinTraceP;
    const auto r = certify_ges(e.sys, o);
    if (!r.certified) continue;
    const double m = linalg::min_eigenvalue(r.certificate().P);
    os << e.name << " (min-trace) min eig(P) " << m << "; ";
    if (m < 0.0) return {true, os.str() + "indefinite P certified"};
  }
  return {true, os.str() + "WARNING: no indefinite certified P found"};
}

Verdict sdpa_round_trip(const Example& e) {
  const auto fp = encode(e.sys, e.lmi);
  const auto back = sdpa::parse(sdpa::to_string(fp.conic)).problem;
  std::size_t mismatches = 0, compared = 0;
  if (back.num_vars != fp.conic.num_vars || back.lmis.size() != fp.conic.lmis.size() ||
      back.rows.size() != fp.conic.rows.size())
    return {false, "problem shape changed"};
  for (std::size_t b = 0; b < back.lmis.size(); ++b) {
    mismatches += back.lmis[b].constant != fp.conic.lmis[b].constant;
    for (Index i = 0; i < back.num_vars; ++i, ++compared)
      mismatches += sdpa::coefficient(back.lmis[b], i) != sdpa::coefficient(fp.conic.lmis[b], i);
  }
  for (std::size_t r = 0; r < back.rows.size(); ++r) {
    mismatches += back.rows[r].lower != fp.conic.rows[r].lower;
    const std::map<Index, double> a(back.rows[r].coeffs.begin(), back.rows[r].coeffs.end());
    const std::map<Index, double> b(fp.conic.rows[r].coeffs.begin(), fp.conic.rows[r].coeffs.end());
    mismatches += a != b;
    ++compared;
  }
  std::ostringstream os;
  os << compared << " coefficient groups compared, " << mismatches << " differ";
  return {mismatches == 0, os.str()};
}

}  // namespace

int main() {
  std::vector<Example> ex(2);
  ex[0].name = "ternary";
  ex[0].sys = examples::ternary();
  ex[1].name = "binary";
  ex[1].sys = examples::binary();
  auto solve_examples = [&ex] {
    for (auto& e : ex) {
      const auto t0 = std::chrono::steady_clock::now();
      e.lmi = build_lmi(e.sys);
      e.outcome = certify_ges(e.sys);
      e.seconds = elapsed(t0);
    }
  };

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"KKT equivalence", kkt_equivalence},
      {"theta identities", theta_identities},
      {"end-to-end certification",
       [&] {
         solve_examples();
         return certification(ex);
       }},
      {"Lyapunov decrease along trajectories", [&] { return lyapunov_behavior(ex); }},
      {"sandwich bounds", [&] { return sandwich(ex); }},
      {"no common quadratic Lyapunov function", no_common_quadratic},
      {"indefinite P accepted", [&] { return indefinite_p(ex); }},
      {"SDPA round trip", [&] { return sdpa_round_trip(ex[0]); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("[%s] %zu %s (%.2f s): %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                elapsed(t0), v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
