#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "conic.hpp"
#include "kkt.hpp"
#include "linalg.hpp"
#include "lmi_builder.hpp"
#include "model.hpp"
#include "types.hpp"

// Stability certificate search: unknowns (P, M_i, G_i, c_i), three projected
// matrix inequalities, entrywise sign constraints on M_i and bounds on c_i.

namespace stepstab {

/// Index map between the certificate unknowns and a flat vector.
struct VariableLayout {
  Index n_lyap = 0;  // size of P
  Index n_mult = 0;  // size of each M_i
  Index n_diag = 0;  // length of each diagonal G_i1, G_i2

  VariableLayout() = default;
  explicit VariableLayout(const LmiData& lmi)
      : n_lyap(lmi.n_lyap()), n_mult(lmi.n_mult()), n_diag(2 * lmi.n_u) {}

  Index p_count() const { return linalg::svec_size(n_lyap); }
  Index m_count() const { return linalg::svec_size(n_mult); }
  Index p_offset() const { return 0; }
  Index m_offset(int i) const { return p_count() + i * m_count(); }
  Index g_offset(int i, int j) const { return p_count() + 3 * m_count() + (2 * i + j) * n_diag; }
  Index c_offset(int i) const { return p_count() + 3 * m_count() + 6 * n_diag + i; }
  Index size() const { return c_offset(3); }

  /// Variable index of entry (r, c) of an svec-packed symmetric matrix of size n.
  static Index sym_index(Index n, Index r, Index c) {
    if (r > c) std::swap(r, c);
    return r * n - r * (r - 1) / 2 + (c - r);
  }
};

struct VerificationReport {
  std::array<double, 3> lmi_max_eigenvalue{INFINITY, INFINITY, INFINITY};
  std::array<double, 3> m_min_entry{-INFINITY, -INFINITY, -INFINITY};
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;
  double tol = 0.0;
  std::vector<std::string> failures;

  bool pass() const { return failures.empty(); }
  double worst_lmi() const {
    return std::max({lmi_max_eigenvalue[0], lmi_max_eigenvalue[1], lmi_max_eigenvalue[2]});
  }
  double worst_sign() const { return std::min({m_min_entry[0], m_min_entry[1], m_min_entry[2]}); }
  std::string summary() const {
    std::ostringstream os;
    os << (pass() ? "PASS" : "FAIL") << " lambda_max=(" << lmi_max_eigenvalue[0] << ", "
       << lmi_max_eigenvalue[1] << ", " << lmi_max_eigenvalue[2] << ") min M entry=" << worst_sign()
       << " c=(" << c1 << ", " << c2 << ", " << c3 << ")";
    for (const auto& f : failures) os << "\n  " << f;
    return os.str();
  }
};

struct Certificate {
  Matrix P;
  std::array<Matrix, 3> M;
  std::array<Vector, 3> G1;  // diagonal of the first-step block of G_i
  std::array<Vector, 3> G2;  // diagonal of the successor block of G_i
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;
  VerificationReport report;

  Vector pack(const VariableLayout& lay) const {
    Vector y(lay.size());
    y.segment(lay.p_offset(), lay.p_count()) = linalg::svec(P);
    for (int i = 0; i < 3; ++i) {
      y.segment(lay.m_offset(i), lay.m_count()) = linalg::svec(M[i]);
      y.segment(lay.g_offset(i, 0), lay.n_diag) = G1[i];
      y.segment(lay.g_offset(i, 1), lay.n_diag) = G2[i];
    }
    y(lay.c_offset(0)) = c1;
    y(lay.c_offset(1)) = c2;
    y(lay.c_offset(2)) = c3;
    return y;
  }

  static Certificate unpack(const VariableLayout& lay, const Vector& y) {
    if (y.size() != lay.size()) throw DimensionError("Certificate::unpack: wrong vector length");
    Certificate c;
    c.P = linalg::smat(y.segment(lay.p_offset(), lay.p_count()), lay.n_lyap);
    for (int i = 0; i < 3; ++i) {
      c.M[i] = linalg::smat(y.segment(lay.m_offset(i), lay.m_count()), lay.n_mult);
      c.G1[i] = y.segment(lay.g_offset(i, 0), lay.n_diag);
      c.G2[i] = y.segment(lay.g_offset(i, 1), lay.n_diag);
    }
    c.c1 = y(lay.c_offset(0));
    c.c2 = y(lay.c_offset(1));
    c.c3 = y(lay.c_offset(2));
    return c;
  }
};

/// Structure shared by every certificate of a given system. At x = 0 each
/// pair of selections s, s_psi in S(d) gives a test vector that all three
/// blocks annihilate, and so do the vectors carrying lambda1_i = lambda2_i = 1
/// alone. Both kinds force the corresponding entries of M_i to zero.
struct ForcedStructure {
  bool origin_is_equilibrium = true;
  std::vector<Vector> equilibrium_thetas;
  std::vector<Vector> ghost_thetas;
  std::vector<std::pair<Index, Index>> zero_m_entries;  // (row <= col)
};

inline ForcedStructure forced_structure(const SystemData& sys, const LmiData& lmi) {
  ForcedStructure fs;
  const Index nu = sys.n_u();
  const Index np = sys.n_p();
  const auto set = kkt::step_set(sys.d);
  const auto free = set.free_components();
  const Matrix BD = sys.B * sys.Delta;
  std::vector<Vector> vertices;
  const std::size_t count = std::size_t{1} << free.size();
  for (std::size_t mask = 0; mask < count; ++mask) {
    Vector s = kkt::step(sys.d);
    for (std::size_t k = 0; k < free.size(); ++k) s(free[k]) = (mask >> k) & 1U ? 1.0 : 0.0;
    vertices.push_back(s);
  }
  // S(d) is the convex hull of these vertices, so checking them suffices.
  for (const auto& s : vertices)
    if ((BD * s).cwiseAbs().maxCoeff() > 0.0) fs.origin_is_equilibrium = false;
  if (!fs.origin_is_equilibrium) return fs;

  const Vector x0 = Vector::Zero(np);
  for (const auto& s : vertices)
    for (const auto& sp : vertices) fs.equilibrium_thetas.push_back(build_theta(sys, x0, s, sp));
  const auto lay = lmi.layout();
  for (int which = 0; which < 2; ++which)
    for (Index i = 0; i < nu; ++i) {
      Vector g = Vector::Zero(lmi.n_theta);
      g(lay.lambda1(which) + i) = 1.0;
      g(lay.lambda2(which) + i) = 1.0;
      fs.ghost_thetas.push_back(g);
    }

  const Index nm = lmi.n_mult();
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> zero =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(nm, nm, false);
  auto mark = [&](const std::vector<Vector>& thetas) {
    Vector support = Vector::Zero(nm);
    for (const auto& th : thetas) support += (lmi.F * th).cwiseAbs();
    for (Index j = 0; j < nm; ++j)
      for (Index k = 0; k < nm; ++k)
        if (support(j) > 1e-12 && support(k) > 1e-12) zero(j, k) = true;
  };
  mark(fs.equilibrium_thetas);
  mark(fs.ghost_thetas);
  for (Index j = 0; j < nm; ++j)
    for (Index k = j; k < nm; ++k)
      if (zero(j, k)) fs.zero_m_entries.emplace_back(j, k);
  return fs;
}

struct FeasibilityProblem {
  LmiData lmi;
  VariableLayout layout;
  double eps = 1e-6;
  conic::Problem conic;  // blocks: (V_u, G_1, M_1), (V_l, G_2, M_2), (Xi, G_3, M_3)
  ForcedStructure structure;
};

namespace detail {

inline Matrix sym_unit(Index n, Index r, Index c) {
  Matrix e = Matrix::Zero(n, n);
  e(r, c) = 1.0;
  e(c, r) = 1.0;
  return e;
}

inline Matrix exact_sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace detail

inline FeasibilityProblem encode(const SystemData& sys, const LmiData& lmi, double eps = 1e-6) {
  require_valid(sys);
  if (lmi.W_perp.cols() == 0) throw DegenerateKernel("encode: ker W is trivial, the conditions are vacuous");
  if (!(eps > 0.0)) throw Error("encode: eps must be positive");
  FeasibilityProblem fp;
  fp.lmi = lmi;
  fp.layout = VariableLayout(lmi);
  fp.eps = eps;
  const auto& lay = fp.layout;
  const Matrix& Wp = lmi.W_perp;
  const Matrix Wt = Wp.transpose();
  auto project = [&](const Matrix& m) { return detail::exact_sym(Wt * m * Wp); };

  auto& prob = fp.conic;
  prob.num_vars = lay.size();
  prob.lmis.resize(3);
  for (auto& l : prob.lmis) l.constant = Matrix::Zero(Wp.cols(), Wp.cols());

  const Matrix next = lmi.V_plus * lmi.Pi1;
  const Index nl = lay.n_lyap;
  for (Index r = 0; r < nl; ++r)
    for (Index c = r; c < nl; ++c) {
      const Index v = VariableLayout::sym_index(nl, r, c);
      const Matrix E = detail::sym_unit(nl, r, c);
      const Matrix cur = lmi.Pi2.transpose() * E * lmi.Pi2;
      prob.lmis[0].terms.emplace_back(lay.p_offset() + v, project(cur));
      prob.lmis[1].terms.emplace_back(lay.p_offset() + v, project(-cur));
      prob.lmis[2].terms.emplace_back(lay.p_offset() + v, project(next.transpose() * E * next - cur));
    }

  const Index nm = lay.n_mult;
  for (int i = 0; i < 3; ++i)
    for (Index r = 0; r < nm; ++r)
      for (Index c = r; c < nm; ++c) {
        const Matrix E = detail::sym_unit(nm, r, c);
        prob.lmis[static_cast<std::size_t>(i)].terms.emplace_back(
            lay.m_offset(i) + VariableLayout::sym_index(nm, r, c), project(lmi.F.transpose() * E * lmi.F));
      }

  const Index nd = lay.n_diag;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j)
      for (Index k = 0; k < nd; ++k) {
        Vector g = Vector::Zero(nd);
        g(k) = 1.0;
        const Vector zero = Vector::Zero(nd);
        const Matrix psi = j == 0 ? psi_of(g, zero) : psi_of(zero, g);
        prob.lmis[static_cast<std::size_t>(i)].terms.emplace_back(lay.g_offset(i, j) + k,
                                                                  project(lmi.T.transpose() * psi * lmi.T));
      }

  prob.lmis[0].terms.emplace_back(lay.c_offset(1), project(-lmi.X));
  prob.lmis[1].terms.emplace_back(lay.c_offset(0), project(lmi.X));
  prob.lmis[2].terms.emplace_back(lay.c_offset(2), project(lmi.X));
  for (auto& l : prob.lmis)
    std::sort(l.terms.begin(), l.terms.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  for (int i = 0; i < 3; ++i)
    for (Index k = 0; k < lay.m_count(); ++k) prob.rows.push_back({{{lay.m_offset(i) + k, 1.0}}, 0.0});
  prob.rows.push_back({{{lay.c_offset(0), 1.0}}, eps});
  prob.rows.push_back({{{lay.c_offset(2), 1.0}}, eps});
  prob.rows.push_back({{{lay.c_offset(1), 1.0}, {lay.c_offset(0), -1.0}}, eps});

  fp.structure = forced_structure(sys, lmi);
  return fp;
}

/// Reduction hints derived from the forced structure.
inline conic::ReductionHints reduction_hints(const FeasibilityProblem& fp) {
  conic::ReductionHints h;
  std::vector<Vector> dirs = fp.structure.equilibrium_thetas;
  dirs.insert(dirs.end(), fp.structure.ghost_thetas.begin(), fp.structure.ghost_thetas.end());
  Matrix N(fp.lmi.W_perp.cols(), static_cast<Index>(dirs.size()));
  for (std::size_t k = 0; k < dirs.size(); ++k) N.col(static_cast<Index>(k)) = fp.lmi.W_perp.transpose() * dirs[k];
  h.null.assign(3, N);
  for (int i = 0; i < 3; ++i)
    for (const auto& [r, c] : fp.structure.zero_m_entries)
      h.fixed[fp.layout.m_offset(i) + VariableLayout::sym_index(fp.layout.n_mult, r, c)] = 0.0;
  return h;
}

/// Recomputes the three projected inequalities from the certificate values.
inline VerificationReport verify(const Certificate& cert, const SystemData& sys, const LmiData& lmi,
                                 double tol = 1e-7) {
  (void)sys;
  VerificationReport rep;
  rep.tol = tol;
  rep.c1 = cert.c1;
  rep.c2 = cert.c2;
  rep.c3 = cert.c3;
  auto fail = [&rep](const std::string& m) { rep.failures.push_back(m); };
  const Index nl = lmi.n_lyap(), nm = lmi.n_mult(), nd = 2 * lmi.n_u;
  if (cert.P.rows() != nl || cert.P.cols() != nl) {
    fail("P has shape " + shape_of(cert.P) + ", expected " + std::to_string(nl) + "x" + std::to_string(nl));
    return rep;
  }
  for (int i = 0; i < 3; ++i) {
    if (cert.M[i].rows() != nm || cert.M[i].cols() != nm || cert.G1[i].size() != nd || cert.G2[i].size() != nd) {
      fail("multiplier " + std::to_string(i + 1) + " has the wrong shape");
      return rep;
    }
  }
  if (!cert.P.allFinite() || linalg::max_asymmetry(cert.P) > kSymmetryTol) {
    fail("P is not a finite symmetric matrix");
    return rep;
  }
  const auto blocks = build_objective_blocks(lmi, cert.P, cert.c1, cert.c2, cert.c3);
  const std::array<const Matrix*, 3> base{&blocks.Vu, &blocks.Vl, &blocks.Xi};
  for (int i = 0; i < 3; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Matrix& M = cert.M[k];
    if (!M.allFinite() || linalg::max_asymmetry(M) > kSymmetryTol) {
      fail("M" + std::to_string(i + 1) + " is not a finite symmetric matrix");
      continue;
    }
    const Matrix full = *base[k] + lmi.T.transpose() * psi_of(cert.G1[k], cert.G2[k]) * lmi.T +
                        lmi.F.transpose() * (0.5 * (M + M.transpose())) * lmi.F;
    rep.lmi_max_eigenvalue[k] = linalg::max_eigenvalue(lmi.W_perp.transpose() * full * lmi.W_perp);
    rep.m_min_entry[k] = M.minCoeff();
    if (!(rep.lmi_max_eigenvalue[k] <= tol))
      fail("inequality " + std::to_string(i + 1) + ": lambda_max = " + std::to_string(rep.lmi_max_eigenvalue[k]));
    if (!(rep.m_min_entry[k] >= -tol))
      fail("M" + std::to_string(i + 1) + " has a negative entry " + std::to_string(rep.m_min_entry[k]));
  }
  if (!(cert.c1 > 0.0)) fail("c1 must be positive");
  if (!(cert.c2 > 0.0)) fail("c2 must be positive");
  if (!(cert.c3 > 0.0)) fail("c3 must be positive");
  if (!(cert.c2 >= cert.c1 - tol)) fail("c2 must not be smaller than c1");
  return rep;
}

enum class Objective { Feasibility, MaxDecay, MinTraceP };

inline const char* to_string(Objective o) {
  switch (o) {
    case Objective::Feasibility: return "feasibility";
    case Objective::MaxDecay: return "max-decay";
    case Objective::MinTraceP: return "min-trace-p";
  }
  return "?";
}

struct SolveOptions {
  Objective objective = Objective::Feasibility;
  double variable_bound = 1e3;
  double timeout_seconds = 60.0;
  double verify_tol = 1e-7;
  double ipm_tolerance = 1e-9;
  int max_iterations = 200;
  std::ostream* log = nullptr;
};

enum class SolveStatus { Certified, Infeasible, Inconclusive };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Certified: return "certified";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct SolveResult {
  SolveStatus status = SolveStatus::Inconclusive;
  Certificate certificate;  // meaningful when Certified
  double margin = INFINITY; // optimal t of the bounded phase-I problem
  std::string diagnostic;
  conic::Outcome outcome;
};

namespace detail {

inline conic::Options conic_options(const SolveOptions& o) {
  conic::Options c;
  c.variable_bound = o.variable_bound;
  c.ipm.tolerance = o.ipm_tolerance;
  c.ipm.max_iterations = o.max_iterations;
  c.ipm.time_limit_seconds = o.timeout_seconds;
  c.ipm.log = o.log;
  return c;
}

// A converged margin this far above zero is treated as a proof of
// infeasibility within the variable box.
inline constexpr double kInfeasibleMargin = 1e-8;

}  // namespace detail

/// Solves with additional fixed variables (used to pin P).
inline SolveResult solve_with(const FeasibilityProblem& fp, const SolveOptions& opt,
                              const std::map<Index, double>& extra_fixed, const SystemData& sys) {
  SolveResult res;
  if (!fp.structure.origin_is_equilibrium) {
    res.status = SolveStatus::Infeasible;
    res.diagnostic = "the origin is not an equilibrium: B Delta s != 0 for some s in S(d)";
    return res;
  }
  auto hints = reduction_hints(fp);
  for (const auto& [k, v] : extra_fixed) hints.fixed[k] = v;
  const auto copt = detail::conic_options(opt);
  res.outcome = conic::solve(fp.conic, hints, copt);
  res.margin = res.outcome.t;
  if (!res.outcome.reduction_consistent) {
    res.status = SolveStatus::Infeasible;
    res.diagnostic = "forced structure is inconsistent with the fixed values (residual " +
                     std::to_string(res.outcome.reduction_residual) + ")";
    return res;
  }
  std::ostringstream diag;
  diag << "phase-I margin t* = " << res.margin << " (" << ipm::to_string(res.outcome.status) << ", "
       << res.outcome.iterations << " iterations)";
  const bool settled = res.outcome.status == ipm::Status::Converged || res.outcome.status == ipm::Status::Stalled;
  if (settled && res.margin > detail::kInfeasibleMargin) {
    res.status = SolveStatus::Infeasible;
    res.diagnostic = diag.str() + "; no certificate within |y| <= " + std::to_string(opt.variable_bound);
    return res;
  }
  if (!(res.margin < 0.0)) {
    res.status = SolveStatus::Inconclusive;
    res.diagnostic = diag.str();
    return res;
  }

  Vector y = res.outcome.y;
  if (opt.objective != Objective::Feasibility && extra_fixed.empty()) {
    conic::Problem p2 = fp.conic;
    auto o2 = copt;
    o2.goal = conic::Goal::MaximizeLinear;
    o2.weights = Vector::Zero(fp.layout.size());
    if (opt.objective == Objective::MaxDecay) {
      o2.weights(fp.layout.c_offset(2)) = 1.0;
      p2.rows.push_back({{{fp.layout.c_offset(1), -1.0}}, -1.0});
    } else {
      for (Index r = 0; r < fp.layout.n_lyap; ++r)
        o2.weights(fp.layout.p_offset() + VariableLayout::sym_index(fp.layout.n_lyap, r, r)) = -1.0;
    }
    auto second = conic::solve(p2, hints, o2);
    auto cand = Certificate::unpack(fp.layout, second.y);
    if (verify(cand, sys, fp.lmi, opt.verify_tol).pass()) {
      y = second.y;
      diag << "; objective " << to_string(opt.objective) << " applied";
    } else {
      diag << "; objective " << to_string(opt.objective) << " did not verify, kept feasibility point";
    }
  }
  res.certificate = Certificate::unpack(fp.layout, y);
  res.certificate.report = verify(res.certificate, sys, fp.lmi, opt.verify_tol);
  res.diagnostic = diag.str();
  res.status = res.certificate.report.pass() ? SolveStatus::Certified : SolveStatus::Inconclusive;
  if (!res.certificate.report.pass()) res.diagnostic += "; verification failed: " + res.certificate.report.summary();
  return res;
}

inline SolveResult solve(const FeasibilityProblem& fp, const SystemData& sys, const SolveOptions& opt = {}) {
  return solve_with(fp, opt, {}, sys);
}

}  // namespace stepstab
