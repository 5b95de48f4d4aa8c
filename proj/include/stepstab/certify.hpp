#pragma once

#include <cmath>
#include <map>
#include <sstream>
#include <string>

#include "conic.hpp"
#include "lmi_builder.hpp"
#include "model.hpp"
#include "sdp.hpp"
#include "types.hpp"

namespace stepstab {

struct CertifyOptions {
  double eps = 1e-6;
  double rank_rel_tol = 1e-12;
  SolveOptions solve;
};

struct CertifyOutcome {
  bool certified = false;
  SolveResult result;
  std::string diagnostic;

  const Certificate& certificate() const { return result.certificate; }
};

inline CertifyOutcome certify_ges(const SystemData& sys, const CertifyOptions& opt = {}) {
  require_valid(sys);
  CertifyOutcome out;
  const auto lmi = build_lmi(sys, opt.rank_rel_tol);
  if (lmi.W_perp.cols() == 0) {
    out.diagnostic = "ker W is trivial";
    return out;
  }
  const auto fp = encode(sys, lmi, opt.eps);
  out.result = solve(fp, sys, opt.solve);
  out.certified = out.result.status == SolveStatus::Certified;
  out.diagnostic = std::string(to_string(out.result.status)) + ": " + out.result.diagnostic;
  return out;
}

enum class QuadraticStatus { Feasible, Infeasible, Inconclusive };

inline const char* to_string(QuadraticStatus s) {
  switch (s) {
    case QuadraticStatus::Feasible: return "feasible";
    case QuadraticStatus::Infeasible: return "infeasible";
    case QuadraticStatus::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct QuadraticCheck {
  QuadraticStatus status = QuadraticStatus::Inconclusive;
  Matrix Q;
  double margin = INFINITY;  // optimal t
};

/// Searches Q with Q >= I, A^T Q A - Q <= -I, Acl^T Q Acl - Q <= -I, the
/// homogeneous form of the strict inequalities, relaxed by t I.
inline QuadraticCheck check_common_quadratic(const Matrix& A, const Matrix& Acl, double bound = 1e8) {
  const Index n = A.rows();
  if (A.cols() != n || Acl.rows() != n || Acl.cols() != n)
    throw DimensionError("check_common_quadratic: A and Acl must be square of equal size");
  conic::Problem p;
  p.num_vars = linalg::svec_size(n);
  const Matrix I = Matrix::Identity(n, n);
  p.lmis.resize(3);
  p.lmis[0].constant = I;
  p.lmis[1].constant = I;
  p.lmis[2].constant = I;
  for (Index r = 0; r < n; ++r)
    for (Index c = r; c < n; ++c) {
      Matrix E = Matrix::Zero(n, n);
      E(r, c) = 1.0;
      E(c, r) = 1.0;
      const Index v = VariableLayout::sym_index(n, r, c);
      p.lmis[0].terms.emplace_back(v, -E);
      p.lmis[1].terms.emplace_back(v, detail::exact_sym(A.transpose() * E * A - E));
      p.lmis[2].terms.emplace_back(v, detail::exact_sym(Acl.transpose() * E * Acl - E));
    }
  conic::Options o;
  o.variable_bound = bound;
  const auto res = conic::solve(p, {}, o);
  QuadraticCheck out;
  out.margin = res.t;
  out.Q = linalg::smat(res.y, n);
  const bool settled = res.status == ipm::Status::Converged || res.status == ipm::Status::Stalled;
  if (res.t < 0.0) {
    const bool ok = linalg::min_eigenvalue(out.Q) > 0.0 &&
                    linalg::max_eigenvalue(A.transpose() * out.Q * A - out.Q) < 0.0 &&
                    linalg::max_eigenvalue(Acl.transpose() * out.Q * Acl - out.Q) < 0.0;
    out.status = ok ? QuadraticStatus::Feasible : QuadraticStatus::Inconclusive;
  } else if (settled && res.t > 1e-6) {
    out.status = QuadraticStatus::Infeasible;
  }
  return out;
}

struct PublishedCheckReport {
  bool pass = false;
  double margin = INFINITY;  // best t with P pinned
  bool structure_consistent = true;
  VerificationReport verification;
  std::string note;
};

/// Pins P and searches the multipliers only.
inline PublishedCheckReport check_published_certificate(const SystemData& sys, const Matrix& P, double tol = 1e-7,
                                                const SolveOptions& sopt = {}) {
  require_valid(sys);
  const auto lmi = build_lmi(sys);
  const Matrix Ps = checked_symmetric(P, lmi.n_lyap(), "check_published_certificate");
  const auto fp = encode(sys, lmi);
  std::map<Index, double> fixed;
  for (Index r = 0; r < Ps.rows(); ++r)
    for (Index c = r; c < Ps.cols(); ++c) fixed[fp.layout.p_offset() + VariableLayout::sym_index(Ps.rows(), r, c)] = Ps(r, c);

  PublishedCheckReport rep;
  SolveOptions o = sopt;
  o.verify_tol = tol;
  o.objective = Objective::Feasibility;
  auto res = solve_with(fp, o, fixed, sys);
  if (res.outcome.reduction_consistent) {
    rep.margin = res.margin;
    rep.pass = res.status == SolveStatus::Certified;
    rep.verification = res.certificate.report;
    rep.note = res.diagnostic;
    return rep;
  }
  // The pinned P violates the forced structure exactly (for instance after
  // rounding); report the margin of the unreduced problem instead.
  rep.structure_consistent = false;
  conic::ReductionHints h;
  h.fixed = fixed;
  conic::Options co = detail::conic_options(o);
  const auto raw = conic::solve(fp.conic, h, co);
  rep.margin = raw.t;
  auto cert = Certificate::unpack(fp.layout, raw.y);
  rep.verification = verify(cert, sys, lmi, tol);
  rep.pass = rep.verification.pass();
  std::ostringstream os;
  os << "P does not satisfy the forced null structure (residual " << res.outcome.reduction_residual
     << "); unreduced margin t* = " << raw.t;
  rep.note = os.str();
  return rep;
}

}  // namespace stepstab
