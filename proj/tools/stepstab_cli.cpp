#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <stepstab/io.hpp>
#include <stepstab/sdpa.hpp>
#include <stepstab/stepstab.hpp>

using namespace stepstab;

namespace {

constexpr int kExitUsage = 64;
constexpr int kExitBadConfig = 65;

struct Args {
  std::string config;
  std::string out;
  std::string sdpa_path;
  std::string lmi_path;
  std::string cert;
  std::string objective;
  std::optional<double> eps;
  double tol = 1e-7;
  std::vector<double> x0;
  long steps = 60;
  std::string policy = "det";
  std::uint64_t seed = 0;
  std::vector<double> box;
  std::vector<long> res;
};

SelectionPolicy policy_from(const std::string& s) {
  if (s == "det") return SelectionPolicy::Deterministic;
  if (s == "rand") return SelectionPolicy::UniformRandom;
  return SelectionPolicy::WorstCase;
}

void print_report(const VerificationReport& r) {
  std::printf("lambda_max = %.3e %.3e %.3e\n", r.lmi_max_eigenvalue[0], r.lmi_max_eigenvalue[1],
              r.lmi_max_eigenvalue[2]);
  std::printf("min M entry = %.3e %.3e %.3e\n", r.m_min_entry[0], r.m_min_entry[1], r.m_min_entry[2]);
  std::printf("c = %.6g %.6g %.6g\n", r.c1, r.c2, r.c3);
  std::printf("verification: %s\n", r.summary().c_str());
}

int run_certify(const Args& a) {
  auto cfg = io::load_config(a.config);
  if (a.eps) cfg.options.eps = *a.eps;
  if (!a.objective.empty()) cfg.options.solve.objective = io::objective_from(a.objective);
  const auto lmi = build_lmi(cfg.sys, cfg.options.rank_rel_tol);
  if (!a.lmi_path.empty()) io::write_json(io::to_json(lmi), a.lmi_path);
  if (!a.sdpa_path.empty() && lmi.W_perp.cols() > 0) {
    sdpa::export_problem(encode(cfg.sys, lmi, cfg.options.eps), a.sdpa_path);
    std::printf("wrote %s\n", a.sdpa_path.c_str());
  }
  const auto out = certify_ges(cfg.sys, cfg.options);
  std::printf("status: %s\n", out.certified ? "CERTIFIED" : "NOT CERTIFIED");
  std::printf("%s\n", out.diagnostic.c_str());
  if (out.certified) {
    print_report(out.certificate().report);
    std::printf("min eig(P) = %.6g\n", linalg::min_eigenvalue(out.certificate().P));
    if (!a.out.empty()) {
      io::write_json(io::to_json(out.certificate()), a.out);
      std::printf("wrote %s\n", a.out.c_str());
    }
  }
  return out.certified ? 0 : 2;
}

int run_simulate(const Args& a) {
  const auto cfg = io::load_config(a.config);
  const Vector x0 = Eigen::Map<const Vector>(a.x0.data(), static_cast<Index>(a.x0.size()));
  auto traj = simulate(cfg.sys, x0, a.steps, policy_from(a.policy), a.seed);
  if (!a.cert.empty()) traj = attach_lyapunov(std::move(traj), LyapunovEvaluator(cfg.sys, io::load_certificate(a.cert).P));
  if (a.out.empty())
    write_trajectory_csv(traj, stdout);
  else
    write_trajectory_csv(traj, a.out);
  return 0;
}

int run_levelset(const Args& a) {
  const auto cfg = io::load_config(a.config);
  const LyapunovEvaluator ev(cfg.sys, io::load_certificate(a.cert).P);
  const auto grid = ev.level_grid({a.box[0], a.box[1], a.box[2], a.box[3]}, a.res[0], a.res[1]);
  if (a.out.empty())
    write_level_csv(grid, stdout);
  else
    write_level_csv(grid, a.out);
  return 0;
}

int run_check(const Args& a) {
  const auto cfg = io::load_config(a.config);
  const auto cert = io::load_certificate(a.cert);
  const auto rep = verify(cert, cfg.sys, build_lmi(cfg.sys, cfg.options.rank_rel_tol), a.tol);
  print_report(rep);
  return rep.pass() ? 0 : 2;
}

// The effective closed-loop matrix of a single-input loop, either given
// directly or through the two-channel ternary embedding.
Matrix effective_closed_loop(const SystemData& sys) {
  const Matrix BD = sys.B * sys.Delta;
  if (sys.n_u() == 1) return sys.A + BD * sys.K;
  const bool embedded = sys.n_u() == 2 && sys.B.col(1) == -sys.B.col(0) && sys.K.row(1) == -sys.K.row(0) &&
                        sys.Delta(0, 0) == sys.Delta(1, 1);
  if (!embedded) throw Error("quadcheck needs a single-input or ternary-embedded system");
  return sys.A + BD.col(0) * sys.K.row(0);
}

int run_quadcheck(const Args& a) {
  const auto cfg = io::load_config(a.config);
  const Matrix Acl = effective_closed_loop(cfg.sys);
  const auto r = check_common_quadratic(cfg.sys.A, Acl);
  std::printf("common quadratic for (A, Acl): %s (t* = %.6g)\n", to_string(r.status), r.margin);
  return r.status == QuadraticStatus::Feasible ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stability certificates for linear systems with step nonlinearities"};
  app.require_subcommand(1);
  Args a;

  auto* certify = app.add_subcommand("certify", "search and verify a certificate");
  certify->add_option("config", a.config, "system JSON")->required()->check(CLI::ExistingFile);
  certify->add_option("--eps", a.eps, "lower bound for c1, c3 and c2 - c1");
  certify->add_option("--out", a.out, "certificate JSON output");
  certify->add_option("--sdpa", a.sdpa_path, "export the problem in SDPA sparse format");
  certify->add_option("--dump-lmi", a.lmi_path, "write the structural matrices as JSON");
  certify->add_option("--objective", a.objective, "feasibility, max-decay or min-trace-p")
      ->check(CLI::IsMember({"feasibility", "max-decay", "min-trace-p"}));

  auto* sim = app.add_subcommand("simulate", "simulate the closed loop");
  sim->add_option("config", a.config, "system JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--x0", a.x0, "initial state, comma separated")->required()->delimiter(',');
  sim->add_option("--steps", a.steps, "number of steps")->required()->check(CLI::NonNegativeNumber);
  sim->add_option("--policy", a.policy, "det, rand or worst")->check(CLI::IsMember({"det", "rand", "worst"}));
  sim->add_option("--seed", a.seed, "seed for the rand policy");
  sim->add_option("--cert", a.cert, "certificate JSON, adds the W column");
  sim->add_option("--out", a.out, "CSV output, stdout when omitted");

  auto* level = app.add_subcommand("levelset", "tabulate W on a planar grid");
  level->add_option("config", a.config, "system JSON")->required()->check(CLI::ExistingFile);
  level->add_option("--cert", a.cert, "certificate JSON")->required();
  level->add_option("--box", a.box, "x1min,x1max,x2min,x2max")->required()->delimiter(',')->expected(4);
  level->add_option("--res", a.res, "NX,NY")->required()->delimiter(',')->expected(2);
  level->add_option("--out", a.out, "CSV output, stdout when omitted");

  auto* check = app.add_subcommand("check", "verify a certificate file");
  check->add_option("config", a.config, "system JSON")->required()->check(CLI::ExistingFile);
  check->add_option("--cert", a.cert, "certificate JSON")->required();
  check->add_option("--tol", a.tol, "verification tolerance");

  auto* quad = app.add_subcommand("quadcheck", "search a common quadratic Lyapunov function for A and A + B Delta K");
  quad->add_option("config", a.config, "system JSON")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitUsage;
  }
  if (level->parsed() && (a.box.size() != 4 || a.res.size() != 2)) {
    std::cerr << "levelset: --box needs four numbers and --res two\n";
    return kExitUsage;
  }

  try {
    if (certify->parsed()) return run_certify(a);
    if (sim->parsed()) return run_simulate(a);
    if (level->parsed()) return run_levelset(a);
    if (check->parsed()) return run_check(a);
    return run_quadcheck(a);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
