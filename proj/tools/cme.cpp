// cme: solve, certify and sweep content-market equilibria.
//
// Exit status: 0 success (for `check`: certificate holds), 1 certificate
// fails, 2 bad input.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cme/equilibrium.hpp"
#include "cme/harness/result.hpp"
#include "cme/harness/scenario.hpp"
#include "cme/harness/sweep.hpp"

namespace fs = std::filesystem;
using namespace cme;
using namespace cme::harness;

namespace {

struct Overrides {
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<int> grid;
  std::optional<int> restarts;
  std::string out = ".";
};

void add_common(CLI::App* cmd, Overrides& o, bool with_mode) {
  if (with_mode) cmd->add_option("--mode", o.mode, "perfect, imperfect or proxy (default: scenario modes)");
  cmd->add_option("--seed", o.seed, "override the scenario seed");
  cmd->add_option("--tol", o.tol, "certificate tolerance (producer gap uses 1000x)");
  cmd->add_option("--grid", o.grid, "topic search grid resolution");
  cmd->add_option("--restarts", o.restarts, "extra random starts");
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
}

Scenario apply(Scenario sc, const Overrides& o) {
  if (o.mode) sc.modes = {parse_game_mode(*o.mode)};
  if (o.seed) sc.market.seed = *o.seed;
  if (o.tol) sc.tol = *o.tol;
  if (o.grid) sc.search.grid_resolution = *o.grid;
  if (o.restarts) sc.dynamics.restarts = *o.restarts;
  validate(sc.search);
  validate(sc.dynamics);
  if (!(sc.tol >= 0.0)) throw Error(ErrorKind::InvalidInput, "--tol must be nonnegative");
  return sc;
}

fs::path out_dir(const Overrides& o) {
  fs::path dir(o.out);
  fs::create_directories(dir);
  return dir;
}

void print_certificate(const NashCertificate& cert) {
  std::printf("  certificate (%s): %s, max residual %.3e\n", to_string(cert.mode), cert.holds ? "holds" : "FAILS",
              cert.max_residual);
  for (const auto& r : cert.residuals) {
    std::printf("    (%s) %-4s residual %.3e  tol %.1e%s%s\n", r.id.c_str(), r.holds() ? "ok" : "FAIL", r.residual,
                r.tolerance, r.witness.empty() ? "" : "  at ", r.witness.c_str());
  }
}

int cmd_solve(const std::string& file, const Overrides& o) {
  const auto sc = apply(load_scenario(file), o);
  const auto cfg = resolve(sc);
  const auto dir = out_dir(o);
  bool all_hold = true;
  for (auto mode : sc.modes) {
    ResultFile rf{sc.name, mode, sc.tol, cfg, sc.search,
                  run_dynamics(cfg, mode, sc.dynamics, sc.search, tolerances_from(sc.tol))};
    const auto& r = rf.result;
    std::printf("%s [%s] N=%zu M=%g M_infl=%g\n", sc.name.c_str(), to_string(mode), cfg.size(), cfg.M, cfg.M_infl);
    std::printf("  converged=%s rounds=%d step=%.3e welfare=%.17g direct_mass=%.3e\n", r.converged ? "true" : "false",
                r.rounds_used, r.step_residual, r.welfare, direct_rate_mass(r.omega));
    print_certificate(r.certificate);
    const auto path = dir / (sc.name + "." + to_string(mode) + ".json");
    save_result(rf, path.string());
    std::printf("  wrote %s\n", path.string().c_str());
    all_hold = all_hold && r.certificate.holds;
  }
  return all_hold ? 0 : 1;
}

int cmd_check(const std::string& file, std::optional<double> tol) {
  const auto rf = load_result(file);
  const double t = tol.value_or(rf.tol);
  if (!(t >= 0.0)) throw Error(ErrorKind::InvalidInput, "--tol must be nonnegative");
  const auto cert = check_nash(rf.result.omega, rf.config, rf.mode, tolerances_from(t), rf.search);
  print_certificate(cert);
  if (!cert.holds) {
    std::printf("violated:");
    for (const auto& id : cert.violated()) std::printf(" (%s)", id.c_str());
    std::printf("\n");
  }
  return cert.holds ? 0 : 1;
}

int cmd_sweep(const std::string& file, const Overrides& o) {
  const auto sc = apply(load_scenario(file), o);
  if (!sc.sweep) throw Error(ErrorKind::InvalidInput, file + ": missing [sweep] section");
  const auto rows = run_sweep(sc);
  const auto dir = out_dir(o);
  write_text((dir / (sc.name + ".csv")).string(), sweep_csv(rows));
  write_text((dir / (sc.name + ".dat")).string(), sweep_dat(rows));
  write_text((dir / (sc.name + ".json")).string(), sweep_json(rows).dump(1) + "\n");
  int failed = 0;
  for (const auto& r : rows) failed += r.ok() ? 0 : 1;
  std::printf("%s: %zu rows (%d failed) -> %s/%s.{csv,dat,json}\n", sc.name.c_str(), rows.size(), failed,
              dir.string().c_str(), sc.name.c_str());
  for (const auto& p : median_by_n(rows)) {
    std::printf("  N=%-4zu median relative_poi %.6g over %zu certified rows\n", p.n, p.median_relative_poi, p.rows);
  }
  return 0;
}

int cmd_poi(const std::string& file, const Overrides& o) {
  const auto sc = apply(load_scenario(file), o);
  const auto cfg = resolve(sc);
  const auto p = price_of_influence(cfg, sc.dynamics, sc.search, tolerances_from(sc.tol));
  std::printf("%s N=%zu M_infl=%g\n", sc.name.c_str(), cfg.size(), cfg.M_infl);
  std::printf("  phi_perfect   %.17g (converged=%d certified=%d)\n", p.phi_perfect, p.converged_perfect,
              p.certified_perfect);
  std::printf("  phi_imperfect %.17g (converged=%d certified=%d)\n", p.phi_imperfect, p.converged_imperfect,
              p.certified_imperfect);
  std::printf("  poi %.6g  relative %.6g\n", p.poi, p.relative_poi);
  return 0;
}

int cmd_compare(const std::string& file, const Overrides& o) {
  const auto sc = apply(load_scenario(file), o);
  const auto cfg = resolve(sc);
  const auto rep = proxy_equivalence_report(cfg, sc.dynamics, sc.search, tolerances_from(sc.tol));
  std::printf("%s N=%zu M_infl=%g\n", sc.name.c_str(), cfg.size(), cfg.M_infl);
  std::printf("  welfare: perfect %.17g  imperfect %.17g  proxy %.17g\n", rep.perfect.welfare, rep.imperfect.welfare,
              rep.proxy.welfare);
  std::printf("  direct mass: perfect %.3e  imperfect %.3e  proxy %.3e\n", rep.direct_rate_mass,
              rep.imperfect_direct_rate_mass, rep.proxy_direct_rate_mass);
  std::printf("  perfect equilibrium as proxy:\n");
  print_certificate(rep.perfect_as_proxy);
  std::printf("  imperfect equilibrium as proxy:\n");
  print_certificate(rep.imperfect_as_proxy);
  return rep.perfect_is_proxy && rep.imperfect_is_proxy ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"content-market equilibrium engine"};
  app.require_subcommand(1);

  std::string file;
  Overrides o;
  std::optional<double> check_tol;

  auto* solve = app.add_subcommand("solve", "run best-response dynamics on a scenario");
  solve->add_option("scenario", file, "scenario file (.scn)")->required();
  add_common(solve, o, true);

  auto* check = app.add_subcommand("check", "re-certify a result file");
  check->add_option("result", file, "result file (.json)")->required();
  check->add_option("--tol", check_tol, "certificate tolerance (default: the one stored in the file)");

  auto* sweep = app.add_subcommand("sweep", "price-of-influence sweep over N");
  sweep->add_option("sweep", file, "sweep file (.swp)")->required();
  add_common(sweep, o, false);

  auto* poi = app.add_subcommand("poi", "price of influence for one scenario");
  poi->add_option("scenario", file, "scenario file (.scn)")->required();
  add_common(poi, o, false);

  auto* compare = app.add_subcommand("compare-modes", "solve all modes and test proxy equivalence");
  compare->add_option("scenario", file, "scenario file (.scn)")->required();
  add_common(compare, o, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return cmd_solve(file, o);
    if (check->parsed()) return cmd_check(file, check_tol);
    if (sweep->parsed()) return cmd_sweep(file, o);
    if (poi->parsed()) return cmd_poi(file, o);
    if (compare->parsed()) return cmd_compare(file, o);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "cme: %s\n", ex.what());
    return 2;
  }
  return 2;
}
