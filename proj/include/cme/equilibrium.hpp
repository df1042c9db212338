#pragma once

// Equilibrium search, Nash certification and welfare comparisons.
//
// Perfect and proxy games are potential games with the social welfare as
// potential, so round-robin best responses never decrease it. The imperfect
// game has no potential; its iteration is a plain fixed-point scheme and the
// iterate with the smallest step residual is reported.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cme/allocator.hpp"
#include "cme/bestresponse.hpp"
#include "cme/errors.hpp"
#include "cme/kernels.hpp"
#include "cme/market.hpp"

namespace cme {

enum class Schedule { RoundRobin, Jacobi };

inline const char* to_string(Schedule s) { return s == Schedule::RoundRobin ? "round_robin" : "jacobi"; }

struct DynamicsParams {
  int max_rounds = 500;
  double eps_alloc = 1e-8;       // sup-norm change between rounds (absolute)
  double eps_potential = 1e-10;  // potential change, relative to max(1, |Phi|)
  int restarts = 0;              // extra runs from seeded random starts
  Schedule schedule = Schedule::RoundRobin;
};

inline void validate(const DynamicsParams& p) {
  if (p.max_rounds < 1) throw Error(ErrorKind::InvalidInput, "max_rounds must be positive");
  if (!(p.eps_alloc > 0.0)) throw Error(ErrorKind::InvalidInput, "eps_alloc must be positive");
  if (!(p.eps_potential > 0.0)) throw Error(ErrorKind::InvalidInput, "eps_potential must be positive");
  if (p.restarts < 0) throw Error(ErrorKind::InvalidInput, "restarts must be nonnegative");
}

struct ConditionResidual {
  std::string id;  // lettered property of the mode's KKT list, e.g. "c"
  double residual = 0.0;
  double tolerance = 0.0;
  std::string witness;  // agent at which the worst violation occurs

  bool holds() const { return residual <= tolerance; }
};

struct NashCertificate {
  GameMode mode = GameMode::Perfect;
  std::vector<ConditionResidual> residuals;
  double max_residual = 0.0;
  bool holds = false;

  const ConditionResidual* find(const std::string& id) const {
    for (const auto& r : residuals) {
      if (r.id == id) return &r;
    }
    return nullptr;
  }
  std::vector<std::string> violated() const {
    std::vector<std::string> out;
    for (const auto& r : residuals) {
      if (!r.holds()) out.push_back(r.id);
    }
    return out;
  }
};

struct CertificateTolerances {
  double rate = 1e-6;      // budget and marginal-utility conditions (relative)
  double producer = 1e-3;  // topic optimality gap relative to the best found
};

inline CertificateTolerances tolerances_from(double tol) { return {tol, tol * 1e3}; }

struct EquilibriumResult {
  GameMode mode = GameMode::Perfect;
  MarketAllocation omega;
  double welfare = 0.0;
  std::vector<double> potential_trace;
  NashCertificate certificate;
  int rounds_used = 0;
  bool converged = false;
  double step_residual = 0.0;  // sup-norm change of the last reported round
  std::set<std::size_t> degenerate_producers;
  int restart = 0;  // index of the start (given inits first, then random restarts)
};

namespace detail {

// Violation of "lhs >= rhs" relative to the larger side.
inline double violation(double lhs, double rhs) {
  const double scale = std::max({std::abs(lhs), std::abs(rhs), std::numeric_limits<double>::min()});
  return std::max(0.0, rhs - lhs) / scale;
}

struct ResidualAccumulator {
  ConditionResidual r;
  ResidualAccumulator(std::string id, double tol) {
    r.id = std::move(id);
    r.tolerance = tol;
  }
  void add(double v, const std::string& who) {
    if (v > r.residual) {
      r.residual = v;
      r.witness = who;
    }
  }
};

inline std::string consumer_name(std::size_t y) { return "consumer " + std::to_string(y); }
inline std::string producer_name(std::size_t z) { return "producer " + std::to_string(z); }

// Marginal utilities of every channel of consumer y.
struct ConsumerMarginals {
  double outside = 0.0;
  double influencer = 0.0;
  std::vector<double> direct;  // indexed by producer, self entry unused
  double best_direct = 0.0;
  double second_direct = 0.0;
  std::size_t best_direct_at = 0;
};

inline ConsumerMarginals consumer_marginals(std::size_t y, const MarketAllocation& omega, const MarketConfig& cfg,
                                            const MatchTable& B) {
  const auto& d = cfg.delay;
  const auto& c = omega.consumers[y];
  const std::size_t n = cfg.size();
  ConsumerMarginals m;
  m.outside = discount_deriv(c.outside, d) * cfg.r_0 * cfg.B_0;
  double via = 0.0;
  for (std::size_t z = 0; z < n; ++z) {
    if (z != y) via += discount(omega.infl.mu[z], d) * B(z, y);
  }
  m.influencer = discount_deriv(c.influencer, d) * cfg.r_p * via;
  m.direct.assign(n, 0.0);
  m.best_direct = -1.0;
  m.second_direct = -1.0;
  for (std::size_t z = 0; z < n; ++z) {
    if (z == y) continue;
    m.direct[z] = discount_deriv(c.direct[z], d) * cfg.r_p * B(z, y);
    if (m.direct[z] > m.best_direct) {
      m.second_direct = m.best_direct;
      m.best_direct = m.direct[z];
      m.best_direct_at = z;
    } else if (m.direct[z] > m.second_direct) {
      m.second_direct = m.direct[z];
    }
  }
  return m;
}

inline ConditionResidual influencer_budget_condition(const std::string& id, const MarketAllocation& omega,
                                                     const MarketConfig& cfg, double tol) {
  ResidualAccumulator acc(id, tol);
  acc.add(std::abs(omega.infl.total() - cfg.M_infl) / cfg.M_infl, "influencer");
  return acc.r;
}

inline ConditionResidual influencer_kkt_condition(const std::string& id, const MarketAllocation& omega,
                                                  const MarketConfig& cfg, const MatchTable& B, double tol) {
  ResidualAccumulator acc(id, tol);
  const std::size_t n = cfg.size();
  const auto gamma = influencer_weights(omega.consumers, cfg, B);
  std::vector<double> marginal(n);
  double best = 0.0;
  for (std::size_t z = 0; z < n; ++z) {
    marginal[z] = discount_deriv(omega.infl.mu[z], cfg.delay) * gamma[z];
    best = std::max(best, marginal[z]);
  }
  for (std::size_t z = 0; z < n; ++z) {
    if (omega.infl.mu[z] > 0.0) acc.add(violation(marginal[z], best), "influencer -> " + producer_name(z));
  }
  return acc.r;
}

inline ConditionResidual producer_condition(const MarketAllocation& omega, const MarketConfig& cfg,
                                            const MatchTable& B, GameMode mode, const TopicSearchParams& search,
                                            double tol) {
  ResidualAccumulator acc("a", tol);
  for (std::size_t z = 0; z < cfg.size(); ++z) {
    double current = 0.0;
    double best = 0.0;
    if (mode == GameMode::Imperfect) {
      const auto choice = producer_best_response_imperfect(z, omega.consumers, cfg, B, search, std::nullopt);
      if (choice.degenerate) continue;
      std::vector<double> gamma = influencer_weights(omega.consumers, cfg, B);
      std::vector<double> follow(cfg.size());
      for (std::size_t y = 0; y < cfg.size(); ++y) follow[y] = discount(omega.consumers[y].influencer, cfg.delay);
      current = discount(reoptimized_rate(z, omega.content.x[z], gamma, follow, cfg), cfg.delay);
      best = choice.score;
    } else {
      const auto coeff = producer_coefficients(z, omega.infl, omega.consumers, cfg);
      const auto choice = maximize_weighted_match(z, coeff, cfg, search, std::nullopt);
      if (choice.degenerate) continue;
      current = weighted_match(omega.content.x[z], z, coeff, cfg);
      best = choice.score;
    }
    acc.add(std::max(0.0, best - current) / std::max(best, std::numeric_limits<double>::min()),
            producer_name(z));
  }
  return acc.r;
}

}  // namespace detail

/// Evaluate every lettered KKT condition of the mode's equilibrium
/// characterisation as a nonnegative residual.
inline NashCertificate check_nash(const MarketAllocation& omega, const MarketConfig& cfg, GameMode mode,
                                  const CertificateTolerances& tol = {}, const TopicSearchParams& search = {}) {
  validate(cfg);
  validate(omega, cfg);
  using detail::ResidualAccumulator;
  using detail::violation;
  const std::size_t n = cfg.size();
  const MatchTable B(cfg, omega.content);

  NashCertificate cert;
  cert.mode = mode;
  cert.residuals.push_back(detail::producer_condition(omega, cfg, B, mode, search, tol.producer));

  std::vector<detail::ConsumerMarginals> marg;
  marg.reserve(n);
  for (std::size_t y = 0; y < n; ++y) marg.push_back(detail::consumer_marginals(y, omega, cfg, B));

  if (mode == GameMode::Proxy) {
    ResidualAccumulator b("b", tol.rate), c("c", tol.rate), d("d", tol.rate), e("e", tol.rate);
    for (std::size_t y = 0; y < n; ++y) {
      const auto& ca = omega.consumers[y];
      const auto name = detail::consumer_name(y);
      b.add(ca.direct_total(), name);
      c.add(std::abs(ca.outside + ca.influencer - cfg.M) / cfg.M, name);
      if (ca.outside > 0.0) d.add(violation(marg[y].outside, marg[y].influencer), name);
      if (ca.influencer > 0.0) e.add(violation(marg[y].influencer, marg[y].outside), name);
    }
    for (auto* acc : {&b, &c, &d, &e}) cert.residuals.push_back(acc->r);
  } else {
    ResidualAccumulator b("b", tol.rate), c("c", tol.rate), d("d", tol.rate), e("e", tol.rate);
    for (std::size_t y = 0; y < n; ++y) {
      const auto& ca = omega.consumers[y];
      const auto& m = marg[y];
      const auto name = detail::consumer_name(y);
      b.add(std::abs(ca.total() - cfg.M) / cfg.M, name);
      if (ca.outside > 0.0) {
        c.add(violation(m.outside, m.best_direct), name);
        c.add(violation(m.outside, m.influencer), name);
      }
      if (ca.influencer > 0.0) {
        d.add(violation(m.influencer, m.best_direct), name);
        d.add(violation(m.influencer, m.outside), name);
      }
      for (std::size_t z = 0; z < n; ++z) {
        if (z == y || !(ca.direct[z] > 0.0)) continue;
        const double other = z == m.best_direct_at ? m.second_direct : m.best_direct;
        const auto who = name + " -> " + detail::producer_name(z);
        e.add(violation(m.direct[z], m.outside), who);
        e.add(violation(m.direct[z], m.influencer), who);
        if (other >= 0.0) e.add(violation(m.direct[z], other), who);
      }
    }
    for (auto* acc : {&b, &c, &d, &e}) cert.residuals.push_back(acc->r);
  }
  cert.residuals.push_back(detail::influencer_budget_condition("f", omega, cfg, tol.rate));
  cert.residuals.push_back(detail::influencer_kkt_condition("g", omega, cfg, B, tol.rate));

  cert.holds = true;
  for (const auto& r : cert.residuals) {
    cert.max_residual = std::max(cert.max_residual, r.residual);
    cert.holds = cert.holds && r.holds();
  }
  return cert;
}

namespace detail {

inline double sup_change(const MarketAllocation& a, const MarketAllocation& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.infl.mu.size(); ++i) m = std::max(m, std::abs(a.infl.mu[i] - b.infl.mu[i]));
  for (std::size_t y = 0; y < a.consumers.size(); ++y) {
    const auto& ca = a.consumers[y];
    const auto& cb = b.consumers[y];
    m = std::max({m, std::abs(ca.outside - cb.outside), std::abs(ca.influencer - cb.influencer)});
    for (std::size_t z = 0; z < ca.direct.size(); ++z) m = std::max(m, std::abs(ca.direct[z] - cb.direct[z]));
  }
  for (std::size_t z = 0; z < a.content.x.size(); ++z) {
    for (int k = 0; k < a.content.x[z].dim; ++k) {
      m = std::max(m, std::abs(a.content.x[z][k] - b.content.x[z][k]));
    }
  }
  return m;
}

// Portable uniform double in [0, 1) from a 64-bit engine.
inline double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::vector<double> random_split(std::mt19937_64& rng, std::size_t k, double budget) {
  std::vector<double> v(k);
  double s = 0.0;
  for (auto& x : v) {
    x = -std::log1p(-unit_draw(rng));  // Exp(1): a flat Dirichlet after normalising
    s += x;
  }
  for (auto& x : v) x *= budget / s;
  return v;
}

}  // namespace detail

/// A random admissible allocation with both budgets spent.
inline MarketAllocation random_allocation(const MarketConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t n = cfg.size();
  MarketAllocation omega;
  omega.infl.mu = detail::random_split(rng, n, cfg.M_infl);
  omega.consumers.resize(n);
  for (std::size_t y = 0; y < n; ++y) {
    auto split = detail::random_split(rng, n + 1, cfg.M);
    auto& c = omega.consumers[y];
    c.outside = split[0];
    c.influencer = split[1];
    c.direct.assign(n, 0.0);
    std::size_t k = 2;
    for (std::size_t z = 0; z < n; ++z) {
      if (z != y) c.direct[z] = split[k++];
    }
  }
  omega.content.x.resize(n);
  for (auto& x : omega.content.x) {
    x = cfg.dim == 1 ? TopicPoint(detail::unit_draw(rng)) : TopicPoint(detail::unit_draw(rng), detail::unit_draw(rng));
  }
  return omega;
}

/// Best-response dynamics from a single start. Returns the final iterate for
/// the potential games and the smallest-step iterate for the imperfect game.
inline EquilibriumResult run_dynamics_from(const MarketConfig& cfg, GameMode mode, MarketAllocation omega,
                                           const DynamicsParams& params, const TopicSearchParams& search = {},
                                           const CertificateTolerances& tol = {}) {
  validate(cfg);
  validate(params);
  validate(search);
  validate(omega, cfg);
  const std::size_t n = cfg.size();
  if (mode == GameMode::Proxy) {
    for (auto& c : omega.consumers) std::fill(c.direct.begin(), c.direct.end(), 0.0);
  }

  MatchTable B(cfg, omega.content);
  EquilibriumResult res;
  res.mode = mode;
  double phi = detail::social_welfare(omega, cfg, B);
  res.potential_trace.push_back(phi);

  std::optional<MarketAllocation> best;
  double best_step = std::numeric_limits<double>::infinity();
  std::set<std::size_t> best_degenerate;
  int best_round = 0;

  for (int round = 1; round <= params.max_rounds; ++round) {
    const MarketAllocation prev = omega;
    std::set<std::size_t> degenerate;

    auto producer_step = [&](std::size_t z, const MarketAllocation& view, const MatchTable& table) {
      const std::optional<TopicPoint> current = view.content.x[z];
      if (mode == GameMode::Imperfect) {
        return detail::producer_best_response_imperfect(z, view.consumers, cfg, table, search, current);
      }
      return detail::maximize_weighted_match(z, detail::producer_coefficients(z, view.infl, view.consumers, cfg),
                                             cfg, search, current);
    };

    if (params.schedule == Schedule::RoundRobin) {
      omega.infl = detail::influencer_best_response(omega.consumers, cfg, B);
      for (std::size_t y = 0; y < n; ++y) {
        omega.consumers[y] = detail::consumer_best_response(y, omega.infl, cfg, B, mode);
      }
      for (std::size_t z = 0; z < n; ++z) {
        const auto choice = producer_step(z, omega, B);
        if (choice.degenerate) degenerate.insert(z);
        if (!(choice.x == omega.content.x[z])) {
          omega.content.x[z] = choice.x;
          B.set_producer(cfg, z, choice.x);
        }
      }
    } else {
      MarketAllocation next = omega;
      next.infl = detail::influencer_best_response(omega.consumers, cfg, B);
      for (std::size_t y = 0; y < n; ++y) {
        next.consumers[y] = detail::consumer_best_response(y, omega.infl, cfg, B, mode);
      }
      for (std::size_t z = 0; z < n; ++z) {
        const auto choice = producer_step(z, omega, B);
        if (choice.degenerate) degenerate.insert(z);
        next.content.x[z] = choice.x;
      }
      omega = std::move(next);
      B = MatchTable(cfg, omega.content);
    }

    const double phi_next = detail::social_welfare(omega, cfg, B);
    const double step = detail::sup_change(omega, prev);
    res.potential_trace.push_back(phi_next);
    res.rounds_used = round;

    if (mode == GameMode::Imperfect && step < best_step) {
      best = omega;
      best_step = step;
      best_degenerate = degenerate;
      best_round = round;
    }

    const bool potential_settled =
        mode == GameMode::Imperfect ||
        std::abs(phi_next - phi) <= params.eps_potential * std::max(1.0, std::abs(phi_next));
    phi = phi_next;
    if (step < params.eps_alloc && potential_settled) {
      res.converged = true;
      res.step_residual = step;
      best = omega;
      best_degenerate = degenerate;
      best_round = round;
      break;
    }
    if (mode != GameMode::Imperfect) {
      res.step_residual = step;
      best_degenerate = degenerate;
    }
  }

  if (mode == GameMode::Imperfect && !res.converged && best) {
    omega = *best;
    res.step_residual = best_step;
    res.rounds_used = best_round;
  }
  res.omega = std::move(omega);
  res.degenerate_producers = std::move(best_degenerate);
  res.welfare = social_welfare(res.omega, cfg);
  res.certificate = check_nash(res.omega, cfg, mode, tol, search);
  return res;
}

namespace detail {

// Selection among restarts: certified results first, then the highest welfare
// (the imperfect game, lacking a potential, falls back to the smallest step).
inline bool better_result(const EquilibriumResult& a, const EquilibriumResult& b) {
  if (a.certificate.holds != b.certificate.holds) return a.certificate.holds;
  if (!a.certificate.holds && a.mode == GameMode::Imperfect && a.step_residual != b.step_residual) {
    return a.step_residual < b.step_residual;
  }
  return a.welfare > b.welfare;
}

}  // namespace detail

inline std::uint64_t restart_seed(const MarketConfig& cfg, int restart) {
  return cfg.seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(restart);
}

/// Multi-start best-response dynamics: the uniform start (or `inits`, when
/// given) plus `params.restarts` seeded random starts. Returns the best result.
inline EquilibriumResult run_dynamics(const MarketConfig& cfg, GameMode mode, const DynamicsParams& params,
                                      const TopicSearchParams& search = {}, const CertificateTolerances& tol = {},
                                      std::vector<MarketAllocation> inits = {}) {
  validate(cfg);
  validate(params);
  if (inits.empty()) inits.push_back(uniform_allocation(cfg));
  for (int r = 1; r <= params.restarts; ++r) inits.push_back(random_allocation(cfg, restart_seed(cfg, r)));

  std::optional<EquilibriumResult> best;
  for (int i = 0; i < static_cast<int>(inits.size()); ++i) {
    auto res = run_dynamics_from(cfg, mode, std::move(inits[static_cast<std::size_t>(i)]), params, search, tol);
    res.restart = i;
    if (!best || detail::better_result(res, *best)) best = std::move(res);
  }
  return std::move(*best);
}

struct PriceOfInfluence {
  double phi_perfect = 0.0;
  double phi_imperfect = 0.0;
  double poi = 0.0;
  double relative_poi = 0.0;
  bool converged_perfect = false;
  bool converged_imperfect = false;
  bool certified_perfect = false;
  bool certified_imperfect = false;
  EquilibriumResult perfect;
  EquilibriumResult imperfect;
};

/// Welfare gap between the best perfect-information and the best
/// imperfect-information equilibrium found. Each game's search is also started
/// from the other game's best equilibrium.
inline PriceOfInfluence price_of_influence(const MarketConfig& cfg, const DynamicsParams& params,
                                           const TopicSearchParams& search = {},
                                           const CertificateTolerances& tol = {}) {
  auto perfect = run_dynamics(cfg, GameMode::Perfect, params, search, tol);
  std::vector<MarketAllocation> imperfect_inits{uniform_allocation(cfg), perfect.omega};
  auto imperfect = run_dynamics(cfg, GameMode::Imperfect, params, search, tol, std::move(imperfect_inits));
  if (imperfect.welfare > perfect.welfare) {
    DynamicsParams warm = params;
    warm.restarts = 0;
    auto again = run_dynamics_from(cfg, GameMode::Perfect, imperfect.omega, warm, search, tol);
    if (detail::better_result(again, perfect)) perfect = std::move(again);
  }

  PriceOfInfluence out;
  out.phi_perfect = perfect.welfare;
  out.phi_imperfect = imperfect.welfare;
  out.poi = out.phi_perfect - out.phi_imperfect;
  out.relative_poi = out.phi_perfect > 0.0 ? out.poi / out.phi_perfect : 0.0;
  out.converged_perfect = perfect.converged;
  out.converged_imperfect = imperfect.converged;
  out.certified_perfect = perfect.certificate.holds;
  out.certified_imperfect = imperfect.certificate.holds;
  out.perfect = std::move(perfect);
  out.imperfect = std::move(imperfect);
  return out;
}

inline double direct_rate_mass(const MarketAllocation& omega) {
  double s = 0.0;
  for (const auto& c : omega.consumers) s += c.direct_total();
  return s;
}

struct ProxyEquivalenceReport {
  bool perfect_is_proxy = false;
  bool imperfect_is_proxy = false;
  double direct_rate_mass = 0.0;            // at the perfect-information equilibrium
  double imperfect_direct_rate_mass = 0.0;
  double proxy_direct_rate_mass = 0.0;
  EquilibriumResult perfect;
  EquilibriumResult imperfect;
  EquilibriumResult proxy;
  NashCertificate perfect_as_proxy;
  NashCertificate imperfect_as_proxy;
};

/// Solve all three games and test the perfect and imperfect equilibria against
/// the proxy-game conditions.
inline ProxyEquivalenceReport proxy_equivalence_report(const MarketConfig& cfg, const DynamicsParams& params,
                                                       const TopicSearchParams& search = {},
                                                       const CertificateTolerances& tol = {}) {
  ProxyEquivalenceReport rep;
  rep.perfect = run_dynamics(cfg, GameMode::Perfect, params, search, tol);
  rep.imperfect = run_dynamics(cfg, GameMode::Imperfect, params, search, tol);
  rep.proxy = run_dynamics(cfg, GameMode::Proxy, params, search, tol);
  rep.direct_rate_mass = direct_rate_mass(rep.perfect.omega);
  rep.imperfect_direct_rate_mass = direct_rate_mass(rep.imperfect.omega);
  rep.proxy_direct_rate_mass = direct_rate_mass(rep.proxy.omega);
  rep.perfect_as_proxy = check_nash(rep.perfect.omega, cfg, GameMode::Proxy, tol, search);
  rep.imperfect_as_proxy = check_nash(rep.imperfect.omega, cfg, GameMode::Proxy, tol, search);
  rep.perfect_is_proxy = rep.perfect_as_proxy.holds;
  rep.imperfect_is_proxy = rep.imperfect_as_proxy.holds;
  return rep;
}

}  // namespace cme
