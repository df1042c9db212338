#pragma once

// Content-market instance, allocations and the utility functionals.
//
// Members are indexed 0..N-1; member y's main interest is `interests[y]`.
// Every member is both a consumer and a producer. All sums over partners
// exclude the member itself.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cme/errors.hpp"
#include "cme/kernels.hpp"

namespace cme {

inline constexpr double kBudgetSlack = 1e-9;

struct MarketConfig {
  int dim = 1;
  std::vector<TopicPoint> interests;
  double M = 1.0;       // consumer rate budget
  double M_infl = 1.0;  // influencer rate budget
  double r_p = 1.0;     // content creation rate (uniform over producers)
  double r_0 = 1.0;     // outside-source content rate
  double B_0 = 0.5;     // outside-content interest probability
  KernelParams kernel;
  DelayParams delay;
  std::uint64_t seed = 0;

  std::size_t size() const { return interests.size(); }
};

inline void validate(const MarketConfig& cfg) {
  if (cfg.dim != 1 && cfg.dim != 2) {
    throw Error(ErrorKind::InvalidInput, "dim must be 1 or 2");
  }
  if (cfg.interests.size() < 2) {
    throw Error(ErrorKind::InvalidInput, "community needs at least 2 members");
  }
  for (const auto& p : cfg.interests) require_valid(p, cfg.dim);
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(cfg.M)) throw Error(ErrorKind::InvalidInput, "M must be positive");
  if (!positive(cfg.M_infl)) throw Error(ErrorKind::InvalidInput, "M_infl must be positive");
  if (!positive(cfg.r_p)) throw Error(ErrorKind::InvalidInput, "r_p must be positive");
  if (!positive(cfg.r_0)) throw Error(ErrorKind::InvalidInput, "r_0 must be positive");
  if (!(cfg.B_0 > 0.0 && cfg.B_0 <= 1.0)) {
    throw Error(ErrorKind::InvalidInput, "B_0 must lie in (0, 1]");
  }
  validate(cfg.kernel);
  validate(cfg.delay);
}

// Rates of one consumer y. `direct` is dense over all N members; the entry at
// index y is the (absent) self-follow and must stay zero.
struct ConsumerAllocation {
  double outside = 0.0;      // lambda(y)
  double influencer = 0.0;   // mu(y_I | y)
  std::vector<double> direct;  // mu(z | y)

  double total() const {
    double s = outside + influencer;
    for (double v : direct) s += v;
    return s;
  }
  double direct_total() const {
    double s = 0.0;
    for (double v : direct) s += v;
    return s;
  }
};

struct InfluencerAllocation {
  std::vector<double> mu;  // mu_infl(z)

  double total() const {
    double s = 0.0;
    for (double v : mu) s += v;
    return s;
  }
};

struct ContentAssignment {
  std::vector<TopicPoint> x;  // x(z)
};

struct MarketAllocation {
  InfluencerAllocation infl;
  std::vector<ConsumerAllocation> consumers;
  ContentAssignment content;

  std::size_t size() const { return consumers.size(); }
};

inline void validate(const MarketAllocation& omega, const MarketConfig& cfg) {
  const std::size_t n = cfg.size();
  if (omega.infl.mu.size() != n || omega.consumers.size() != n || omega.content.x.size() != n) {
    throw Error(ErrorKind::InvalidInput, "allocation size does not match community size");
  }
  for (double v : omega.infl.mu) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::InvalidInput, "negative influencer rate");
  }
  if (omega.infl.total() > cfg.M_infl + kBudgetSlack) {
    throw Error(ErrorKind::InvalidInput, "influencer budget exceeded");
  }
  for (std::size_t y = 0; y < n; ++y) {
    const auto& c = omega.consumers[y];
    if (c.direct.size() != n) {
      throw Error(ErrorKind::InvalidInput, "consumer " + std::to_string(y) + ": direct rates must have N entries");
    }
    if (c.direct[y] != 0.0) {
      throw Error(ErrorKind::InvalidInput, "consumer " + std::to_string(y) + " follows itself");
    }
    auto bad = [](double v) { return !(v >= 0.0) || !std::isfinite(v); };
    if (bad(c.outside) || bad(c.influencer)) {
      throw Error(ErrorKind::InvalidInput, "consumer " + std::to_string(y) + ": negative rate");
    }
    for (double v : c.direct) {
      if (bad(v)) throw Error(ErrorKind::InvalidInput, "consumer " + std::to_string(y) + ": negative rate");
    }
    if (c.total() > cfg.M + kBudgetSlack) {
      throw Error(ErrorKind::InvalidInput, "consumer " + std::to_string(y) + " exceeds budget");
    }
  }
  for (const auto& x : omega.content.x) require_valid(x, cfg.dim);
}

/// Uniform rates over every channel and each producer on its own interest.
inline MarketAllocation uniform_allocation(const MarketConfig& cfg) {
  const std::size_t n = cfg.size();
  MarketAllocation omega;
  omega.infl.mu.assign(n, cfg.M_infl / static_cast<double>(n));
  // outside + influencer + (n - 1) producers
  const double share = cfg.M / static_cast<double>(n + 1);
  omega.consumers.resize(n);
  for (std::size_t y = 0; y < n; ++y) {
    auto& c = omega.consumers[y];
    c.outside = share;
    c.influencer = share;
    c.direct.assign(n, share);
    c.direct[y] = 0.0;
  }
  omega.content.x = cfg.interests;
  return omega;
}

// Dense table of B(z|y) for a fixed content assignment. Row z is producer z.
class MatchTable {
 public:
  MatchTable(const MarketConfig& cfg, const ContentAssignment& content)
      : n_(cfg.size()), values_(n_ * n_, 0.0) {
    for (std::size_t z = 0; z < n_; ++z) set_producer(cfg, z, content.x[z]);
  }

  double operator()(std::size_t z, std::size_t y) const { return values_[z * n_ + y]; }

  void set_producer(const MarketConfig& cfg, std::size_t z, const TopicPoint& x) {
    const double q = production_quality(x, cfg.interests[z], cfg.kernel);
    for (std::size_t y = 0; y < n_; ++y) {
      values_[z * n_ + y] = y == z ? 0.0 : q * interest_prob(x, cfg.interests[y], cfg.kernel);
    }
  }

  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  std::vector<double> values_;
};

namespace detail {

inline void require_index(std::size_t i, const MarketConfig& cfg) {
  if (i >= cfg.size()) {
    throw Error(ErrorKind::InvalidInput, "member index " + std::to_string(i) + " out of range");
  }
}

inline double consumer_utility(std::size_t y, const MarketAllocation& omega, const MarketConfig& cfg,
                               const MatchTable& B) {
  const auto& d = cfg.delay;
  const auto& c = omega.consumers[y];
  const double via_infl = discount(c.influencer, d);
  double infl_sum = 0.0;
  double direct_sum = 0.0;
  for (std::size_t z = 0; z < cfg.size(); ++z) {
    if (z == y) continue;
    infl_sum += B(z, y) * discount(omega.infl.mu[z], d);
    direct_sum += B(z, y) * discount(c.direct[z], d);
  }
  return cfg.r_p * infl_sum * via_infl + cfg.r_p * direct_sum + cfg.r_0 * cfg.B_0 * discount(c.outside, d);
}

inline double producer_support_via_influencer(std::size_t z, const MarketAllocation& omega,
                                              const MarketConfig& cfg, const MatchTable& B) {
  const auto& d = cfg.delay;
  double s = 0.0;
  for (std::size_t y = 0; y < cfg.size(); ++y) {
    if (y == z) continue;
    s += B(z, y) * discount(omega.consumers[y].influencer, d);
  }
  return cfg.r_p * discount(omega.infl.mu[z], d) * s;
}

inline double producer_support_direct(std::size_t z, const MarketAllocation& omega,
                                      const MarketConfig& cfg, const MatchTable& B) {
  double s = 0.0;
  for (std::size_t y = 0; y < cfg.size(); ++y) {
    if (y == z) continue;
    s += B(z, y) * discount(omega.consumers[y].direct[z], cfg.delay);
  }
  return cfg.r_p * s;
}

inline double social_welfare(const MarketAllocation& omega, const MarketConfig& cfg, const MatchTable& B) {
  double s = 0.0;
  for (std::size_t y = 0; y < cfg.size(); ++y) s += consumer_utility(y, omega, cfg, B);
  return s;
}

}  // namespace detail

/// Total consumption utility of consumer y: content via the influencer, via
/// direct follows, and from the outside source.
inline double consumer_utility(std::size_t y, const MarketAllocation& omega, const MarketConfig& cfg) {
  detail::require_index(y, cfg);
  return detail::consumer_utility(y, omega, cfg, MatchTable(cfg, omega.content));
}

/// The influencer's objective: social support received from its followers.
inline double influencer_utility(const MarketAllocation& omega, const MarketConfig& cfg) {
  const MatchTable B(cfg, omega.content);
  double s = 0.0;
  for (std::size_t z = 0; z < cfg.size(); ++z) s += detail::producer_support_via_influencer(z, omega, cfg, B);
  return s;
}

/// Social support received by producer z (via the influencer and directly).
inline double producer_support(std::size_t z, const MarketAllocation& omega, const MarketConfig& cfg) {
  detail::require_index(z, cfg);
  const MatchTable B(cfg, omega.content);
  return detail::producer_support_via_influencer(z, omega, cfg, B) +
         detail::producer_support_direct(z, omega, cfg, B);
}

inline double producer_support_via_influencer(std::size_t z, const MarketAllocation& omega,
                                              const MarketConfig& cfg) {
  detail::require_index(z, cfg);
  return detail::producer_support_via_influencer(z, omega, cfg, MatchTable(cfg, omega.content));
}

/// Sum of consumption utilities; also the potential of the perfect-information game.
inline double social_welfare(const MarketAllocation& omega, const MarketConfig& cfg) {
  return detail::social_welfare(omega, cfg, MatchTable(cfg, omega.content));
}

}  // namespace cme
