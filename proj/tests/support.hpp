#pragma once

// Shared fixtures for the test suites: random instances and deviations.

#include <random>
#include <vector>

#include "cme/equilibrium.hpp"
#include "cme/market.hpp"

namespace cme::testing {

inline TopicPoint random_point(std::mt19937_64& rng, int dim) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return dim == 1 ? TopicPoint(u(rng)) : TopicPoint(u(rng), u(rng));
}

inline MarketConfig random_config(std::mt19937_64& rng, std::size_t n, int dim) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MarketConfig cfg;
  cfg.dim = dim;
  for (std::size_t i = 0; i < n; ++i) cfg.interests.push_back(random_point(rng, dim));
  cfg.M = 0.5 + 1.5 * u(rng);
  cfg.M_infl = (0.5 + 1.5 * u(rng)) * static_cast<double>(n) / 4.0;
  cfg.r_p = 0.5 + u(rng);
  cfg.r_0 = 0.5 + u(rng);
  cfg.B_0 = 0.2 + 0.8 * u(rng);
  cfg.kernel = {1.0 + 3.0 * u(rng), 1.0 + 3.0 * u(rng)};
  cfg.delay = {0.5 + 1.5 * u(rng)};
  cfg.seed = rng();
  return cfg;
}

// Random feasible split of `budget` over k channels, some of them zero.
inline std::vector<double> random_rates(std::mt19937_64& rng, std::size_t k, double budget) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(k);
  double s = 0.0;
  for (auto& x : v) {
    x = u(rng) < 0.2 ? 0.0 : u(rng);
    s += x;
  }
  if (s == 0.0) {
    v[0] = 1.0;
    s = 1.0;
  }
  const double scale = budget * (0.5 + 0.5 * u(rng)) / s;  // budget need not be spent
  for (auto& x : v) x *= scale;
  return v;
}

inline ConsumerAllocation random_consumer(std::mt19937_64& rng, std::size_t y, const MarketConfig& cfg) {
  const std::size_t n = cfg.size();
  auto r = random_rates(rng, n + 1, cfg.M);
  ConsumerAllocation c;
  c.outside = r[0];
  c.influencer = r[1];
  c.direct.assign(n, 0.0);
  for (std::size_t z = 0, k = 2; z < n; ++z) {
    if (z != y) c.direct[z] = r[k++];
  }
  return c;
}

inline MarketAllocation random_omega(std::mt19937_64& rng, const MarketConfig& cfg) {
  MarketAllocation omega;
  omega.infl.mu = random_rates(rng, cfg.size(), cfg.M_infl);
  for (std::size_t y = 0; y < cfg.size(); ++y) omega.consumers.push_back(random_consumer(rng, y, cfg));
  for (std::size_t z = 0; z < cfg.size(); ++z) omega.content.x.push_back(random_point(rng, cfg.dim));
  return omega;
}

// Independent transcription of the consumer utility, term by term.
inline double brute_consumer_utility(std::size_t y, const MarketAllocation& omega, const MarketConfig& cfg) {
  auto d = [&](double mu) { return 1.0 - std::exp(-cfg.delay.beta * mu); };
  double u = cfg.r_0 * cfg.B_0 * d(omega.consumers[y].outside);
  for (std::size_t z = 0; z < cfg.size(); ++z) {
    if (z == y) continue;
    const double b = std::exp(-cfg.kernel.a_g * distance(omega.content.x[z], cfg.interests[z])) *
                     std::exp(-cfg.kernel.a_f * distance(omega.content.x[z], cfg.interests[y]));
    u += cfg.r_p * b * d(omega.infl.mu[z]) * d(omega.consumers[y].influencer);
    u += cfg.r_p * b * d(omega.consumers[y].direct[z]);
  }
  return u;
}

}  // namespace cme::testing
