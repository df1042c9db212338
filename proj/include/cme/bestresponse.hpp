#pragma once

// Best responses of the influencer, the consumers and the producers for the
// perfect-information, imperfect-information and proxy games.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cme/allocator.hpp"
#include "cme/errors.hpp"
#include "cme/kernels.hpp"
#include "cme/market.hpp"

namespace cme {

enum class GameMode { Perfect, Imperfect, Proxy };

inline const char* to_string(GameMode m) {
  switch (m) {
    case GameMode::Perfect: return "perfect";
    case GameMode::Imperfect: return "imperfect";
    case GameMode::Proxy: return "proxy";
  }
  return "unknown";
}

inline GameMode parse_game_mode(std::string_view s) {
  if (s == "perfect") return GameMode::Perfect;
  if (s == "imperfect") return GameMode::Imperfect;
  if (s == "proxy") return GameMode::Proxy;
  throw Error(ErrorKind::InvalidInput, "unknown game mode '" + std::string(s) + "'");
}

struct TopicSearchParams {
  int grid_resolution = 256;  // points per axis
  int refine_iters = 40;      // golden-section steps (dim = 1 only)
};

inline void validate(const TopicSearchParams& s) {
  if (s.grid_resolution < 8) throw Error(ErrorKind::InvalidInput, "grid resolution must be at least 8");
  if (s.refine_iters < 0) throw Error(ErrorKind::InvalidInput, "refine_iters must be nonnegative");
}

inline double grid_cell(const TopicSearchParams& s) { return 1.0 / (s.grid_resolution - 1); }

struct TopicChoice {
  TopicPoint x;
  double score = 0.0;
  bool degenerate = false;  // objective identically zero on the grid
};

// A move away from the current topic must improve the score by more than this
// relative margin; smaller gains are floating-point noise near a flat maximum.
inline constexpr double kTopicMoveMargin = 1e-12;

// Maximise a nonnegative score over [0,1]^dim: exhaustive grid in
// lexicographic order (first maximiser wins ties), then golden-section
// refinement around the best grid point when dim = 1. If `current` is given it
// is kept unless the search finds a strictly better point.
template <typename Score>
TopicChoice search_topic(int dim, Score&& score, const TopicSearchParams& params,
                         const std::optional<TopicPoint>& current = std::nullopt) {
  validate(params);
  const int res = params.grid_resolution;
  const double h = grid_cell(params);
  auto grid_point = [&](int i, int j) {
    return dim == 1 ? TopicPoint(i * h) : TopicPoint(i * h, j * h);
  };

  TopicChoice best;
  best.x = grid_point(0, 0);
  best.score = -1.0;
  int best_i = 0;
  const int jmax = dim == 1 ? 1 : res;
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < jmax; ++j) {
      const TopicPoint p = grid_point(i, j);
      const double s = score(p);
      if (s > best.score) {
        best.score = s;
        best.x = p;
        best_i = i;
      }
    }
  }

  if (best.score <= 0.0) {
    best.degenerate = true;
    best.score = 0.0;
    if (current) best.x = *current;
    return best;
  }

  if (dim == 1 && params.refine_iters > 0) {
    constexpr double inv_phi = 0.6180339887498949;
    double lo = std::max(0.0, (best_i - 1) * h);
    double hi = std::min(1.0, (best_i + 1) * h);
    double a = hi - inv_phi * (hi - lo);
    double b = lo + inv_phi * (hi - lo);
    double fa = score(TopicPoint(a));
    double fb = score(TopicPoint(b));
    for (int it = 0; it < params.refine_iters; ++it) {
      if (fa >= fb) {
        hi = b;
        b = a;
        fb = fa;
        a = hi - inv_phi * (hi - lo);
        fa = score(TopicPoint(a));
      } else {
        lo = a;
        a = b;
        fa = fb;
        b = lo + inv_phi * (hi - lo);
        fb = score(TopicPoint(b));
      }
    }
    const double mid = 0.5 * (lo + hi);
    const double fm = score(TopicPoint(mid));
    if (fm > best.score) {
      best.score = fm;
      best.x = TopicPoint(mid);
    }
  }

  if (current) {
    const double s = score(*current);
    if (!(best.score > s + kTopicMoveMargin * std::abs(s))) {
      best.x = *current;
      best.score = s;
    }
  }
  return best;
}

namespace detail {

inline std::vector<double> influencer_weights(const std::vector<ConsumerAllocation>& consumers,
                                              const MarketConfig& cfg, const MatchTable& B) {
  const std::size_t n = cfg.size();
  std::vector<double> follow(n);
  for (std::size_t y = 0; y < n; ++y) follow[y] = discount(consumers[y].influencer, cfg.delay);
  std::vector<double> gamma(n, 0.0);
  for (std::size_t z = 0; z < n; ++z) {
    double s = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
      if (y != z) s += follow[y] * B(z, y);
    }
    gamma[z] = cfg.r_p * s;
  }
  return gamma;
}

inline bool nobody_follows_influencer(const std::vector<ConsumerAllocation>& consumers) {
  double s = 0.0;
  for (const auto& c : consumers) s += c.influencer;
  return s <= 0.0;
}

inline InfluencerAllocation influencer_best_response(const std::vector<ConsumerAllocation>& consumers,
                                                     const MarketConfig& cfg, const MatchTable& B) {
  const std::size_t n = cfg.size();
  InfluencerAllocation out;
  if (nobody_follows_influencer(consumers)) {
    // Unconstrained problem: fall back to the uniform split.
    out.mu.assign(n, cfg.M_infl / static_cast<double>(n));
    return out;
  }
  const WeightedChannels ch{influencer_weights(consumers, cfg, B), cfg.M_infl};
  out.mu = water_fill(ch, cfg.delay).rates;
  return out;
}

// Channel layout for a consumer: [outside, influencer, direct producers z != y].
inline WeightedChannels consumer_channels(std::size_t y, const InfluencerAllocation& infl,
                                          const MarketConfig& cfg, const MatchTable& B, GameMode mode) {
  const std::size_t n = cfg.size();
  WeightedChannels ch;
  ch.budget = cfg.M;
  ch.weights.reserve(n + 1);
  ch.weights.push_back(cfg.r_0 * cfg.B_0);
  double via = 0.0;
  for (std::size_t z = 0; z < n; ++z) {
    if (z != y) via += B(z, y) * discount(infl.mu[z], cfg.delay);
  }
  ch.weights.push_back(cfg.r_p * via);
  if (mode != GameMode::Proxy) {
    for (std::size_t z = 0; z < n; ++z) {
      if (z != y) ch.weights.push_back(cfg.r_p * B(z, y));
    }
  }
  return ch;
}

inline ConsumerAllocation consumer_best_response(std::size_t y, const InfluencerAllocation& infl,
                                                 const MarketConfig& cfg, const MatchTable& B,
                                                 GameMode mode) {
  const std::size_t n = cfg.size();
  const auto sol = water_fill(consumer_channels(y, infl, cfg, B, mode), cfg.delay);
  ConsumerAllocation c;
  c.outside = sol.rates[0];
  c.influencer = sol.rates[1];
  c.direct.assign(n, 0.0);
  if (mode != GameMode::Proxy) {
    std::size_t k = 2;
    for (std::size_t z = 0; z < n; ++z) {
      if (z != y) c.direct[z] = sol.rates[k++];
    }
  }
  return c;
}

// Per-follower coefficients c_y of the perfect-information producer objective
// U_p(x) = q(x|z) * sum_y c_y p(x|y).
inline std::vector<double> producer_coefficients(std::size_t z, const InfluencerAllocation& infl,
                                                 const std::vector<ConsumerAllocation>& consumers,
                                                 const MarketConfig& cfg) {
  const std::size_t n = cfg.size();
  const double shared = discount(infl.mu[z], cfg.delay);
  std::vector<double> c(n, 0.0);
  for (std::size_t y = 0; y < n; ++y) {
    if (y == z) continue;
    c[y] = cfg.r_p * (shared * discount(consumers[y].influencer, cfg.delay) +
                      discount(consumers[y].direct[z], cfg.delay));
  }
  return c;
}

// Coefficients of the influencer-route surrogate sum_y delta(mu(y_I|y)) B(z|y).
inline std::vector<double> surrogate_coefficients(std::size_t z, const std::vector<ConsumerAllocation>& consumers,
                                                  const MarketConfig& cfg) {
  const std::size_t n = cfg.size();
  std::vector<double> c(n, 0.0);
  for (std::size_t y = 0; y < n; ++y) {
    if (y != z) c[y] = discount(consumers[y].influencer, cfg.delay);
  }
  return c;
}

inline double weighted_match(const TopicPoint& x, std::size_t z, const std::vector<double>& coeff,
                             const MarketConfig& cfg) {
  double s = 0.0;
  for (std::size_t y = 0; y < coeff.size(); ++y) {
    if (coeff[y] != 0.0) s += coeff[y] * interest_prob(x, cfg.interests[y], cfg.kernel);
  }
  return s == 0.0 ? 0.0 : production_quality(x, cfg.interests[z], cfg.kernel) * s;
}

inline TopicChoice maximize_weighted_match(std::size_t z, const std::vector<double>& coeff, const MarketConfig& cfg,
                                           const TopicSearchParams& search,
                                           const std::optional<TopicPoint>& current) {
  bool any = false;
  for (double c : coeff) any = any || c > 0.0;
  if (!any) {
    TopicChoice t;
    t.degenerate = true;
    t.x = current ? *current : (cfg.dim == 1 ? TopicPoint(0.0) : TopicPoint(0.0, 0.0));
    return t;
  }
  return search_topic(cfg.dim, [&](const TopicPoint& x) { return weighted_match(x, z, coeff, cfg); }, search,
                      current);
}

// Influencer rate to producer z after re-solving the influencer problem with
// x(z) replaced by `x`. `gamma` holds the current weights of all producers.
inline double reoptimized_rate(std::size_t z, const TopicPoint& x, std::vector<double>& gamma,
                               const std::vector<double>& follow, const MarketConfig& cfg) {
  const std::size_t n = cfg.size();
  const double q = production_quality(x, cfg.interests[z], cfg.kernel);
  double s = 0.0;
  for (std::size_t y = 0; y < n; ++y) {
    if (y != z && follow[y] != 0.0) s += follow[y] * interest_prob(x, cfg.interests[y], cfg.kernel);
  }
  const double saved = gamma[z];
  gamma[z] = cfg.r_p * q * s;
  double rate = 0.0;
  bool any = false;
  for (double g : gamma) any = any || g > 0.0;
  if (any) rate = water_fill(WeightedChannels{gamma, cfg.M_infl}, cfg.delay).rates[z];
  gamma[z] = saved;
  return rate;
}

inline TopicChoice producer_best_response_imperfect(std::size_t z, const std::vector<ConsumerAllocation>& consumers,
                                                    const MarketConfig& cfg, const MatchTable& B,
                                                    const TopicSearchParams& search,
                                                    const std::optional<TopicPoint>& current) {
  if (nobody_follows_influencer(consumers)) {
    // Uniform influencer split regardless of x(z): nothing to optimise.
    TopicChoice t;
    t.degenerate = true;
    t.score = discount(cfg.M_infl / static_cast<double>(cfg.size()), cfg.delay);
    t.x = current ? *current : (cfg.dim == 1 ? TopicPoint(0.0) : TopicPoint(0.0, 0.0));
    return t;
  }
  std::vector<double> gamma = influencer_weights(consumers, cfg, B);
  std::vector<double> follow(cfg.size());
  for (std::size_t y = 0; y < cfg.size(); ++y) follow[y] = discount(consumers[y].influencer, cfg.delay);
  auto score = [&](const TopicPoint& x) {
    return discount(reoptimized_rate(z, x, gamma, follow, cfg), cfg.delay);
  };
  return search_topic(cfg.dim, score, search, current);
}

}  // namespace detail

/// Influencer allocation maximising the support it receives; uniform M_infl/N
/// when no consumer follows the influencer.
inline InfluencerAllocation influencer_best_response(const std::vector<ConsumerAllocation>& consumers,
                                                     const ContentAssignment& content, const MarketConfig& cfg) {
  return detail::influencer_best_response(consumers, cfg, MatchTable(cfg, content));
}

/// Optimal split of consumer y's budget across outside source, influencer and
/// (except in the proxy game) direct follows.
inline ConsumerAllocation consumer_best_response(std::size_t y, const InfluencerAllocation& infl,
                                                 const ContentAssignment& content, const MarketConfig& cfg,
                                                 GameMode mode) {
  detail::require_index(y, cfg);
  return detail::consumer_best_response(y, infl, cfg, MatchTable(cfg, content), mode);
}

inline TopicChoice producer_best_response_perfect(std::size_t z, const InfluencerAllocation& infl,
                                                  const std::vector<ConsumerAllocation>& consumers,
                                                  const MarketConfig& cfg, const TopicSearchParams& search,
                                                  const std::optional<TopicPoint>& current = std::nullopt) {
  detail::require_index(z, cfg);
  return detail::maximize_weighted_match(z, detail::producer_coefficients(z, infl, consumers, cfg), cfg, search,
                                         current);
}

/// Topic maximising the rate the influencer would re-allocate to z.
inline TopicChoice producer_best_response_imperfect(std::size_t z, const std::vector<ConsumerAllocation>& consumers,
                                                    const ContentAssignment& content, const MarketConfig& cfg,
                                                    const TopicSearchParams& search,
                                                    const std::optional<TopicPoint>& current = std::nullopt) {
  detail::require_index(z, cfg);
  return detail::producer_best_response_imperfect(z, consumers, cfg, MatchTable(cfg, content), search, current);
}

/// Topic maximising sum_y delta(mu(y_I|y)) B(z|y), the influencer-route support
/// up to the factor delta(mu_infl(z)).
inline TopicChoice producer_best_response_surrogate(std::size_t z, const std::vector<ConsumerAllocation>& consumers,
                                                    const MarketConfig& cfg, const TopicSearchParams& search,
                                                    const std::optional<TopicPoint>& current = std::nullopt) {
  detail::require_index(z, cfg);
  return detail::maximize_weighted_match(z, detail::surrogate_coefficients(z, consumers, cfg), cfg, search,
                                         current);
}

}  // namespace cme
