#pragma once

// Budget-constrained concave allocation
//
//   maximize  sum_i w_i * delta(mu_i)   s.t.  sum_i mu_i <= budget,  mu >= 0.
//
// Active channels share a Lagrange multiplier nu with w_i * delta'(mu_i) = nu,
// i.e. mu_i = G(nu / w_i); channels with w_i * delta'(0) <= nu stay at zero.
// `water_fill` finds nu by bisection; `gradient_oracle` is an independent
// projected-gradient solver used to cross-check it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "cme/errors.hpp"
#include "cme/kernels.hpp"

namespace cme {

struct WeightedChannels {
  std::vector<double> weights;
  double budget = 1.0;
};

struct AllocationSolution {
  std::vector<double> rates;
  double multiplier = 0.0;
  double objective = 0.0;
};

inline void validate(const WeightedChannels& ch) {
  if (ch.weights.empty()) throw Error(ErrorKind::InvalidInput, "no channels");
  if (!(ch.budget > 0.0) || !std::isfinite(ch.budget)) {
    throw Error(ErrorKind::InvalidInput, "budget must be positive");
  }
  for (double w : ch.weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorKind::InvalidInput, "channel weights must be nonnegative and finite");
    }
  }
}

inline double allocation_objective(std::span<const double> weights, std::span<const double> rates,
                                   const DelayParams& d) {
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * discount(rates[i], d);
  return s;
}

namespace detail {

// Rates implied by log-multiplier t = ln(nu): mu_i = max(0, (ln(w_i beta) - t) / beta).
// The log parametrisation keeps huge budgets from underflowing nu.
inline double implied_total(std::span<const double> log_caps, double t, double beta) {
  double s = 0.0;
  for (double lc : log_caps) {
    if (lc > t) s += (lc - t) / beta;
  }
  return s;
}

}  // namespace detail

inline AllocationSolution water_fill(const WeightedChannels& ch, const DelayParams& d) {
  validate(ch);
  validate(d);
  const double beta = d.beta;
  const double budget = ch.budget;
  const std::size_t n = ch.weights.size();

  // ln(w_i * delta'(0)); -inf for zero weights so they never activate.
  std::vector<double> log_caps(n);
  double t_hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    log_caps[i] = ch.weights[i] > 0.0 ? std::log(ch.weights[i] * beta)
                                      : -std::numeric_limits<double>::infinity();
    t_hi = std::max(t_hi, log_caps[i]);
  }
  if (!std::isfinite(t_hi)) {
    throw Error(ErrorKind::DegenerateWeights, "all channel weights are zero");
  }

  // At t_hi every rate is zero. Widen the lower end geometrically until the
  // implied total exceeds the budget.
  double width = 1.0;
  double t_lo = t_hi - width;
  for (int i = 0; i < 200 && detail::implied_total(log_caps, t_lo, beta) < budget; ++i) {
    width *= 2.0;
    t_lo = t_hi - width;
  }

  const double target = 1e-12 * budget;
  double t = 0.5 * (t_lo + t_hi);
  for (int it = 0; it < 200; ++it) {
    t = 0.5 * (t_lo + t_hi);
    const double excess = detail::implied_total(log_caps, t, beta) - budget;
    if (std::abs(excess) < target) break;
    if (excess > 0.0) {
      t_lo = t;
    } else {
      t_hi = t;
    }
  }

  // The total is linear in t on a fixed active set; solve it exactly there
  // and keep the result if the active set is unchanged.
  {
    double sum_caps = 0.0;
    std::size_t active = 0;
    for (double lc : log_caps) {
      if (lc > t) {
        sum_caps += lc;
        ++active;
      }
    }
    if (active > 0) {
      const double t_exact = (sum_caps - beta * budget) / static_cast<double>(active);
      bool same = true;
      for (double lc : log_caps) {
        if ((lc > t) != (lc > t_exact)) {
          same = false;
          break;
        }
      }
      if (same) t = t_exact;
    }
  }

  AllocationSolution sol;
  sol.rates.assign(n, 0.0);
  std::size_t active = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (log_caps[i] > t) {
      sol.rates[i] = (log_caps[i] - t) / beta;
      ++active;
    }
  }
  // log_caps[i] - t cancels badly when the budget is tiny next to the caps.
  // A common shift of the active rates is a shift of t, so it restores the
  // budget without touching stationarity.
  for (int pass = 0; pass < 2 && active > 0; ++pass) {
    double total = 0.0;
    for (double r : sol.rates) total += r;
    const double shift = (budget - total) / static_cast<double>(active);
    if (shift == 0.0) break;
    for (auto& r : sol.rates) {
      if (r > 0.0) r = std::max(0.0, r + shift);
    }
    t -= beta * shift;
  }
  sol.multiplier = std::exp(t);
  sol.objective = allocation_objective(ch.weights, sol.rates, d);
  return sol;
}

/// Euclidean projection of v onto {u >= 0, sum u = budget}.
inline std::vector<double> project_to_simplex(std::span<const double> v, double budget) {
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumsum += sorted[j];
    const double candidate = (cumsum - budget) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) theta = candidate;
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(0.0, v[i] - theta);
  return out;
}

/// Projected gradient ascent over the budget face with steps step0/L shrinking
/// to half their initial size over `iters` iterations (L = beta^2 max w).
inline AllocationSolution gradient_oracle(const WeightedChannels& ch, const DelayParams& d,
                                          std::size_t iters = 100000, double step0 = 1.0) {
  validate(ch);
  validate(d);
  const std::size_t n = ch.weights.size();
  const double wmax = *std::max_element(ch.weights.begin(), ch.weights.end());
  if (wmax <= 0.0) throw Error(ErrorKind::DegenerateWeights, "all channel weights are zero");
  const double lipschitz = d.beta * d.beta * wmax;

  std::vector<double> mu(n, ch.budget / static_cast<double>(n));
  std::vector<double> trial(n);
  for (std::size_t k = 0; k < iters; ++k) {
    const double step = step0 / (lipschitz * (1.0 + static_cast<double>(k) / static_cast<double>(iters)));
    for (std::size_t i = 0; i < n; ++i) {
      trial[i] = mu[i] + step * ch.weights[i] * d.beta * std::exp(-d.beta * mu[i]);
    }
    mu = project_to_simplex(trial, ch.budget);
  }

  AllocationSolution sol;
  sol.rates = std::move(mu);
  for (std::size_t i = 0; i < n; ++i) {
    if (sol.rates[i] > 0.0) {
      sol.multiplier = std::max(sol.multiplier, ch.weights[i] * discount_deriv(sol.rates[i], d));
    }
  }
  sol.objective = allocation_objective(ch.weights, sol.rates, d);
  return sol;
}

struct AllocationKkt {
  double primal = 0.0;         // |sum rates - budget| / budget
  double stationarity = 0.0;   // active: |w delta'(mu) - nu| relative
  double slackness = 0.0;      // inactive: max(0, w delta'(0) - nu) relative
  double max() const { return std::max({primal, stationarity, slackness}); }
};

inline AllocationKkt allocation_kkt(const WeightedChannels& ch, const AllocationSolution& sol,
                                    const DelayParams& d) {
  AllocationKkt r;
  const double total = std::accumulate(sol.rates.begin(), sol.rates.end(), 0.0);
  r.primal = std::abs(total - ch.budget) / ch.budget;
  const double nu = sol.multiplier;
  for (std::size_t i = 0; i < ch.weights.size(); ++i) {
    if (sol.rates[i] < 0.0) r.primal = std::max(r.primal, -sol.rates[i] / ch.budget);
    const double marginal = ch.weights[i] * d.beta * std::exp(-d.beta * std::max(0.0, sol.rates[i]));
    const double scale = std::max({marginal, nu, std::numeric_limits<double>::min()});
    if (sol.rates[i] > 0.0) {
      r.stationarity = std::max(r.stationarity, std::abs(marginal - nu) / scale);
    } else {
      r.slackness = std::max(r.slackness, std::max(0.0, marginal - nu) / scale);
    }
  }
  return r;
}

}  // namespace cme
