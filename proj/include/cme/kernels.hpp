#pragma once

// Topic space, interest/quality kernels and the delay-discount function.
//
// The topic space is the unit cube [0,1]^dim with dim in {1, 2} and the
// Euclidean metric. Kernels are exponential in distance and the discount is
// 1 - exp(-beta * mu), which gives a closed-form inverse of its derivative.

#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include "cme/errors.hpp"

namespace cme {

inline constexpr int kMaxDim = 2;

// A point of the topic space. Coordinates beyond `dim` are kept at zero.
struct TopicPoint {
  std::array<double, kMaxDim> coords{0.0, 0.0};
  int dim = 1;

  TopicPoint() = default;
  explicit TopicPoint(double x) : coords{x, 0.0}, dim(1) {}
  TopicPoint(double x, double y) : coords{x, y}, dim(2) {}

  double operator[](std::size_t i) const { return coords[i]; }
  double& operator[](std::size_t i) { return coords[i]; }

  bool operator==(const TopicPoint& o) const {
    return dim == o.dim && coords == o.coords;
  }
};

inline bool is_valid(const TopicPoint& p) {
  if (p.dim < 1 || p.dim > kMaxDim) return false;
  for (int i = 0; i < p.dim; ++i) {
    if (!(p.coords[i] >= 0.0 && p.coords[i] <= 1.0)) return false;
  }
  return true;
}

inline void require_valid(const TopicPoint& p, int dim) {
  if (p.dim != dim) {
    throw Error(ErrorKind::InvalidInput,
                "topic point has dimension " + std::to_string(p.dim) +
                    ", expected " + std::to_string(dim));
  }
  if (!is_valid(p)) {
    throw Error(ErrorKind::InvalidInput, "topic point outside [0,1]^dim");
  }
}

inline std::string to_string(const TopicPoint& p) {
  std::string s = "(" + std::to_string(p.coords[0]);
  if (p.dim == 2) s += ", " + std::to_string(p.coords[1]);
  return s + ")";
}

struct KernelParams {
  double a_f = 2.0;  // interest decay
  double a_g = 2.0;  // production-quality decay
};

struct DelayParams {
  double beta = 1.0;
};

inline void validate(const KernelParams& k) {
  if (!(k.a_f > 0.0) || !(k.a_g > 0.0) || !std::isfinite(k.a_f) || !std::isfinite(k.a_g)) {
    throw Error(ErrorKind::InvalidInput, "kernel decay rates must be positive and finite");
  }
}

inline void validate(const DelayParams& d) {
  if (!(d.beta > 0.0) || !std::isfinite(d.beta)) {
    throw Error(ErrorKind::InvalidInput, "delay steepness beta must be positive and finite");
  }
}

inline double distance(const TopicPoint& x, const TopicPoint& y) {
  if (x.dim != y.dim) {
    throw Error(ErrorKind::InvalidInput, "distance between points of different dimension");
  }
  double s = 0.0;
  for (int i = 0; i < x.dim; ++i) {
    const double d = x.coords[i] - y.coords[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Diameter of [0,1]^dim.
inline double diameter(int dim) { return std::sqrt(static_cast<double>(dim)); }

/// p(x|y): probability that content on topic x interests member y.
inline double interest_prob(const TopicPoint& x, const TopicPoint& y, const KernelParams& k) {
  return std::exp(-k.a_f * distance(x, y));
}

/// q(x|z): probability that producer z creates good content on topic x.
inline double production_quality(const TopicPoint& x, const TopicPoint& z, const KernelParams& k) {
  return std::exp(-k.a_g * distance(x, z));
}

/// B(z|y) = q(x_z|z) p(x_z|y) for producer z creating on topic x_z.
inline double match_prob(const TopicPoint& x_z, const TopicPoint& z, const TopicPoint& y,
                         const KernelParams& k) {
  return production_quality(x_z, z, k) * interest_prob(x_z, y, k);
}

// Lower bounds p_min, q_min reached at the diameter of the space.
inline double interest_prob_min(int dim, const KernelParams& k) {
  return std::exp(-k.a_f * diameter(dim));
}
inline double production_quality_min(int dim, const KernelParams& k) {
  return std::exp(-k.a_g * diameter(dim));
}

inline double discount(double mu, const DelayParams& d) {
  if (!(mu >= 0.0)) throw Error(ErrorKind::InvalidInput, "negative following rate");
  return -std::expm1(-d.beta * mu);
}

inline double discount_deriv(double mu, const DelayParams& d) {
  if (!(mu >= 0.0)) throw Error(ErrorKind::InvalidInput, "negative following rate");
  return d.beta * std::exp(-d.beta * mu);
}

/// G(b): the rate at which the discount derivative equals b. Defined on (0, beta].
inline double deriv_inverse(double b, const DelayParams& d) {
  if (!(b > 0.0) || b > d.beta) {
    throw Error(ErrorKind::OutOfDomain, "deriv_inverse argument must lie in (0, beta]");
  }
  return std::log(d.beta / b) / d.beta;
}

}  // namespace cme
