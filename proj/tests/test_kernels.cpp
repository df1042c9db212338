#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cme/kernels.hpp"

using namespace cme;

namespace {

constexpr double kE1 = 0.36787944117144233;  // exp(-1)

double grid_min(int dim, double a, bool interest) {
  // Scan pairs of grid points; for dim 2 only the corners matter for the
  // minimum, but we scan the whole 11^2 x 11^2 grid.
  KernelParams k{a, a};
  double m = 1.0;
  const int n = dim == 1 ? 201 : 11;
  auto pt = [&](int i, int j) {
    return dim == 1 ? TopicPoint(i / double(n - 1)) : TopicPoint(i / double(n - 1), j / double(n - 1));
  };
  const int jn = dim == 1 ? 1 : n;
  for (int i1 = 0; i1 < n; ++i1)
    for (int j1 = 0; j1 < jn; ++j1)
      for (int i2 = 0; i2 < n; ++i2)
        for (int j2 = 0; j2 < jn; ++j2) {
          const auto x = pt(i1, j1), y = pt(i2, j2);
          m = std::min(m, interest ? interest_prob(x, y, k) : production_quality(x, y, k));
        }
  return m;
}

}  // namespace

TEST(Distance, EuclideanInBothDimensions) {
  EXPECT_DOUBLE_EQ(distance(TopicPoint(0.2), TopicPoint(0.7)), 0.5);
  EXPECT_DOUBLE_EQ(distance(TopicPoint(0.0, 0.0), TopicPoint(0.3, 0.4)), 0.5);
  EXPECT_DOUBLE_EQ(distance(TopicPoint(0.0, 0.0), TopicPoint(1.0, 1.0)), diameter(2));
}

TEST(Distance, DimensionMismatchIsAnError) {
  try {
    distance(TopicPoint(0.1), TopicPoint(0.1, 0.2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
  }
}

TEST(TopicPoint, ValidityChecks) {
  EXPECT_TRUE(is_valid(TopicPoint(0.0)));
  EXPECT_TRUE(is_valid(TopicPoint(1.0, 0.5)));
  EXPECT_FALSE(is_valid(TopicPoint(1.5)));
  EXPECT_FALSE(is_valid(TopicPoint(0.5, -0.1)));
  EXPECT_FALSE(is_valid(TopicPoint(std::nan(""))));
  EXPECT_THROW(require_valid(TopicPoint(0.5), 2), Error);
}

TEST(InterestProb, ZeroDistanceIsOne) {
  KernelParams k;
  for (double y : {0.0, 0.3, 1.0}) EXPECT_DOUBLE_EQ(interest_prob(TopicPoint(y), TopicPoint(y), k), 1.0);
}

TEST(InterestProb, ClosedFormAtUnitDistance) {
  EXPECT_NEAR(interest_prob(TopicPoint(0.0), TopicPoint(1.0), {1.0, 1.0}), kE1, 1e-15);
}

TEST(InterestProb, LowerBoundMatchesGridScan) {
  const KernelParams k{1.0, 1.0};
  EXPECT_NEAR(interest_prob_min(1, k), kE1, 1e-15);
  EXPECT_GE(grid_min(1, 1.0, true), interest_prob_min(1, k) - 1e-12);
  EXPECT_NEAR(grid_min(1, 1.0, true), interest_prob_min(1, k), 1e-12);
  EXPECT_GE(grid_min(2, 1.5, true), interest_prob_min(2, {1.5, 1.5}) - 1e-12);
  EXPECT_GE(grid_min(2, 1.5, false), production_quality_min(2, {1.5, 1.5}) - 1e-12);
}

TEST(ProductionQuality, ClosedForms) {
  const KernelParams k{1.0, 2.0};
  EXPECT_DOUBLE_EQ(production_quality(TopicPoint(0.4), TopicPoint(0.4), k), 1.0);
  EXPECT_NEAR(production_quality(TopicPoint(0.0), TopicPoint(0.5), k), kE1, 1e-15);
}

TEST(Kernels, StrictlyDecreasingInDistance) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const KernelParams k{2.0, 3.0};
  for (int i = 0; i < 1000; ++i) {
    double d1 = u(rng), d2 = u(rng);
    if (d1 == d2) continue;
    if (d1 > d2) std::swap(d1, d2);
    const TopicPoint o(0.0), a(d1), b(d2);
    EXPECT_GT(interest_prob(a, o, k), interest_prob(b, o, k));
    EXPECT_GT(production_quality(a, o, k), production_quality(b, o, k));
  }
}

TEST(MatchProb, ClosedForms) {
  const TopicPoint p(0.3);
  EXPECT_DOUBLE_EQ(match_prob(p, p, p, {}), 1.0);
  EXPECT_NEAR(match_prob(TopicPoint(0.5), TopicPoint(0.0), TopicPoint(1.0), {1.0, 1.0}), kE1, 1e-15);
}

TEST(MatchProb, BoundedBelowByProductOfMinima) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const KernelParams k{1.3, 0.7};
  const double lb = interest_prob_min(2, k) * production_quality_min(2, k);
  for (int i = 0; i < 2000; ++i) {
    const TopicPoint x(u(rng), u(rng)), z(u(rng), u(rng)), y(u(rng), u(rng));
    const double b = match_prob(x, z, y, k);
    EXPECT_GE(b, lb - 1e-15);
    EXPECT_LE(b, 1.0);
  }
  // attained at opposite corners with x on one of them
  EXPECT_NEAR(match_prob(TopicPoint(0.0, 0.0), TopicPoint(1.0, 1.0), TopicPoint(0.0, 0.0), {1.0, 1.0}),
              interest_prob_min(2, {1.0, 1.0}), 1e-15);
}

TEST(Discount, Endpoints) {
  const DelayParams d{1.0};
  EXPECT_EQ(discount(0.0, d), 0.0);
  EXPECT_NEAR(discount(std::log(2.0), d), 0.5, 1e-15);
  // 1 - delta(50/beta) = exp(-50) ~ 2e-22; the limit statement holds far below 1e-20.
  for (double beta : {0.5, 1.0, 3.0}) {
    const DelayParams db{beta};
    EXPECT_LE(std::exp(-beta * (50.0 / beta)), 1e-20);  // 1 - delta, exactly
    EXPECT_LE(1.0 - discount(50.0 / beta, db), 1e-20);
  }
  EXPECT_LE(discount(1e6, d), 1.0);
}

TEST(Discount, NegativeRateIsAnError) {
  try {
    discount(-1e-3, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
  }
  EXPECT_THROW(discount_deriv(-1.0, {}), Error);
}

TEST(Discount, ConcaveAndIncreasing) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 10.0), t01(0.0, 1.0);
  const DelayParams d{1.7};
  for (int i = 0; i < 2000; ++i) {
    const double m1 = u(rng), m2 = u(rng), t = t01(rng);
    EXPECT_GE(discount(t * m1 + (1 - t) * m2, d), t * discount(m1, d) + (1 - t) * discount(m2, d) - 1e-12);
    if (m1 < m2) {
      EXPECT_LT(discount(m1, d), discount(m2, d));
    }
  }
}

TEST(DiscountDeriv, MatchesFiniteDifferences) {
  const double h = 1e-6;
  for (double beta : {0.5, 1.0, 2.0}) {
    const DelayParams d{beta};
    for (double mu : {0.01, 0.3, 1.0, 2.5, 5.0}) {
      const double fd = (discount(mu + h, d) - discount(mu - h, d)) / (2 * h);
      EXPECT_NEAR(fd / discount_deriv(mu, d), 1.0, 1e-6) << "beta " << beta << " mu " << mu;
    }
  }
}

TEST(DerivInverse, ClosedFormsAndRoundTrip) {
  const DelayParams d{1.0};
  EXPECT_EQ(deriv_inverse(1.0, d), 0.0);
  EXPECT_NEAR(deriv_inverse(std::exp(-2.0), d), 2.0, 1e-15);
  for (double beta : {0.3, 1.0, 4.0}) {
    const DelayParams db{beta};
    EXPECT_EQ(deriv_inverse(beta, db), 0.0);
    for (int i = 0; i <= 200; ++i) {
      const double mu = 0.1 * i;
      EXPECT_NEAR(deriv_inverse(discount_deriv(mu, db), db), mu, 1e-12);
    }
  }
}

TEST(DerivInverse, OutsideDomainIsAnError) {
  const DelayParams d{2.0};
  for (double b : {0.0, -1.0, 2.0000001, 10.0}) {
    try {
      deriv_inverse(b, d);
      FAIL() << b;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::OutOfDomain);
    }
  }
}

TEST(Params, Validation) {
  EXPECT_THROW(validate(KernelParams{0.0, 1.0}), Error);
  EXPECT_THROW(validate(KernelParams{1.0, -1.0}), Error);
  EXPECT_THROW(validate(DelayParams{0.0}), Error);
  EXPECT_NO_THROW(validate(KernelParams{}));
}
