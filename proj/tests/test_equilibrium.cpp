#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cme/equilibrium.hpp"
#include "support.hpp"

using namespace cme;
using cme::testing::random_config;

namespace {

MarketConfig symmetric_config(std::size_t n) {
  MarketConfig cfg;
  cfg.interests.assign(n, TopicPoint(0.4));
  cfg.M = 1.0;
  cfg.M_infl = static_cast<double>(n);
  return cfg;
}

DynamicsParams quick(int restarts = 0) {
  DynamicsParams p;
  p.restarts = restarts;
  return p;
}

bool nondecreasing(const std::vector<double>& trace, double slack) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] < trace[i - 1] - slack * std::max(1.0, std::abs(trace[i - 1]))) return false;
  }
  return true;
}

}  // namespace

TEST(Dynamics, SymmetricInstanceIsAFixedPointWithinThreeRounds) {
  const auto cfg = symmetric_config(5);
  for (auto mode : {GameMode::Perfect, GameMode::Imperfect, GameMode::Proxy}) {
    const auto res = run_dynamics(cfg, mode, quick());
    EXPECT_TRUE(res.converged) << to_string(mode);
    EXPECT_LE(res.rounds_used, 3) << to_string(mode);
    EXPECT_TRUE(res.certificate.holds) << to_string(mode);
    for (double mu : res.omega.infl.mu) EXPECT_NEAR(mu, 1.0, 1e-9);
    for (const auto& x : res.omega.content.x) EXPECT_NEAR(x[0], 0.4, 1e-12);
    for (const auto& c : res.omega.consumers) {
      EXPECT_NEAR(c.outside, res.omega.consumers[0].outside, 1e-12);
      EXPECT_NEAR(c.influencer, res.omega.consumers[0].influencer, 1e-12);
    }
  }
}

TEST(Dynamics, PerfectPotentialTraceIsMonotone) {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 6; ++t) {
    const auto cfg = random_config(rng, 3 + t, 1 + t % 2);
    for (auto mode : {GameMode::Perfect, GameMode::Proxy}) {
      const auto res = run_dynamics_from(cfg, mode, random_allocation(cfg, 100 + t), quick());
      ASSERT_FALSE(res.potential_trace.empty());
      EXPECT_TRUE(nondecreasing(res.potential_trace, 1e-9)) << t << " " << to_string(mode);
      EXPECT_NEAR(res.welfare, social_welfare(res.omega, cfg), 1e-9);
    }
  }
}

// Proxy game with N = 2: each consumer splits between outside (w_out = r_0 B_0)
// and influencer (w_infl = r_p delta(mu_infl(z)) B(z|y)); with beta = 1,
// lambda = (M + ln(w_out / w_infl)) / 2 clamped to [0, M].
TEST(Dynamics, TwoMemberConsumerSplitMatchesClosedForm) {
  MarketConfig cfg;
  cfg.interests = {TopicPoint(0.25), TopicPoint(0.6)};
  cfg.M = 1.2;
  cfg.M_infl = 1.5;
  cfg.r_0 = 0.7;
  cfg.B_0 = 0.6;
  cfg.r_p = 1.8;
  const auto res = run_dynamics(cfg, GameMode::Proxy, quick());
  ASSERT_TRUE(res.certificate.holds);
  const auto& w = res.omega;
  for (std::size_t y = 0; y < 2; ++y) {
    const std::size_t z = 1 - y;
    const double w_out = cfg.r_0 * cfg.B_0;
    const double w_infl = cfg.r_p * discount(w.infl.mu[z], cfg.delay) *
                          match_prob(w.content.x[z], cfg.interests[z], cfg.interests[y], cfg.kernel);
    const double lambda = std::clamp((cfg.M + std::log(w_out / w_infl)) / 2.0, 0.0, cfg.M);
    EXPECT_NEAR(w.consumers[y].outside, lambda, 1e-9);
    EXPECT_NEAR(w.consumers[y].influencer, cfg.M - lambda, 1e-9);
  }
}

TEST(CheckNash, DynamicsOutputCertifies) {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 5; ++t) {
    const auto cfg = random_config(rng, 4 + t, 1);
    const auto res = run_dynamics(cfg, GameMode::Perfect, quick(1));
    EXPECT_TRUE(res.converged) << t;
    EXPECT_TRUE(res.certificate.holds) << t;
    const auto again = check_nash(res.omega, cfg, GameMode::Perfect);
    EXPECT_EQ(again.holds, res.certificate.holds);
    EXPECT_EQ(again.residuals.size(), 7u);
  }
}

TEST(CheckNash, EveryLetteredConditionIsReported) {
  const auto cfg = symmetric_config(3);
  const auto omega = uniform_allocation(cfg);
  for (auto mode : {GameMode::Perfect, GameMode::Imperfect}) {
    const auto cert = check_nash(omega, cfg, mode);
    for (const char* id : {"a", "b", "c", "d", "e", "f", "g"}) EXPECT_NE(cert.find(id), nullptr) << id;
  }
  const auto proxy = check_nash(omega, cfg, GameMode::Proxy);
  for (const char* id : {"a", "b", "c", "d", "e", "f", "g"}) EXPECT_NE(proxy.find(id), nullptr) << id;
}

TEST(CheckNash, PerturbedConsumerSplitFailsAndNamesCondition) {
  std::mt19937_64 rng(43);
  const auto cfg = random_config(rng, 6, 1);
  const auto res = run_dynamics(cfg, GameMode::Perfect, quick());
  ASSERT_TRUE(res.certificate.holds);
  auto omega = res.omega;
  auto& c = omega.consumers[2];
  const double shift = 0.1 * cfg.M;
  // move 10% of M between the outside source and the influencer
  if (c.influencer >= c.outside) {
    c.influencer -= shift;
    c.outside += shift;
  } else {
    c.outside -= shift;
    c.influencer += shift;
  }
  const auto cert = check_nash(omega, cfg, GameMode::Perfect);
  EXPECT_FALSE(cert.holds);
  const auto bad = cert.violated();
  ASSERT_FALSE(bad.empty());
  bool consumer_named = false;
  for (const auto& id : bad) {
    const auto* r = cert.find(id);
    consumer_named = consumer_named || r->witness.find("consumer 2") != std::string::npos;
  }
  EXPECT_TRUE(consumer_named);
}

TEST(CheckNash, ProxyDirectRateIsTheBResidual) {
  const auto cfg = symmetric_config(4);
  auto res = run_dynamics(cfg, GameMode::Proxy, quick());
  ASSERT_TRUE(res.certificate.holds);
  auto omega = res.omega;
  auto& c = omega.consumers[1];
  (c.outside > c.influencer ? c.outside : c.influencer) -= 0.03;
  c.direct[3] = 0.03;
  const auto cert = check_nash(omega, cfg, GameMode::Proxy);
  EXPECT_NEAR(cert.find("b")->residual, 0.03, 1e-15);
  EXPECT_FALSE(cert.find("b")->holds());
  EXPECT_EQ(cert.find("b")->witness, "consumer 1");
}

TEST(CheckNash, ZeroToleranceFails) {
  std::mt19937_64 rng(44);
  const auto cfg = random_config(rng, 5, 1);
  const auto res = run_dynamics(cfg, GameMode::Perfect, quick());
  EXPECT_FALSE(check_nash(res.omega, cfg, GameMode::Perfect, {0.0, 0.0}).holds);
}

TEST(PriceOfInfluence, SymmetricInstanceHasNone) {
  const auto poi = price_of_influence(symmetric_config(4), quick());
  EXPECT_TRUE(poi.certified_perfect);
  EXPECT_TRUE(poi.certified_imperfect);
  EXPECT_NEAR(poi.poi, 0.0, 1e-9);
  EXPECT_NEAR(poi.relative_poi, 0.0, 1e-9);
}

TEST(PriceOfInfluence, NeverNegativeOnCertifiedPairs) {
  std::mt19937_64 rng(45);
  for (int t = 0; t < 4; ++t) {
    auto cfg = random_config(rng, 4 + t, 1);
    if (t % 2 == 0) cfg.M_infl = 0.05;  // far from the large-influencer regime
    const auto poi = price_of_influence(cfg, quick(1));
    EXPECT_NEAR(poi.phi_perfect, poi.perfect.welfare, 0.0);
    if (poi.certified_perfect && poi.certified_imperfect) {
      EXPECT_GE(poi.poi, -1e-9) << t;
    }
  }
}

TEST(ProxyEquivalence, ProxyEquilibriumHasNoDirectFollows) {
  std::mt19937_64 rng(46);
  auto cfg = random_config(rng, 6, 1);
  cfg.M_infl = 0.1;
  const auto rep = proxy_equivalence_report(cfg, quick());
  EXPECT_EQ(rep.proxy_direct_rate_mass, 0.0);
  EXPECT_NEAR(rep.direct_rate_mass, direct_rate_mass(rep.perfect.omega), 0.0);
}

TEST(RandomAllocation, SpendsBothBudgets) {
  std::mt19937_64 rng(47);
  for (int t = 0; t < 20; ++t) {
    const auto cfg = random_config(rng, 2 + t % 9, 1 + t % 2);
    const auto omega = random_allocation(cfg, static_cast<std::uint64_t>(t));
    EXPECT_NO_THROW(validate(omega, cfg));
    EXPECT_NEAR(omega.infl.total(), cfg.M_infl, 1e-12 * cfg.M_infl);
    for (std::size_t y = 0; y < cfg.size(); ++y) {
      EXPECT_NEAR(omega.consumers[y].total(), cfg.M, 1e-12 * cfg.M);
      EXPECT_EQ(omega.consumers[y].direct[y], 0.0);
    }
  }
  const auto cfg = symmetric_config(3);
  EXPECT_EQ(random_allocation(cfg, 5).infl.mu, random_allocation(cfg, 5).infl.mu);
}

TEST(Dynamics, JacobiScheduleRuns) {
  auto params = quick();
  params.schedule = Schedule::Jacobi;
  params.max_rounds = 50;
  const auto res = run_dynamics(symmetric_config(4), GameMode::Perfect, params);
  EXPECT_TRUE(res.converged);
  EXPECT_TRUE(res.certificate.holds);
}

TEST(Dynamics, InvalidParamsThrow) {
  auto params = quick();
  params.max_rounds = 0;
  EXPECT_THROW(run_dynamics(symmetric_config(3), GameMode::Perfect, params), Error);
}
