#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

namespace mc = morticast;

namespace {

/// Forecast with every cell equal to `value` (both channels).
mc::RhoForecast constant(double value, std::size_t draws = 3, std::size_t ages = 2, std::size_t years = 21) {
  mc::RhoForecast f;
  for (std::size_t x = 0; x < ages; ++x) f.ages.push_back(static_cast<int>(x));
  f.years = mc::year_span(1991, 1990 + static_cast<int>(years));
  f.predictive = mc::Array3<double>(draws, ages, years, value);
  f.mean = f.predictive;
  return f;
}

mc::RhoForecast random_forecast(std::uint64_t seed, std::size_t draws = 4, std::size_t years = 10) {
  auto f = constant(0.0, draws, 3, years);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.01, 0.05);
  for (double& v : f.predictive.flat()) v = u(rng);
  for (double& v : f.mean.flat()) v = u(rng);
  return f;
}

mc::BlendPlan plan(std::size_t refs, std::size_t horizon) {
  mc::BlendPlan p;
  p.interest_label = "GBR";
  for (std::size_t r = 0; r < refs; ++r) p.reference_labels.push_back(fmt::format("R{}", r));
  p.horizon_length = horizon;
  return p;
}

mc::ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const mc::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return mc::ErrorKind::Io;
}

}  // namespace

TEST(BlendWeights, Schedule) {
  auto p = plan(1, 21);
  EXPECT_DOUBLE_EQ(p.weight_of_interest(1), 1.0);
  EXPECT_DOUBLE_EQ(p.weight_of_interest(11), 0.5);
  EXPECT_DOUBLE_EQ(p.weight_of_interest(21), 0.0);
  auto two = plan(1, 2);
  EXPECT_DOUBLE_EQ(two.weight_of_interest(1), 1.0);
  EXPECT_DOUBLE_EQ(two.weight_of_interest(2), 0.0);
}

TEST(Blend, MidpointExample) {
  const auto interest = constant(0.010), ref = constant(0.030);
  std::vector<mc::RhoForecast> refs{ref};
  const auto out = mc::blend_forecasts(interest, refs, plan(1, 21));
  EXPECT_NEAR(out.predictive(0, 0, 10), 0.020, 1e-15);
  EXPECT_EQ(out.predictive(1, 1, 0), 0.010);
  EXPECT_EQ(out.mean(2, 0, 20), 0.030);
}

TEST(Blend, EndpointsAreExact) {
  const auto interest = random_forecast(1), r1 = random_forecast(2);
  std::vector<mc::RhoForecast> refs{r1};
  const auto out = mc::blend_forecasts(interest, refs, plan(1, 10));
  for (std::size_t d = 0; d < 4; ++d)
    for (std::size_t x = 0; x < 3; ++x) {
      EXPECT_EQ(out.predictive(d, x, 0), interest.predictive(d, x, 0));
      EXPECT_EQ(out.mean(d, x, 9), r1.mean(d, x, 9));
    }
}

TEST(Blend, ConvexityAndIdempotence) {
  const auto interest = random_forecast(3), r1 = random_forecast(4);
  std::vector<mc::RhoForecast> refs{r1};
  const auto out = mc::blend_forecasts(interest, refs, plan(1, 10));
  for (std::size_t i = 0; i < out.predictive.size(); ++i) {
    const double a = interest.predictive.flat()[i], b = r1.predictive.flat()[i];
    EXPECT_GE(out.predictive.flat()[i], std::min(a, b));
    EXPECT_LE(out.predictive.flat()[i], std::max(a, b));
  }
  std::vector<mc::RhoForecast> self{interest};
  EXPECT_EQ(mc::blend_forecasts(interest, self, plan(1, 10)).predictive, interest.predictive);
}

TEST(Blend, EqualAndExplicitWeights) {
  const auto interest = constant(0.0), a = constant(0.01), b = constant(0.03);
  std::vector<mc::RhoForecast> refs{a, b};
  auto p = plan(2, 21);
  EXPECT_NEAR(mc::blend_forecasts(interest, refs, p).predictive(0, 0, 20), 0.02, 1e-15);
  p.reference_weights = {3.0, 1.0};
  EXPECT_NEAR(mc::blend_forecasts(interest, refs, p).predictive(0, 0, 20), 0.015, 1e-15);
}

TEST(Blend, HoldInterestReproducesUnblended) {
  const auto interest = random_forecast(5), r1 = random_forecast(6);
  std::vector<mc::RhoForecast> refs{r1};
  auto p = plan(1, 10);
  p.hold_interest = true;
  const auto out = mc::blend_forecasts(interest, refs, p);
  EXPECT_EQ(out.predictive, interest.predictive);
  EXPECT_EQ(out.mean, interest.mean);
}

TEST(Blend, ShuffledDrawsArePermutedReferenceValues) {
  auto interest = constant(0.0, 50, 1, 2);
  auto ref = constant(0.0, 50, 1, 2);
  for (std::size_t d = 0; d < 50; ++d) ref.predictive(d, 0, 1) = static_cast<double>(d);
  std::vector<mc::RhoForecast> refs{ref};
  mc::BlendOptions opt;
  opt.shuffle_seed = 12;
  const auto out = mc::blend_forecasts(interest, refs, plan(1, 2), opt);
  std::vector<double> got;
  bool moved = false;
  for (std::size_t d = 0; d < 50; ++d) {
    got.push_back(out.predictive(d, 0, 1));
    moved |= out.predictive(d, 0, 1) != static_cast<double>(d);
  }
  std::sort(got.begin(), got.end());
  for (std::size_t d = 0; d < 50; ++d) EXPECT_EQ(got[d], static_cast<double>(d));
  EXPECT_TRUE(moved);
  EXPECT_EQ(mc::blend_forecasts(interest, refs, plan(1, 2), opt).predictive, out.predictive);
}

TEST(Blend, Errors) {
  const auto interest = constant(0.01);
  std::vector<mc::RhoForecast> none;
  EXPECT_EQ(kind_of([&] { mc::blend_forecasts(interest, none, plan(1, 21)); }), mc::ErrorKind::EmptyReferences);
  std::vector<mc::RhoForecast> wrong{constant(0.01, 3, 3, 21)};
  EXPECT_EQ(kind_of([&] { mc::blend_forecasts(interest, wrong, plan(1, 21)); }), mc::ErrorKind::ShapeMismatch);
  std::vector<mc::RhoForecast> ok{constant(0.02)};
  EXPECT_EQ(kind_of([&] { mc::blend_forecasts(interest, ok, plan(1, 20)); }), mc::ErrorKind::ShapeMismatch);
  EXPECT_EQ(kind_of([&] { mc::blend_forecasts(constant(0.01, 3, 2, 1), std::vector{constant(0.0, 3, 2, 1)}, plan(1, 1)); }),
            mc::ErrorKind::InvalidConfig);
  auto p = plan(1, 21);
  p.reference_weights = {1.0, 2.0};
  EXPECT_EQ(kind_of([&] { mc::blend_forecasts(interest, ok, p); }), mc::ErrorKind::InvalidConfig);
}

TEST(Clamp, Examples) {
  auto f = constant(0.0, 1, 1, 4);
  f.predictive(0, 0, 0) = 0.002;
  f.predictive(0, 0, 1) = 0.041;
  f.predictive(0, 0, 2) = 0.020;
  f.predictive(0, 0, 3) = -0.03;
  const auto c = mc::clamp_rho(f, {});
  EXPECT_EQ(c.predictive(0, 0, 0), 0.005);
  EXPECT_EQ(c.predictive(0, 0, 1), 0.035);
  EXPECT_EQ(c.predictive(0, 0, 2), 0.020);
  EXPECT_EQ(c.predictive(0, 0, 3), 0.005);
  EXPECT_EQ(c.mean(0, 0, 0), 0.005);
}

TEST(Clamp, IdempotentAndBounded) {
  const auto f = random_forecast(9);
  const auto once = mc::clamp_rho(f, {});
  EXPECT_EQ(mc::clamp_rho(once, {}).predictive, once.predictive);
  for (double v : once.predictive.flat()) {
    EXPECT_GE(v, 0.005);
    EXPECT_LE(v, 0.035);
  }
  EXPECT_THROW(mc::clamp_rho(f, {0.03, 0.01}), mc::Error);
}

TEST(Clamp, AppliedAfterBlend) {
  // clamp(blend(0, 0.07)) = 0.035 at the midpoint; clamping first would give 0.02
  const auto interest = constant(0.0), ref = constant(0.07);
  std::vector<mc::RhoForecast> refs{ref};
  const auto out = mc::clamp_rho(mc::blend_forecasts(interest, refs, plan(1, 21)), {});
  EXPECT_EQ(out.predictive(0, 0, 10), 0.035);
}
