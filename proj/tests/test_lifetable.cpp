#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"

namespace mc = morticast;

namespace {

/// Independent life-table e0 written out with plain loops.
double oracle_e0(const std::vector<double>& m) {
  const std::size_t n = m.size();
  double l = 1.0, total = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    if (x + 1 == n) {
      total += l / m[x];
      break;
    }
    double a = 0.5;
    if (x == 0) a = std::min(0.5, std::max(0.01, 0.07 + 1.7 * m[0]));
    const double q = m[x] / (1.0 + (1.0 - a) * m[x]);
    const double dead = l * q;
    total += (l - dead) + a * dead;
    l -= dead;
  }
  return total;
}

std::vector<double> column(const mc::MortalitySurface& s, Eigen::Index j) {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < s.rates.rows(); ++i) v.push_back(s.rates(i, j));
  return v;
}

}  // namespace

TEST(LifeTable, SingleOpenIntervalGivesReciprocal) {
  const std::vector<double> m{0.05};
  EXPECT_DOUBLE_EQ(mc::build_lifetable(m).e0(), 20.0);
}

TEST(LifeTable, HandWorkedTwoAges) {
  // m0 = 0.1: a0 = 0.24, q0 = 0.1 / 1.076, L0 = l1 + 0.24 d0; L1 = l1 / 0.2
  const std::vector<double> m{0.1, 0.2};
  const double q0 = 0.1 / (1.0 + 0.76 * 0.1);
  const double l1 = 1.0 - q0;
  EXPECT_NEAR(mc::build_lifetable(m).e0(), l1 + 0.24 * q0 + l1 / 0.2, 1e-14);
}

TEST(LifeTable, InfantSeparationClamp) {
  EXPECT_DOUBLE_EQ(mc::infant_separation(0.01), 0.087);
  EXPECT_DOUBLE_EQ(mc::infant_separation(0.5), 0.5);
  EXPECT_DOUBLE_EQ(mc::infant_separation(0.0), 0.07);
}

TEST(LifeTable, MatchesOracleAndIdentities) {
  const auto s = fixtures::declining_surface(1965, 1990, 0.05, 4);
  for (Eigen::Index j = 0; j < s.rates.cols(); j += 5) {
    const auto m = column(s, j);
    const auto t = mc::build_lifetable(m);
    EXPECT_NEAR(t.e0(), oracle_e0(m), 1e-10);
    EXPECT_EQ(t.q[110], 1.0);
    EXPECT_NEAR(t.l[0], 1.0, 0.0);
    EXPECT_NEAR(t.d.sum(), 1.0, 1e-12);
    for (Eigen::Index x = 0; x + 1 < 111; ++x) EXPECT_LE(t.l[x + 1], t.l[x]);
    EXPECT_GT(t.e0(), 50.0);
    EXPECT_LT(t.e0(), 100.0);
  }
}

TEST(LifeTable, LowerMortalityRaisesE0) {
  const auto m = column(fixtures::declining_surface(1965, 1965), 0);
  auto lower = m;
  for (auto& v : lower) v *= 0.9;
  EXPECT_GT(mc::build_lifetable(lower).e0(), mc::build_lifetable(m).e0());
  const std::vector<double> bad{0.01, 0.0, 0.2};
  EXPECT_THROW(mc::build_lifetable(bad), mc::Error);
}

TEST(Propagation, LiteralAndExactLog) {
  const std::vector<double> jump{0.01};
  mc::Array3<double> rho(1, 1, 3, 0.02);
  const auto lit = mc::propagate_quantiles(jump, rho);
  EXPECT_NEAR(lit(0, 0, 0), 0.0098, 1e-15);
  EXPECT_NEAR(lit(0, 0, 2), 0.01 * std::pow(0.98, 3), 1e-15);
  const auto ex = mc::propagate_quantiles(jump, rho, mc::PropagationMode::ExactLog);
  EXPECT_NEAR(ex(0, 0, 2), 0.01 * std::exp(-0.06), 1e-15);
  // first-order agreement for small rho
  mc::Array3<double> small(1, 1, 1, 1e-4);
  EXPECT_NEAR(mc::propagate_draws(jump, small)(0, 0, 0),
              mc::propagate_draws(jump, small, mc::PropagationMode::ExactLog)(0, 0, 0), 1e-10);
}

TEST(Propagation, ZeroRhoKeepsJumpoffAndRhoOneIsError) {
  const std::vector<double> jump{0.01, 0.2};
  mc::Array3<double> zero(2, 2, 5, 0.0);
  const auto m = mc::propagate_draws(jump, zero);
  for (std::size_t h = 0; h < 5; ++h) {
    EXPECT_EQ(m(1, 0, h), 0.01);
    EXPECT_EQ(m(0, 1, h), 0.2);
  }
  mc::Array3<double> one(1, 2, 2, 0.01);
  one(0, 1, 1) = 1.0;
  try {
    mc::propagate_draws(jump, one);
    FAIL();
  } catch (const mc::Error& e) {
    EXPECT_EQ(e.kind(), mc::ErrorKind::RhoGeqOne);
  }
  EXPECT_NO_THROW(mc::propagate_draws(jump, one, mc::PropagationMode::ExactLog));
  const std::vector<double> short_jump{0.01};
  EXPECT_THROW(mc::propagate_draws(short_jump, zero), mc::Error);
}

TEST(Propagation, QuantileOrderingCarriesToRatesAndE0) {
  // higher improvement quantile -> lower m -> higher e0
  const auto m0 = column(fixtures::declining_surface(1990, 1990), 0);
  mc::Array3<double> rho_fan(3, m0.size(), 4);
  const double levels[] = {0.005, 0.015, 0.03};
  for (std::size_t q = 0; q < 3; ++q)
    for (std::size_t x = 0; x < m0.size(); ++x)
      for (std::size_t h = 0; h < 4; ++h) rho_fan(q, x, h) = levels[q];
  const auto m = mc::propagate_quantiles(m0, rho_fan);
  const auto e0 = mc::e0_fan(m);
  for (std::size_t x = 0; x < m0.size(); ++x) EXPECT_GT(m(0, x, 3), m(2, x, 3));
  for (Eigen::Index h = 0; h < 4; ++h) {
    EXPECT_LT(e0(0, h), e0(1, h));
    EXPECT_LT(e0(1, h), e0(2, h));
  }
  EXPECT_GT(e0(1, 3), e0(1, 0));
}

TEST(QuantileFan, PerCellType7) {
  mc::Array3<double> draws(5, 1, 2);
  for (std::size_t d = 0; d < 5; ++d) {
    draws(d, 0, 0) = static_cast<double>(5 - d);
    draws(d, 0, 1) = 10.0 * static_cast<double>(d);
  }
  const std::vector<double> levels{0.1, 0.5, 0.9};
  const auto fan = mc::quantile_fan(draws, levels);
  EXPECT_DOUBLE_EQ(fan(0, 0, 0), 1.4);
  EXPECT_DOUBLE_EQ(fan(1, 0, 0), 3.0);
  EXPECT_DOUBLE_EQ(fan(2, 0, 1), 36.0);
}

TEST(E0ByYear, MatchesColumnwiseTables) {
  const auto s = fixtures::declining_surface(1980, 1984, 0.02, 3);
  const auto e0 = mc::e0_by_year(s);
  ASSERT_EQ(e0.size(), 5u);
  for (Eigen::Index j = 0; j < 5; ++j) EXPECT_NEAR(e0[static_cast<std::size_t>(j)], oracle_e0(column(s, j)), 1e-10);
  auto sliced = mc::slice(s, 1, 110, 1980, 1984);
  EXPECT_THROW(mc::e0_by_year(sliced), mc::Error);
}

TEST(ForecastError, DefinitionAndSummaries) {
  mc::YearSeries f{{1991, 1992, 1993}, {80.0, 80.5, 81.0}};
  mc::YearSeries o{{1991, 1992, 1993}, {80.2, 80.4, 81.6}};
  const auto e = mc::forecast_error(f, o);
  EXPECT_NEAR(e.errors[0], -0.2, 1e-12);
  EXPECT_NEAR(e.terminal, -0.6, 1e-12);
  EXPECT_NEAR(e.max_abs, 0.6, 1e-12);
  EXPECT_NEAR(e.mean_abs, 0.3, 1e-12);
  mc::YearSeries shifted{{1992, 1993, 1994}, {1, 2, 3}};
  try {
    mc::forecast_error(f, shifted);
    FAIL();
  } catch (const mc::Error& err) {
    EXPECT_EQ(err.kind(), mc::ErrorKind::YearMismatch);
  }
  const auto back = mc::errors_from_csv(mc::errors_to_csv(e));
  EXPECT_EQ(back.years, e.years);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(back.errors[i], e.errors[i]);
}

TEST(FanCsv, Layout) {
  mc::ForecastFan fan;
  fan.quantile_levels = {0.5};
  fan.ages = {0, 1};
  fan.years = {1991, 1992};
  fan.m_fan = mc::Array3<double>(1, 2, 2, 0.01);
  fan.e0 = Eigen::MatrixXd::Constant(1, 2, 80.0);
  EXPECT_EQ(mc::csv::lines(mc::m_fan_to_csv(fan)).size(), 5u);
  EXPECT_EQ(mc::csv::lines(mc::e0_fan_to_csv(fan)).front(), "quantile,year,e0");
  EXPECT_EQ(fan.e0_series(0.5), (std::vector<double>{80.0, 80.0}));
  EXPECT_THROW(fan.level_index(0.3), mc::Error);
}

TEST(LifeTable, ProbabilityCappedAtOneForExtremeRates) {
  // m = 3 at a closed age would give q = 3 / 2.5 > 1
  const std::vector<double> m{0.01, 3.0, 0.5};
  const auto t = mc::build_lifetable(m);
  EXPECT_EQ(t.q[1], 1.0);
  EXPECT_EQ(t.l[2], 0.0);
  EXPECT_TRUE(std::isfinite(t.e0()));
}
