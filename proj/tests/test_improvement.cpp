#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"

namespace mc = morticast;

namespace {

mc::MortalitySurface two_year(double prev, double next) {
  mc::MortalitySurface s;
  s.ages = {50};
  s.years = {2000, 2001};
  s.rates.resize(1, 2);
  s.rates << prev, next;
  return s;
}

Eigen::VectorXd ls_line(const Eigen::VectorXd& z) {
  const Eigen::Index n = z.size();
  Eigen::MatrixXd x(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) << 1.0, static_cast<double>(i);
  const Eigen::Vector2d coef = (x.transpose() * x).inverse() * (x.transpose() * z);
  return x * coef;
}

}  // namespace

TEST(Improvement, Examples) {
  EXPECT_EQ(mc::improvement_rates(two_year(0.02, 0.02)).rho(0, 0), 0.0);
  EXPECT_NEAR(mc::improvement_rates(two_year(0.04, 0.04 * std::exp(-0.035))).rho(0, 0), 0.035, 1e-14);
  EXPECT_LT(std::log(2.0) / 0.035, 20.0);
  EXPECT_NEAR(mc::improvement_rates(two_year(0.01, 0.012)).rho(0, 0), -0.18232155679395462, 1e-12);
}

TEST(Improvement, ShapeAndSign) {
  auto s = fixtures::declining_surface(1965, 1990, 0.0);
  auto r = mc::improvement_rates(s);
  EXPECT_EQ(r.years.size(), s.years.size() - 1);
  EXPECT_EQ(r.years.front(), 1966);
  EXPECT_EQ(r.n_ages(), 111);
  EXPECT_FALSE(r.smoothed_input);
  // mortality falls everywhere below the cap, so rho > 0
  EXPECT_GT(r.at(40, 1980), 0.0);
}

TEST(Improvement, NonpositiveRateIsAnError) {
  auto s = two_year(0.0, 0.01);
  try {
    mc::improvement_rates(s);
    FAIL();
  } catch (const mc::Error& e) {
    EXPECT_EQ(e.kind(), mc::ErrorKind::NonpositiveRate);
  }
}

TEST(Improvement, Telescoping) {
  auto s = fixtures::declining_surface(1965, 1990, 0.05, 21);
  auto r = mc::improvement_rates(s);
  for (Eigen::Index i = 0; i < s.rates.rows(); ++i) {
    const double total = r.rho.row(i).sum();
    EXPECT_NEAR(total, -std::log(s.rates(i, s.rates.cols() - 1) / s.rates(i, 0)), 1e-12);
    // cumulative reconstruction
    double level = s.rates(i, 0);
    for (Eigen::Index j = 0; j < r.rho.cols(); ++j) {
      level *= std::exp(-r.rho(i, j));
      EXPECT_NEAR(level, s.rates(i, j + 1), 1e-12 * std::max(1.0, s.rates(i, j + 1)));
    }
  }
}

TEST(Improvement, ScaleInvariance) {
  auto s = fixtures::declining_surface(1965, 1990, 0.05, 22, 1.0, 100);
  auto scaled = s;
  scaled.rates *= 3.7;
  auto a = mc::improvement_rates(s), b = mc::improvement_rates(scaled);
  EXPECT_LE((a.rho - b.rho).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Smoothing, TinyLambdaIsIdentity) {
  auto s = fixtures::declining_surface(1965, 1990, 0.05, 23);
  auto out = mc::smooth_surface(s, 1e-12);
  EXPECT_LE((out.rates.array().log() - s.rates.array().log()).abs().maxCoeff(), 1e-8);
  EXPECT_EQ(out.smoothing_lambda, 1e-12);
  EXPECT_TRUE(mc::improvement_rates(out).smoothed_input);
}

TEST(Smoothing, HugeLambdaGivesLeastSquaresLine) {
  auto s = fixtures::declining_surface(1965, 1990, 0.05, 24);
  auto out = mc::smooth_surface(s, 1e8);
  for (Eigen::Index i = 0; i < s.rates.rows(); ++i) {
    const Eigen::VectorXd z = s.rates.row(i).transpose().array().log();
    const Eigen::VectorXd got = out.rates.row(i).transpose().array().log();
    EXPECT_LE((got - ls_line(z)).cwiseAbs().maxCoeff(), 1e-6) << "age " << i;
  }
}

TEST(Smoothing, ReducesResidualVariance) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> eps(0.0, 0.05);
  const int n = 40;
  Eigen::VectorXd z(n), trend(n);
  for (int t = 0; t < n; ++t) {
    trend[t] = -4.0 - 0.02 * t;
    z[t] = trend[t] + eps(rng);
  }
  const Eigen::VectorXd s = mc::whittaker_smooth(z, 1e4);
  EXPECT_LT((s - trend).squaredNorm(), (z - trend).squaredNorm());
}

TEST(Smoothing, PositiveOutputAndErrors) {
  auto s = fixtures::declining_surface(1965, 1990, 0.1, 25);
  EXPECT_TRUE((mc::smooth_surface(s, 100.0).rates.array() > 0.0).all());
  auto short_s = mc::slice(s, 0, 110, 1965, 1968);
  try {
    mc::smooth_surface(short_s, 100.0);
    FAIL();
  } catch (const mc::Error& e) {
    EXPECT_EQ(e.kind(), mc::ErrorKind::TooFewYears);
  }
  EXPECT_THROW(mc::smooth_surface(s, 0.0), mc::Error);
}

TEST(Heatmap, BinsAndRowCount) {
  const std::vector<double> breaks{0.0, 0.01, 0.02, 0.03, 0.04, 0.05};
  EXPECT_EQ(mc::heatmap_bin(0.036, breaks), 4u);  // [0.03, 0.04)
  EXPECT_EQ(mc::heatmap_bin(-0.2, breaks), 0u);
  EXPECT_EQ(mc::heatmap_bin(0.03, breaks), 4u);   // left-closed

  auto r = mc::improvement_rates(fixtures::declining_surface(1965, 1990));
  const auto text = mc::surface_to_heatmap_csv(r, breaks);
  EXPECT_EQ(mc::csv::lines(text).size(), 1u + 111u * 25u);
  EXPECT_EQ(mc::csv::lines(text).front(), "age,year,value,bin");

  try {
    mc::surface_to_heatmap_csv(r, {0.02, 0.01});
    FAIL();
  } catch (const mc::Error& e) {
    EXPECT_EQ(e.kind(), mc::ErrorKind::UnsortedBreaks);
  }
}

TEST(ImprovementCsv, RoundTrip) {
  auto r = mc::improvement_rates(fixtures::declining_surface(1965, 1970, 0.1, 3));
  auto back = mc::improvement_from_csv(mc::improvement_to_csv(r));
  EXPECT_EQ(back.ages, r.ages);
  EXPECT_EQ(back.years, r.years);
  EXPECT_EQ(back.rho, r.rho);
}
