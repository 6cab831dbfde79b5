#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "cumvol/analytic.hpp"
#include "cumvol/evolution.hpp"
#include "cumvol/montecarlo.hpp"
#include "cumvol/parallel.hpp"

using namespace cumvol;

namespace {

// Negligible noise; the paths are deterministic up to rounding.
NoiseModel quiet() { return NoiseModel::gaussian(1e-300); }

}  // namespace

TEST(LogAddExp, HandlesExtremes) {
  EXPECT_NEAR(log_add_exp(0.0, 0.0), std::log(2.0), 1e-15);
  EXPECT_EQ(log_add_exp(-INFINITY, 3.0), 3.0);
  EXPECT_NEAR(log_add_exp(1000.0, 1000.0), 1000.0 + std::log(2.0), 1e-12);
  EXPECT_NEAR(log_add_exp(-800.0, 2.0), 2.0, 1e-15);
}

TEST(Simulate, NoiselessPathsFollowTheLogSum) {
  const auto e = simulate(0.2, quiet(), 10, 100, 1);
  for (long t = 1; t <= 10; ++t) {
    for (double z : e.z_at(t)) EXPECT_NEAR(z, analytic::deterministic_log_cumulative(0.2, t), 1e-12);
  }
}

TEST(Simulate, ZeroDriftIncrementsAreHarmonic) {
  const auto e = simulate(0.0, quiet(), 30, 10, 1);
  for (long t = 1; t <= 30; ++t) {
    for (double d : e.dz_at(t)) EXPECT_NEAR(d, std::log((t + 1.0) / t), 1e-12);
  }
}

TEST(Simulate, PathsAreNonNegativeAndNonDecreasing) {
  // Far negative Cauchy draws push some increments below the smallest double.
  const auto e = simulate(-0.5, NoiseModel::lorentzian(2.0), 50, 2000, 9);
  for (long t = 1; t <= 50; ++t) {
    for (std::size_t i = 0; i < e.n_paths; ++i) {
      EXPECT_GE(e.dz_at(t)[i], 0.0);
      EXPECT_TRUE(std::isfinite(e.z_at(t)[i]));
      if (t > 1) EXPECT_GE(e.z_at(t)[i], e.z_at(t - 1)[i]);
    }
  }
  const auto q = simulate(-0.5, NoiseModel::gaussian(1.0), 50, 2000, 9);
  for (long t = 1; t <= 50; ++t) {
    for (double d : q.dz_at(t)) EXPECT_GT(d, 0.0);
  }
}

TEST(Simulate, HugeDriftsDoNotOverflow) {
  const auto e = simulate(50.0, NoiseModel::lorentzian(1e3), 100, 500, 4);
  for (double z : e.z_at(100)) EXPECT_TRUE(std::isfinite(z));
  for (double d : e.dz_at(100)) EXPECT_TRUE(std::isfinite(d));
}

TEST(Simulate, DeterministicForAFixedSeed) {
  const auto a = simulate(0.2, NoiseModel::gaussian(1.0), 20, 10000, 77);
  const auto b = simulate(0.2, NoiseModel::gaussian(1.0), 20, 10000, 77);
  const auto c = simulate(0.2, NoiseModel::gaussian(1.0), 20, 10000, 78);
  EXPECT_EQ(a.z, b.z);
  EXPECT_NE(a.z, c.z);
}

TEST(Simulate, IndependentOfThreadCount) {
  ::setenv("CUMVOL_THREADS", "1", 1);
  const auto a = simulate(0.2, NoiseModel::lorentzian(1.0), 15, 3 * kPathBlock + 17, 5);
  ::setenv("CUMVOL_THREADS", "4", 1);
  const auto b = simulate(0.2, NoiseModel::lorentzian(1.0), 15, 3 * kPathBlock + 17, 5);
  ::unsetenv("CUMVOL_THREADS");
  EXPECT_EQ(a.z, b.z);
  EXPECT_EQ(a.dz, b.dz);
}

TEST(Simulate, RecordingSubsetMatchesFullRun) {
  const auto full = simulate(0.1, NoiseModel::gaussian(0.5), 12, 500, 3);
  const auto part = simulate(0.1, NoiseModel::gaussian(0.5), 12, 500, 3, {4, 12});
  EXPECT_EQ(part.times, (std::vector<long>{4, 12}));
  EXPECT_EQ(part.z_at(4), full.z_at(4));
  EXPECT_EQ(part.dz_at(12), full.dz_at(12));
  EXPECT_FALSE(part.records(5));
  EXPECT_THROW(part.z_at(5), std::invalid_argument);
}

TEST(Simulate, RejectsInvalidArguments) {
  EXPECT_THROW(simulate(0.1, NoiseModel::gaussian(1.0), 10, 0, 1), std::invalid_argument);
  EXPECT_THROW(simulate(0.1, NoiseModel::gaussian(1.0), 0, 10, 1), std::invalid_argument);
  EXPECT_THROW(simulate(NAN, NoiseModel::gaussian(1.0), 10, 10, 1), std::invalid_argument);
  EXPECT_THROW(simulate(0.1, NoiseModel::gaussian(1.0), 10, 10, 1, {11}), std::invalid_argument);
}

TEST(Simulate, LogCumulativeVarianceAgreesWithTheGrid) {
  auto c = EvolutionConfig{};
  c.g = 0.2;
  c.noise = NoiseModel::gaussian(0.1);
  c.horizon = 10;
  c.grid = default_z_grid(0.2, c.noise, 10);
  const double grid_var = evolve_z(c).steps.back().summary.variance;
  const auto e = simulate(0.2, c.noise, 10, 200000, 21, {10});
  const auto est = bootstrap_variance(e.z_at(10), 1);
  EXPECT_NEAR(est.variance, grid_var, 4.0 * est.std_error);
}

TEST(Volatility, EmpiricalVarianceMatchesSaddleForNarrowNoise) {
  const auto e = simulate(0.1, NoiseModel::gaussian(0.05), 100, 100000, 12, {100});
  const auto est = empirical_volatility(e, 100);
  EXPECT_NEAR(est.variance, analytic::var_dz_saddle(0.1, 0.05), 3.0 * est.std_error);
  EXPECT_GT(est.std_error, 0.0);
}

TEST(Volatility, SmallerThanNoiseVariance) {
  const auto noise = NoiseModel::gaussian(0.3);
  const auto e = simulate(0.2, noise, 200, 50000, 31, {200});
  EXPECT_LT(empirical_volatility(e, 200).variance, 0.09);
}

TEST(Bootstrap, DeterministicAndSensible) {
  const auto xs = NoiseModel::gaussian(2.0).sample(20000, 8);
  const auto a = bootstrap_variance(xs, 3);
  const auto b = bootstrap_variance(xs, 3);
  EXPECT_EQ(a.variance, b.variance);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_NEAR(a.variance, 4.0, 5.0 * a.std_error);
  // Normal theory: sd of the sample variance is sigma^2 sqrt(2 / (n - 1)).
  EXPECT_NEAR(a.std_error, 4.0 * std::sqrt(2.0 / 19999.0), 0.03);
}

TEST(Ks, SampleDrawnFromTheGridPasses) {
  const auto p = from_noise(GridSpec::make(-6.0, 6.0, 1200), NoiseModel::gaussian(1.0));
  const auto xs = NoiseModel::gaussian(1.0).sample(50000, 19);
  const double critical = 1.36 / std::sqrt(50000.0);
  EXPECT_LT(ks_distance(xs, p), critical);
  EXPECT_LT(ks_distance(xs, p, KsMode::continuous), critical);
}

TEST(Ks, DetectsAShift) {
  const auto p = from_noise(GridSpec::make(-6.0, 6.0, 1200), NoiseModel::gaussian(1.0));
  auto xs = NoiseModel::gaussian(1.0).sample(50000, 19);
  for (double& x : xs) x += 0.1;
  EXPECT_GT(ks_distance(xs, p), 0.03);
}

TEST(Ks, DeterministicEnsembleAgainstSpikeDensity) {
  const auto grid = GridSpec::make(0.0, 2.0, 2000);
  const auto p = init_first_step(NoiseModel::gaussian(1e-9), 0.2, grid);
  const auto e = simulate(0.2, quiet(), 1, 1000, 2);
  double largest_cell = 0.0;
  for (double m : p.cell_masses()) largest_cell = std::max(largest_cell, m);
  EXPECT_LE(empirical_cdf_distance(e, 1, p), largest_cell + 1e-12);
}

TEST(Ks, GridDensityMatchesSimulation) {
  const auto noise = NoiseModel::gaussian(1.0);
  EvolutionConfig c;
  c.g = 0.2;
  c.noise = noise;
  c.horizon = 20;
  c.grid = default_z_grid(0.2, noise, 20);
  c.keep_densities = true;
  const auto trace = evolve_z(c);
  const auto e = simulate(0.2, noise, 20, 100000, 2024, {1, 5, 10, 20});
  for (long t : {1L, 5L, 10L, 20L}) {
    EXPECT_LT(empirical_cdf_distance(e, t, trace.densities[t - 1]), 0.01) << t;
    EXPECT_LT(empirical_cdf_distance(e, t, trace.densities[t - 1], Quantity::z, KsMode::continuous), 0.01) << t;
  }
}

TEST(Reversal, IdentityHoldsPathByPath) {
  for (const auto& noise : {NoiseModel::gaussian(1.0), NoiseModel::lorentzian(1.0),
                            NoiseModel::tabulated({-1.0, 0.2, 0.5}, {0.0, 1.0, 0.0})}) {
    const auto r = verify_reversal_identity(0.2, noise, 30, 1000, 17);
    EXPECT_EQ(r.paths, 1000u);
    EXPECT_LT(r.max_relative_error, 1e-10) << noise.describe();
  }
}

TEST(Stats, MatchRecordedTimes) {
  const auto e = simulate(0.1, NoiseModel::gaussian(0.5), 8, 300, 3, {2, 8});
  const auto stats = ensemble_stats(e);
  ASSERT_EQ(stats.size(), 2u);
  EXPECT_EQ(stats[1].t, 8);
  double m = 0.0;
  for (double z : e.z_at(8)) m += z;
  EXPECT_NEAR(stats[1].mean_z, m / 300.0, 1e-12);
}

TEST(Parallel, CoversEveryIndexAndPropagatesErrors) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(100, [](std::size_t i) {
                 if (i == 37) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

TEST(Parallel, ThreadCapFromEnvironment) {
  ::setenv("CUMVOL_THREADS", "1", 1);
  EXPECT_EQ(worker_count(), 1u);
  ::setenv("CUMVOL_THREADS", "junk", 1);
  EXPECT_GE(worker_count(), 1u);
  ::unsetenv("CUMVOL_THREADS");
}
