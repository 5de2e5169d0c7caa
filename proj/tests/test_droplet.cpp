#include <gtest/gtest.h>

#include "mfwf/droplet.hpp"
#include "mfwf/malthus.hpp"
#include "mfwf/parallel.hpp"
#include "mfwf/stats.hpp"
#include "oracles.hpp"

using namespace mfwf;

namespace {
const ModelParams kUnit{1, 1, 1, 1, 1};
}

TEST(Scale, Cases) {
  EXPECT_EQ(scale_value(kUnit, 0.0), 0.0);
  ModelParams flat{0, 0, 1, 0, 1};
  for (double x : {0.1, 0.5, 0.9}) EXPECT_NEAR(scale_value(flat, x), x, 1e-14);
  EXPECT_NEAR(scale_value(kUnit, 1e-6) / 1e-6, 1.0, 1e-4);
  for (double x : {0.01, 0.3, 0.7, 0.95}) EXPECT_NEAR(scale_value(kUnit, x), oracle::scale(1, 1, 1, x), 1e-9) << x;
  ModelParams other{0.5, 2, 3, 0, 1};
  EXPECT_NEAR(scale_value(other, 0.8), oracle::scale(0.5, 2, 3, 0.8), 1e-9);
  EXPECT_THROW(scale_value(kUnit, 1.0), std::invalid_argument);
  EXPECT_THROW(scale_value(ModelParams{1, 1, 0, 0, 1}, 0.5), std::invalid_argument);
}

TEST(Scale, TableMatchesPointValues) {
  std::vector<double> grid{0.0, 0.1, 0.2, 0.5, 0.9};
  ScaleTable t = scale_function(kUnit, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(t.values[i], scale_value(kUnit, grid[i]), 1e-12);
  for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_GT(t.values[i], t.values[i - 1]);
  EXPECT_THROW(scale_function(kUnit, {0.5, 0.1}), std::invalid_argument);
}

TEST(Excursion, StaysInUnitIntervalAndWeighted) {
  for (int r = 0; r < 200; ++r) {
    Stream rng = derive_stream({1, r, "exc"});
    ExcursionPath p = sample_excursion(0.01, kUnit, 1e-3, rng, 20.0);
    for (double v : p.values) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
    EXPECT_DOUBLE_EQ(p.weight, 1.0 / scale_value(kUnit, 0.01));
    EXPECT_EQ(p.times.size(), p.values.size());
  }
  Stream rng = derive_stream({1, 0, "exc"});
  EXPECT_THROW(sample_excursion(0.2, kUnit, 1e-3, rng), std::invalid_argument);
}

TEST(Excursion, ExceedanceMatchesScaleFunction) {
  // P(reach a before the floor) = (S(eps) - S(floor)) / (S(a) - S(floor)).
  double eps = 0.01, a = 0.2, floor = eps / 100;
  auto hits = parallel_map(6000, [&](std::size_t r) {
    Stream rng = derive_stream({2, static_cast<std::int64_t>(r), "hit"});
    return sample_excursion(eps, kUnit, 1e-3, rng, 50.0).maximum() >= a ? 1.0 : 0.0;
  });
  Summary s = summarize(hits);
  double sf = scale_value(kUnit, floor);
  double expect = (scale_value(kUnit, eps) - sf) / (scale_value(kUnit, a) - sf);
  EXPECT_LT(std::abs(s.mean - expect), 3 * s.stderr_ + 0.005);
}

TEST(Excursion, StrongerSelectionGoesHigher) {
  auto mean_max = [](double s) {
    std::vector<double> v;
    for (int r = 0; r < 3000; ++r) {
      Stream rng = derive_stream({3, r, "sel"});
      v.push_back(sample_excursion(0.01, ModelParams{1, s, 1, 0, 1}, 1e-3, rng, 50.0).maximum());
    }
    return summarize(v);
  };
  Summary weak = mean_max(0.2), strong = mean_max(3.0);
  EXPECT_GT(strong.mean - weak.mean, 3 * std::hypot(strong.stderr_, weak.stderr_));
}

TEST(Droplet, NoMutationStaysEmpty) {
  DropletOptions o;
  o.horizon = 3;
  Stream rng = derive_stream({4, 0, "empty"});
  DropletTrajectory tr = simulate_droplet(ModelParams{1, 1, 1, 0, 1}, o, rng);
  for (double v : tr.total_mass) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(tr.peak_atoms, 0u);
}

TEST(Droplet, SnapshotsAndRecording) {
  DropletOptions o;
  o.horizon = 1;
  o.snapshot_times = {0.0, 0.5, 1.0};
  Stream rng = derive_stream({4, 1, "snap"});
  DropletTrajectory tr = simulate_droplet(kUnit, o, rng);
  ASSERT_EQ(tr.snapshots.size(), 3u);
  EXPECT_TRUE(tr.snapshots[0].empty());
  EXPECT_NEAR(tr.snapshots[2].total_mass(), tr.total_mass.back(), 1e-12);
  EXPECT_DOUBLE_EQ(tr.times.back(), 1.0);
  DropletOptions bad = o;
  bad.eps = 0.5;
  EXPECT_THROW(simulate_droplet(kUnit, bad, rng), std::invalid_argument);
}

TEST(Droplet, MeanMatchesRenewal) {
  DropletOptions o;
  o.horizon = 2;
  RenewalMean ren = renewal_mean_mass(kUnit, 2.0);
  auto ends = parallel_map(1500, [&](std::size_t r) {
    Stream rng = derive_stream({5, static_cast<std::int64_t>(r), "mean"});
    return simulate_droplet(kUnit, o, rng).total_mass.back();
  });
  Summary s = summarize(ends);
  EXPECT_LT(std::abs(s.mean - ren.mean.back()), 3 * s.stderr_) << s.mean << " vs " << ren.mean.back();
}

TEST(Renewal, Cases) {
  RenewalMean zero = renewal_mean_mass(ModelParams{1, 1, 1, 0, 1}, 2.0);
  for (double v : zero.mean) EXPECT_EQ(v, 0.0);
  RenewalMean r = renewal_mean_mass(kUnit, 12.0);
  EXPECT_EQ(r.mean[0], 0.0);
  EXPECT_NEAR(r.mean[1] / 0.01, 1.0, 0.01);
  double a = compute_malthus(kUnit).alpha;
  double w10 = std::exp(-a * 10.0) * r.mean[1000], w12 = std::exp(-a * 12.0) * r.mean.back();
  EXPECT_LT(std::abs(w12 - w10) / w12, 0.02);
}

TEST(Wstar, PositiveVarianceAndPersistence) {
  DropletOptions o;
  o.horizon = 6;
  o.eps = 1e-2;
  auto runs = parallel_map(60, [&](std::size_t r) {
    Stream rng = derive_stream({6, static_cast<std::int64_t>(r), "w"});
    return simulate_droplet(kUnit, o, rng);
  });
  double a = compute_malthus(kUnit).alpha;
  WStarSample w5 = estimate_Wstar(runs, a, 5.0), w6 = estimate_Wstar(runs, a, 6.0);
  EXPECT_GT(w6.summary.variance, 0.0);
  EXPECT_GT(correlation(w5.values, w6.values), 0.9);
  EXPECT_THROW(estimate_Wstar(runs, a, 7.0), std::invalid_argument);
}
