#include <gtest/gtest.h>

#include "mfwf/dual.hpp"
#include "mfwf/malthus.hpp"
#include "mfwf/stats.hpp"
#include "oracles.hpp"

using namespace mfwf;

namespace {
const ModelParams kUnit{1, 1, 1, 1, 1};

// Computed once: every test here needs the same default solution.
const MalthusResult& unit_result() {
  static const MalthusResult r = compute_malthus(kUnit);
  return r;
}
}  // namespace

TEST(Transient, StartsAtZeroAndVanishesWithoutSelection) {
  std::vector<double> grid{0, 0.5, 1, 2};
  auto h = bd_transient_mean(BDChainSpec::site_chain(kUnit, 64), grid);
  EXPECT_EQ(h[0], 0.0);
  ModelParams nos{1, 0, 1, 1, 1};
  for (double v : bd_transient_mean(BDChainSpec::site_chain(nos, 64), grid)) EXPECT_EQ(v, 0.0);
}

TEST(Transient, MatchesRk4Oracle) {
  oracle::Chain ch{1, 1, 1, false, 64};
  auto ref = oracle::chain_curve(ch, 3.0, 0.5, [](int k, double p) { return k >= 2 ? k * p : 0.0; }, 500);
  std::vector<double> grid{0, 0.5, 1, 1.5, 2, 2.5, 3};
  auto h = bd_transient_mean(BDChainSpec::site_chain(kUnit, 64), grid);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(h[i], ref[i], 1e-10);
}

TEST(Transient, MatchesJumpSimulation) {
  oracle::Chain ch{1, 1, 1, false, 1000};
  std::vector<double> grid{0.5, 1.0, 2.0};
  auto h = bd_transient_mean(BDChainSpec::site_chain(kUnit, 64), grid);
  std::mt19937_64 rng(12345);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<double> v;
    for (int r = 0; r < 20000; ++r) {
      int k = oracle::chain_size_at(ch, grid[g], rng);
      v.push_back(k >= 2 ? k : 0.0);
    }
    Summary s = summarize(v);
    EXPECT_LT(std::abs(s.mean - h[g]), 3 * s.stderr_) << grid[g];
  }
}

TEST(Transient, TruncationIsDetected) {
  ModelParams strong{0.1, 5, 0.01, 0, 1};
  std::vector<double> grid{0, 5};
  EXPECT_THROW(bd_transient_mean(BDChainSpec::site_chain(strong, 8), grid), TruncationError);
}

TEST(DualMean, Cases) {
  std::vector<double> grid{0, 0.5, 1, 2, 4};
  auto f = dual_mean_f(kUnit, grid);
  EXPECT_NEAR(f[0], 1.0, 1e-15);
  // s = 0: only the singleton emigrates, so f = e^{-ct}.
  ModelParams nos{1.5, 0, 1, 0, 1};
  auto g = dual_mean_f(nos, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(g[i], std::exp(-1.5 * grid[i]), 1e-12);
}

TEST(DualMean, MatchesJumpSimulation) {
  oracle::Chain ch{1, 1, 1, true, 1000};
  std::vector<double> grid{0, 1.0};
  double f = dual_mean_f(kUnit, grid)[1];
  std::mt19937_64 rng(777);
  std::vector<double> v;
  for (int r = 0; r < 20000; ++r) v.push_back(oracle::chain_size_at(ch, 1.0, rng));
  Summary s = summarize(v);
  EXPECT_LT(std::abs(s.mean - f), 3 * s.stderr_);
}

TEST(Qstar, SumsToOneAndMatchesOracle) {
  for (double a : {0.1, 0.63, 2.0}) {
    SizeDistribution q = equilibrium_qstar(a, kUnit);
    EXPECT_NEAR(q.sum(), 1.0, 1e-12);
    auto ref = oracle::stationary({1, 1, 1, false, 64, a});
    for (int j = 1; j <= 10; ++j) EXPECT_NEAR(q.at(j), ref[j - 1], 1e-10);
  }
}

TEST(Qstar, FluxDecreasesToZero) {
  double prev = std::numeric_limits<double>::infinity();
  for (double a = 0.05; a < 20; a *= 1.5) {
    double f = qstar_flux(a, kUnit);
    EXPECT_LT(f, prev);
    prev = f;
  }
  EXPECT_LT(qstar_flux(1e4, kUnit), 1e-3);
  EXPECT_GT(equilibrium_qstar(1e4, kUnit).at(1), 0.999);
}

TEST(Alpha, UnitCaseMatchesOracles) {
  const MalthusResult& r = unit_result();
  double ref_renewal = oracle::alpha_renewal(1, 1, 1);
  double ref_fixed = oracle::alpha_fixed_point(1, 1, 1);
  EXPECT_NEAR(r.alpha, ref_fixed, 1e-8);
  EXPECT_NEAR(r.alpha_renewal, ref_renewal, 1e-4);
  EXPECT_NEAR(r.alpha_renewal, r.alpha, 1e-3);
  EXPECT_NEAR(r.alpha_dual_renewal, r.alpha, 1e-3);
  EXPECT_GT(r.alpha, 0.0);
  EXPECT_LT(r.alpha, 1.0);
  EXPECT_LT(r.residual_fixed_point, 1e-6);
  EXPECT_LT(r.residual_renewal, 1e-6);
  // Frozen regression value (fixed point, J = 64).
  EXPECT_NEAR(r.alpha, 0.6315710882, 1e-9);
}

TEST(Alpha, TruncationConverged) {
  EXPECT_NEAR(malthusian_fixed_point(kUnit, 128).alpha, unit_result().alpha, 1e-10);
}

TEST(Alpha, RequiresPositiveRates) {
  EXPECT_THROW(malthusian_fixed_point(ModelParams{0, 1, 1, 0, 1}), std::invalid_argument);
  EXPECT_THROW(malthusian_renewal(ModelParams{1, 1, 0, 0, 1}), std::invalid_argument);
}

TEST(StableConstants, Identities) {
  const MalthusResult& r = unit_result();
  StableConstants k = stable_constants(r.u_infty, r.alpha, kUnit);
  EXPECT_DOUBLE_EQ(k.B * kUnit.c, r.alpha + k.gamma);
  EXPECT_GT(1.0 + k.gamma / r.alpha, 1.0);
  EXPECT_NEAR(k.alpha_check, r.alpha, 1e-6);
  EXPECT_NEAR(r.u_infty.sum(), 1.0, 1e-12);
  EXPECT_NEAR(k.gamma, 0.7352361869, 1e-8);
}

TEST(Qstar, MatchesLateCollisionFreeSizes) {
  const MalthusResult& r = unit_result();
  DualOptions o;
  o.horizon = 1e9;
  o.stop_at_sites = 20000;
  Stream rng = derive_stream({11, 0, "late"});
  DualTrajectory tr = simulate_collision_free_dual({1, 1}, kUnit, o, rng);
  AgeSizeRecord rec = age_size_distribution(tr.final_state, tr.final_time);
  EXPECT_LT(total_variation(rec.normalized, r.u_infty.p), 0.05);
}

TEST(Volterra, ExponentialKernel) {
  // x = 1 + int_0^t x: x = e^t.
  double h = 1e-3;
  std::size_t n = 1001;
  auto x = solve_volterra(std::vector<double>(n, 1.0), std::vector<double>(n, 1.0), 1.0, h);
  EXPECT_NEAR(x.back(), std::exp(1.0), 1e-6);
}

TEST(Cmj, MeanSitesGrowAtAlpha) {
  std::vector<double> grid = detail::uniform_grid(20.0, 0.01);
  auto m = cmj_mean_sites(kUnit, grid);
  double a = unit_result().alpha;
  double w18 = std::exp(-a * 18.0) * m[1800], w20 = std::exp(-a * 20.0) * m.back();
  EXPECT_NEAR(w18 / w20, 1.0, 1e-3);
  EXPECT_EQ(m[0], 1.0);
}

TEST(Alpha, ParameterGridCrossMethod) {
  for (double c : {0.5, 2.0})
    for (double s : {0.5, 2.0}) {
      ModelParams p{c, s, 1.0, 0, 1};
      double fp = malthusian_fixed_point(p).alpha;
      double rn = malthusian_renewal(p).alpha;
      EXPECT_NEAR(fp, rn, 1e-3) << c << ' ' << s;
      EXPECT_GT(fp, 0.0);
      EXPECT_LT(fp, s);
    }
}
