#include <gtest/gtest.h>

#include <iomanip>

#include "mfwf/malthus.hpp"
#include "mfwf/mv_limit.hpp"
#include "mfwf/stats.hpp"

using namespace mfwf;

namespace {
const ModelParams kUnit{1, 1, 1, 0, 1};

const MalthusResult& unit_result() {
  static const MalthusResult r = compute_malthus(kUnit);
  return r;
}
}  // namespace

TEST(Ensemble, AbsorbingStarts) {
  Stream rng = derive_stream({1, 0, "e"});
  for (double v : mv_ensemble_simulate(kUnit, 50, 0.0, 2, 0.01, rng).mean.values) EXPECT_EQ(v, 0.0);
  for (double v : mv_ensemble_simulate(kUnit, 50, 1.0, 2, 0.01, rng).mean.values) EXPECT_EQ(v, 1.0);
  EXPECT_THROW(mv_ensemble_simulate(kUnit, 1, 0.5, 1, 0.01, rng), std::invalid_argument);
}

TEST(Moment, TrivialCases) {
  EXPECT_EQ(mv_dual_moment(1.0, 3, 1.0, kUnit, 10, {1, 0, "m"}).value, 1.0);
  EXPECT_EQ(mv_dual_moment(0.3, 1, 0.0, kUnit, 10, {1, 0, "m"}).value, 0.3);
  ModelParams mig{2, 0, 0, 0, 1};
  for (MomentDual mode : {MomentDual::CollisionFree, MomentDual::FrozenMean}) {
    MomentEstimate e = mv_dual_moment(0.3, 1, 2.0, mig, 200, {1, 0, "m"}, mode);
    EXPECT_NEAR(e.value, 0.3, 1e-12);
  }
}

TEST(Moment, EnsembleMatchesDual) {
  double theta = 0.3, t = 1.0;
  int M = 20000;
  Stream rng = derive_stream({2, 0, "ens"});
  EnsembleResult run = mv_ensemble_simulate(kUnit, M, theta, t, 0.005, rng, 1000);
  for (int k : {1, 2}) {
    std::vector<double> pw;
    for (double y : run.terminal) pw.push_back(std::pow(y, k));
    Summary s = summarize(pw);
    MomentEstimate d = mv_dual_moment(theta, k, t, kUnit, 20000, {2, 0, "dual"});
    EXPECT_LT(std::abs(s.mean - d.value), 3 * std::hypot(s.stderr_, d.se)) << k;
  }
}

TEST(Entrance, RecentredAndMonotone) {
  double a = unit_result().alpha;
  EntranceLaw law = entrance_law_construct(kUnit, 2000, 0.01, {0.01, 0.001}, a, 40, {3, 0, "el"}, 5);
  for (const auto& c : law.curves) {
    EXPECT_NEAR(c.recentred.at(0.0), 0.5, 1e-9);
    // Monotone up to ensemble noise of order 1/sqrt(M).
    double run_max = 0.0;
    for (double v : c.recentred.values) {
      EXPECT_GT(v, run_max - 0.03);
      run_max = std::max(run_max, v);
    }
  }
  EXPECT_LT(law.stabilization, 0.2);
  EXPECT_THROW(entrance_law_construct(kUnit, 100, 0.01, {0.001, 0.01}, a, 10, {3, 0, "el"}), std::invalid_argument);
}

TEST(UU, StationaryFromZero) {
  const MalthusResult& r = unit_result();
  UUState init;
  init.u = 0.0;
  init.U = r.u_infty;
  UUOptions opt;
  opt.record_step = 0.5;
  UUTrajectory tr = uU_integrate(init, kUnit, 10.0, opt);
  for (const auto& st : tr.states) {
    EXPECT_EQ(st.u, 0.0);
    EXPECT_LT(total_variation(st.U.p, r.u_infty.p), 1e-9);
  }
}

TEST(UU, ProbabilityVectorPreserved) {
  const MalthusResult& r = unit_result();
  UUState init;
  init.u = 0.2;
  init.U = r.u_infty;
  UUTrajectory tr = uU_integrate(init, kUnit, 5.0);
  EXPECT_LT(tr.max_sum_drift, 1e-9 * 5.0);
  for (const auto& st : tr.states)
    for (double p : st.U.p) EXPECT_GE(p, -1e-9);  // a few absolute tolerances of the integrator
}

TEST(UU, FrozenRatesGiveLogistic) {
  const MalthusResult& r = unit_result();
  double a = r.alpha, g = r.gamma, b = 1 + g / a;
  UUState init;
  init.time = -5.0;
  init.u = u_hat_closed_form(a, b, -5.0);
  init.U = r.u_infty;
  UUOptions opt;
  opt.frozen_rates = std::make_pair(a, g);
  opt.record_step = 0.25;
  UUTrajectory tr = uU_integrate(init, kUnit, 5.0, opt);
  for (const auto& st : tr.states) EXPECT_NEAR(st.u, u_hat_closed_form(a, b, st.time), 1e-8) << st.time;
}

TEST(UHat, Limits) {
  double a = 0.6, b = 2.0;
  EXPECT_NEAR(u_hat_closed_form(a, b, 0.0), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(u_hat_closed_form(a, b, -40.0) / std::exp(-24.0), 1.0, 1e-9);
  EXPECT_NEAR(u_hat_closed_form(a, b, 200.0), 0.5, 1e-12);
  EXPECT_NEAR(u_hat_closed_form(a, b, 1e5), 0.5, 1e-12);
  EXPECT_THROW(u_hat_closed_form(0, 1, 0), std::invalid_argument);
}

TEST(Standard, EarlyRegimeAndConvergence) {
  const MalthusResult& r = unit_result();
  double a = r.alpha;
  StandardSolution sol = u_standard_solution(kUnit, a, r.u_infty, -20.0 / a, 30.0);
  for (const auto& st : sol.path.states) {
    if (st.time > sol.t0 + 2) break;
    double ratio = std::exp(-a * st.time) * st.u;
    EXPECT_GE(ratio, 0.95);
    EXPECT_LE(ratio, 1.0 + 1e-9) << std::setprecision(17) << ratio - 1 << " at " << st.time;
  }
  EXPECT_LT(sol.fixed_point_residual, 1e-6);
  EXPECT_LT(sol.t0_sensitivity, 1e-4);
  EXPECT_LT(sol.path.max_sum_drift, 1e-9 * (30.0 - sol.t0));
  EXPECT_NEAR(sol.u_at_zero, 0.49365, 1e-4);
  EXPECT_EQ(sol.U_at(sol.t0 - 1.0).p, sol.path.states.front().U.p);
  EXPECT_EQ(sol.U_at(1e6).p, sol.path.states.back().U.p);
  EXPECT_THROW(u_standard_solution(kUnit, a, r.u_infty, -1.0, 1.0), std::invalid_argument);
}

TEST(Tagged, ZeroMeanAndFullMean) {
  MeanCurve zero{{0, 5}, {0, 0}};
  Stream rng = derive_stream({4, 0, "tag"});
  TaggedPaths z = tagged_sites_simulate(zero, kUnit, 20, 0.01, rng);
  for (const auto& p : z.paths)
    for (double v : p) EXPECT_EQ(v, 0.0);
  MeanCurve one{{0, 5}, {1, 1}};
  TaggedPaths o = tagged_sites_simulate(one, kUnit, 500, 0.01, rng);
  auto mp = o.mean_path();
  EXPECT_LT(mp[100], mp[300]);
  EXPECT_LT(mp[300], mp.back());
  EXPECT_GT(mp.back(), 0.9);
}

TEST(Tagged, ReproducesEnsembleMean) {
  Stream rng = derive_stream({5, 0, "self"});
  EnsembleResult run = mv_ensemble_simulate(kUnit, 5000, 0.05, 4.0, 0.01, rng);
  TaggedPaths tp = tagged_sites_simulate(run.mean, kUnit, 2000, 0.01, rng, 0.05);
  std::vector<double> last;
  for (const auto& p : tp.paths) last.push_back(p.back());
  Summary s = summarize(last);
  EXPECT_LT(std::abs(s.mean - run.mean.values.back()), 3 * s.stderr_ + 3 * std::sqrt(0.25 / 5000));
}
