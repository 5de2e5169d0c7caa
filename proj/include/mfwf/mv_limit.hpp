#pragma once

// Mean-field (McKean-Vlasov) limit: particle ensemble, moment duality,
// entrance laws from small initial mass, the occupied-fraction/size-law ODE
// pair (u, U) and its standard solution, and tagged sites driven by a given
// mean curve.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include <boost/numeric/odeint/integrate/integrate_times.hpp>
#include <boost/numeric/odeint/stepper/generation.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_dopri5.hpp>

#include "core.hpp"
#include "dual.hpp"
#include "forward.hpp"
#include "malthus.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "site_step.hpp"
#include "stats.hpp"

namespace mfwf {

struct MeanCurve {
  std::vector<double> times;
  std::vector<double> values;

  double at(double t) const { return interpolate(times, values, t); }
};

struct EnsembleResult {
  MeanCurve mean;
  std::vector<double> terminal;
};

/// M members of dy = c (mean - y) dt + s y (1-y) dt + sqrt(d y (1-y)) dW, the mean
/// recomputed from the members every step.
inline EnsembleResult mv_ensemble_simulate(const ModelParams& params, std::vector<double> members, double horizon, double dt,
                                           Stream& rng, int record_every = 1) {
  params.validate();
  if (members.size() < 2) throw std::invalid_argument("mv_ensemble: need M >= 2 members");
  for (double v : members)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("mv_ensemble: initial member outside [0,1]");
  if (!(horizon > 0.0 && dt > 0.0)) throw std::invalid_argument("mv_ensemble: need T > 0 and dt > 0");
  if (record_every < 1) throw std::invalid_argument("mv_ensemble: record_every must be >= 1");
  SiteRates r{params.migration_rate(), params.selection_rate(), params.d, 0.0};
  EnsembleResult out;
  double mean = empirical_mean(members);
  out.mean.times.push_back(0.0);
  out.mean.values.push_back(mean);
  long steps = std::lround(std::ceil(horizon / dt - 1e-9));
  for (long k = 1; k <= steps; ++k) {
    double h = std::min(dt, horizon - static_cast<double>(k - 1) * dt);
    double sum = 0.0;
    for (double& y : members) {
      y = affine_site_step(y, mean, r, h, rng);
      sum += y;
    }
    mean = sum / static_cast<double>(members.size());
    if (k % record_every == 0 || k == steps) {
      out.mean.times.push_back(k == steps ? horizon : static_cast<double>(k) * dt);
      out.mean.values.push_back(mean);
    }
  }
  out.terminal = std::move(members);
  return out;
}

inline EnsembleResult mv_ensemble_simulate(const ModelParams& params, int M, double theta, double horizon, double dt, Stream& rng,
                                           int record_every = 1) {
  if (M < 2) throw std::invalid_argument("mv_ensemble: need M >= 2 members");
  return mv_ensemble_simulate(params, std::vector<double>(static_cast<std::size_t>(M), theta), horizon, dt, rng, record_every);
}

enum class MomentDual {
  CollisionFree,  // every migrant lands on a fresh independent site started at theta
  FrozenMean,     // migrants freeze on a reservoir held at theta
};

struct MomentEstimate {
  double value = 0.0;
  double se = 0.0;
};

namespace detail {

inline double binomial(int n, int k) {
  double b = 1.0;
  for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
  return b;
}

// Final (site 0 count, reservoir count) of the frozen-reservoir dual from j particles.
inline std::pair<long, long> frozen_dual_counts(int j, const ModelParams& p, double t, Stream& rng) {
  double c = p.migration_rate(), s = p.selection_rate(), d = p.d;
  long z = j, frozen = 0;
  double now = 0.0;
  for (;;) {
    double birth = s * z, coal = 0.5 * d * z * (z - 1), mig = c * z;
    double total = birth + coal + mig;
    if (total <= 0.0) break;
    now += exponential(rng, total);
    if (now > t) break;
    double u = uniform01(rng) * total;
    if (u < birth)
      ++z;
    else if (u < birth + coal)
      --z;
    else {
      --z;
      ++frozen;
    }
  }
  return {z, frozen};
}

}  // namespace detail

/// E[x2(t)^k] under the mean-field dynamics from the constant state theta.
inline MomentEstimate mv_dual_moment(double theta, int k, double t, const ModelParams& params, int reps, const SeedSpec& seed,
                                     MomentDual mode = MomentDual::CollisionFree) {
  params.validate();
  if (reps < 2) throw std::invalid_argument("mv_dual_moment: reps must be >= 2");
  if (k < 1) throw std::invalid_argument("mv_dual_moment: k must be >= 1");
  if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("mv_dual_moment: theta outside [0,1]");
  if (t < 0.0) throw std::invalid_argument("mv_dual_moment: t must be >= 0");
  if (theta == 1.0) return {1.0, 0.0};
  if (t == 0.0) return {std::pow(theta, k), 0.0};
  double base = 1.0 - theta;
  // E[x2^k] = sum_j C(k,j) (-1)^j E[x1^j], each E[x1^j] from its own dual runs.
  MomentEstimate out;
  double var = 0.0;
  out.value = 1.0;
  for (int j = 1; j <= k; ++j) {
    SeedSpec sj = seed.with_label(seed.stream_label + "/moment" + std::to_string(j));
    auto vals = parallel_map(static_cast<std::size_t>(reps), [&](std::size_t i) {
      Stream rng = derive_stream(sj.with_replica(static_cast<std::int64_t>(i)));
      if (mode == MomentDual::FrozenMean) {
        auto [z, frozen] = detail::frozen_dual_counts(j, params, t, rng);
        return std::pow(base, static_cast<double>(z + frozen));
      }
      DualOptions o;
      o.horizon = t;
      DualTrajectory tr = simulate_collision_free_dual(DualInit{j, 1}, params, o, rng);
      return std::pow(base, static_cast<double>(tr.final_state.total()));
    });
    Summary sm = summarize(vals);
    double coef = detail::binomial(k, j) * (j % 2 ? -1.0 : 1.0);
    out.value += coef * sm.mean;
    var += coef * coef * sm.stderr_ * sm.stderr_;
  }
  out.se = std::sqrt(var);
  return out;
}

struct EntranceCurve {
  double start = 0.0;     // initial constant state a_n
  double crossing = 0.0;  // time the mean reaches 1/2
  MeanCurve recentred;    // time shifted so the crossing is at 0
  double scaled_level = 0.0;  // average of e^{alpha |t|} mean(t) over the scaled window
};

struct EntranceLaw {
  std::vector<EntranceCurve> curves;
  double window_lo = -4.0, window_hi = -2.0;
  // Relative change of scaled_level between the two smallest starts.
  double stabilization = 0.0;
};

inline EntranceLaw entrance_law_construct(const ModelParams& params, int M, double dt, const std::vector<double>& starts,
                                          double alpha, double horizon, const SeedSpec& seed, int record_every = 1,
                                          double window_lo = -4.0, double window_hi = -2.0) {
  if (starts.empty()) throw std::invalid_argument("entrance_law: empty start sequence");
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (!(starts[i] > 0.0 && starts[i] < 0.5)) throw std::invalid_argument("entrance_law: starts must lie in (0, 1/2)");
    if (i > 0 && !(starts[i] < starts[i - 1])) throw std::invalid_argument("entrance_law: starts must decrease");
  }
  EntranceLaw law;
  law.window_lo = window_lo;
  law.window_hi = window_hi;
  law.curves = parallel_map(starts.size(), [&](std::size_t i) {
    Stream rng = derive_stream(seed.with_replica(static_cast<std::int64_t>(i)));
    EnsembleResult run = mv_ensemble_simulate(params, M, starts[i], horizon, dt, rng, record_every);
    EntranceCurve curve;
    curve.start = starts[i];
    ForwardTrajectory view;
    view.times = run.mean.times;
    view.mean_mass = run.mean.values;
    auto cross = hitting_time(view, 0.5);
    if (!cross) throw std::runtime_error("entrance_law: mean never reaches 1/2 within the horizon");
    curve.crossing = *cross;
    for (std::size_t j = 0; j < run.mean.times.size(); ++j) {
      curve.recentred.times.push_back(run.mean.times[j] - *cross);
      curve.recentred.values.push_back(run.mean.values[j]);
    }
    double acc = 0.0;
    int n = 0;
    for (std::size_t j = 0; j < curve.recentred.times.size(); ++j) {
      double tt = curve.recentred.times[j];
      if (tt >= window_lo && tt <= window_hi) {
        acc += std::exp(alpha * std::abs(tt)) * curve.recentred.values[j];
        ++n;
      }
    }
    curve.scaled_level = n > 0 ? acc / n : std::numeric_limits<double>::quiet_NaN();
    return curve;
  });
  if (law.curves.size() >= 2) {
    double a = law.curves[law.curves.size() - 2].scaled_level, b = law.curves.back().scaled_level;
    law.stabilization = std::abs(a - b) / std::abs(b);
  }
  return law;
}

struct UUState {
  double time = 0.0;
  double u = 0.0;
  SizeDistribution U;

  double alpha_t(double c) const { return c * U.multi_mass(); }
  double gamma_t(double c) const { return c * U.at(1); }
  double b_t(double c) const { return 1.0 + gamma_t(c) / alpha_t(c); }
};

struct UUOptions {
  int J = 64;
  double tol = 1e-10;
  double record_step = 0.01;
  std::optional<std::pair<double, double>> frozen_rates;  // (alpha, gamma) held fixed in the u-equation
};

namespace detail {

// State vector y = (log u, U_1, ..., U_J); log u keeps relative accuracy while
// u is of order e^{alpha t0}. u = 0 is invariant and is carried as a flag.
// Births out of J and the size shift at J are suppressed so the truncated
// flow keeps sum U fixed.
struct UUSystem {
  double c, s, d;
  int J;
  std::optional<std::pair<double, double>> frozen;
  bool zero_u = false;

  void operator()(const std::vector<double>& y, std::vector<double>& dy, double) const {
    double u = zero_u ? 0.0 : std::exp(y[0]);
    const double* U = y.data() + 1;
    double* dU = dy.data() + 1;
    double alpha = 0.0;
    for (int j = 2; j <= J; ++j) alpha += j * U[j - 1];
    alpha *= c;
    double gamma = c * U[0];
    double au = frozen ? frozen->first : alpha;
    double gu = frozen ? frozen->second : gamma;
    dy[0] = zero_u ? 0.0 : au * (1.0 - u) - gu * u;
    double shift = u * (alpha + gamma);
    double decay = alpha * (1.0 - u) - gamma * u;
    for (int j = 1; j <= J; ++j) {
      double Uj = U[j - 1];
      double Um = j > 1 ? U[j - 2] : 0.0;
      double Up = j < J ? U[j] : 0.0;
      double v = 0.0;
      v += (j > 1 ? s * (j - 1) * Um : 0.0) - (j < J ? s * j * Uj : 0.0);
      v += 0.5 * d * (j + 1) * j * Up - 0.5 * d * j * (j - 1) * Uj;
      v += c * (j + 1) * Up - (j > 1 ? c * j * Uj : 0.0);
      if (j == 1) v -= c * u * Uj;
      v += shift * ((j > 1 ? Um : 0.0) - (j < J ? Uj : 0.0));
      if (j == 1) v += (1.0 - u) * alpha;
      v -= decay * Uj;
      dU[j - 1] = v;
    }
  }
};

}  // namespace detail

struct UUTrajectory {
  std::vector<UUState> states;
  double max_sum_drift = 0.0;  // largest |sum U - 1| seen
};

inline UUTrajectory uU_integrate(const UUState& init, const ModelParams& params, double horizon, const UUOptions& opt = {}) {
  namespace odeint = boost::numeric::odeint;
  params.validate();
  if (!(horizon > init.time)) throw std::invalid_argument("uU_integrate: horizon must exceed the initial time");
  if (!(init.u >= 0.0 && init.u <= 1.0)) throw std::invalid_argument("uU_integrate: u outside [0,1]");
  if (std::abs(init.U.sum() - 1.0) > 1e-9) throw std::invalid_argument("uU_integrate: U must be a probability vector");
  if (opt.J < 2) throw std::invalid_argument("uU_integrate: J must be >= 2");
  for (std::size_t i = static_cast<std::size_t>(opt.J); i < init.U.p.size(); ++i)
    if (init.U.p[i] > 1e-10) throw TruncationError("uU_integrate: initial U has mass beyond J");

  std::vector<double> y(static_cast<std::size_t>(opt.J) + 1, 0.0);
  bool zero_u = init.u == 0.0;
  y[0] = zero_u ? 0.0 : std::log(init.u);
  for (int j = 1; j <= opt.J && j <= static_cast<int>(init.U.p.size()); ++j) y[static_cast<std::size_t>(j)] = init.U.p[static_cast<std::size_t>(j - 1)];

  std::vector<double> grid;
  long n = std::lround(std::ceil((horizon - init.time) / opt.record_step - 1e-9));
  for (long i = 0; i < n; ++i) grid.push_back(init.time + static_cast<double>(i) * opt.record_step);
  grid.push_back(horizon);

  detail::UUSystem sys{params.migration_rate(), params.selection_rate(), params.d, opt.J, opt.frozen_rates, zero_u};
  UUTrajectory out;
  auto observe = [&](const std::vector<double>& v, double t) {
    UUState st;
    st.time = t;
    st.u = zero_u ? 0.0 : std::exp(v[0]);
    st.U.p.assign(v.begin() + 1, v.end());
    double sum = st.U.sum();
    out.max_sum_drift = std::max(out.max_sum_drift, std::abs(sum - 1.0));
    if (st.U.p.back() > 1e-10) throw TruncationError("uU_integrate: mass at size J exceeds 1e-10; increase J");
    out.states.push_back(std::move(st));
  };
  auto stepper = odeint::make_dense_output(opt.tol, opt.tol, odeint::runge_kutta_dopri5<std::vector<double>>());
  odeint::integrate_times(stepper, sys, y, grid.begin(), grid.end(), std::min(opt.record_step, 1e-3), observe);
  return out;
}

/// Logistic solution with a correction factor: e^{a t} I(t) / (1 + b e^{a t} I(t)).
inline double u_hat_closed_form(double alpha, double b, double t, const std::function<double(double)>& correction = {}) {
  if (!(alpha > 0.0 && b > 0.0)) throw std::invalid_argument("u_hat_closed_form: need alpha, b > 0");
  double i = correction ? correction(t) : 1.0;
  double e = std::exp(alpha * t) * i;
  if (!std::isfinite(e)) return 1.0 / b;
  return e / (1.0 + b * e);
}

struct StandardSolution {
  UUTrajectory path;
  double alpha = 0.0;
  double t0 = 0.0;
  double u_at_zero = 0.0;
  double t0_sensitivity = 0.0;  // |u*(0) from t0 - u*(0) from 2 t0|
  double fixed_point_residual = 0.0;  // |alpha(T)(1-u) - gamma(T) u| at the horizon

  double u_at(double t) const {
    std::vector<double> ts, us;
    for (const auto& s : path.states) {
      ts.push_back(s.time);
      us.push_back(s.u);
    }
    return interpolate(ts, us, t);
  }
  // Nearest recorded size law, clamped to the recorded range.
  const SizeDistribution& U_at(double t) const {
    const auto& st = path.states;
    auto it = std::lower_bound(st.begin(), st.end(), t, [](const UUState& a, double v) { return a.time < v; });
    if (it == st.end()) return st.back().U;
    if (it != st.begin() && t - std::prev(it)->time < it->time - t) --it;
    return it->U;
  }
};

/// Solution with e^{-alpha t} u*(t) -> 1 backward, built from u(t0) = e^{alpha t0}, U(t0) = q*(alpha).
inline StandardSolution u_standard_solution(const ModelParams& params, double alpha, const SizeDistribution& u_infty, double t0,
                                            double horizon, UUOptions opt = {}, bool check_sensitivity = true) {
  if (!(alpha > 0.0)) throw std::invalid_argument("u_standard_solution: alpha must be > 0");
  if (t0 > -10.0 / alpha) throw std::invalid_argument("u_standard_solution: t0 must be <= -10/alpha");
  if (!(horizon > 0.0)) throw std::invalid_argument("u_standard_solution: horizon must be > 0");
  auto run = [&](double start) {
    UUState init;
    init.time = start;
    init.u = std::exp(alpha * start);
    init.U = u_infty;
    return uU_integrate(init, params, horizon, opt);
  };
  StandardSolution sol;
  sol.alpha = alpha;
  sol.t0 = t0;
  sol.path = run(t0);
  sol.u_at_zero = sol.u_at(0.0);
  const UUState& last = sol.path.states.back();
  double c = params.migration_rate();
  sol.fixed_point_residual = std::abs(last.alpha_t(c) * (1.0 - last.u) - last.gamma_t(c) * last.u);
  if (check_sensitivity) {
    StandardSolution twice = u_standard_solution(params, alpha, u_infty, 2.0 * t0, 0.5, opt, false);
    sol.t0_sensitivity = std::abs(twice.u_at_zero - sol.u_at_zero);
  }
  return sol;
}

struct TaggedPaths {
  std::vector<double> times;
  std::vector<std::vector<double>> paths;  // paths[l][step]

  std::vector<double> mean_path() const {
    std::vector<double> m(times.size(), 0.0);
    for (const auto& p : paths)
      for (std::size_t i = 0; i < p.size(); ++i) m[i] += p[i];
    for (double& v : m) v /= static_cast<double>(paths.size());
    return m;
  }
};

/// L independent sites driven by a prescribed mean curve, over the curve's time span.
inline TaggedPaths tagged_sites_simulate(const MeanCurve& mean, const ModelParams& params, int L, double dt, Stream& rng,
                                         double start_value = 0.0, std::optional<double> horizon = std::nullopt) {
  params.validate();
  if (L < 1) throw std::invalid_argument("tagged_sites: L must be >= 1");
  if (mean.times.size() < 2) throw std::invalid_argument("tagged_sites: mean curve needs >= 2 points");
  double t_begin = mean.times.front();
  double t_end = horizon.value_or(mean.times.back());
  if (t_end > mean.times.back() + 1e-12 || t_end <= t_begin) throw std::invalid_argument("tagged_sites: horizon outside the mean curve");
  SiteRates r{params.migration_rate(), params.selection_rate(), params.d, 0.0};
  long steps = std::lround(std::ceil((t_end - t_begin) / dt - 1e-9));
  TaggedPaths out;
  out.times.push_back(t_begin);
  for (long k = 1; k <= steps; ++k) out.times.push_back(k == steps ? t_end : t_begin + static_cast<double>(k) * dt);
  out.paths.assign(static_cast<std::size_t>(L), std::vector<double>(out.times.size(), start_value));
  for (auto& path : out.paths) {
    double y = start_value;
    for (long k = 1; k <= steps; ++k) {
      double t = out.times[static_cast<std::size_t>(k - 1)];
      double h = out.times[static_cast<std::size_t>(k)] - t;
      y = affine_site_step(y, mean.at(t), r, h, rng);
      path[static_cast<std::size_t>(k)] = y;
    }
  }
  return out;
}

}  // namespace mfwf
