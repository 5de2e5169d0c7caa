#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "core.hpp"
#include "random.hpp"
#include "site_step.hpp"

namespace mfwf {

struct ForwardTrajectory {
  std::vector<double> times;
  std::vector<double> mean_mass;
  std::vector<double> total_mass;
  std::vector<Configuration> snapshots;

  void push(const Configuration& config) {
    double total = mfwf::total_mass(config);
    times.push_back(config.time);
    total_mass.push_back(total);
    mean_mass.push_back(total / static_cast<double>(config.size()));
  }
};

struct ForwardOptions {
  double horizon = 1.0;
  double dt = 1e-3;
  int record_every = 1;    // steps between records
  int snapshot_every = 0;  // 0: no snapshots
  Scheme scheme = Scheme::AffineExact;
  // Stop early once the mean reaches this level (the crossing step is recorded).
  std::optional<double> stop_at_mean;

  void validate() const {
    if (!(horizon > 0.0)) throw std::invalid_argument("forward: horizon must be > 0");
    if (!(dt > 0.0)) throw std::invalid_argument("forward: dt must be > 0");
    if (record_every < 1) throw std::invalid_argument("forward: record_every must be >= 1");
    if (snapshot_every < 0) throw std::invalid_argument("forward: snapshot_every must be >= 0");
  }
};

inline SiteRates site_rates(const ModelParams& p) {
  return {p.migration_rate(), p.selection_rate(), p.d, p.mutation_per_site()};
}

/// One step of all sites against the pre-step mean (which includes each site itself).
inline Configuration em_step(const Configuration& config, const ModelParams& params, double dt, Stream& rng,
                             Scheme scheme = Scheme::AffineExact) {
  if (!(dt > 0.0)) throw std::invalid_argument("em_step: dt must be > 0");
  Configuration out = config;
  double target = empirical_mean(config);
  SiteRates r = site_rates(params);
  for (double& x : out.x2) x = site_step(scheme, x, target, r, dt, rng);
  out.time = config.time + dt;
  return out;
}

inline ForwardTrajectory simulate_forward(const ModelParams& params, const ForwardOptions& opt, Stream& rng) {
  params.validate();
  opt.validate();
  Configuration config = Configuration::all_type1(params.n_sites);
  SiteRates r = site_rates(params);
  ForwardTrajectory traj;
  traj.push(config);
  if (opt.snapshot_every > 0) traj.snapshots.push_back(config);

  long steps = std::lround(std::ceil(opt.horizon / opt.dt - 1e-9));
  double sum = 0.0;
  for (long k = 1; k <= steps; ++k) {
    double h = std::min(opt.dt, opt.horizon - config.time);
    if (h <= 0.0) break;
    double target = sum / static_cast<double>(config.size());
    sum = 0.0;
    for (double& x : config.x2) {
      x = site_step(opt.scheme, x, target, r, h, rng);
      sum += x;
    }
    config.time = k == steps ? opt.horizon : static_cast<double>(k) * opt.dt;
    bool stop = opt.stop_at_mean && sum / static_cast<double>(config.size()) >= *opt.stop_at_mean;
    if (k % opt.record_every == 0 || k == steps || stop) traj.push(config);
    if (opt.snapshot_every > 0 && (k % opt.snapshot_every == 0 || k == steps)) traj.snapshots.push_back(config);
    if (stop) break;
  }
  return traj;
}

inline ForwardTrajectory simulate_forward(const ModelParams& params, const ForwardOptions& opt, const SeedSpec& seed) {
  Stream rng = derive_stream(seed);
  return simulate_forward(params, opt, rng);
}

/// Single site with c = d = 0 started at 0: x' = s x (1 - x) + m (1 - x).
inline double deterministic_single_site(double m, double s, double t) {
  if (m < 0.0 || s < 0.0 || (m == 0.0 && s == 0.0)) throw std::invalid_argument("deterministic_single_site: need m,s >= 0, not both 0");
  if (t < 0.0) throw std::invalid_argument("deterministic_single_site: t must be >= 0");
  if (m == 0.0) return 0.0;
  double r = m + s;
  // m (e^{rt} - 1) / (s + m e^{rt}) rewritten to stay finite for large t.
  double em = std::exp(-r * t);
  return m * (1.0 - em) / (s * em + m);
}

/// First time the recorded mean reaches eps, linearly interpolated.
inline std::optional<double> hitting_time(const ForwardTrajectory& traj, double eps) {
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    if (traj.mean_mass[i] >= eps) {
      if (i == 0) return traj.times[0];
      double y0 = traj.mean_mass[i - 1];
      double y1 = traj.mean_mass[i];
      double w = (eps - y0) / (y1 - y0);
      return traj.times[i - 1] + w * (traj.times[i] - traj.times[i - 1]);
    }
  }
  return std::nullopt;
}

/// Linear interpolation of a recorded series; clamps outside the range.
inline double interpolate(const std::vector<double>& times, const std::vector<double>& values, double t) {
  if (times.empty()) throw std::invalid_argument("interpolate: empty series");
  if (t <= times.front()) return values.front();
  if (t >= times.back()) return values.back();
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t i = static_cast<std::size_t>(it - times.begin());
  double w = (t - times[i - 1]) / (times[i] - times[i - 1]);
  return values[i - 1] + w * (values[i] - values[i - 1]);
}

}  // namespace mfwf
