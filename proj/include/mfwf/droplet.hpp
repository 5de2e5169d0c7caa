#pragma once

// Droplet dynamics: sparse sites carrying type-2 mass, each following the
// single-site diffusion with emigration but no immigration,
//   dx = (-c x + s x (1-x)) dt + sqrt(d x (1-x)) dW,
// while new excursions are seeded at rate (m + c * total mass) from the
// excursion law, approximated by paths started at eps weighted 1 / S(eps).

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "core.hpp"
#include "forward.hpp"
#include "malthus.hpp"
#include "random.hpp"
#include "site_step.hpp"
#include "stats.hpp"

namespace mfwf {

inline double scale_density(const ModelParams& p, double x) {
  return std::exp(-2.0 * p.selection_rate() * x / p.d) * std::pow(1.0 - x, -2.0 * p.migration_rate() / p.d);
}

namespace detail {

inline void check_scale_args(const ModelParams& p, double x) {
  p.validate();
  if (!(p.d > 0.0)) throw std::invalid_argument("scale function: need d > 0");
  if (!(x >= 0.0 && x < 1.0)) throw std::invalid_argument("scale function: argument must lie in [0, 1)");
}

inline double scale_piece(const ModelParams& p, double a, double b) {
  if (b <= a) return 0.0;
  auto f = [&](double y) { return scale_density(p, y); };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 8, 1e-12);
}

}  // namespace detail

/// S(x) = int_0^x S'(y) dy.
inline double scale_value(const ModelParams& p, double x) {
  detail::check_scale_args(p, x);
  return detail::scale_piece(p, 0.0, x);
}

struct ScaleTable {
  std::vector<double> grid;
  std::vector<double> values;

  // Linear interpolation; exact at grid points.
  double at(double x) const { return interpolate(grid, values, x); }
};

inline ScaleTable scale_function(const ModelParams& p, const std::vector<double>& grid) {
  if (grid.empty() || !std::is_sorted(grid.begin(), grid.end())) throw std::invalid_argument("scale_function: need a sorted grid");
  for (double x : grid) detail::check_scale_args(p, x);
  ScaleTable t;
  t.grid = grid;
  double acc = 0.0, prev = 0.0;
  for (double x : grid) {
    acc += detail::scale_piece(p, prev, x);
    prev = x;
    t.values.push_back(acc);
  }
  return t;
}

struct ExcursionPath {
  double birth_time = 0.0;
  double death_time = 0.0;  // first step below the absorption level, or the horizon
  std::vector<double> times;
  std::vector<double> values;
  double weight = 0.0;  // 1 / S(eps)
  bool absorbed = false;
  double maximum() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }
};

inline SiteRates excursion_rates(const ModelParams& p) { return {p.migration_rate(), p.selection_rate(), p.d, 0.0}; }

inline ExcursionPath sample_excursion(double eps, const ModelParams& params, double dt, Stream& rng, double horizon = 100.0) {
  if (!(eps > 0.0 && eps < 0.1)) throw std::invalid_argument("sample_excursion: eps must lie in (0, 0.1)");
  if (!(dt > 0.0 && horizon > 0.0)) throw std::invalid_argument("sample_excursion: need dt, horizon > 0");
  SiteRates r = excursion_rates(params);
  ExcursionPath path;
  path.weight = 1.0 / scale_value(params, eps);
  path.times.push_back(0.0);
  path.values.push_back(eps);
  double x = eps, t = 0.0, floor = eps / 100.0;
  while (t < horizon) {
    double h = std::min(dt, horizon - t);
    x = affine_site_step(x, 0.0, r, h, rng);
    t += h;
    path.times.push_back(t);
    path.values.push_back(x);
    if (x < floor) {
      path.absorbed = true;
      break;
    }
  }
  path.death_time = t;
  return path;
}

struct DropletTrajectory {
  std::vector<double> times;
  std::vector<double> total_mass;
  std::vector<double> snapshot_times;
  std::vector<AtomicMeasure> snapshots;
  long atom_steps = 0;
  std::size_t peak_atoms = 0;

  double mass_at(double t) const { return interpolate(times, total_mass, t); }
};

struct DropletOptions {
  double horizon = 5.0;
  double eps = 1e-3;
  double dt = 1e-2;
  double record_step = 0.1;
  std::vector<double> snapshot_times;

  void validate() const {
    if (!(horizon > 0.0 && dt > 0.0 && record_step > 0.0)) throw std::invalid_argument("droplet: need T, dt, record step > 0");
    if (!(eps > 0.0 && eps < 0.1)) throw std::invalid_argument("droplet: eps must lie in (0, 0.1)");
    if (!std::is_sorted(snapshot_times.begin(), snapshot_times.end())) throw std::invalid_argument("droplet: snapshot times must be sorted");
  }
};

/// Exact spawning of eps-excursions over one step of length h with frozen
/// coefficients: only excursions still positive at the end of the step are
/// drawn (Poisson thinning), each with its within-step law.
class ExcursionSpawner {
 public:
  ExcursionSpawner(const ModelParams& p, double eps, double h) : eps_(eps), h_(h) {
    double c = p.migration_rate(), s = p.selection_rate();
    sigma2_ = p.d * (1.0 - eps);
    b_ = s * (1.0 - eps) - c;
    scale_eps_ = scale_value(p, eps);
    if (sigma2_ <= 0.0) throw std::invalid_argument("droplet: need d > 0");
    auto surv = [&](double tau) { return survival(tau); };
    mean_survival_ = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(surv, 0.0, h, 8, 1e-10) / h;
  }

  double scale_eps() const { return scale_eps_; }
  double mean_survival() const { return mean_survival_; }

  // Expected number of surviving spawns in one step at intensity q.
  double expected(double q) const { return q * h_ * mean_survival_ / scale_eps_; }

  void spawn(double q, Stream& rng, std::vector<Atom>& atoms) const {
    long n = poisson(rng, expected(q));
    for (long i = 0; i < n; ++i) {
      double tau;
      do {
        tau = h_ * uniform01(rng);
      } while (uniform01(rng) >= survival(tau));
      double lam = intensity(tau);
      long count = zero_truncated_poisson(lam, rng);
      double mass = std::min(1.0, 0.5 * sigma2_ * detail::affine_phi(b_, tau) * gamma_unit(rng, static_cast<double>(count)));
      atoms.push_back({uniform01(rng), mass});
    }
  }

 private:
  // Poisson parameter of the Gamma mixture after time tau from eps.
  double intensity(double tau) const {
    if (tau <= 0.0) return std::numeric_limits<double>::infinity();
    return eps_ * std::exp(b_ * tau) / (0.5 * sigma2_ * detail::affine_phi(b_, tau));
  }
  double survival(double tau) const { return -std::expm1(-intensity(tau)); }

  static long zero_truncated_poisson(double lam, Stream& rng) {
    if (lam > 5.0) {
      long k;
      do k = poisson(rng, lam);
      while (k == 0);
      return k;
    }
    double u = uniform01(rng) * -std::expm1(-lam);
    double term = lam * std::exp(-lam);
    long k = 1;
    double cum = term;
    while (u > cum && k < 1000) {
      ++k;
      term *= lam / static_cast<double>(k);
      cum += term;
    }
    return k;
  }

  double eps_, h_, sigma2_, b_, scale_eps_, mean_survival_;
};

inline DropletTrajectory simulate_droplet(const ModelParams& params, const DropletOptions& opt, Stream& rng,
                                          const AtomicMeasure& init = {}) {
  params.validate();
  opt.validate();
  init.validate();
  SiteRates r = excursion_rates(params);
  ExcursionSpawner spawner(params, opt.eps, opt.dt);
  double floor = opt.eps / 100.0;
  double c = params.migration_rate();

  std::vector<Atom> atoms = init.atoms;
  double mass = 0.0;
  for (const auto& a : atoms) mass += a.mass;

  DropletTrajectory traj;
  traj.times.push_back(0.0);
  traj.total_mass.push_back(mass);
  std::size_t next_snap = 0;
  auto snap = [&](double t) {
    while (next_snap < opt.snapshot_times.size() && opt.snapshot_times[next_snap] <= t + 1e-9) {
      traj.snapshot_times.push_back(opt.snapshot_times[next_snap++]);
      traj.snapshots.push_back(AtomicMeasure{atoms});
    }
  };
  snap(0.0);

  long steps = std::lround(std::ceil(opt.horizon / opt.dt - 1e-9));
  long record_every = std::max(1L, std::lround(opt.record_step / opt.dt));
  for (long k = 1; k <= steps; ++k) {
    double h = std::min(opt.dt, opt.horizon - static_cast<double>(k - 1) * opt.dt);
    double q = params.m + c * mass;
    std::size_t live = 0;
    double next_mass = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      double x = affine_site_step(atoms[i].mass, 0.0, r, h, rng);
      if (x >= floor) {
        atoms[live] = {atoms[i].location, x};
        next_mass += x;
        ++live;
      }
    }
    traj.atom_steps += static_cast<long>(atoms.size());
    atoms.resize(live);
    std::size_t before = atoms.size();
    if (std::abs(h - opt.dt) <= 1e-12 * opt.dt)
      spawner.spawn(q, rng, atoms);
    else
      ExcursionSpawner(params, opt.eps, h).spawn(q, rng, atoms);
    for (std::size_t i = before; i < atoms.size(); ++i) {
      if (atoms[i].mass < floor) {
        atoms[i] = atoms.back();
        atoms.pop_back();
        --i;
      } else {
        next_mass += atoms[i].mass;
      }
    }
    mass = next_mass;
    traj.peak_atoms = std::max(traj.peak_atoms, atoms.size());
    double t = k == steps ? opt.horizon : static_cast<double>(k) * opt.dt;
    if (k % record_every == 0 || k == steps) {
      traj.times.push_back(t);
      traj.total_mass.push_back(mass);
    }
    snap(t);
  }
  return traj;
}

struct RenewalMean {
  std::vector<double> times;
  std::vector<double> mean;
};

/// Mean droplet mass from m(t) = g(t) + m int_0^t f + c int_0^t m(r) f(t-r) dr.
/// g is the linearized contribution init_mass * f(t) of an initial small droplet.
inline RenewalMean renewal_mean_mass(const ModelParams& params, double horizon, double step = 1e-2, int J = 64,
                                     double init_mass = 0.0) {
  params.validate();
  if (!(horizon > 0.0 && step > 0.0)) throw std::invalid_argument("renewal_mean_mass: need T, step > 0");
  long n = std::lround(std::ceil(horizon / step - 1e-9));
  RenewalMean out;
  for (long i = 0; i <= n; ++i) out.times.push_back(static_cast<double>(i) * step);
  std::vector<double> f = with_truncation(J, [&](int j) { return dual_mean_f(params, out.times, j); });
  std::vector<double> g(f.size());
  double integral = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (i > 0) integral += 0.5 * step * (f[i] + f[i - 1]);
    g[i] = init_mass * f[i] + params.m * integral;
  }
  out.mean = solve_volterra(g, f, params.migration_rate(), step);
  return out;
}

struct WStarSample {
  std::vector<double> values;
  Summary summary;
};

inline WStarSample estimate_Wstar(const std::vector<DropletTrajectory>& runs, double alpha, double t_late) {
  if (runs.size() < 2) throw std::invalid_argument("estimate_Wstar: need >= 2 replicas");
  WStarSample out;
  for (const auto& r : runs) {
    if (r.times.empty() || t_late > r.times.back() + 1e-9 || t_late < 0.0)
      throw std::invalid_argument("estimate_Wstar: t_late outside the horizon");
    out.values.push_back(std::exp(-alpha * t_late) * r.mass_at(t_late));
  }
  out.summary = summarize(out.values);
  return out;
}

}  // namespace mfwf
