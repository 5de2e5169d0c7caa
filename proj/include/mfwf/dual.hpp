#pragma once

// Event-driven simulation of the dual particle system: particles branch at
// rate s, pairs on one site coalesce at rate d, and particles migrate at rate
// c. Only occupancy counts are kept. Two geometries share the engine:
//   * N sites: a migrant picks a target uniformly among all N sites, its own
//     site included (a self-jump leaves the state unchanged);
//   * collision-free: a migrant always founds a fresh site and singletons do
//     not emigrate, so the number of occupied sites never decreases.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"
#include "forward.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "stats.hpp"

namespace mfwf {

struct DualInit {
  int per_site = 1;  // k particles
  int sites = 1;     // on l distinct sites

  void validate() const {
    if (per_site < 1 || sites < 1) throw std::invalid_argument("dual init: need k >= 1 particles on l >= 1 sites");
  }
};

/// Occupied sites only: sizes[i] >= 1 with matching birth times.
struct DualState {
  std::vector<int> sizes;
  std::vector<double> birth_times;

  long total() const {
    long t = 0;
    for (int z : sizes) t += z;
    return t;
  }
  long occupied() const { return static_cast<long>(sizes.size()); }
};

struct AgeSizeRecord {
  std::vector<std::pair<double, int>> entries;  // (age, size)
  std::vector<double> normalized;               // index j-1 holds the frequency of size j
};

inline AgeSizeRecord age_size_distribution(const DualState& state, double now) {
  if (state.sizes.empty()) throw std::invalid_argument("age_size_distribution: empty state");
  AgeSizeRecord rec;
  int top = 0;
  for (std::size_t i = 0; i < state.sizes.size(); ++i) {
    rec.entries.emplace_back(now - state.birth_times[i], state.sizes[i]);
    top = std::max(top, state.sizes[i]);
  }
  rec.normalized.assign(static_cast<std::size_t>(top), 0.0);
  double w = 1.0 / static_cast<double>(state.sizes.size());
  for (int z : state.sizes) rec.normalized[static_cast<std::size_t>(z - 1)] += w;
  return rec;
}

struct DualTrajectory {
  std::vector<double> times;
  std::vector<long> pi;
  std::vector<long> k;
  std::vector<double> occupation_integral;
  std::vector<double> snapshot_times;
  std::vector<AgeSizeRecord> age_size;
  DualState final_state;
  double final_time = 0.0;
  double final_integral = 0.0;
  long events = 0;
};

struct DualOptions {
  double horizon = 1.0;
  std::vector<double> record_times;    // empty: the horizon only
  std::vector<double> snapshot_times;  // age/size records
  std::optional<long> stop_at_sites;   // end once K reaches this

  void validate() const {
    if (!(horizon > 0.0)) throw std::invalid_argument("dual: horizon T must be > 0");
    if (!std::is_sorted(record_times.begin(), record_times.end()) ||
        !std::is_sorted(snapshot_times.begin(), snapshot_times.end()))
      throw std::invalid_argument("dual: record times must be sorted");
  }
};

namespace detail {

class OccupancyTable {
 public:
  OccupancyTable(bool collision_free, long n_sites) : collision_free_(collision_free), n_sites_(n_sites) {}

  long total() const { return pi_; }
  long eligible() const { return eligible_; }
  long pairs() const { return pairs_; }
  long occupied() const { return occupied_; }
  int max_size() const { return static_cast<int>(buckets_.size()) - 1; }
  const std::vector<int>& bucket(int size) const { return buckets_[static_cast<std::size_t>(size)]; }
  int size_of(int site) const { return count_[static_cast<std::size_t>(site)]; }
  double birth_of(int site) const { return birth_[static_cast<std::size_t>(site)]; }
  long site_capacity() const { return collision_free_ ? std::numeric_limits<long>::max() : n_sites_; }

  bool eligible_size(int z) const { return collision_free_ ? z >= 2 : z >= 1; }

  int new_site() {
    if (!collision_free_) throw std::logic_error("new_site on a finite geometry");
    count_.push_back(0);
    birth_.push_back(0.0);
    pos_.push_back(-1);
    return static_cast<int>(count_.size()) - 1;
  }

  void ensure_sites(long n) {
    if (static_cast<long>(count_.size()) < n) {
      count_.resize(static_cast<std::size_t>(n), 0);
      birth_.resize(static_cast<std::size_t>(n), 0.0);
      pos_.resize(static_cast<std::size_t>(n), -1);
    }
  }

  void set_size(int site, int z, double now) {
    auto i = static_cast<std::size_t>(site);
    int old = count_[i];
    if (old == z) return;
    if (old > 0) detach(site, old);
    if (old == 0 && z > 0) {
      birth_[i] = now;
      ++occupied_;
    }
    if (old > 0 && z == 0) --occupied_;
    count_[i] = z;
    if (z > 0) attach(site, z);
    pi_ += z - old;
    pairs_ += static_cast<long>(z) * (z - 1) - static_cast<long>(old) * (old - 1);
    eligible_ += (eligible_size(z) ? z : 0) - (eligible_size(old) ? old : 0);
  }

  DualState snapshot() const {
    DualState s;
    for (int z = 1; z <= max_size(); ++z)
      for (int site : bucket(z)) {
        s.sizes.push_back(z);
        s.birth_times.push_back(birth_of(site));
      }
    return s;
  }

 private:
  void attach(int site, int z) {
    if (static_cast<int>(buckets_.size()) <= z) buckets_.resize(static_cast<std::size_t>(z) + 1);
    auto& b = buckets_[static_cast<std::size_t>(z)];
    pos_[static_cast<std::size_t>(site)] = static_cast<int>(b.size());
    b.push_back(site);
  }
  void detach(int site, int z) {
    auto& b = buckets_[static_cast<std::size_t>(z)];
    int p = pos_[static_cast<std::size_t>(site)];
    int last = b.back();
    b[static_cast<std::size_t>(p)] = last;
    pos_[static_cast<std::size_t>(last)] = p;
    b.pop_back();
    pos_[static_cast<std::size_t>(site)] = -1;
    while (buckets_.size() > 1 && buckets_.back().empty()) buckets_.pop_back();
  }

  bool collision_free_;
  long n_sites_;
  std::vector<int> count_;
  std::vector<double> birth_;
  std::vector<int> pos_;
  std::vector<std::vector<int>> buckets_{1};
  long pi_ = 0, eligible_ = 0, pairs_ = 0, occupied_ = 0;
};

struct DualRates {
  double c = 0.0, s = 0.0, d = 0.0;
};

inline DualTrajectory run_dual(const DualInit& init, const DualRates& r, bool collision_free, long n_sites,
                               const DualOptions& opt, Stream& rng) {
  init.validate();
  opt.validate();
  if (!collision_free && init.sites > n_sites) throw std::invalid_argument("dual: more initial sites than N");

  OccupancyTable table(collision_free, n_sites);
  if (collision_free) {
    for (int i = 0; i < init.sites; ++i) table.set_size(table.new_site(), init.per_site, 0.0);
  } else {
    table.ensure_sites(n_sites);
    for (int i = 0; i < init.sites; ++i) table.set_size(i, init.per_site, 0.0);
  }

  std::vector<double> records = opt.record_times.empty() ? std::vector<double>{opt.horizon} : opt.record_times;
  DualTrajectory traj;
  std::size_t next_record = 0, next_snapshot = 0;
  double t = 0.0, integral = 0.0;

  auto site_rate = [&](int z) {
    return r.s * z + 0.5 * r.d * z * (z - 1) + (table.eligible_size(z) ? r.c * z : 0.0);
  };
  auto flush_until = [&](double until) {
    while (next_record < records.size() && records[next_record] <= until) {
      double at = records[next_record++];
      if (at > opt.horizon) continue;
      traj.times.push_back(at);
      traj.pi.push_back(table.total());
      traj.k.push_back(table.occupied());
      traj.occupation_integral.push_back(integral + static_cast<double>(table.total()) * (at - t));
    }
    while (next_snapshot < opt.snapshot_times.size() && opt.snapshot_times[next_snapshot] <= until) {
      double at = opt.snapshot_times[next_snapshot++];
      if (at > opt.horizon || table.occupied() == 0) continue;
      traj.snapshot_times.push_back(at);
      traj.age_size.push_back(age_size_distribution(table.snapshot(), at));
    }
  };

  std::uniform_int_distribution<long> pick_target(0, std::max<long>(0, n_sites - 1));
  for (;;) {
    double by_class = 0.0;
    for (int z = 1; z <= table.max_size(); ++z) by_class += static_cast<double>(table.bucket(z).size()) * site_rate(z);
    double running = r.s * table.total() + r.c * table.eligible() + 0.5 * r.d * table.pairs();
    if (std::abs(by_class - running) > 1e-9 * std::max(1.0, running))
      throw std::logic_error("dual: rate bookkeeping mismatch");

    double t_next = by_class > 0.0 ? t + exponential(rng, by_class) : std::numeric_limits<double>::infinity();
    flush_until(std::min(t_next, opt.horizon));
    if (t_next > opt.horizon) {
      integral += static_cast<double>(table.total()) * (opt.horizon - t);
      t = opt.horizon;
      break;
    }
    integral += static_cast<double>(table.total()) * (t_next - t);
    t = t_next;
    ++traj.events;

    // Pick a size class, then a uniform site in it, then the event type.
    double u = uniform01(rng) * by_class;
    int z = 1;
    for (; z < table.max_size(); ++z) {
      double w = static_cast<double>(table.bucket(z).size()) * site_rate(z);
      if (u < w) break;
      u -= w;
    }
    const auto& bucket = table.bucket(z);
    if (bucket.empty()) continue;  // only reachable through rounding at the last class
    std::uniform_int_distribution<std::size_t> pick_site(0, bucket.size() - 1);
    int site = bucket[pick_site(rng)];
    double v = uniform01(rng) * site_rate(z);
    double birth = r.s * z;
    double coal = 0.5 * r.d * z * (z - 1);
    if (v < birth) {
      table.set_size(site, z + 1, t);
    } else if (v < birth + coal) {
      table.set_size(site, z - 1, t);
    } else if (collision_free) {
      table.set_size(site, z - 1, t);
      table.set_size(table.new_site(), 1, t);
    } else {
      int target = static_cast<int>(pick_target(rng));
      if (target != site) {
        table.set_size(site, z - 1, t);
        table.set_size(target, table.size_of(target) + 1, t);
      }
    }
    if (opt.stop_at_sites && table.occupied() >= *opt.stop_at_sites) {
      traj.times.push_back(t);
      traj.pi.push_back(table.total());
      traj.k.push_back(table.occupied());
      traj.occupation_integral.push_back(integral);
      break;
    }
  }
  traj.final_state = table.snapshot();
  traj.final_time = t;
  traj.final_integral = integral;
  return traj;
}

}  // namespace detail

inline DualTrajectory simulate_dual(const DualInit& init, const ModelParams& params, const DualOptions& opt, Stream& rng) {
  params.validate();
  return detail::run_dual(init, {params.migration_rate(), params.selection_rate(), params.d}, false, params.n_sites, opt, rng);
}

inline DualTrajectory simulate_collision_free_dual(const DualInit& init, const ModelParams& params, const DualOptions& opt,
                                                   Stream& rng) {
  params.validate();
  return detail::run_dual(init, {params.migration_rate(), params.selection_rate(), params.d}, true, 0, opt, rng);
}

struct GrowthEstimate {
  double mean = 0.0;
  double spread = 0.0;      // standard deviation over the window
  double dispersion = 0.0;  // spread / mean
  std::size_t samples = 0;
};

/// Mean and spread of e^{-alpha t} K_t over the records inside [t1, t2].
inline GrowthEstimate estimate_growth_constant(const DualTrajectory& traj, double alpha, double t1, double t2) {
  if (!(t2 > t1 && t1 > 0.0)) throw std::invalid_argument("estimate_growth_constant: need t2 > t1 > 0");
  std::vector<double> vals;
  for (std::size_t i = 0; i < traj.times.size(); ++i)
    if (traj.times[i] >= t1 && traj.times[i] <= t2) vals.push_back(std::exp(-alpha * traj.times[i]) * static_cast<double>(traj.k[i]));
  if (vals.empty()) throw std::invalid_argument("estimate_growth_constant: no records in window");
  Summary s = summarize(vals);
  GrowthEstimate g;
  g.mean = s.mean;
  g.spread = std::sqrt(s.variance);
  g.dispersion = g.mean > 0.0 ? g.spread / g.mean : std::numeric_limits<double>::infinity();
  g.samples = vals.size();
  return g;
}

/// Record-time window over which K stays within [k_min, k_max].
inline std::optional<std::pair<double, double>> site_count_window(const DualTrajectory& traj, long k_min, long k_max) {
  std::optional<double> lo, hi;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    if (traj.k[i] >= k_min && traj.k[i] <= k_max) {
      if (!lo) lo = traj.times[i];
      hi = traj.times[i];
    }
  }
  if (!lo || *hi <= *lo) return std::nullopt;
  return std::make_pair(*lo, *hi);
}

struct DualityCheck {
  double lhs = 0.0, lhs_se = 0.0;
  double rhs = 0.0, rhs_se = 0.0;
  double combined_se = 0.0;
};

/// Both sides of E[prod x1] = E[exp(-mu int Pi)] by independent Monte Carlo.
inline DualityCheck duality_check(const ModelParams& params, const DualInit& init, double t, int reps, const SeedSpec& seed,
                                  double forward_dt = 1e-3) {
  params.validate();
  init.validate();
  if (reps < 2) throw std::invalid_argument("duality_check: reps must be >= 2");
  if (init.sites > params.n_sites) throw std::invalid_argument("duality_check: more dual sites than N");
  if (t == 0.0) return {1.0, 0.0, 1.0, 0.0, 0.0};
  if (t < 0.0) throw std::invalid_argument("duality_check: t must be >= 0");
  double mu = params.mutation_per_site();

  auto lhs = parallel_map(static_cast<std::size_t>(reps), [&](std::size_t i) {
    Stream rng = derive_stream(seed.with_replica(static_cast<std::int64_t>(i)).with_label(seed.stream_label + "/forward"));
    double dt = std::min(forward_dt, t);
    Configuration config = Configuration::all_type1(params.n_sites);
    long steps = std::lround(std::ceil(t / dt - 1e-9));
    for (long k = 0; k < steps; ++k) config = em_step(config, params, std::min(dt, t - config.time), rng);
    double prod = 1.0;
    for (int s = 0; s < init.sites; ++s) prod *= std::pow(config.x1(static_cast<std::size_t>(s)), init.per_site);
    return prod;
  });
  auto rhs = parallel_map(static_cast<std::size_t>(reps), [&](std::size_t i) {
    Stream rng = derive_stream(seed.with_replica(static_cast<std::int64_t>(i)).with_label(seed.stream_label + "/dual"));
    DualOptions o;
    o.horizon = t;
    DualTrajectory tr = simulate_dual(init, params, o, rng);
    return std::exp(-mu * tr.final_integral);
  });
  Summary a = summarize(lhs), b = summarize(rhs);
  return {a.mean, a.stderr_, b.mean, b.stderr_, std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_)};
}

/// E[exp(-mu int_0^t Pi)] for one site with c = d = 0 (Yule dual).
inline double single_site_dual_survival(double s, double mu, double t) {
  double r = s + mu;
  return r / (s + mu * std::exp(r * t));
}

}  // namespace mfwf
