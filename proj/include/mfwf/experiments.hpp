#pragma once

// Desk-scale experiment drivers. Each reads its own [section] of the config;
// every pass/fail threshold comes from the config.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "core.hpp"
#include "csv.hpp"
#include "droplet.hpp"
#include "dual.hpp"
#include "forward.hpp"
#include "malthus.hpp"
#include "mv_limit.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "stats.hpp"

namespace mfwf {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
  std::string name;
  std::string section;
  ModelParams params;  // n_sites is set per run
  std::vector<int> n_list;
  int reps = 0;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  Config raw;

  double require(const std::string& key) const { return raw.require_double(section, key); }
  double get(const std::string& key, double fallback) const { return raw.get_double(section, key, fallback); }
  std::vector<double> list(const std::string& key, std::vector<double> fallback = {}) const {
    if (fallback.empty() && !raw.has(section, key)) throw ConfigError("missing required key '" + key + "' in section [" + section + "]");
    return raw.get_list(section, key, std::move(fallback));
  }
};

inline const std::map<std::string, std::string>& experiment_sections() {
  static const std::map<std::string, std::string> m{{"emergence", "emergence"},
                                                    {"fixation", "fixation"},
                                                    {"dual-profile", "dual_profile"},
                                                    {"growth-constants", "growth_constants"}};
  return m;
}

inline ExperimentConfig load_experiment(const Config& cfg, const std::string& name) {
  auto it = experiment_sections().find(name);
  if (it == experiment_sections().end()) throw ConfigError("unknown experiment '" + name + "'");
  ExperimentConfig e;
  e.name = name;
  e.section = it->second;
  e.raw = cfg;
  e.params = model_from_config(cfg, {"c", "s", "d", "m"}, false);
  if (!cfg.sections().count(e.section)) throw ConfigError("config has no [" + e.section + "] section");
  e.reps = static_cast<int>(cfg.require_long(e.section, "reps"));
  if (e.reps < 2) throw ConfigError("[" + e.section + "] reps must be >= 2");
  e.seed = static_cast<std::uint64_t>(cfg.require_long("run", "seed"));
  e.output_dir = cfg.get_string("run", "output_dir", "");
  if (cfg.has(e.section, "n_list")) {
    for (double n : cfg.get_list(e.section, "n_list", {})) {
      if (!(n >= 2.0) || n != std::floor(n)) throw ConfigError("[" + e.section + "] n_list entries must be integers >= 2");
      e.n_list.push_back(static_cast<int>(n));
    }
  }
  return e;
}

struct Estimate {
  std::string name;
  double value = 0.0;
  double se = 0.0;
};

struct Check {
  std::string name;
  double value = 0.0;
  std::string relation;  // "<", ">", "in"
  double lo = 0.0, hi = 0.0;
  bool passed = false;
  bool informational = false;  // reported, not counted
};

inline Check check_less(std::string name, double value, double bound, bool info = false) {
  return {std::move(name), value, "<", -std::numeric_limits<double>::infinity(), bound, value < bound, info};
}
inline Check check_greater(std::string name, double value, double bound, bool info = false) {
  return {std::move(name), value, ">", bound, std::numeric_limits<double>::infinity(), value > bound, info};
}
inline Check check_within(std::string name, double value, double lo, double hi, bool info = false) {
  return {std::move(name), value, "in", lo, hi, value >= lo && value <= hi, info};
}

struct ExperimentReport {
  std::string name;
  ExperimentConfig config;
  std::vector<Table> tables;
  std::vector<Estimate> estimates;
  std::vector<Check> checks;
  std::vector<std::string> notes;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.informational || c.passed; });
  }

  const Estimate& estimate(const std::string& key) const {
    for (const auto& e : estimates)
      if (e.name == key) return e;
    throw std::out_of_range("no estimate '" + key + "'");
  }

  const Check& check(const std::string& key) const {
    for (const auto& c : checks)
      if (c.name == key) return c;
    throw std::out_of_range("no check '" + key + "'");
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["experiment"] = name;
    j["version"] = kVersion;
    j["seed"] = config.seed;
    j["config"] = config.raw.sections();
    j["estimates"] = nlohmann::json::array();
    for (const auto& e : estimates) j["estimates"].push_back({{"name", e.name}, {"value", e.value}, {"se", e.se}});
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks) {
      nlohmann::json cj{{"name", c.name}, {"value", c.value}, {"relation", c.relation}, {"passed", c.passed},
                        {"informational", c.informational}};
      if (std::isfinite(c.lo)) cj["lo"] = c.lo;
      if (std::isfinite(c.hi)) cj["hi"] = c.hi;
      j["checks"].push_back(cj);
    }
    j["notes"] = notes;
    j["tables"] = nlohmann::json::array();
    for (const auto& t : tables) j["tables"].push_back(name + "_" + t.name + ".csv");
    j["passed"] = passed();
    return j;
  }

  // <dir>/<name>_<table>.csv for each table and <dir>/<name>_report.json.
  std::vector<std::filesystem::path> write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> files;
    for (const auto& t : tables) {
      files.push_back(dir / (name + "_" + t.name + ".csv"));
      write_csv(files.back(), t);
    }
    files.push_back(dir / (name + "_report.json"));
    std::ofstream(files.back()) << to_json().dump(2) << '\n';
    return files;
  }

  void print_summary(std::ostream& os) const {
    for (const auto& e : estimates) os << "  " << e.name << " = " << e.value << " +/- " << e.se << '\n';
    for (const auto& c : checks) {
      os << "  [" << (c.informational ? "info" : c.passed ? "PASS" : "FAIL") << "] " << c.name << ": " << c.value << ' ' << c.relation << ' ';
      if (c.relation == "in")
        os << '[' << c.lo << ", " << c.hi << ']';
      else
        os << (c.relation == "<" ? c.hi : c.lo);
      os << '\n';
    }
    for (const auto& n : notes) os << "  note: " << n << '\n';
  }
};

namespace detail {

inline std::vector<double> seeded_map(int reps, const SeedSpec& base, const std::function<double(Stream&)>& fn) {
  return parallel_map(static_cast<std::size_t>(reps), [&](std::size_t i) {
    Stream rng = derive_stream(base.with_replica(static_cast<std::int64_t>(i)));
    return fn(rng);
  });
}

inline double emergence_time(int n) { return std::log(static_cast<double>(n)); }

// Median with missing values counted as +infinity; nullopt when half or more are missing.
inline std::optional<double> censored_median(const std::vector<std::optional<double>>& xs) {
  std::vector<double> v;
  for (const auto& x : xs) v.push_back(x.value_or(std::numeric_limits<double>::infinity()));
  std::sort(v.begin(), v.end());
  double m = quantile(v, 0.5);
  if (!std::isfinite(m)) return std::nullopt;
  return m;
}

}  // namespace detail

/// Hitting times of mean >= eps for each N, median fitted against ln N.
inline ExperimentReport run_emergence(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  if (cfg.n_list.size() < 2) throw ConfigError("[emergence] n_list needs >= 2 entries");
  double eps = cfg.require("eps");
  double dt = cfg.require("dt");
  double tol = cfg.require("slope_tolerance");
  double pad = cfg.get("horizon_pad", 15.0);
  int resamples = static_cast<int>(cfg.get("bootstrap", 400));
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("[emergence] eps must lie in (0,1)");

  ExperimentReport rep;
  rep.name = cfg.name;
  rep.config = cfg;
  MalthusResult mal = compute_malthus(cfg.params);
  double alpha = mal.alpha;
  rep.estimates.push_back({"alpha", alpha, 0.0});

  Table per_n{"per_n", {"N", "log_N", "median", "q25", "q75", "hits", "misses"}, {}};
  Table samples{"hitting_times", {"N", "replica", "time"}, {}};
  std::vector<std::vector<std::optional<double>>> all;
  for (int n : cfg.n_list) {
    ModelParams p = cfg.params.with_sites(n);
    ForwardOptions opt;
    opt.dt = dt;
    opt.horizon = (detail::emergence_time(n) + pad) / alpha;
    opt.record_every = 1;
    opt.stop_at_mean = eps;
    SeedSpec base{cfg.seed, 0, "emergence/N=" + std::to_string(n)};
    auto times = parallel_map(static_cast<std::size_t>(cfg.reps), [&](std::size_t i) {
      Stream rng = derive_stream(base.with_replica(static_cast<std::int64_t>(i)));
      return hitting_time(simulate_forward(p, opt, rng), eps);
    });
    std::vector<double> hit;
    for (std::size_t i = 0; i < times.size(); ++i) {
      samples.add({double(n), double(i), times[i].value_or(std::numeric_limits<double>::quiet_NaN())});
      if (times[i]) hit.push_back(*times[i]);
    }
    long misses = cfg.reps - static_cast<long>(hit.size());
    if (misses > 0) rep.notes.push_back("N=" + std::to_string(n) + ": " + std::to_string(misses) + " replicas did not reach eps by T=" + format_number(opt.horizon));
    auto med = detail::censored_median(times);
    if (!med) throw std::runtime_error("emergence: horizon too short for N=" + std::to_string(n));
    std::vector<double> censored;
    for (const auto& t : times) censored.push_back(t.value_or(std::numeric_limits<double>::infinity()));
    per_n.add({double(n), std::log(double(n)), *med, quantile(censored, 0.25), quantile(censored, 0.75), double(hit.size()), double(misses)});
    all.push_back(times);
    if (log) *log << "emergence: N=" << n << " median=" << *med << '\n';
  }

  auto fit_medians = [&](const std::vector<std::vector<std::optional<double>>>& data) {
    std::vector<double> x, y;
    for (std::size_t k = 0; k < data.size(); ++k) {
      auto m = detail::censored_median(data[k]);
      if (!m) return std::numeric_limits<double>::quiet_NaN();
      x.push_back(std::log(double(cfg.n_list[k])));
      y.push_back(*m);
    }
    return linear_fit(x, y).slope;
  };
  double slope = fit_medians(all);

  // Replicas resampled within each N.
  Stream boot = derive_stream({cfg.seed, 0, "emergence/bootstrap"});
  std::vector<double> slopes;
  for (int b = 0; b < resamples; ++b) {
    std::vector<std::vector<std::optional<double>>> re;
    for (const auto& v : all) {
      std::uniform_int_distribution<std::size_t> pick(0, v.size() - 1);
      std::vector<std::optional<double>> r(v.size());
      for (auto& x : r) x = v[pick(boot)];
      re.push_back(std::move(r));
    }
    double s = fit_medians(re);
    if (std::isfinite(s)) slopes.push_back(s);
  }
  double slope_se = slopes.size() > 1 ? std::sqrt(summarize(slopes).variance) : std::numeric_limits<double>::quiet_NaN();
  rep.estimates.push_back({"slope", slope, slope_se});
  rep.estimates.push_back({"inverse_alpha", 1.0 / alpha, 0.0});
  rep.estimates.push_back({"slope_times_alpha", slope * alpha, slope_se * alpha});
  rep.tables = {per_n, samples};
  rep.checks.push_back(check_greater("slope_positive", slope, 0.0));
  rep.checks.push_back(check_less("slope_relative_error", std::abs(slope * alpha - 1.0), tol));
  return rep;
}

/// Law of the mean at ln N / alpha + t for t on a grid in units of 1/alpha.
inline ExperimentReport run_fixation_profile(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  int n = static_cast<int>(cfg.raw.require_long(cfg.section, "n_sites"));
  double dt = cfg.require("dt");
  std::vector<double> grid = cfg.list("t_grid");
  double low = cfg.require("low_level"), high = cfg.require("high_level"), sigmas = cfg.require("variance_sigmas");
  if (grid.size() < 2 || !std::is_sorted(grid.begin(), grid.end())) throw ConfigError("[fixation] t_grid must be sorted with >= 2 points");
  if (std::find(grid.begin(), grid.end(), 0.0) == grid.end()) throw ConfigError("[fixation] t_grid must contain 0");

  ExperimentReport rep;
  rep.name = cfg.name;
  rep.config = cfg;
  double alpha = malthusian_fixed_point(cfg.params).alpha;
  rep.estimates.push_back({"alpha", alpha, 0.0});
  double center = detail::emergence_time(n) / alpha;
  std::vector<double> at;
  for (double g : grid) at.push_back(center + g / alpha);
  if (at.front() <= 0.0) throw ConfigError("[fixation] t_grid reaches before time 0 for this N");

  ModelParams p = cfg.params.with_sites(n);
  ForwardOptions opt;
  opt.dt = dt;
  opt.horizon = at.back();
  SeedSpec base{cfg.seed, 0, "fixation/N=" + std::to_string(n)};
  auto runs = parallel_map(static_cast<std::size_t>(cfg.reps), [&](std::size_t i) {
    Stream rng = derive_stream(base.with_replica(static_cast<std::int64_t>(i)));
    ForwardTrajectory tr = simulate_forward(p, opt, rng);
    std::vector<double> v;
    for (double t : at) v.push_back(interpolate(tr.times, tr.mean_mass, t));
    return v;
  });

  Table profile{"profile", {"t_units", "time", "mean", "mean_se", "variance", "variance_se", "scaled_mean"}, {}};
  Table samples{"samples", {"replica", "t_units", "value"}, {}};
  std::vector<Summary> sums;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<double> col;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      col.push_back(runs[i][g]);
      samples.add({double(i), grid[g], runs[i][g]});
    }
    Summary s = summarize(col);
    sums.push_back(s);
    double scaled = grid[g] < 0.0 ? std::exp(-grid[g]) * s.mean : std::numeric_limits<double>::quiet_NaN();
    profile.add({grid[g], at[g], s.mean, s.stderr_, s.variance, variance_se(col), scaled});
    if (grid[g] == 0.0) {
      double vse = variance_se(col);
      rep.estimates.push_back({"variance_at_0", s.variance, vse});
      rep.checks.push_back(check_greater("variance_at_0_in_se", vse > 0.0 ? s.variance / vse : 0.0, sigmas));
    }
    if (grid[g] < 0.0) rep.estimates.push_back({"scaled_mean_t" + format_number(grid[g]), scaled, std::exp(-grid[g]) * s.stderr_});
  }
  if (log) *log << "fixation: N=" << n << " done\n";
  rep.estimates.push_back({"mean_left", sums.front().mean, sums.front().stderr_});
  rep.estimates.push_back({"mean_right", sums.back().mean, sums.back().stderr_});
  rep.checks.push_back(check_less("left_below_right", sums.front().mean - sums.back().mean, 0.0));
  rep.checks.push_back(check_less("mean_left_low", sums.front().mean, low));
  rep.checks.push_back(check_greater("mean_right_high", sums.back().mean, high));
  rep.tables = {profile, samples};
  return rep;
}

namespace detail {

// Time at which the standard solution first reaches level v (before its peak).
inline std::optional<double> invert_standard(const StandardSolution& sol, double v) {
  const auto& st = sol.path.states;
  std::size_t peak = 0;
  for (std::size_t i = 1; i < st.size(); ++i)
    if (st[i].u > st[peak].u) peak = i;
  if (!(v > st.front().u) || v > st[peak].u) return std::nullopt;
  for (std::size_t i = 1; i <= peak; ++i) {
    if (st[i].u >= v) {
      double w = (v - st[i - 1].u) / (st[i].u - st[i - 1].u);
      return st[i - 1].time + w * (st[i].time - st[i - 1].time);
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// N-site dual against the shifted standard solution and the stable size law.
inline ExperimentReport run_dual_profile(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  if (cfg.n_list.empty()) throw ConfigError("[dual_profile] n_list is required");
  double t_before = cfg.require("t_before"), t_after = cfg.require("t_after");
  double w_lo = cfg.require("window_lo"), w_hi = cfg.require("window_hi");
  double rel_tol = cfg.require("relative_tolerance"), tv_tol = cfg.require("tv_tolerance");
  double step = cfg.get("record_step", 0.05);
  if (!(w_lo < w_hi && t_before < t_after)) throw ConfigError("[dual_profile] need window_lo < window_hi and t_before < t_after");

  ExperimentReport rep;
  rep.name = cfg.name;
  rep.config = cfg;
  MalthusResult mal = compute_malthus(cfg.params);
  double alpha = mal.alpha;
  rep.estimates.push_back({"alpha", alpha, 0.0});
  StandardSolution sol = u_standard_solution(cfg.params, alpha, mal.u_infty, -20.0 / alpha, std::max(t_after, 0.0) + 10.0 / alpha);
  rep.estimates.push_back({"u_standard_at_0", sol.u_at_zero, sol.t0_sensitivity});

  Table per_rep{"per_replica", {"N", "replica", "log_W_over_alpha", "scaled_K_after", "u_shifted_after", "relative_error", "rmse"}, {}};
  Table sizes{"size_distribution", {"N", "size", "empirical", "qstar", "limit"}, {}};
  std::vector<double> tvs;
  for (int n : cfg.n_list) {
    ModelParams p = cfg.params.with_sites(n);
    double center = detail::emergence_time(n) / alpha;
    if (center + w_lo / alpha <= 0.0 || center + t_before <= 0.0) throw ConfigError("[dual_profile] window reaches before time 0");
    DualOptions opt;
    opt.horizon = center + t_after;
    for (double t = step; t < opt.horizon - 1e-9; t += step) opt.record_times.push_back(t);
    opt.record_times.push_back(opt.horizon);
    opt.snapshot_times = {center + t_before};
    SeedSpec base{cfg.seed, 0, "dual-profile/N=" + std::to_string(n)};
    struct Row {
      double shift, scaled, predicted, rel, rmse;
      std::vector<double> sizes, limit;
    };
    auto rows = parallel_map(static_cast<std::size_t>(cfg.reps), [&](std::size_t i) {
      Stream rng = derive_stream(base.with_replica(static_cast<std::int64_t>(i)));
      DualTrajectory tr = simulate_dual(DualInit{1, 1}, p, opt, rng);
      Row r{};
      double acc = 0.0;
      int cnt = 0;
      for (std::size_t j = 0; j < tr.times.size(); ++j) {
        double rel_t = tr.times[j] - center;
        if (rel_t < w_lo / alpha || rel_t > w_hi / alpha) continue;
        auto hit = detail::invert_standard(sol, static_cast<double>(tr.k[j]) / n);
        if (!hit) continue;
        acc += *hit - rel_t;
        ++cnt;
      }
      r.shift = cnt > 0 ? acc / cnt : std::numeric_limits<double>::quiet_NaN();
      r.scaled = static_cast<double>(tr.k.back()) / n;
      r.predicted = cnt > 0 ? sol.u_at(t_after + r.shift) : std::numeric_limits<double>::quiet_NaN();
      r.rel = std::abs(r.scaled - r.predicted) / r.predicted;
      double ss = 0.0;
      int m = 0;
      for (std::size_t j = 0; j < tr.times.size() && cnt > 0; ++j) {
        double rel_t = tr.times[j] - center;
        if (rel_t < t_before || rel_t > t_after) continue;
        double d = static_cast<double>(tr.k[j]) / n - sol.u_at(rel_t + r.shift);
        ss += d * d;
        ++m;
      }
      r.rmse = m > 0 ? std::sqrt(ss / m) : std::numeric_limits<double>::quiet_NaN();
      if (!tr.age_size.empty()) {
        for (const auto& e : tr.age_size.front().entries) {
          if (r.sizes.size() < static_cast<std::size_t>(e.second)) r.sizes.resize(static_cast<std::size_t>(e.second), 0.0);
          r.sizes[static_cast<std::size_t>(e.second - 1)] += 1.0;
        }
        // Size law of the shifted standard solution, weighted by this replica's occupied sites.
        if (cnt > 0) {
          const auto& law = sol.U_at(t_before + r.shift).p;
          double occupied = static_cast<double>(tr.age_size.front().entries.size());
          for (double q : law) r.limit.push_back(occupied * q);
        }
      }
      return r;
    });
    std::vector<double> rels, pooled, matched, limit;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Row& r = rows[i];
      per_rep.add({double(n), double(i), r.shift, r.scaled, r.predicted, r.rel, r.rmse});
      if (std::isfinite(r.rel)) rels.push_back(r.rel);
      if (pooled.size() < r.sizes.size()) pooled.resize(r.sizes.size(), 0.0);
      for (std::size_t z = 0; z < r.sizes.size(); ++z) pooled[z] += r.sizes[z];
      if (r.limit.empty()) continue;
      if (matched.size() < r.sizes.size()) matched.resize(r.sizes.size(), 0.0);
      for (std::size_t z = 0; z < r.sizes.size(); ++z) matched[z] += r.sizes[z];
      if (limit.size() < r.limit.size()) limit.resize(r.limit.size(), 0.0);
      for (std::size_t z = 0; z < r.limit.size(); ++z) limit[z] += r.limit[z];
    }
    if (rels.size() < rows.size()) rep.notes.push_back("N=" + std::to_string(n) + ": " + std::to_string(rows.size() - rels.size()) + " replicas had no usable shift window");
    if (rels.empty()) throw std::runtime_error("dual-profile: no replica produced a shift estimate for N=" + std::to_string(n));
    auto normalize = [](std::vector<double>& v) {
      double total = 0.0;
      for (double x : v) total += x;
      for (double& x : v) x /= total;
    };
    normalize(pooled);
    normalize(matched);
    normalize(limit);
    double tv = total_variation(pooled, mal.u_infty.p);
    double tv_limit = total_variation(matched, limit);
    tvs.push_back(tv_limit);
    for (std::size_t z = 0; z < std::max(pooled.size(), std::size_t{20}); ++z)
      sizes.add({double(n), double(z + 1), z < pooled.size() ? pooled[z] : 0.0, mal.u_infty.at(static_cast<int>(z + 1)), z < limit.size() ? limit[z] : 0.0});
    double med = median(rels);
    Stream boot = derive_stream({cfg.seed, 0, "dual-profile/bootstrap/N=" + std::to_string(n)});
    rep.estimates.push_back({"median_relative_error_N" + std::to_string(n), med, bootstrap_se(rels, [](std::vector<double> v) { return median(std::move(v)); }, 200, boot)});
    rep.estimates.push_back({"tv_N" + std::to_string(n), tv, 0.0});
    rep.estimates.push_back({"tv_limit_N" + std::to_string(n), tv_limit, 0.0});
    rep.checks.push_back(check_less("median_relative_error_N" + std::to_string(n), med, rel_tol));
    if (log) *log << "dual-profile: N=" << n << " tv=" << tv << " tv_limit=" << tv_limit << " median rel err=" << med << '\n';
  }
  rep.checks.push_back(check_less("tv_largest_N", tvs.back(), tv_tol));
  if (tvs.size() > 1) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < tvs.size(); ++i) worst = std::max(worst, tvs[i] - tvs[i - 1]);
    rep.checks.push_back(check_less("tv_increase_with_N", worst, 0.0));
  }
  rep.tables = {per_rep, sizes};
  return rep;
}

/// Early droplet growth factor against the scaled pre-emergence mean.
inline ExperimentReport compare_growth_constants(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  double t_late = cfg.require("droplet_t");
  double eps = cfg.require("droplet_eps");
  double ddt = cfg.require("droplet_dt");
  int n = static_cast<int>(cfg.raw.require_long(cfg.section, "n_sites"));
  double fdt = cfg.require("forward_dt");
  double t_early = cfg.require("forward_t");
  double t_profile = cfg.require("profile_t");
  double sig = cfg.require("mean_sigmas");
  double ratio_lo = cfg.require("variance_ratio_lo"), ratio_hi = cfg.require("variance_ratio_hi");
  double horizon = cfg.get("renewal_horizon", 30.0);
  if (!(t_profile < 0.0)) throw ConfigError("[growth_constants] profile_t must be negative");

  ExperimentReport rep;
  rep.name = cfg.name;
  rep.config = cfg;
  MalthusResult mal = compute_malthus(cfg.params);
  double alpha = mal.alpha;
  rep.estimates.push_back({"alpha", alpha, 0.0});

  DropletOptions dopt;
  dopt.horizon = t_late;
  dopt.eps = eps;
  dopt.dt = ddt;
  dopt.record_step = t_late;
  auto a_droplet = detail::seeded_map(cfg.reps, {cfg.seed, 0, "growth-constants/droplet"}, [&](Stream& rng) {
    return std::exp(-alpha * t_late) * simulate_droplet(cfg.params, dopt, rng).total_mass.back();
  });
  if (log) *log << "growth-constants: droplet sample done\n";

  ModelParams p = cfg.params.with_sites(n);
  double t_b = (detail::emergence_time(n) + t_profile) / alpha;
  if (!(t_b > t_early && t_early > 0.0)) throw ConfigError("[growth_constants] need 0 < forward_t < ln N / alpha + profile_t / alpha");
  ForwardOptions fopt;
  fopt.dt = fdt;
  fopt.horizon = t_b;
  SeedSpec fbase{cfg.seed, 0, "growth-constants/forward/N=" + std::to_string(n)};
  auto pairs = parallel_map(static_cast<std::size_t>(cfg.reps), [&](std::size_t i) {
    Stream rng = derive_stream(fbase.with_replica(static_cast<std::int64_t>(i)));
    ForwardTrajectory tr = simulate_forward(p, fopt, rng);
    double a = std::exp(-alpha * t_early) * interpolate(tr.times, tr.total_mass, t_early);
    double b = std::exp(-t_profile) * tr.mean_mass.back();
    return std::make_pair(a, b);
  });
  std::vector<double> a_forward, b_profile;
  for (auto [a, b] : pairs) {
    a_forward.push_back(a);
    b_profile.push_back(b);
  }
  if (log) *log << "growth-constants: forward sample done\n";

  Summary sa = summarize(a_droplet), sf = summarize(a_forward), sb = summarize(b_profile);
  rep.estimates.push_back({"mean_A_droplet", sa.mean, sa.stderr_});
  rep.estimates.push_back({"mean_A_forward", sf.mean, sf.stderr_});
  rep.estimates.push_back({"mean_B", sb.mean, sb.stderr_});
  rep.estimates.push_back({"variance_A_droplet", sa.variance, variance_se(a_droplet)});
  rep.estimates.push_back({"variance_B", sb.variance, variance_se(b_profile)});

  double comb = std::sqrt(sa.stderr_ * sa.stderr_ + sb.stderr_ * sb.stderr_);
  rep.checks.push_back(check_less("means_A_B_in_se", std::abs(sa.mean - sb.mean) / comb, sig));
  rep.checks.push_back(check_within("variance_ratio_A_B", sa.variance / sb.variance, ratio_lo, ratio_hi));
  double comb_f = std::sqrt(sf.stderr_ * sf.stderr_ + sb.stderr_ * sb.stderr_);
  rep.checks.push_back(check_less("means_Aforward_B_in_se", std::abs(sf.mean - sb.mean) / comb_f, sig, true));
  rep.estimates.push_back({"ks_A_B", ks_statistic(a_droplet, b_profile), 0.0});
  rep.estimates.push_back({"ks_Aforward_B", ks_statistic(a_forward, b_profile), 0.0});

  // First-moment candidates m b / c E[W] and m (alpha + gamma) / c E[W].
  std::vector<double> grid = detail::uniform_grid(horizon, 0.01);
  double ew = std::exp(-alpha * grid.back()) * cmj_mean_sites(cfg.params, grid).back();
  RenewalMean ren = renewal_mean_mass(cfg.params, horizon, 0.01);
  double limit = std::exp(-alpha * ren.times.back()) * ren.mean.back();
  double c = cfg.params.migration_rate(), b = 1.0 + mal.gamma / alpha;
  double cand_b = cfg.params.m * b / c * ew;
  double cand_ag = cfg.params.m * (alpha + mal.gamma) / c * ew;
  rep.estimates.push_back({"mean_W", ew, 0.0});
  rep.estimates.push_back({"renewal_limit", limit, 0.0});
  rep.estimates.push_back({"candidate_m_b_over_c", cand_b, 0.0});
  rep.estimates.push_back({"candidate_m_alpha_plus_gamma_over_c", cand_ag, 0.0});
  rep.checks.push_back(check_less("candidate_m_b_over_c_vs_A_in_se", std::abs(sa.mean - cand_b) / sa.stderr_, sig, true));
  rep.checks.push_back(check_less("candidate_m_alpha_plus_gamma_over_c_vs_A_in_se", std::abs(sa.mean - cand_ag) / sa.stderr_, sig, true));
  rep.checks.push_back(check_less("candidate_m_b_over_c_vs_renewal_rel", std::abs(limit - cand_b) / limit, 1e-2, true));
  rep.checks.push_back(check_less("candidate_m_alpha_plus_gamma_over_c_vs_renewal_rel", std::abs(limit - cand_ag) / limit, 1e-2, true));

  Table samples{"samples", {"replica", "A_droplet", "A_forward", "B"}, {}};
  for (int i = 0; i < cfg.reps; ++i) samples.add({double(i), a_droplet[std::size_t(i)], a_forward[std::size_t(i)], b_profile[std::size_t(i)]});
  rep.tables = {samples};
  return rep;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  if (cfg.name == "emergence") return run_emergence(cfg, log);
  if (cfg.name == "fixation") return run_fixation_profile(cfg, log);
  if (cfg.name == "dual-profile") return run_dual_profile(cfg, log);
  if (cfg.name == "growth-constants") return compare_growth_constants(cfg, log);
  throw ConfigError("unknown experiment '" + cfg.name + "'");
}

}  // namespace mfwf
