#pragma once

// Birth-death chain numerics for one dual site: birth s k, death
// c k 1{k>=2} + (d/2) k (k-1), optional reset to size 1 at rate a. Gives the
// growth rate alpha of the collision-free site count three ways (renewal on the
// transient mean, renewal on the dual mean with singleton migration, and the
// self-consistency fixed point of the stationary reset chain).

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <map>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "core.hpp"

namespace mfwf {

class TruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BracketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Probabilities over sizes 1..J (index j-1).
struct SizeDistribution {
  std::vector<double> p;

  double sum() const {
    double t = 0.0;
    for (double v : p) t += v;
    return t;
  }
  double at(int size) const { return size >= 1 && size <= static_cast<int>(p.size()) ? p[static_cast<std::size_t>(size - 1)] : 0.0; }
  // sum_{j>=2} j p_j
  double multi_mass() const {
    double t = 0.0;
    for (std::size_t i = 1; i < p.size(); ++i) t += static_cast<double>(i + 1) * p[i];
    return t;
  }
};

struct BDChainSpec {
  double c = 0.0, s = 0.0, d = 0.0;
  bool singleton_migrates = false;  // true: death c k at k = 1 too, into an absorbing 0
  double reset = 0.0;               // rate of jumps to size 1 from sizes >= 2
  int J = 64;

  static BDChainSpec site_chain(const ModelParams& p, int J) {
    return {p.migration_rate(), p.selection_rate(), p.d, false, 0.0, J};
  }
  static BDChainSpec dual_mean_chain(const ModelParams& p, int J) {
    return {p.migration_rate(), p.selection_rate(), p.d, true, 0.0, J};
  }

  int lowest() const { return singleton_migrates ? 0 : 1; }
  int states() const { return J - lowest() + 1; }
  int index(int size) const { return size - lowest(); }
  int size_at(int idx) const { return idx + lowest(); }

  double birth(int k) const { return k >= 1 && k < J ? s * k : 0.0; }
  double death(int k) const {
    if (k <= 0) return 0.0;
    double mig = (singleton_migrates || k >= 2) ? c * k : 0.0;
    return mig + 0.5 * d * k * (k - 1);
  }
  double reset_rate(int k) const { return k >= 2 ? reset : 0.0; }

  void validate() const {
    if (!(c >= 0 && s >= 0 && d >= 0 && reset >= 0)) throw std::invalid_argument("chain rates must be >= 0");
    if (J < 2) throw std::invalid_argument("chain truncation J must be >= 2");
  }
};

namespace detail {

// Column form: dp/dt = A p.
inline Eigen::MatrixXd forward_matrix(const BDChainSpec& spec) {
  int n = spec.states();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    int k = spec.size_at(i);
    double b = spec.birth(k), dd = spec.death(k), r = spec.reset_rate(k);
    if (b > 0) a(i + 1, i) += b;
    if (dd > 0) a(i - 1, i) += dd;
    if (r > 0) a(spec.index(1), i) += r;
    a(i, i) -= b + dd + r;
  }
  return a;
}

// Stationary law of a finite CTMC from its off-diagonal rates q[i][j] by the
// Grassmann-Taksar-Heyman elimination (subtraction free).
inline std::vector<double> gth_stationary(std::vector<std::vector<double>> q) {
  std::size_t n = q.size();
  for (std::size_t k = n - 1; k >= 1; --k) {
    double out = 0.0;
    for (std::size_t j = 0; j < k; ++j) out += q[k][j];
    if (!(out > 0.0)) throw std::runtime_error("stationary solve: state cannot reach lower states (singular truncation)");
    for (std::size_t i = 0; i < k; ++i) q[i][k] /= out;
    for (std::size_t i = 0; i < k; ++i)
      if (q[i][k] != 0.0)
        for (std::size_t j = 0; j < k; ++j) q[i][j] += q[i][k] * q[k][j];
  }
  std::vector<double> pi(n, 0.0);
  pi[0] = 1.0;
  double total = 1.0;
  for (std::size_t k = 1; k < n; ++k) {
    double v = 0.0;
    for (std::size_t i = 0; i < k; ++i) v += pi[i] * q[i][k];
    pi[k] = v;
    total += v;
  }
  for (double& v : pi) v /= total;
  return pi;
}

inline std::vector<std::vector<double>> rate_table(const BDChainSpec& spec) {
  int n = spec.states();
  std::vector<std::vector<double>> q(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (int i = 0; i < n; ++i) {
    int k = spec.size_at(i);
    auto r = static_cast<std::size_t>(i);
    if (spec.birth(k) > 0) q[r][r + 1] += spec.birth(k);
    if (spec.death(k) > 0) q[r][r - 1] += spec.death(k);
    if (spec.reset_rate(k) > 0) q[r][static_cast<std::size_t>(spec.index(1))] += spec.reset_rate(k);
  }
  return q;
}

inline double simpson(const std::vector<double>& y, double h) {
  std::size_t n = y.size() - 1;
  if (n % 2 != 0) throw std::logic_error("simpson: need an even number of intervals");
  double acc = y.front() + y.back();
  for (std::size_t i = 1; i < n; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * y[i];
  return acc * h / 3.0;
}

}  // namespace detail

struct TransientResult {
  std::vector<double> times;
  std::vector<std::vector<double>> laws;  // distribution over chain states at each time
  double boundary_mass = 0.0;             // largest mass seen at size J
};

/// Forward Kolmogorov solution from size 1 on a sorted time grid. The chain is
/// linear with constant rates, so each grid gap is bridged by exp(A h) exactly.
inline TransientResult bd_transient(const BDChainSpec& spec, const std::vector<double>& t_grid) {
  spec.validate();
  if (t_grid.empty() || !std::is_sorted(t_grid.begin(), t_grid.end()) || t_grid.front() < 0.0)
    throw std::invalid_argument("bd_transient: need a sorted nonnegative time grid");
  Eigen::MatrixXd a = detail::forward_matrix(spec);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(spec.states());
  x(spec.index(1)) = 1.0;

  std::map<double, Eigen::MatrixXd> propagators;
  auto advance = [&](double h) {
    if (h <= 0.0) return;
    // Grid gaps that agree to rounding share one propagator.
    double key = std::round(h * 1e12) / 1e12;
    auto it = propagators.find(key);
    if (it == propagators.end()) it = propagators.emplace(key, (a * h).exp()).first;
    x = it->second * x;
    x = x.cwiseMax(0.0);
  };

  TransientResult out;
  int top = spec.index(spec.J);
  double t = 0.0;
  for (double target : t_grid) {
    advance(target - t);
    t = target;
    out.times.push_back(t);
    out.laws.emplace_back(x.data(), x.data() + x.size());
    out.boundary_mass = std::max(out.boundary_mass, x(top));
  }
  return out;
}

inline void check_truncation(const TransientResult& r, const char* what) {
  if (r.boundary_mass >= 1e-10)
    throw TruncationError(std::string(what) + ": mass at the truncation boundary " + std::to_string(r.boundary_mass) +
                          " exceeds 1e-10; increase J");
}

/// E[zeta(t) 1{zeta(t) >= 2}] for the site chain started at 1.
inline std::vector<double> bd_transient_mean(const BDChainSpec& spec, const std::vector<double>& t_grid) {
  TransientResult r = bd_transient(spec, t_grid);
  check_truncation(r, "bd_transient_mean");
  std::vector<double> out;
  for (const auto& law : r.laws) {
    double m = 0.0;
    for (int i = 0; i < spec.states(); ++i) {
      int k = spec.size_at(i);
      if (k >= 2) m += k * law[static_cast<std::size_t>(i)];
    }
    out.push_back(m);
  }
  return out;
}

/// f(t) = E[size(t)] for the chain where singletons also migrate out (0 absorbing).
inline std::vector<double> dual_mean_f(const ModelParams& params, const std::vector<double>& t_grid, int J = 64) {
  BDChainSpec spec = BDChainSpec::dual_mean_chain(params, J);
  TransientResult r = bd_transient(spec, t_grid);
  check_truncation(r, "dual_mean_f");
  std::vector<double> out;
  for (const auto& law : r.laws) {
    double m = 0.0;
    for (int i = 0; i < spec.states(); ++i) m += spec.size_at(i) * law[static_cast<std::size_t>(i)];
    out.push_back(m);
  }
  return out;
}

/// Stationary law q*(a) of the reset chain over sizes 1..J.
inline SizeDistribution equilibrium_qstar(double a, const ModelParams& params, int J = 64) {
  if (!(a > 0.0)) throw std::invalid_argument("equilibrium_qstar: reset rate must be > 0");
  BDChainSpec spec = BDChainSpec::site_chain(params, J);
  spec.reset = a;
  SizeDistribution q{detail::gth_stationary(detail::rate_table(spec))};
  if (q.p.back() >= 1e-10)
    throw TruncationError("equilibrium_qstar: stationary mass " + std::to_string(q.p.back()) + " at J exceeds 1e-10");
  return q;
}

/// F(a) = c sum_{j>=2} j q*_j(a).
inline double qstar_flux(double a, const ModelParams& params, int J = 64) {
  return params.migration_rate() * equilibrium_qstar(a, params, J).multi_mass();
}

/// Runs fn(J), doubling J on truncation failure.
template <class Fn>
auto with_truncation(int J, Fn fn) -> decltype(fn(J)) {
  for (;;) {
    try {
      return fn(J);
    } catch (const TruncationError&) {
      if (J >= 4096) throw;
      J *= 2;
    }
  }
}

namespace detail {

// Laplace-type functional c int_0^inf e^{-a t} h(t) dt from h on a uniform grid
// plus the closed-form tail for h = h_inf beyond the grid.
struct RenewalFunctional {
  double c = 0.0;
  double step = 0.0;
  std::vector<double> h;
  double h_inf = 0.0;

  double operator()(double a) const {
    std::vector<double> y(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) y[i] = std::exp(-a * step * static_cast<double>(i)) * h[i];
    double horizon = step * static_cast<double>(h.size() - 1);
    return c * (simpson(y, step) + h_inf * std::exp(-a * horizon) / a);
  }
};

inline std::vector<double> uniform_grid(double horizon, double step) {
  auto n = static_cast<std::size_t>(std::llround(horizon / step));
  if (n % 2) ++n;
  std::vector<double> g(n + 1);
  for (std::size_t i = 0; i <= n; ++i) g[i] = step * static_cast<double>(i);
  return g;
}

// Extends the horizon until the functional has relaxed to its limit.
template <class Eval>
RenewalFunctional build_renewal(double c, double h_inf, Eval eval, double step = 5e-3) {
  for (double horizon = 40.0;; horizon *= 2.0) {
    std::vector<double> grid = uniform_grid(horizon, step);
    std::vector<double> h = eval(grid);
    double drift = 0.0;
    for (std::size_t i = h.size() * 3 / 4; i < h.size(); ++i) drift = std::max(drift, std::abs(h[i] - h_inf));
    if (drift < 1e-12 || horizon > 1000.0) return {c, step, std::move(h), h_inf};
  }
}

inline double bisect_decreasing(const std::function<double(double)>& g, double lo, double hi, double tol, const char* what) {
  double glo = g(lo), ghi = g(hi);
  if (!(glo > 0.0 && ghi < 0.0))
    throw BracketError(std::string(what) + ": no sign change on [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline void require_positive_rates(const ModelParams& p, const char* what) {
  p.validate();
  if (!(p.c > 0 && p.s > 0 && p.d > 0)) throw std::invalid_argument(std::string(what) + ": need c, s, d > 0");
}

}  // namespace detail

struct AlphaSolution {
  double alpha = 0.0;
  double residual = 0.0;
  int J = 0;
};

/// alpha with c int e^{-alpha t} E[zeta 1{zeta>=2}](t) dt = 1.
inline AlphaSolution malthusian_renewal(const ModelParams& params, int J = 64, double tol = 1e-6) {
  detail::require_positive_rates(params, "malthusian_renewal");
  return with_truncation(J, [&](int j) {
    BDChainSpec spec = BDChainSpec::site_chain(params, j);
    std::vector<std::vector<double>> q = detail::rate_table(spec);
    SizeDistribution stationary{detail::gth_stationary(q)};
    auto fn = detail::build_renewal(params.migration_rate(), stationary.multi_mass(),
                                    [&](const std::vector<double>& g) { return bd_transient_mean(spec, g); });
    double alpha = detail::bisect_decreasing([&](double a) { return fn(a) - 1.0; }, 1e-9, params.selection_rate(), 1e-12,
                                             "malthusian_renewal");
    double residual = std::abs(fn(alpha) - 1.0);
    if (residual > tol) throw std::runtime_error("malthusian_renewal: residual " + std::to_string(residual) + " above tol");
    return AlphaSolution{alpha, residual, j};
  });
}

/// alpha with c int e^{-alpha t} f(t) dt = 1, f the dual mean with migrating singletons.
inline AlphaSolution malthusian_dual_renewal(const ModelParams& params, int J = 64, double tol = 1e-6) {
  detail::require_positive_rates(params, "malthusian_dual_renewal");
  return with_truncation(J, [&](int j) {
    auto fn = detail::build_renewal(params.migration_rate(), 0.0,
                                    [&](const std::vector<double>& g) { return dual_mean_f(params, g, j); });
    double alpha = detail::bisect_decreasing([&](double a) { return fn(a) - 1.0; }, 1e-9, params.selection_rate(), 1e-12,
                                             "malthusian_dual_renewal");
    double residual = std::abs(fn(alpha) - 1.0);
    if (residual > tol) throw std::runtime_error("malthusian_dual_renewal: residual " + std::to_string(residual) + " above tol");
    return AlphaSolution{alpha, residual, j};
  });
}

struct FixedPoint {
  double alpha = 0.0;
  double residual = 0.0;
  SizeDistribution u_infty;
  int J = 0;
};

/// alpha = F(alpha) with F the decreasing stationary flux.
inline FixedPoint malthusian_fixed_point(const ModelParams& params, int J = 64, double tol = 1e-6) {
  detail::require_positive_rates(params, "malthusian_fixed_point");
  return with_truncation(J, [&](int j) {
    double lo = 1e-9;
    double hi = qstar_flux(lo, params, j);
    double alpha = detail::bisect_decreasing([&](double a) { return qstar_flux(a, params, j) - a; }, lo, hi, 1e-12,
                                             "malthusian_fixed_point");
    FixedPoint fp;
    fp.alpha = alpha;
    fp.u_infty = equilibrium_qstar(alpha, params, j);
    fp.residual = std::abs(params.migration_rate() * fp.u_infty.multi_mass() - alpha);
    if (fp.residual > tol) throw std::runtime_error("malthusian_fixed_point: residual " + std::to_string(fp.residual) + " above tol");
    fp.J = j;
    return fp;
  });
}

/// Trapezoid solution of x(t) = g(t) + lambda int_0^t x(r) k(t - r) dr on a
/// uniform grid with spacing h (g, k sampled on the same grid).
inline std::vector<double> solve_volterra(const std::vector<double>& g, const std::vector<double>& k, double lambda, double h) {
  if (g.size() != k.size() || g.empty()) throw std::invalid_argument("solve_volterra: g and kernel must share a nonempty grid");
  double diag = 1.0 - 0.5 * lambda * h * k[0];
  if (!(diag > 0.0)) throw std::runtime_error("solve_volterra: step too coarse for the kernel");
  std::vector<double> x(g.size());
  x[0] = g[0];
  for (std::size_t n = 1; n < g.size(); ++n) {
    double acc = 0.5 * x[0] * k[n];
    for (std::size_t j = 1; j < n; ++j) acc += x[j] * k[n - j];
    x[n] = (g[n] + lambda * h * acc) / diag;
  }
  return x;
}

/// Mean number of occupied sites of the collision-free dual from one particle.
inline std::vector<double> cmj_mean_sites(const ModelParams& params, const std::vector<double>& uniform_grid, int J = 64) {
  if (uniform_grid.size() < 2) throw std::invalid_argument("cmj_mean_sites: need >= 2 grid points");
  double h = uniform_grid[1] - uniform_grid[0];
  return with_truncation(J, [&](int j) {
    std::vector<double> kernel = bd_transient_mean(BDChainSpec::site_chain(params, j), uniform_grid);
    return solve_volterra(std::vector<double>(uniform_grid.size(), 1.0), kernel, params.migration_rate(), h);
  });
}

struct StableConstants {
  double gamma = 0.0;
  double B = 0.0;
  double alpha_check = 0.0;  // c sum_{j>=2} j u(j)
};

inline StableConstants stable_constants(const SizeDistribution& u_infty, double alpha, const ModelParams& params) {
  double c = params.migration_rate();
  if (!(c > 0.0)) throw std::invalid_argument("stable_constants: need c > 0");
  StableConstants k;
  k.gamma = c * u_infty.at(1);
  k.B = (alpha + k.gamma) / c;
  k.alpha_check = c * u_infty.multi_mass();
  return k;
}

struct MalthusResult {
  double alpha = 0.0;  // fixed-point value
  double gamma = 0.0;
  double B = 0.0;
  SizeDistribution u_infty;
  double alpha_renewal = 0.0;
  double alpha_dual_renewal = 0.0;
  double residual_fixed_point = 0.0;
  double residual_renewal = 0.0;
  double residual_dual_renewal = 0.0;
  int J = 0;
};

inline MalthusResult compute_malthus(const ModelParams& params, int J = 64, double tol = 1e-6) {
  FixedPoint fp = malthusian_fixed_point(params, J, tol);
  AlphaSolution ren = malthusian_renewal(params, J, tol);
  AlphaSolution dual = malthusian_dual_renewal(params, J, tol);
  StableConstants k = stable_constants(fp.u_infty, fp.alpha, params);
  MalthusResult r;
  r.alpha = fp.alpha;
  r.gamma = k.gamma;
  r.B = k.B;
  r.u_infty = fp.u_infty;
  r.alpha_renewal = ren.alpha;
  r.alpha_dual_renewal = dual.alpha;
  r.residual_fixed_point = fp.residual;
  r.residual_renewal = ren.residual;
  r.residual_dual_renewal = dual.residual;
  r.J = std::max({fp.J, ren.J, dual.J});
  return r;
}

}  // namespace mfwf
