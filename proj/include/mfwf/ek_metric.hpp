#pragma once

// Metric on finite atomic measures on [0,1]: Prohorov distance plus the
// largest discrepancy of the pair-correlation functionals
//   I_eps(mu) = sum_{i,j} w_i w_j psi(min(|x_i - x_j| / eps, 1)).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "core.hpp"

namespace mfwf {

using Kernel = std::function<double(double)>;

inline double default_kernel(double r) { return std::max(0.0, 1.0 - r); }

inline void validate_kernel(const Kernel& psi) {
  if (std::abs(psi(0.0) - 1.0) > 1e-12 || std::abs(psi(1.0)) > 1e-12)
    throw std::invalid_argument("kernel must satisfy psi(0)=1 and psi(1)=0");
  double prev = psi(0.0);
  for (int i = 1; i <= 256; ++i) {
    double v = psi(i / 256.0);
    if (!std::isfinite(v) || v > prev + 1e-12) throw std::invalid_argument("kernel must be finite and nonincreasing on [0,1]");
    prev = v;
  }
}

namespace detail {

// Largest mass that can be moved between mu and nu when each unit travels at
// most delta. Both atom lists sorted by location; on the line, serving each mu
// atom from the leftmost still-reachable nu atoms is optimal.
inline double matched_mass(const std::vector<Atom>& mu, const std::vector<Atom>& nu, double delta) {
  std::vector<double> left(nu.size());
  for (std::size_t j = 0; j < nu.size(); ++j) left[j] = nu[j].mass;
  double flow = 0.0;
  std::size_t start = 0;
  // Reach is tested on |x - y|, the same expression as the breakpoints, so a
  // pair is always reachable at its own breakpoint.
  auto beyond = [delta](double x, double y) { return std::abs(x - y) > delta; };
  for (const auto& a : mu) {
    double need = a.mass;
    while (start < nu.size() && ((nu[start].location < a.location && beyond(nu[start].location, a.location)) || left[start] <= 0.0)) ++start;
    for (std::size_t j = start; j < nu.size() && need > 0.0; ++j) {
      if (nu[j].location > a.location && beyond(nu[j].location, a.location)) break;
      double take = std::min(need, left[j]);
      left[j] -= take;
      need -= take;
      flow += take;
    }
  }
  return flow;
}

inline double pair_functional(const std::vector<Atom>& atoms, double eps, const Kernel& psi) {
  double total = 0.0;
  for (const auto& a : atoms)
    for (const auto& b : atoms) total += a.mass * b.mass * psi(std::min(std::abs(a.location - b.location) / eps, 1.0));
  return total;
}

}  // namespace detail

inline double prohorov_distance(const AtomicMeasure& mu_in, const AtomicMeasure& nu_in) {
  AtomicMeasure mu = mu_in.canonical();
  AtomicMeasure nu = nu_in.canonical();
  double top = std::max(mu.total_mass(), nu.total_mass());

  std::vector<double> breaks{0.0};
  for (const auto& a : mu.atoms)
    for (const auto& b : nu.atoms) breaks.push_back(std::abs(a.location - b.location));
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  // excess(delta) = top - flow(delta) is nonincreasing, so max(delta, excess)
  // over the breakpoints is minimized at the first breakpoint where delta >= excess.
  // Rounding residue from the greedy subtraction is treated as zero.
  auto excess = [&](double delta) {
    double e = top - detail::matched_mass(mu.atoms, nu.atoms, delta);
    return e <= 1e-13 * std::max(1.0, top) ? 0.0 : e;
  };
  std::size_t lo = 0, hi = breaks.size();
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (breaks[mid] >= excess(breaks[mid]))
      hi = mid;
    else
      lo = mid + 1;
  }
  double best = std::numeric_limits<double>::infinity();
  if (lo < breaks.size()) best = breaks[lo];
  if (lo > 0) best = std::min(best, excess(breaks[lo - 1]));
  return best;
}

inline std::vector<double> default_eps_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 20; ++k) grid.push_back(std::ldexp(1.0, -k));
  return grid;
}

inline double kernel_discrepancy(const AtomicMeasure& mu, const AtomicMeasure& nu, const Kernel& psi,
                                 const std::vector<double>& eps_grid) {
  AtomicMeasure a = mu.canonical();
  AtomicMeasure b = nu.canonical();
  double sup = 0.0;
  for (double eps : eps_grid)
    sup = std::max(sup, std::abs(detail::pair_functional(a.atoms, eps, psi) - detail::pair_functional(b.atoms, eps, psi)));
  return sup;
}

inline double ek_distance(const AtomicMeasure& mu, const AtomicMeasure& nu, const Kernel& psi = default_kernel,
                          const std::vector<double>& eps_grid = default_eps_grid()) {
  validate_kernel(psi);
  mu.validate();
  nu.validate();
  return prohorov_distance(mu, nu) + kernel_discrepancy(mu, nu, psi, eps_grid);
}

}  // namespace mfwf
