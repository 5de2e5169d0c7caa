#pragma once

// One time step of a single Fisher-Wright site
//
//   dx = [c (target - x) + s x (1 - x) + mu (1 - x)] dt + sqrt(d x (1 - x)) dW.
//
// Near 0 the equation is affine in x once s(1-x) and d(1-x) are frozen at the
// pre-step value, giving a Feller (CIR) diffusion whose transition law is a
// Poisson mixture of Gammas and can be sampled exactly. Near 1 the same is done
// for y = 1 - x. The frozen-coefficient step keeps 0 and 1 exactly absorbing
// when there is no inflow and has no clamping bias at tiny masses, which is
// the regime that decides emergence times.

#include <algorithm>
#include <cmath>
#include <random>

#include "random.hpp"

namespace mfwf {

struct SiteRates {
  double c = 0.0;
  double s = 0.0;
  double d = 0.0;
  double mu = 0.0;  // per-site mutation rate
};

enum class Scheme { AffineExact, EulerMaruyama };

namespace detail {

// expm1(b h) / b, continuous at b = 0.
inline double affine_phi(double b, double h) {
  double bh = b * h;
  if (std::abs(bh) < 1e-10) return h * (1.0 + 0.5 * bh);
  return std::expm1(bh) / b;
}

// Exact step of dz = (a + b z) dt + sqrt(sigma2 z) dW from z >= 0.
inline double feller_step(double z, double a, double b, double sigma2, double h, Stream& rng) {
  double phi = affine_phi(b, h);
  double growth = std::exp(b * h);
  if (sigma2 <= 0.0) return z * growth + a * phi;
  double scale = 0.5 * sigma2 * phi;
  long n = poisson(rng, z * growth / scale);
  double shape = 2.0 * a / sigma2 + static_cast<double>(n);
  if (shape <= 0.0) return 0.0;
  return scale * gamma_unit(rng, shape);
}

}  // namespace detail

inline double affine_site_step(double x, double target, const SiteRates& r, double h, Stream& rng) {
  double out;
  if (x <= 0.5) {
    double a = r.c * target + r.mu;
    double b = r.s * (1.0 - x) - r.c - r.mu;
    out = detail::feller_step(x, a, b, r.d * (1.0 - x), h, rng);
  } else {
    double y = 1.0 - x;
    double a = r.c * (1.0 - target);
    double b = -r.s * (1.0 - y) - r.c - r.mu;
    out = 1.0 - detail::feller_step(y, a, b, r.d * (1.0 - y), h, rng);
  }
  return std::clamp(out, 0.0, 1.0);
}

// Plain Euler-Maruyama with clamping; noise evaluated at the clamped pre-step state.
inline double euler_site_step(double x, double target, const SiteRates& r, double h, Stream& rng) {
  double drift = r.c * (target - x) + r.s * x * (1.0 - x) + r.mu * (1.0 - x);
  double var = r.d * x * (1.0 - x);
  double noise = var > 0.0 ? std::sqrt(var * h) * std::normal_distribution<double>(0.0, 1.0)(rng) : 0.0;
  return std::clamp(x + drift * h + noise, 0.0, 1.0);
}

inline double site_step(Scheme scheme, double x, double target, const SiteRates& r, double h, Stream& rng) {
  return scheme == Scheme::AffineExact ? affine_site_step(x, target, r, h, rng) : euler_site_step(x, target, r, h, rng);
}

}  // namespace mfwf
