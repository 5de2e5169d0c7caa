#pragma once

// Shared domain types of the two-type mean-field Fisher-Wright system and
// the functionals read off a configuration: empirical mean, the labelled
// droplet measure and the size-biased (Palm) law of a sampled site.

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfwf {

/// Rates of the N-site system. `m` is the total mutation intensity; a single
/// site mutates at m * N^{-beta3}.
struct ModelParams {
  double c = 0.0;  // migration
  double s = 0.0;  // selection
  double d = 0.0;  // resampling
  double m = 0.0;  // mutation intensity
  int n_sites = 1;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta3 = 1.0;

  void validate() const {
    auto check = [](double v, const char* name) {
      if (!std::isfinite(v) || v < 0.0)
        throw std::invalid_argument(std::string("model parameter '") + name + "' must be finite and >= 0");
    };
    check(c, "c");
    check(s, "s");
    check(d, "d");
    check(m, "m");
    check(beta1, "beta1");
    check(beta2, "beta2");
    check(beta3, "beta3");
    if (n_sites < 1) throw std::invalid_argument("model parameter 'n_sites' must be >= 1");
  }

  // Level-k migration scales as N^{-(k-1)(1-beta1)}; the mean-field system is level 1.
  double migration_rate() const {
    constexpr int level = 1;
    return c * std::pow(static_cast<double>(n_sites), -(level - 1) * (1.0 - beta1));
  }
  double selection_rate() const { return s * std::pow(static_cast<double>(n_sites), -beta2); }
  double mutation_per_site() const { return m * std::pow(static_cast<double>(n_sites), -beta3); }

  ModelParams with_sites(int n) const {
    ModelParams p = *this;
    p.n_sites = n;
    return p;
  }
};

/// Type-2 fractions across the sites; x1 = 1 - x2 is never stored.
struct Configuration {
  std::vector<double> x2;
  double time = 0.0;

  static Configuration all_type1(int n_sites) { return {std::vector<double>(static_cast<std::size_t>(n_sites), 0.0), 0.0}; }

  std::size_t size() const { return x2.size(); }
  double x1(std::size_t i) const { return 1.0 - x2[i]; }

  void validate() const {
    if (!(time >= 0.0)) throw std::invalid_argument("configuration time must be >= 0");
    for (double v : x2)
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("configuration entry outside [0,1]");
  }
};

inline double empirical_mean(std::span<const double> x2) {
  if (x2.empty()) throw std::invalid_argument("empirical_mean: empty configuration");
  double sum = 0.0;
  for (double v : x2) sum += v;
  return sum / static_cast<double>(x2.size());
}

inline double empirical_mean(const Configuration& config) { return empirical_mean(config.x2); }

inline double total_mass(const Configuration& config) {
  double sum = 0.0;
  for (double v : config.x2) sum += v;
  return sum;
}

struct Atom {
  double location = 0.0;
  double mass = 0.0;
  bool operator==(const Atom&) const = default;
};

/// Finite atomic measure on [0,1].
struct AtomicMeasure {
  std::vector<Atom> atoms;

  double total_mass() const {
    double sum = 0.0;
    for (const auto& a : atoms) sum += a.mass;
    return sum;
  }

  bool empty() const { return atoms.empty(); }

  void validate() const {
    for (const auto& a : atoms) {
      if (!(a.location >= 0.0 && a.location <= 1.0)) throw std::invalid_argument("atom location outside [0,1]");
      if (!(a.mass >= 0.0) || !std::isfinite(a.mass)) throw std::invalid_argument("atom mass must be finite and >= 0");
    }
  }

  // Sorted by location, coincident atoms merged, zero atoms dropped.
  AtomicMeasure canonical() const {
    std::map<double, double> merged;
    for (const auto& a : atoms)
      if (a.mass > 0.0) merged[a.location] += a.mass;
    AtomicMeasure out;
    out.atoms.reserve(merged.size());
    for (const auto& [loc, mass] : merged) out.atoms.push_back({loc, mass});
    return out;
  }
};

/// Atom at labels[j] carrying x2(j) for every site with positive type-2 mass.
inline AtomicMeasure droplet_measure(const Configuration& config, std::span<const double> labels) {
  if (labels.size() != config.size())
    throw std::invalid_argument("droplet_measure: label count does not match site count");
  AtomicMeasure out;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (!(labels[j] >= 0.0 && labels[j] <= 1.0)) throw std::invalid_argument("droplet_measure: label outside [0,1]");
    if (config.x2[j] > 0.0) out.atoms.push_back({labels[j], config.x2[j]});
  }
  return out;
}

/// Discrete law on distinct sampled values.
struct DiscreteDistribution {
  std::vector<double> values;
  std::vector<double> weights;

  double mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) m += values[i] * weights[i];
    return m;
  }
};

/// Size-biased empirical law: value v gets weight proportional to v * frequency(v).
inline DiscreteDistribution palm_estimate(std::span<const double> samples) {
  std::map<double, double> acc;
  double norm = 0.0;
  for (double v : samples) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("palm_estimate: sample outside [0,1]");
    if (v > 0.0) {
      acc[v] += v;
      norm += v;
    }
  }
  if (norm <= 0.0) throw std::invalid_argument("palm_estimate: all samples are zero");
  DiscreteDistribution out;
  for (const auto& [v, w] : acc) {
    out.values.push_back(v);
    out.weights.push_back(w / norm);
  }
  return out;
}

inline void write_atoms_csv(std::ostream& os, const AtomicMeasure& measure) {
  os << "location,mass\n";
  os.precision(17);
  for (const auto& a : measure.atoms) os << a.location << ',' << a.mass << '\n';
}

inline AtomicMeasure read_atoms_csv(std::istream& is) {
  AtomicMeasure out;
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("location", 0) == 0) continue;
    }
    std::istringstream row(line);
    Atom a;
    char comma = 0;
    if (!(row >> a.location >> comma >> a.mass) || comma != ',')
      throw std::invalid_argument("atom csv: malformed row '" + line + "'");
    out.atoms.push_back(a);
  }
  out.validate();
  return out;
}

}  // namespace mfwf
