#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mfwf {

/// Identifies one random stream: (master seed, replica, label) -> engine state.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::int64_t replica_index = 0;
  std::string stream_label;

  SeedSpec with_replica(std::int64_t replica) const { return {master_seed, replica, stream_label}; }
  SeedSpec with_label(std::string label) const { return {master_seed, replica_index, std::move(label)}; }

  // "<master>/<replica>/<label>"; the label is the remainder and may contain '/'.
  std::string to_string() const {
    return std::to_string(master_seed) + "/" + std::to_string(replica_index) + "/" + stream_label;
  }

  static SeedSpec parse(std::string_view text) {
    auto first = text.find('/');
    if (first == std::string_view::npos) throw std::invalid_argument("seed spec: missing replica field");
    auto second = text.find('/', first + 1);
    if (second == std::string_view::npos) throw std::invalid_argument("seed spec: missing label field");
    SeedSpec out;
    try {
      out.master_seed = std::stoull(std::string(text.substr(0, first)));
      out.replica_index = std::stoll(std::string(text.substr(first + 1, second - first - 1)));
    } catch (const std::exception&) {
      throw std::invalid_argument("seed spec: malformed number in '" + std::string(text) + "'");
    }
    out.stream_label = std::string(text.substr(second + 1));
    return out;
  }

  bool operator==(const SeedSpec&) const = default;
};

using Stream = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Counter-based derivation: the three key fields are hashed through
/// SplitMix64 into a seed sequence, so no stream depends on another's draws.
inline Stream derive_stream(const SeedSpec& seed) {
  std::uint64_t state = seed.master_seed;
  std::uint64_t a = detail::splitmix64(state);
  state ^= static_cast<std::uint64_t>(seed.replica_index) * 0xd1b54a32d192ed03ULL;
  std::uint64_t b = detail::splitmix64(state);
  state ^= detail::fnv1a(seed.stream_label);
  std::uint64_t c = detail::splitmix64(state);
  std::uint64_t d = detail::splitmix64(state);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32),
                    static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(d >> 32)};
  return Stream(seq);
}

inline double uniform01(Stream& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double exponential(Stream& rng, double rate) {
  return std::exponential_distribution<double>(rate)(rng);
}

inline long poisson(Stream& rng, double mean) {
  if (mean <= 0.0) return 0;
  return std::poisson_distribution<long>(mean)(rng);
}

inline double gamma_unit(Stream& rng, double shape) {
  return std::gamma_distribution<double>(shape, 1.0)(rng);
}

}  // namespace mfwf
