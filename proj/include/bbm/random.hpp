#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <bit>
#include <random>
#include <string_view>
#include <vector>

#include "bbm/errors.hpp"

namespace bbm {

inline constexpr double kSqrt2 = 1.4142135623730951;

namespace detail {

// splitmix64 finalizer (Stafford mix13). Used only for seeding and
// sub-stream derivation, never as the sampling generator.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

namespace detail {

// 256-layer ziggurat tables (Doornik-style layout). Built once from the
// published (R, V) constants; pure floating-point construction, so the
// tables are identical on every platform.
struct ZigguratNormal {
  static constexpr int kLayers = 256;
  static constexpr double kR = 3.6541528853610088;
  static constexpr double kV = 0.00492867323399;
  double x[kLayers + 1];
  double f[kLayers + 1];
  double ratio[kLayers];

  ZigguratNormal() {
    const double fr = std::exp(-0.5 * kR * kR);
    x[0] = kV / fr;
    x[1] = kR;
    f[0] = 1.0;  // unused sentinel height for the base strip
    double fi = fr;
    for (int i = 2; i < kLayers; ++i) {
      x[i] = std::sqrt(-2.0 * std::log(kV / x[i - 1] + fi));
      fi = std::exp(-0.5 * x[i] * x[i]);
    }
    x[kLayers] = 0.0;
    for (int i = 0; i <= kLayers; ++i) f[i] = std::exp(-0.5 * x[i] * x[i]);
    for (int i = 0; i < kLayers; ++i) ratio[i] = x[i + 1] / x[i];
  }

};

inline const ZigguratNormal kZigNormal{};

struct ZigguratExp {
  static constexpr int kLayers = 256;
  static constexpr double kR = 7.69711747013104972;
  static constexpr double kV = 0.0039496598225815571993;
  double x[kLayers + 1];
  double f[kLayers + 1];
  double ratio[kLayers];

  ZigguratExp() {
    const double fr = std::exp(-kR);
    x[0] = kV / fr;
    x[1] = kR;
    double fi = fr;
    for (int i = 2; i < kLayers; ++i) {
      x[i] = -std::log(kV / x[i - 1] + fi);
      fi = std::exp(-x[i]);
    }
    x[kLayers] = 0.0;
    for (int i = 0; i <= kLayers; ++i) f[i] = std::exp(-x[i]);
    for (int i = 0; i < kLayers; ++i) ratio[i] = x[i + 1] / x[i];
  }

};

inline const ZigguratExp kZigExp{};

}  // namespace detail

// Seeded random stream. Single-owner: never share one instance across
// concurrent tasks; parallelism goes through derived sub-streams.
//
// Reproducibility contract (fixed per release):
//   * engine: std::mt19937_64, whose output sequence is fully specified by
//     the C++ standard, seeded with mix64(seed);
//   * uniform(): ((x >> 11) + 0.5) * 2^-53, strictly inside (0, 1);
//   * gaussian(): 256-layer ziggurat with Marsaglia tail beyond R = 3.654...;
//   * exponential(): 256-layer ziggurat, tail by memorylessness;
//   * sub-streams: seed' = chain of mix64 over (seed, replica, tag bytes).
// Identical (seed, call sequence) therefore gives bitwise-identical samples
// on any conforming platform.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed)
      : engine_(detail::mix64(seed)), seed_(seed) {}

  // Derives the sub-stream for (seed, replica, tag). Distinct triples give
  // independent streams; the same triple always gives the same stream.
  static RandomStream substream(std::uint64_t seed, std::uint64_t replica,
                                std::string_view tag) {
    std::uint64_t h = detail::mix64(seed);
    h = detail::mix64(h ^ (0x9e3779b97f4a7c15ULL * (replica + 1)));
    for (unsigned char c : tag) h = detail::mix64(h ^ c);
    return RandomStream(h);
  }

  // Child stream seeded from this stream's output. Handy for nested loops
  // where a (replica, tag) pair is not a natural fit.
  RandomStream spawn() { return RandomStream(next_u64()); }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on (0, 1), bounded away from both endpoints.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal. One u64 feeds the layer index (bits 0..7), the sign
  // (bit 8) and the 53-bit mantissa (bits 11..63); they are disjoint. The
  // sign is applied by setting the sign bit, which keeps the hot path
  // branch-free.
  double gaussian() {
    const auto& z = detail::kZigNormal;
    for (;;) {
      const std::uint64_t bits = engine_();
      const std::uint64_t sign_bit = (bits & 0x100) << 55;
      const int i = static_cast<int>(bits & 0xff);
      const double u = (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
      if (u < z.ratio[i])
        return std::bit_cast<double>(std::bit_cast<std::uint64_t>(u * z.x[i]) | sign_bit);
      if (i == 0) {
        // Marsaglia tail beyond R.
        for (;;) {
          const double xx = -std::log(uniform()) / z.kR;
          const double yy = -std::log(uniform());
          if (yy + yy >= xx * xx)
            return std::bit_cast<double>(std::bit_cast<std::uint64_t>(z.kR + xx) | sign_bit);
        }
      }
      const double val = u * z.x[i];
      if (z.f[i] + uniform() * (z.f[i + 1] - z.f[i]) < std::exp(-0.5 * val * val))
        return std::bit_cast<double>(std::bit_cast<std::uint64_t>(val) | sign_bit);
    }
  }

  // Exp(1).
  double exponential() {
    const auto& z = detail::kZigExp;
    double shift = 0.0;
    for (;;) {
      const std::uint64_t bits = engine_();
      const int i = static_cast<int>(bits & 0xff);
      const double u = (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
      if (u < z.ratio[i]) return shift + u * z.x[i];
      if (i == 0) {
        // Memoryless tail: restart beyond R.
        shift += z.kR;
        continue;
      }
      const double val = u * z.x[i];
      if (z.f[i] + uniform() * (z.f[i + 1] - z.f[i]) < std::exp(-val))
        return shift + val;
    }
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
};

// Exp(rate) sample; mean 1/rate.
inline double exponential_sample(RandomStream& stream, double rate) {
  if (!(rate > 0.0)) throw validation_error("exponential_sample: rate must be > 0");
  return stream.exponential() / rate;
}

// Brownian displacement over a time interval dt: N(0, dt).
inline double brownian_increment(RandomStream& stream, double dt) {
  if (!(dt > 0.0)) throw validation_error("brownian_increment: dt must be > 0");
  return stream.gaussian() * std::sqrt(dt);
}

// Brownian bridge from (0, a) to (t, b), observed on a fixed time grid.
struct BridgeSpec {
  double length = 1.0;  // t > 0
  double a = 0.0;       // value at time 0
  double b = 0.0;       // value at time t
  std::vector<double> grid;  // strictly increasing, grid.front()==0, grid.back()==t

  void validate() const {
    if (!(length > 0.0)) throw validation_error("BridgeSpec: length must be > 0");
    if (grid.size() < 2) throw validation_error("BridgeSpec: grid needs at least {0, t}");
    if (grid.front() != 0.0) throw validation_error("BridgeSpec: grid must start at 0");
    if (grid.back() != length) throw validation_error("BridgeSpec: grid must end at t");
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (!(grid[i] > grid[i - 1]))
        throw validation_error("BridgeSpec: grid must be strictly increasing");
  }
};

// Samples the bridge at the grid times by forward conditioning: given the
// value x at time s, the next value at time s' is Gaussian with mean pulled
// toward the endpoint, mean = x + (s'-s)/(t-s) (b-x), var = (s'-s)(t-s')/(t-s).
// Endpoints are set exactly, with no floating tolerance.
inline std::vector<double> bridge_sample_path(RandomStream& stream, const BridgeSpec& spec) {
  spec.validate();
  const std::size_t n = spec.grid.size();
  std::vector<double> path(n);
  path[0] = spec.a;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double s0 = spec.grid[i - 1];
    const double s1 = spec.grid[i];
    const double remain = spec.length - s0;
    const double dt = s1 - s0;
    const double mean = path[i - 1] + dt / remain * (spec.b - path[i - 1]);
    const double var = dt * (spec.length - s1) / remain;
    path[i] = mean + std::sqrt(var) * stream.gaussian();
  }
  path[n - 1] = spec.b;
  return path;
}

// Upper bound for the probability that a pinned bridge of length t stays
// below the chord through (0, z1) and (t, z2) on the window [r1, t - r2]:
//   (2 / (t - r1 - r2)) * prod_i (z(r_i) + sqrt(r_i)),
// with z(r1), z(r2) the chord values at r1 and t - r2. May exceed 1; it is a
// bound, not a probability.
inline double bridge_below_line_bound(double z1, double z2, double r1, double r2, double t) {
  if (z1 < 0.0 || z2 < 0.0 || r1 < 0.0 || r2 < 0.0)
    throw validation_error("bridge_below_line_bound: z1, z2, r1, r2 must be >= 0");
  if (!(t > r1 + r2))
    throw validation_error("bridge_below_line_bound: requires t > r1 + r2");
  const double z_r1 = (1.0 - r1 / t) * z1 + (r1 / t) * z2;
  const double z_r2 = (r2 / t) * z1 + (1.0 - r2 / t) * z2;
  return 2.0 / (t - r1 - r2) * (z_r1 + std::sqrt(r1)) * (z_r2 + std::sqrt(r2));
}

}  // namespace bbm
