#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "bbm/engine.hpp"
#include "bbm/errors.hpp"
#include "bbm/random.hpp"

namespace bbm {

// Front centering m(t) = sqrt(2) t - (3 / (2 sqrt(2))) ln t.
inline double front_centering(double t) {
  if (!(t > 0.0)) throw validation_error("front_centering: t must be > 0");
  return kSqrt2 * t - 1.5 / kSqrt2 * std::log(t);
}

// Relative heights of all particles: y_k = sqrt(2) t - x_k and
// z_k = y_k exp(-sqrt(2) y_k), the derivative-martingale summands.
inline std::vector<std::pair<double, double>> relative_heights(const Population& pop) {
  if (pop.empty()) throw state_error("relative_heights: population is empty");
  std::vector<std::pair<double, double>> out;
  out.reserve(pop.size());
  const double base = kSqrt2 * pop.time();
  for (double x : pop.positions()) {
    const double y = base - x;
    out.emplace_back(y, y * std::exp(-kSqrt2 * y));
  }
  return out;
}

struct MartingaleSnapshot {
  double t = 0.0;
  double Y = 0.0;   // sum exp(-sqrt(2) y_k), the additive martingale
  double Z = 0.0;   // sum y_k exp(-sqrt(2) y_k), the derivative martingale
  double Z2 = 0.0;  // sum y_k^2 exp(-2 sqrt(2) y_k)
  double min_y = 0.0;
};

inline MartingaleSnapshot martingale_snapshot(const Population& pop) {
  if (pop.empty()) throw state_error("martingale_snapshot: population is empty");
  MartingaleSnapshot s;
  s.t = pop.time();
  s.min_y = std::numeric_limits<double>::infinity();
  const double base = kSqrt2 * pop.time();
  for (double x : pop.positions()) {
    const double y = base - x;
    const double e = std::exp(-kSqrt2 * y);
    s.Y += e;
    s.Z += y * e;
    s.Z2 += y * y * e * e;
    s.min_y = std::min(s.min_y, y);
  }
  return s;
}

// Recentered maximum M(t) = max_k x_k(t) - m(t).
inline double max_displacement(const Population& pop) {
  if (pop.empty()) throw state_error("max_displacement: population is empty");
  if (!(pop.time() > 0.0))
    throw validation_error("max_displacement: undefined at t = 0");
  return pop.max_position() - front_centering(pop.time());
}

// Monotone grid function on [0, 1].
struct EmpiricalCdf {
  std::vector<double> x_grid;
  std::vector<double> values;

  EmpiricalCdf(std::vector<double> xs, std::vector<double> vs)
      : x_grid(std::move(xs)), values(std::move(vs)) {
    if (x_grid.size() != values.size() || x_grid.empty())
      throw validation_error("EmpiricalCdf: mismatched or empty grids");
    for (std::size_t i = 1; i < x_grid.size(); ++i)
      if (!(x_grid[i] > x_grid[i - 1]))
        throw validation_error("EmpiricalCdf: x grid must be strictly increasing");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] < -0.0 || values[i] > 1.0)
        throw validation_error("EmpiricalCdf: values must lie in [0, 1]");
      if (i > 0 && values[i] < values[i - 1])
        throw validation_error("EmpiricalCdf: values must be nondecreasing");
    }
  }

  double sup_distance(const EmpiricalCdf& other) const {
    if (x_grid != other.x_grid)
      throw validation_error("EmpiricalCdf::sup_distance: grids differ");
    double d = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
      d = std::max(d, std::abs(values[i] - other.values[i]));
    return d;
  }
};

// Time-averaged distribution of the recentered maximum over a uniformly
// sampled path: F(x) = (1/T) sum_i 1{M(s_i) <= x} ds, a left-Riemann sum
// with ds = s_1 - s_0 and T = n * ds.
inline EmpiricalCdf empirical_cdf(std::span<const std::pair<double, double>> m_path,
                                  std::vector<double> x_grid) {
  if (m_path.empty()) throw validation_error("empirical_cdf: empty path");
  if (m_path.size() >= 2) {
    const double ds = m_path[1].first - m_path[0].first;
    if (!(ds > 0.0)) throw validation_error("empirical_cdf: path times must increase");
    for (std::size_t i = 2; i < m_path.size(); ++i) {
      const double d = m_path[i].first - m_path[i - 1].first;
      if (std::abs(d - ds) > 1e-9 * std::max(1.0, std::abs(ds)))
        throw validation_error("empirical_cdf: path grid must be uniform");
    }
  }
  // Counting sort against the sorted sample is O((n+m) log n).
  std::vector<double> ms;
  ms.reserve(m_path.size());
  for (const auto& [s, m] : m_path) ms.push_back(m);
  std::sort(ms.begin(), ms.end());
  std::vector<double> vals;
  vals.reserve(x_grid.size());
  const double n = static_cast<double>(ms.size());
  for (double x : x_grid) {
    const auto it = std::upper_bound(ms.begin(), ms.end(), x);
    vals.push_back(static_cast<double>(it - ms.begin()) / n);
  }
  return EmpiricalCdf(std::move(x_grid), std::move(vals));
}

// Gumbel law with a random multiplicative shift: x -> exp(-C Z e^{-sqrt(2) x}).
struct GumbelParams {
  double C = 1.0;
  double Z = 1.0;

  void validate() const {
    if (!(C > 0.0)) throw validation_error("GumbelParams: C must be > 0");
    if (!(Z > 0.0)) throw validation_error("GumbelParams: Z must be > 0");
  }
};

inline double gumbel_predict(const GumbelParams& params, double x) {
  params.validate();
  return std::exp(-params.C * params.Z * std::exp(-kSqrt2 * x));
}

inline EmpiricalCdf gumbel_cdf_on_grid(const GumbelParams& params, std::vector<double> x_grid) {
  std::vector<double> vals;
  vals.reserve(x_grid.size());
  for (double x : x_grid) vals.push_back(gumbel_predict(params, x));
  return EmpiricalCdf(std::move(x_grid), std::move(vals));
}

// Estimates P[M(s) <= x | F_{R}] for a population frozen at time R by
// continuing the whole population n_cont times with independent child
// streams and counting. Continuations run without path recording.
inline EmpiricalCdf conditional_max_cdf(const Population& early, double horizon,
                                        std::vector<double> x_grid, int n_cont,
                                        RandomStream& stream, const OffspringLaw& law,
                                        const PruneConfig& prune) {
  if (!(horizon > early.time()))
    throw validation_error("conditional_max_cdf: horizon must exceed the frozen time");
  if (n_cont < 100) throw validation_error("conditional_max_cdf: n_cont must be >= 100");
  Population base = early;
  base.drop_paths();
  std::vector<std::uint64_t> counts(x_grid.size(), 0);
  for (int c = 0; c < n_cont; ++c) {
    Population pop = base;
    RandomStream sub = stream.spawn();
    pop.advance(horizon, law, prune, sub);
    const double m = max_displacement(pop);
    for (std::size_t i = 0; i < x_grid.size(); ++i)
      if (m <= x_grid[i]) ++counts[i];
  }
  std::vector<double> vals;
  vals.reserve(x_grid.size());
  for (std::uint64_t c : counts) vals.push_back(static_cast<double>(c) / n_cont);
  return EmpiricalCdf(std::move(x_grid), std::move(vals));
}

}  // namespace bbm
