#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "bbm/engine.hpp"
#include "bbm/errors.hpp"
#include "bbm/frontier.hpp"
#include "bbm/stats.hpp"

namespace bbm {

// Power envelope profile: s^gamma on the first half of [0, t], (t-s)^gamma on
// the second half. Continuous at t/2 and symmetric about it.
inline double f_gamma(double gamma, double t, double s) {
  if (!(gamma > 0.0)) throw validation_error("f_gamma: gamma must be > 0");
  if (!(t > 0.0)) throw validation_error("f_gamma: t must be > 0");
  if (s < 0.0 || s > t) throw validation_error("f_gamma: s must lie in [0, t]");
  return (s <= 0.5 * t) ? std::pow(s, gamma) : std::pow(t - s, gamma);
}

// Tube parameters: alpha below 1/2 shapes the upper (entropic) envelope,
// beta above 1/2 the lower one.
struct EnvelopeSpec {
  double alpha = 0.4;
  double beta = 0.6;
  double t = 0.0;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 0.5))
      throw validation_error("EnvelopeSpec: alpha must be in (0, 1/2)");
    if (!(beta > 0.5 && beta < 1.0))
      throw validation_error("EnvelopeSpec: beta must be in (1/2, 1)");
    if (!(t > 0.0)) throw validation_error("EnvelopeSpec: t must be > 0");
  }
};

inline double entropic_envelope(const EnvelopeSpec& spec, double s) {
  spec.validate();
  return s / spec.t * front_centering(spec.t) - f_gamma(spec.alpha, spec.t, s);
}

inline double lower_envelope(const EnvelopeSpec& spec, double s) {
  spec.validate();
  return s / spec.t * front_centering(spec.t) - f_gamma(spec.beta, spec.t, s);
}

// Precomputed envelope values at the checkpoint grid times inside (r, t-r).
// Shared by the batched localization checks so the power functions are
// evaluated once per grid, not once per particle.
struct EnvelopeTable {
  std::size_t first_index = 0;           // smallest grid index with time > r
  std::vector<double> upper;             // entropic envelope at those times
  std::vector<double> lower;             // lower envelope
  std::size_t last_index_exclusive() const { return first_index + upper.size(); }
};

inline EnvelopeTable make_envelope_table(const EnvelopeSpec& spec, double r,
                                         double grid_step) {
  spec.validate();
  if (!(r >= 0.0)) throw validation_error("make_envelope_table: r must be >= 0");
  if (!(grid_step > 0.0)) throw validation_error("make_envelope_table: grid step must be > 0");
  EnvelopeTable table;
  const double eps = 1e-9 * grid_step;
  table.first_index = static_cast<std::size_t>(std::floor(r / grid_step + eps)) + 1;
  for (std::size_t j = table.first_index;; ++j) {
    const double s = static_cast<double>(j) * grid_step;
    if (!(s < spec.t - r - eps)) break;
    table.upper.push_back(entropic_envelope(spec, s));
    table.lower.push_back(lower_envelope(spec, s));
  }
  return table;
}

inline bool path_in_tube(std::span<const float> path, const EnvelopeTable& table) {
  if (path.size() < table.last_index_exclusive())
    throw data_error("path_in_tube: checkpoints do not cover the interval");
  for (std::size_t k = 0; k < table.upper.size(); ++k) {
    const double x = path[table.first_index + k];
    if (x < table.lower[k] || x > table.upper[k]) return false;
  }
  return true;
}

// True iff the particle's checkpointed path stays inside the time-t tube at
// every grid time in (r, t-r). Membership is checked on the grid only; the
// grid step is the fidelity knob.
inline bool is_localized(const Population& pop, std::size_t index,
                         const EnvelopeSpec& spec, double r) {
  const EnvelopeTable table = make_envelope_table(spec, r, pop.grid_step());
  return path_in_tube(pop.path(index), table);
}

inline bool is_localized(const Particle& particle, double grid_step,
                         const EnvelopeSpec& spec, double r) {
  const EnvelopeTable table = make_envelope_table(spec, r, grid_step);
  std::vector<float> path;
  path.reserve(particle.checkpoints.size());
  for (const auto& [s, x] : particle.checkpoints) path.push_back(static_cast<float>(x));
  return path_in_tube(path, table);
}

// Maximum displacement over localized particles only. An empty localized set
// is a valid outcome and comes back as nullopt.
inline std::optional<double> localized_max(const Population& pop, const EnvelopeSpec& spec,
                                           double r) {
  if (pop.empty()) throw state_error("localized_max: population is empty");
  const EnvelopeTable table = make_envelope_table(spec, r, pop.grid_step());
  const double m = front_centering(pop.time());
  std::vector<std::size_t> order(pop.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pop.position(a) > pop.position(b);
  });
  for (std::size_t i : order)
    if (path_in_tube(pop.path(i), table)) return pop.position(i) - m;
  return std::nullopt;
}

// Time scales for the localization window: r_T = (20 ln T)^{1/delta} and
// R_T = 40 r_T. Infeasible schedules (R_T >= T) are an error; at desk-scale
// horizons this is the common case unless delta is large.
struct TubeSchedule {
  double delta = 1.0;
  double T = 0.0;
  double r_T = 0.0;
  double R_T = 0.0;
};

inline TubeSchedule tube_schedule(double T, double delta) {
  if (!(delta > 0.0)) throw validation_error("tube_schedule: delta must be > 0");
  if (!(std::log(T) > 1.0)) throw validation_error("tube_schedule: requires T > e");
  TubeSchedule s;
  s.delta = delta;
  s.T = T;
  s.r_T = std::pow(20.0 * std::log(T), 1.0 / delta);
  s.R_T = 40.0 * s.r_T;
  if (!(s.R_T < T))
    throw validation_error("tube_schedule: infeasible, R_T >= T at this horizon");
  return s;
}

// Right-tail bounds for the recentered maximum, parameterized by the
// prefactor C and the slack gamma_r >= 1.
struct TailBoundParams {
  double C = 1.0;
  double gamma_r = 1.0;
  double r = 0.0;

  void validate() const {
    if (!(C > 0.0)) throw validation_error("TailBoundParams: C must be > 0");
    if (!(gamma_r >= 1.0)) throw validation_error("TailBoundParams: gamma_r must be >= 1");
    if (r < 0.0) throw validation_error("TailBoundParams: r must be >= 0");
  }
};

inline double tail_bound_upper(double X, const TailBoundParams& params) {
  params.validate();
  if (!(X > 0.0)) throw validation_error("tail_bound_upper: X must be > 0");
  return params.C * params.gamma_r * X * std::exp(-kSqrt2 * X);
}

struct TailLowerBound {
  double value = 0.0;
  bool degenerate = false;  // set when X/(t-r) >= 1 kills the bound
};

inline TailLowerBound tail_bound_lower(double X, double t, const TailBoundParams& params) {
  params.validate();
  if (!(X > 0.0)) throw validation_error("tail_bound_lower: X must be > 0");
  if (!(t > params.r)) throw validation_error("tail_bound_lower: requires t > r");
  const double factor = 1.0 - X / (t - params.r);
  if (factor <= 0.0) return {0.0, true};
  return {params.C / params.gamma_r * X * std::exp(-kSqrt2 * X) * factor, false};
}

struct SimpleTailBound {
  double value = 0.0;
  bool in_domain = true;  // false when (y, t) leaves 0 <= y <= sqrt(t), t >= 2
};

// gamma (y+1)^2 exp(-sqrt(2) y). Outside the stated domain the value is still
// computed but flagged, since the inequality is not asserted there.
inline SimpleTailBound simple_tail_bound(double y, double t, double gamma) {
  if (!(gamma > 0.0)) throw validation_error("simple_tail_bound: gamma must be > 0");
  SimpleTailBound b;
  b.value = gamma * (y + 1.0) * (y + 1.0) * std::exp(-kSqrt2 * y);
  b.in_domain = (t >= 2.0 && y >= 0.0 && y * y <= t);
  return b;
}

struct TailRow {
  double x = 0.0;
  double p = 0.0;   // estimated P[M(t) >= x]
  double lo = 0.0;  // 95% CI
  double hi = 0.0;
  double stderr_ = 0.0;
};

struct TailRunConfig {
  OffspringLaw law = OffspringLaw::binary();
  PruneConfig prune;
  double grid_step = 0.5;
};

// Monte Carlo survival function of M(t) on a grid, with binomial CIs.
inline std::vector<TailRow> tail_estimate(double t, std::span<const double> x_grid,
                                          std::uint64_t replicas, RandomStream& stream,
                                          const TailRunConfig& cfg = {}) {
  if (replicas < 1000) throw validation_error("tail_estimate: replicas must be >= 1000");
  if (!(t > 0.0)) throw validation_error("tail_estimate: t must be > 0");
  std::vector<std::uint64_t> hits(x_grid.size(), 0);
  for (std::uint64_t rep = 0; rep < replicas; ++rep) {
    RandomStream sub = stream.spawn();
    Population pop = init_population(cfg.grid_step, sub, {1.0, false});
    pop.advance(t, cfg.law, cfg.prune, sub);
    const double m = max_displacement(pop);
    for (std::size_t i = 0; i < x_grid.size(); ++i)
      if (m >= x_grid[i]) ++hits[i];
  }
  std::vector<TailRow> rows;
  rows.reserve(x_grid.size());
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    const BinomialCi ci = binomial_ci(hits[i], replicas);
    rows.push_back({x_grid[i], ci.p, ci.lo, ci.hi, ci.stderr_});
  }
  return rows;
}

}  // namespace bbm
