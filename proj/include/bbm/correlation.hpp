#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "bbm/engine.hpp"
#include "bbm/errors.hpp"
#include "bbm/frontier.hpp"
#include "bbm/localization.hpp"
#include "bbm/random.hpp"

namespace bbm {

inline double normal_upper_tail(double z) { return 0.5 * std::erfc(z / kSqrt2); }

// Frontier-frontier correlation estimation.
//
// The estimand is C_T(s, s') = E[X_s X_s'] for the centered indicators
// X_s = 1{M_loc(s) <= D} - P[M_loc(s) <= D | F_{R_T}], which reduces to the
// mean over early segments of the conditional covariance of the two
// indicators. Estimation is nested: outer replicas draw the segment up to
// R_T, inner continuations estimate the conditional probabilities.
struct CorrelationConfig {
  double T = 40.0;
  double epsilon = 0.3;  // estimation window is [epsilon T, T]
  double xi = 0.7;       // separation exponent: "well separated" means |s'-s| > T^xi
  double d = -1.0;       // window [d, D]; only D enters the indicators
  double D = 2.0;
  double R_T = 10.0;     // early-evolution horizon
  int outer_replicas = 200;
  int inner_continuations = 200;

  OffspringLaw law = OffspringLaw::binary();
  double grid_step = 0.5;
  double prune_window = 8.0;
  std::uint64_t hard_cap = 30'000'000;
  double prune_gamma = 1.0;
  double alpha = 0.4;
  double beta = 0.6;
  double r_loc = 2.0;  // localization margin of the tubes

  double branch_rate = 1.0;              // test hook: 0 freezes branching
  bool independent_inner_streams = false;  // test hook: zero-baseline wiring

  void validate() const {
    if (!(T > 0.0)) throw validation_error("CorrelationConfig: T must be > 0");
    if (!(epsilon > 0.0 && epsilon < 1.0))
      throw validation_error("CorrelationConfig: epsilon must be in (0, 1)");
    if (!(xi > 0.0 && xi < 1.0))
      throw validation_error("CorrelationConfig: xi must be in (0, 1)");
    if (!(epsilon * T > R_T))
      throw validation_error("CorrelationConfig: infeasible schedule, needs epsilon*T > R_T");
    if (!(d < D)) throw validation_error("CorrelationConfig: window needs d < D");
    if (inner_continuations < 50)
      throw validation_error("CorrelationConfig: inner budget infeasible (< 50)");
    if (outer_replicas < 2)
      throw validation_error("CorrelationConfig: need at least 2 outer replicas");
    if (!(R_T > r_loc))
      throw validation_error("CorrelationConfig: R_T must exceed the tube margin");
    if (!(grid_step > 0.0)) throw validation_error("CorrelationConfig: bad grid step");
    if (branch_rate < 0.0) throw validation_error("CorrelationConfig: bad branch rate");
  }
};

struct CorrelationSample {
  double s = 0.0;
  double s_prime = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  int outer = 0;

  void validate() const {
    if (!(s < s_prime)) throw validation_error("CorrelationSample: needs s < s_prime");
  }
};

namespace detail {

// Envelope membership recorded into a particle flag bit at checkpoint times.
struct TubeFlagger {
  EnvelopeTable table;
  std::size_t grid_offset = 0;  // == table.first_index
  std::uint32_t bit = 1;

  TubeFlagger(const EnvelopeSpec& spec, double r, double grid_step, std::uint32_t bit_mask)
      : table(make_envelope_table(spec, r, grid_step)), bit(bit_mask) {
    grid_offset = table.first_index;
  }

  void apply(Population& pop, std::int64_t grid_index) const {
    if (grid_index < static_cast<std::int64_t>(grid_offset)) return;
    const auto k = static_cast<std::size_t>(grid_index) - grid_offset;
    if (k >= table.upper.size()) return;
    const double lo = table.lower[k];
    const double hi = table.upper[k];
    const auto xs = pop.positions();
    const auto fl = pop.mutable_flags();
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (xs[i] < lo || xs[i] > hi) fl[i] |= bit;
  }
};

// Maximum displacement among particles whose tube bit is clear; an empty
// localized set counts as "below any level".
inline std::optional<double> flagged_localized_max(const Population& pop, std::uint32_t bit) {
  const auto xs = pop.positions();
  const auto fl = pop.flags();
  double best = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if ((fl[i] & bit) == 0 && xs[i] > best) {
      best = xs[i];
      found = true;
    }
  }
  if (!found) return std::nullopt;
  return best - front_centering(pop.time());
}

}  // namespace detail

// Nested Monte Carlo estimate of C_T(s, s'). Per outer replica the joint
// conditional probability comes from paired continuations observed at both
// times; the product term uses disjoint halves of the same batch so that its
// expectation factorizes. Tube membership is tracked by streaming envelope
// checks at checkpoint times, including the shared early segment.
inline CorrelationSample correlation_estimator(const CorrelationConfig& cfg, double s,
                                               double s_prime, RandomStream& stream) {
  cfg.validate();
  if (!(cfg.epsilon * cfg.T <= s + 1e-9 && s < s_prime && s_prime <= cfg.T + 1e-9))
    throw validation_error("correlation_estimator: needs epsilon*T <= s < s' <= T");
  if (!(s - cfg.r_loc > cfg.R_T))
    throw validation_error("correlation_estimator: tube of s must extend past R_T");

  const EnvelopeSpec spec_s{cfg.alpha, cfg.beta, s};
  const EnvelopeSpec spec_sp{cfg.alpha, cfg.beta, s_prime};
  const detail::TubeFlagger tube_s(spec_s, cfg.r_loc, cfg.grid_step, 1u);
  const detail::TubeFlagger tube_sp(spec_sp, cfg.r_loc, cfg.grid_step, 2u);
  const auto hook = [&](Population& p, double tau) {
    const auto j = static_cast<std::int64_t>(std::llround(tau / cfg.grid_step));
    tube_s.apply(p, j);
    tube_sp.apply(p, j);
  };

  const PruneConfig no_prune{cfg.prune_window, cfg.hard_cap, false, cfg.prune_gamma};
  const PruneConfig prune{cfg.prune_window, cfg.hard_cap, true, cfg.prune_gamma};

  const int n_in = cfg.inner_continuations;
  std::vector<double> outer_samples;
  outer_samples.reserve(static_cast<std::size_t>(cfg.outer_replicas));

  for (int rep = 0; rep < cfg.outer_replicas; ++rep) {
    RandomStream early_rng = stream.spawn();
    Population early =
        init_population(cfg.grid_step, early_rng, {cfg.branch_rate, false});
    early.advance(cfg.R_T, cfg.law, no_prune, early_rng, hook);

    double joint = 0.0, p_first = 0.0, q_second = 0.0;
    int n_first = 0, n_second = 0;
    for (int c = 0; c < n_in; ++c) {
      RandomStream rng = stream.spawn();
      int i_s, i_sp;
      if (!cfg.independent_inner_streams) {
        Population pop = early;
        pop.advance(s, cfg.law, prune, rng, hook);
        const auto ml = detail::flagged_localized_max(pop, 1u);
        i_s = (!ml || *ml <= cfg.D) ? 1 : 0;
        pop.advance(s_prime, cfg.law, prune, rng, hook);
        const auto mlp = detail::flagged_localized_max(pop, 2u);
        i_sp = (!mlp || *mlp <= cfg.D) ? 1 : 0;
      } else {
        Population pa = early;
        pa.advance(s, cfg.law, prune, rng, hook);
        const auto ml = detail::flagged_localized_max(pa, 1u);
        i_s = (!ml || *ml <= cfg.D) ? 1 : 0;
        RandomStream rng_b = stream.spawn();
        Population pb = early;
        pb.advance(s_prime, cfg.law, prune, rng_b, hook);
        const auto mlp = detail::flagged_localized_max(pb, 2u);
        i_sp = (!mlp || *mlp <= cfg.D) ? 1 : 0;
      }
      joint += static_cast<double>(i_s * i_sp);
      if (c < n_in / 2) {
        p_first += i_s;
        ++n_first;
      } else {
        q_second += i_sp;
        ++n_second;
      }
    }
    joint /= n_in;
    p_first /= n_first;
    q_second /= n_second;
    outer_samples.push_back(joint - p_first * q_second);
  }

  CorrelationSample out;
  out.s = s;
  out.s_prime = s_prime;
  out.outer = cfg.outer_replicas;
  out.estimate = mean(outer_samples);
  double var = 0.0;
  for (double v : outer_samples) var += (v - out.estimate) * (v - out.estimate);
  var /= static_cast<double>(outer_samples.size() - 1);
  out.std_error = std::sqrt(var / static_cast<double>(outer_samples.size()));
  return out;
}

// One horizon's worth of measured correlations for the summability report.
struct LyonsInput {
  double T = 0.0;
  double epsilon = 0.3;
  std::vector<CorrelationSample> samples;  // scattered over {eps T <= s < s' <= T}
};

struct LyonsRow {
  double T = 0.0;
  double term = 0.0;         // (1/T^3) integral of C_T over the sampled triangle
  double running_sum = 0.0;  // partial sum of terms across the input horizons
};

// Quadrature of the per-horizon summability terms. The correlation surface
// is taken piecewise constant at the nearest sample (midpoint rule over the
// triangle {eps T <= s < s' <= T}).
inline std::vector<LyonsRow> lyons_summability_report(std::span<const LyonsInput> inputs,
                                                      int eval_grid = 256) {
  if (eval_grid < 8) throw validation_error("lyons_summability_report: eval grid too small");
  std::vector<LyonsRow> rows;
  double running = 0.0;
  for (const auto& in : inputs) {
    if (!(in.T > 0.0) || !(in.epsilon > 0.0 && in.epsilon < 1.0))
      throw validation_error("lyons_summability_report: bad horizon entry");
    if (in.samples.empty())
      throw validation_error("lyons_summability_report: no samples for T");
    for (const auto& c : in.samples) c.validate();
    const double lo = in.epsilon * in.T;
    const double h = (in.T - lo) / eval_grid;
    double integral = 0.0;
    for (int i = 0; i < eval_grid; ++i) {
      const double s = lo + (i + 0.5) * h;
      for (int j = 0; j < eval_grid; ++j) {
        const double sp = lo + (j + 0.5) * h;
        if (!(sp > s)) continue;
        double best = std::numeric_limits<double>::infinity();
        double val = 0.0;
        for (const auto& c : in.samples) {
          const double dist = std::abs(c.s - s) + std::abs(c.s_prime - sp);
          if (dist < best) {
            best = dist;
            val = c.estimate;
          }
        }
        integral += val * h * h;
      }
    }
    const double term = integral / (in.T * in.T * in.T);
    running += term;
    rows.push_back({in.T, term, running});
  }
  return rows;
}

// Path condition for one leg of the pair expectation: a final-position
// threshold, optionally intersected with a tube constraint checked by
// forward path sampling on the grid.
struct PathCondition {
  double threshold = -std::numeric_limits<double>::infinity();
  struct Tube {
    double alpha = 0.4;
    double beta = 0.6;
    double t_total = 0.0;  // envelope horizon
    double r = 2.0;        // localization margin
    double grid_step = 0.1;
  };
  std::optional<Tube> tube;
};

namespace detail {

// P[path over (s, horizon) meets the condition | x(s) = y].
inline double leg_probability(const PathCondition& cond, double y, double s, double horizon,
                              RandomStream& stream, int path_mc) {
  const double remain = horizon - s;
  if (!cond.tube) {
    if (cond.threshold == -std::numeric_limits<double>::infinity()) return 1.0;
    if (remain <= 0.0) return y >= cond.threshold ? 1.0 : 0.0;
    return normal_upper_tail((cond.threshold - y) / std::sqrt(remain));
  }
  const auto& tube = *cond.tube;
  const EnvelopeSpec spec{tube.alpha, tube.beta, tube.t_total};
  const EnvelopeTable table = make_envelope_table(spec, tube.r, tube.grid_step);
  int hits = 0;
  for (int p = 0; p < path_mc; ++p) {
    double t = s, x = y;
    bool ok = true;
    auto j = static_cast<std::int64_t>(std::floor(t / tube.grid_step + 1e-9)) + 1;
    for (; ok; ++j) {
      const double tj = static_cast<double>(j) * tube.grid_step;
      if (tj >= horizon - 1e-9) break;
      x += stream.gaussian() * std::sqrt(tj - t);
      t = tj;
      if (j >= static_cast<std::int64_t>(table.first_index) &&
          j < static_cast<std::int64_t>(table.last_index_exclusive())) {
        const auto k = static_cast<std::size_t>(j) - table.first_index;
        if (x < table.lower[k] || x > table.upper[k]) ok = false;
      }
    }
    if (!ok) continue;
    if (horizon > t) x += stream.gaussian() * std::sqrt(horizon - t);
    if (x >= cond.threshold) ++hits;
  }
  return static_cast<double>(hits) / path_mc;
}

}  // namespace detail

// Expected number of unordered pairs of distinct particles whose common
// ancestor branched in [cutoff-free interval], with leg 1 meeting cond1 at
// time I_T and leg 2 meeting cond2 at time J_T:
//
//   (K/2) e^{I_T} int_0^{I_T - cutoff} ds e^{J_T - s}
//                 int dmu_s(y) P1(y; s) P2(y; s),
//
// K the second factorial moment, mu_s the centered Gaussian of variance s.
// With both conditions dropped and cutoff 0 this reduces to e^{I+J} - e^J.
// For distinct-time legs the roles are fixed (leg 1 at I_T, leg 2 at J_T);
// multiply by 2 for role-ordered counting.
//
// The branch-time integral is composite Simpson with refinement doubling;
// failing to settle within 5% across a doubling is a nonconvergence error.
inline double sawyer_pair_expectation(double I_T, double J_T, const PathCondition& cond1,
                                      const PathCondition& cond2, const OffspringLaw& law,
                                      int quad_points, int bridge_mc, RandomStream& stream,
                                      double cutoff = 0.0) {
  if (!(I_T > 0.0) || !(I_T <= J_T))
    throw validation_error("sawyer_pair_expectation: needs 0 < I_T <= J_T");
  if (cutoff < 0.0 || cutoff > I_T)
    throw validation_error("sawyer_pair_expectation: cutoff must lie in [0, I_T]");
  if (quad_points < 4) throw validation_error("sawyer_pair_expectation: too few quad points");
  if ((cond1.tube || cond2.tube) && bridge_mc < 100)
    throw validation_error("sawyer_pair_expectation: bridge_mc must be >= 100 with tubes");

  const double K = law.second_factorial_moment();
  if (K == 0.0) return 0.0;
  const double upper = I_T - cutoff;

  // G(s) = E_{y ~ N(0,s)}[P1 P2], by Simpson over +-8 standard deviations.
  const auto g_of_s = [&](double s) {
    if (s <= 0.0)
      return detail::leg_probability(cond1, 0.0, 0.0, I_T, stream, bridge_mc) *
             detail::leg_probability(cond2, 0.0, 0.0, J_T, stream, bridge_mc);
    const int m = 200;  // even
    const double sd = std::sqrt(s);
    const double ylo = -8.0 * sd, h = 16.0 * sd / m;
    double acc = 0.0;
    for (int k = 0; k <= m; ++k) {
      const double y = ylo + k * h;
      const double w = (k == 0 || k == m) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
      const double density = std::exp(-y * y / (2.0 * s)) / std::sqrt(2.0 * M_PI * s);
      acc += w * density * detail::leg_probability(cond1, y, s, I_T, stream, bridge_mc) *
             detail::leg_probability(cond2, y, s, J_T, stream, bridge_mc);
    }
    return acc * h / 3.0;
  };

  const auto integral_with = [&](int n) {
    if (n % 2 == 1) ++n;
    const double h = upper / n;
    double acc = 0.0;
    for (int k = 0; k <= n; ++k) {
      const double s = k * h;
      const double w = (k == 0 || k == n) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
      acc += w * std::exp(J_T - s) * g_of_s(s);
    }
    return acc * h / 3.0;
  };

  int n = quad_points;
  double prev = integral_with(n);
  for (int refine = 0; refine < 4; ++refine) {
    n *= 2;
    const double cur = integral_with(n);
    const double rel = std::abs(cur - prev) / std::max(std::abs(cur), 1e-300);
    prev = cur;
    if (rel <= 0.005) break;
    if (refine == 3 && rel > 0.05)
      throw numerical_error("sawyer_pair_expectation: quadrature did not converge");
  }
  return 0.5 * K * std::exp(I_T) * prev;
}

}  // namespace bbm
