#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "bbm/errors.hpp"
#include "bbm/frontier.hpp"
#include "bbm/offspring.hpp"
#include "bbm/stats.hpp"

namespace bbm {

// Uniform 1-d grid for the explicit scheme. dt <= dx^2/2 is the stability
// bound; [x_min, x_max] is the initial window of the front-tracking domain.
struct Grid1D {
  double x_min = -30.0;
  double x_max = 30.0;
  double dx = 0.05;
  double dt = 0.001;

  void validate() const {
    if (!(dx > 0.0) || !(dt > 0.0)) throw validation_error("Grid1D: dx, dt must be > 0");
    if (!(x_min < 0.0 && x_max > 0.0))
      throw validation_error("Grid1D: initial window must contain the origin");
    if (dt > 0.5 * dx * dx * (1.0 + 1e-12))
      throw validation_error("Grid1D: unstable, requires dt <= dx^2/2");
    if (x_max - x_min < 20.0 * dx)
      throw validation_error("Grid1D: window too narrow");
  }
};

struct KppOptions {
  double front_record_step = 0.1;  // cadence of front_history samples
  double front_level = 0.5;
  double edge_margin = 10.0;       // reposition when front gets this close to an edge
  int check_every = 100;           // monotonicity/range checks (every step if !NDEBUG)
  enum class Init { heaviside, zero, one } init = Init::heaviside;  // zero/one are test hooks
};

// Solution state of u_t = 1/2 u_xx + sum_k p_k u^k - u from Heaviside data.
// u is monotone in x with u -> 0 left, u -> 1 right; the window follows the
// front, with left boundary clamped to 0 and right to 1.
struct WaveSolution {
  double t = 0.0;
  double x0 = 0.0;  // coordinate of u[0]
  double dx = 0.05;
  std::vector<double> u;
  std::vector<std::pair<double, double>> front_history;  // (t, x_front)
  OffspringLaw law = OffspringLaw::binary();

  double x_at(std::size_t i) const { return x0 + static_cast<double>(i) * dx; }

  // Linear interpolation of u at position x; clamps to {0, 1} outside.
  double value_at(double x) const {
    if (x <= x0) return 0.0;
    const double pos = (x - x0) / dx;
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= u.size()) return 1.0;
    const double w = pos - static_cast<double>(i);
    return u[i] * (1.0 - w) + u[i + 1] * w;
  }
};

namespace detail {

inline double interpolate_crossing(const std::vector<double>& u, double x0, double dx,
                                   double level) {
  for (std::size_t i = 0; i + 1 < u.size(); ++i) {
    if (u[i] <= level && u[i + 1] >= level) {
      const double denom = u[i + 1] - u[i];
      const double w = denom > 0.0 ? (level - u[i]) / denom : 0.0;
      return x0 + (static_cast<double>(i) + w) * dx;
    }
  }
  throw state_error("front_position: no crossing of the requested level");
}

inline void check_solution(const std::vector<double>& u, double t) {
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] < -1e-8 || u[i] > 1.0 + 1e-8)
      throw numerical_error("kpp_solve: solution left [0,1] at t=" + std::to_string(t));
    if (i > 0 && u[i] < u[i - 1] - 1e-12)
      throw numerical_error("kpp_solve: monotonicity lost at t=" + std::to_string(t));
  }
  if (u.front() > 1e-10 || u.back() < 1.0 - 1e-10)
    throw numerical_error("kpp_solve: window too narrow for clamped boundaries");
}

}  // namespace detail

// Explicit FTCS integration of the KPP equation up to time T.
inline WaveSolution kpp_solve(const OffspringLaw& law, double T, const Grid1D& grid,
                              const KppOptions& opts = {}) {
  grid.validate();
  if (!(T > 0.0)) throw validation_error("kpp_solve: T must be > 0");

  WaveSolution sol;
  sol.dx = grid.dx;
  sol.x0 = grid.x_min;
  sol.law = law;
  const auto n = static_cast<std::size_t>(std::llround((grid.x_max - grid.x_min) / grid.dx)) + 1;
  sol.u.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = sol.x_at(i);
    switch (opts.init) {
      case KppOptions::Init::heaviside: sol.u[i] = x >= 0.0 ? 1.0 : 0.0; break;
      case KppOptions::Init::zero: sol.u[i] = 0.0; break;
      case KppOptions::Init::one: sol.u[i] = 1.0; break;
    }
  }

  const double dt = grid.dt;
  const double diffuse = 0.5 * dt / (grid.dx * grid.dx);
  const auto steps = static_cast<std::int64_t>(std::llround(T / dt));
  const auto record_every =
      std::max<std::int64_t>(1, std::llround(opts.front_record_step / dt));
#ifdef NDEBUG
  const std::int64_t check_every = std::max(1, opts.check_every);
#else
  const std::int64_t check_every = 1;
#endif

  std::vector<double> next(n);
  const bool track_front = opts.init == KppOptions::Init::heaviside;
  if (track_front)
    sol.front_history.emplace_back(0.0, detail::interpolate_crossing(sol.u, sol.x0, sol.dx,
                                                                     opts.front_level));

  for (std::int64_t step = 1; step <= steps; ++step) {
    auto& u = sol.u;
    next[0] = 0.0;
    next[n - 1] = 1.0;
    if (opts.init != KppOptions::Init::heaviside) {  // constant test hooks: free ends
      next[0] = u[0] + dt * (law.generating_value(u[0]) - u[0]);
      next[n - 1] = u[n - 1] + dt * (law.generating_value(u[n - 1]) - u[n - 1]);
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double v = u[i];
      next[i] = v + diffuse * (u[i + 1] - 2.0 * v + u[i - 1]) +
                dt * (law.generating_value(v) - v);
    }
    sol.u.swap(next);
    sol.t = static_cast<double>(step) * dt;

    if (step % check_every == 0 && track_front) detail::check_solution(sol.u, sol.t);

    if (track_front && step % record_every == 0) {
      const double front = detail::interpolate_crossing(sol.u, sol.x0, sol.dx, opts.front_level);
      sol.front_history.emplace_back(sol.t, front);
      // Slide the window (by whole cells) once the front nears an edge.
      const double lo = sol.x0;
      const double hi = sol.x_at(n - 1);
      if (front - lo < opts.edge_margin || hi - front < opts.edge_margin) {
        const double center = 0.5 * (lo + hi);
        const auto shift = static_cast<std::int64_t>(std::llround((front - center) / sol.dx));
        if (shift > 0) {
          const auto s = static_cast<std::size_t>(std::min<std::int64_t>(
              shift, static_cast<std::int64_t>(n) - 2));
          std::move(sol.u.begin() + static_cast<std::ptrdiff_t>(s), sol.u.end(), sol.u.begin());
          std::fill(sol.u.end() - static_cast<std::ptrdiff_t>(s), sol.u.end(), 1.0);
          sol.x0 += static_cast<double>(s) * sol.dx;
        }
      }
    }
  }
  if (track_front) detail::check_solution(sol.u, sol.t);
  return sol;
}

// Position where the solution crosses `level`, by linear interpolation.
inline double front_position(const WaveSolution& sol, double level = 0.5) {
  if (!(level > 0.0 && level < 1.0))
    throw validation_error("front_position: level must be in (0, 1)");
  return detail::interpolate_crossing(sol.u, sol.x0, sol.dx, level);
}

// Wave profile in the front frame: the solution re-labeled by x - m(t).
struct WaveProfile {
  double t = 0.0;
  double dx = 0.05;
  std::vector<double> x;  // recentered coordinates
  std::vector<double> w;  // profile values, monotone nondecreasing
};

inline WaveProfile wave_profile(const WaveSolution& sol) {
  if (!(sol.t > 0.0)) throw validation_error("wave_profile: solution time must be > 0");
  WaveProfile p;
  p.t = sol.t;
  p.dx = sol.dx;
  const double m = front_centering(sol.t);
  p.x.reserve(sol.u.size());
  for (std::size_t i = 0; i < sol.u.size(); ++i) p.x.push_back(sol.x_at(i) - m);
  p.w = sol.u;
  return p;
}

// Sup-norm distance between two profiles after the optimal horizontal
// translation of `b` (searched over whole cells around the front offset).
inline double profile_distance_after_shift(const WaveProfile& a, const WaveProfile& b) {
  if (std::abs(a.dx - b.dx) > 1e-12)
    throw validation_error("profile_distance_after_shift: dx mismatch");
  auto sup_at_shift = [&](std::ptrdiff_t shift_cells) {
    double sup = 0.0;
    for (std::size_t i = 0; i < a.x.size(); ++i) {
      if (a.w[i] < 0.005 || a.w[i] > 0.995) continue;  // compare transition zones
      const double xb = a.x[i] + static_cast<double>(shift_cells) * a.dx;
      const auto j = static_cast<std::ptrdiff_t>(std::floor((xb - b.x.front()) / b.dx));
      if (j < 0 || j + 1 >= static_cast<std::ptrdiff_t>(b.x.size())) continue;
      const double wgt = (xb - b.x[static_cast<std::size_t>(j)]) / b.dx;
      const double vb = b.w[static_cast<std::size_t>(j)] * (1.0 - wgt) +
                        b.w[static_cast<std::size_t>(j) + 1] * wgt;
      sup = std::max(sup, std::abs(a.w[i] - vb));
    }
    return sup;
  };
  const auto max_shift = static_cast<std::ptrdiff_t>(std::llround(2.0 / a.dx));
  double best = std::numeric_limits<double>::infinity();
  for (std::ptrdiff_t s = -max_shift; s <= max_shift; ++s)
    best = std::min(best, sup_at_shift(s));
  return best;
}

struct ResidualReport {
  std::vector<std::pair<double, double>> rows;  // (x, residual) on the interior region
  double sup_abs = 0.0;
  bool coarse_warning = false;  // dx > 0.1
};

// Residual of the traveling-wave equation 1/2 w'' + sqrt(2) w' + w^2 - w on
// the extracted profile, by central differences, restricted to the region
// where w is inside [0.01, 0.99]. Meaningful for the binary law only (the
// nonlinearity is hard-coded as w^2 - w).
inline ResidualReport wave_ode_residual(const WaveProfile& profile) {
  if (profile.w.size() < 3) throw validation_error("wave_ode_residual: profile too short");
  ResidualReport rep;
  rep.coarse_warning = profile.dx > 0.1;
  const double dx = profile.dx;
  for (std::size_t i = 1; i + 1 < profile.w.size(); ++i) {
    const double w = profile.w[i];
    if (w < 0.01 || w > 0.99) continue;
    const double d2 = (profile.w[i + 1] - 2.0 * w + profile.w[i - 1]) / (dx * dx);
    const double d1 = (profile.w[i + 1] - profile.w[i - 1]) / (2.0 * dx);
    const double r = 0.5 * d2 + kSqrt2 * d1 + w * w - w;
    rep.rows.emplace_back(profile.x[i], r);
    rep.sup_abs = std::max(rep.sup_abs, std::abs(r));
  }
  if (rep.rows.empty()) throw state_error("wave_ode_residual: empty interior region");
  return rep;
}

struct CFit {
  double c_hat = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
  double x_lo = 0.0;
  double x_hi = 0.0;
};

// Fits ln(1 - w(x)) = ln C + ln x - sqrt(2) x over [x_lo, x_hi] (slope pinned
// to 1) and reports the prefactor with an R^2 diagnostic against that model.
inline CFit estimate_C(const WaveProfile& profile, double x_lo, double x_hi) {
  if (!(x_lo > 0.0 && x_hi > x_lo)) throw validation_error("estimate_C: bad fit range");
  std::vector<double> ys, base;
  for (std::size_t i = 0; i < profile.x.size(); ++i) {
    const double x = profile.x[i];
    if (x < x_lo || x > x_hi) continue;
    const double tail = 1.0 - profile.w[i];
    if (tail <= 1e-6 || tail >= 1e-2)
      throw validation_error("estimate_C: fit range must satisfy 1-w in (1e-6, 1e-2)");
    ys.push_back(std::log(tail));
    base.push_back(std::log(x) - kSqrt2 * x);
  }
  if (ys.size() < 3) throw validation_error("estimate_C: too few points in fit range");
  double lc = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) lc += ys[i] - base[i];
  lc /= static_cast<double>(ys.size());
  double ss_res = 0.0, ss_tot = 0.0;
  const double ybar = mean(ys);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    ss_res += (ys[i] - (lc + base[i])) * (ys[i] - (lc + base[i]));
    ss_tot += (ys[i] - ybar) * (ys[i] - ybar);
  }
  CFit fit;
  fit.c_hat = std::exp(lc);
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  fit.points = ys.size();
  fit.x_lo = x_lo;
  fit.x_hi = x_hi;
  if (fit.r_squared < 0.99)
    throw numerical_error("estimate_C: poor fit, R^2 = " + std::to_string(fit.r_squared));
  return fit;
}

// Sup-distance between the Monte Carlo law of the recentered maximum and the
// PDE solution evaluated at the same time: sup_x |F_mc(x) - u(t, m(t)+x)|.
inline double crosscheck_mc_vs_pde(const EmpiricalCdf& mc_cdf, double mc_time,
                                   const OffspringLaw& mc_law, const WaveSolution& sol) {
  if (std::abs(mc_time - sol.t) > 1e-9 * std::max(1.0, sol.t))
    throw validation_error("crosscheck_mc_vs_pde: time mismatch");
  if (!(mc_law == sol.law)) throw validation_error("crosscheck_mc_vs_pde: law mismatch");
  const double m = front_centering(sol.t);
  double sup = 0.0;
  for (std::size_t i = 0; i < mc_cdf.x_grid.size(); ++i)
    sup = std::max(sup, std::abs(mc_cdf.values[i] - sol.value_at(m + mc_cdf.x_grid[i])));
  return sup;
}

}  // namespace bbm
