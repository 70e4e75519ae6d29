#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bbm/errors.hpp"
#include "bbm/offspring.hpp"
#include "bbm/random.hpp"

namespace bbm {

// Frontier-relative pruning. Particles more than `window` below the running
// maximum are removed at every checkpoint; each removal adds
// gamma * (d+1)^2 exp(-sqrt(2) d) to the accumulated lost-frontier bound,
// d being the particle's depth below the maximum at removal. The bound is
// reported, not asserted: for small windows it is loose to the point of
// being vacuous, and only wide windows make it informative.
struct PruneConfig {
  double window = 12.0;
  std::uint64_t hard_cap = 5'000'000;
  bool enabled = true;
  double gamma = 1.0;

  void validate() const {
    if (!(window > 0.0)) throw validation_error("PruneConfig: window must be > 0");
    if (hard_cap == 0) throw validation_error("PruneConfig: hard_cap must be > 0");
    if (!(gamma > 0.0)) throw validation_error("PruneConfig: gamma must be > 0");
  }
};

struct PopulationOptions {
  double branch_rate = 1.0;  // 0 disables branching (test hook)
  bool record_paths = true;  // store per-particle positions on the checkpoint grid
};

// Materialized view of one particle. The checkpoint times are the global
// grid 0, h, 2h, ...; every live particle carries the same recorded prefix
// (children inherit the ancestral path at birth).
struct Particle {
  std::uint64_t id = 0;
  std::uint64_t parent_id = 0;
  double birth_time = 0.0;
  double position = 0.0;
  double next_branch_time = 0.0;
  std::vector<std::pair<double, double>> checkpoints;
};

struct PruneReport {
  std::uint64_t pruned_count = 0;
  double pruned_mass_bound = 0.0;
};

class Population {
 public:
  using CheckpointHook = std::function<void(Population&, double)>;

  // Engine entry points -----------------------------------------------------

  static Population init(double checkpoint_grid_step, RandomStream& stream,
                         PopulationOptions opts = {}) {
    if (!(checkpoint_grid_step > 0.0))
      throw validation_error("init_population: grid step must be > 0");
    if (opts.branch_rate < 0.0)
      throw validation_error("init_population: branch rate must be >= 0");
    Population p;
    p.grid_step_ = checkpoint_grid_step;
    p.branch_rate_ = opts.branch_rate;
    p.record_paths_ = opts.record_paths;
    p.run_seed_ = stream.seed();
    p.meta_.push_back({p.next_id_++, 0, 0.0});
    p.pos_.push_back(0.0);
    p.next_branch_.push_back(p.sample_branch_time(0.0, stream));
    p.flags_.push_back(0);
    if (p.record_paths_) p.paths_.push_back({0.0f});
    p.checkpoints_recorded_ = 1;
    p.next_checkpoint_ = 1;
    return p;
  }

  // Runs every branch event in (time, to_time] with exact exponential clocks
  // and exact Gaussian diffusion between events; records checkpoints at each
  // crossed grid time, then prunes and calls the hook.
  void advance(double to_time, const OffspringLaw& law, const PruneConfig& prune,
               RandomStream& stream, const CheckpointHook& hook = {}) {
    if (!(to_time > time_)) throw validation_error("advance: to_time must exceed population time");
    if (pos_.empty()) throw state_error("advance: population is empty");
    prune.validate();
    const double eps = 1e-9 * grid_step_;
    while (true) {
      const double next_grid = static_cast<double>(next_checkpoint_) * grid_step_;
      if (next_grid <= to_time + eps) {
        const double seg_end = std::min(next_grid, to_time);
        if (seg_end > time_) settle_all(seg_end, law, stream);
        time_ = seg_end;
        ++next_checkpoint_;
        if (record_paths_) {
          for (std::size_t i = 0; i < pos_.size(); ++i)
            paths_[i].push_back(static_cast<float>(pos_[i]));
          ++checkpoints_recorded_;
        }
        if (prune.enabled) prune_now(prune);
        if (pos_.size() > prune.hard_cap)
          throw capacity_error(pos_.size(), prune.hard_cap, time_);
        if (hook) hook(*this, time_);
        if (!(time_ < to_time - eps)) {
          time_ = to_time;
          return;
        }
      } else {
        if (to_time > time_) settle_all(to_time, law, stream);
        time_ = to_time;
        return;
      }
    }
  }

  std::vector<double> snapshot_positions() const {
    if (pos_.empty()) throw state_error("snapshot_positions: population is empty");
    std::vector<double> out(pos_.begin(), pos_.end());
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
  }

  PruneReport prune_report() const { return {pruned_count_, pruned_mass_bound_}; }

  // Accessors ---------------------------------------------------------------

  double time() const { return time_; }
  std::size_t size() const { return pos_.size(); }
  bool empty() const { return pos_.empty(); }
  double grid_step() const { return grid_step_; }
  double branch_rate() const { return branch_rate_; }
  bool record_paths() const { return record_paths_; }
  std::uint64_t run_seed() const { return run_seed_; }

  std::span<const double> positions() const { return pos_; }
  std::span<const std::uint32_t> flags() const { return flags_; }
  std::span<std::uint32_t> mutable_flags() { return flags_; }

  std::uint64_t id(std::size_t i) const { return meta_[i].id; }
  std::uint64_t parent_id(std::size_t i) const { return meta_[i].parent; }
  double birth_time(std::size_t i) const { return meta_[i].birth; }
  double position(std::size_t i) const { return pos_[i]; }
  double next_branch_time(std::size_t i) const { return next_branch_[i]; }

  // Number of grid times recorded so far (uniform across particles).
  std::size_t checkpoint_count() const { return record_paths_ ? checkpoints_recorded_ : 0; }
  double checkpoint_time(std::size_t j) const { return static_cast<double>(j) * grid_step_; }
  std::span<const float> path(std::size_t i) const {
    if (!record_paths_) throw data_error("path: checkpoint recording is disabled");
    return paths_[i];
  }

  double max_position() const {
    if (pos_.empty()) throw state_error("max_position: population is empty");
    return *std::max_element(pos_.begin(), pos_.end());
  }

  Particle particle(std::size_t i) const {
    Particle p;
    p.id = meta_[i].id;
    p.parent_id = meta_[i].parent;
    p.birth_time = meta_[i].birth;
    p.position = pos_[i];
    p.next_branch_time = next_branch_[i];
    if (record_paths_) {
      p.checkpoints.reserve(paths_[i].size());
      for (std::size_t j = 0; j < paths_[i].size(); ++j)
        p.checkpoints.emplace_back(checkpoint_time(j), static_cast<double>(paths_[i][j]));
    }
    return p;
  }

  // Frees recorded paths and stops recording. Continuations that only need
  // final positions use this to cut copy costs.
  void drop_paths() {
    record_paths_ = false;
    paths_.clear();
    paths_.shrink_to_fit();
    checkpoints_recorded_ = 0;
  }

  // Binary checkpoint format ------------------------------------------------
  //
  // Fixed little-endian layout, for long-run dump/resume:
  //   magic "BBMP", u32 version (=1),
  //   u64 run_seed, f64 time, f64 grid_step,
  //   u64 next_checkpoint, u64 next_id,
  //   u64 pruned_count, f64 pruned_mass_bound,
  //   f64 branch_rate, u8 record_paths, u64 checkpoint_count, u64 particle_count,
  //   then per particle: u64 id, u64 parent, f64 birth, f64 position,
  //   f64 next_branch, u32 flags, and (if record_paths) checkpoint_count f32s.
  // The RNG stream is not part of the dump; resuming callers supply one.

  void dump(std::ostream& out) const {
    write_bytes(out, "BBMP", 4);
    put_u32(out, 1);
    put_u64(out, run_seed_);
    put_f64(out, time_);
    put_f64(out, grid_step_);
    put_u64(out, static_cast<std::uint64_t>(next_checkpoint_));
    put_u64(out, next_id_);
    put_u64(out, pruned_count_);
    put_f64(out, pruned_mass_bound_);
    put_f64(out, branch_rate_);
    put_u8(out, record_paths_ ? 1 : 0);
    put_u64(out, checkpoints_recorded_);
    put_u64(out, pos_.size());
    for (std::size_t i = 0; i < pos_.size(); ++i) {
      put_u64(out, meta_[i].id);
      put_u64(out, meta_[i].parent);
      put_f64(out, meta_[i].birth);
      put_f64(out, pos_[i]);
      put_f64(out, next_branch_[i]);
      put_u32(out, flags_[i]);
      if (record_paths_)
        for (float v : paths_[i]) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    if (!out) throw data_error("Population::dump: write failed");
  }

  static Population load(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "BBMP", 4) != 0)
      throw data_error("Population::load: bad magic");
    if (get_u32(in) != 1) throw data_error("Population::load: unsupported version");
    Population p;
    p.run_seed_ = get_u64(in);
    p.time_ = get_f64(in);
    p.grid_step_ = get_f64(in);
    p.next_checkpoint_ = static_cast<std::int64_t>(get_u64(in));
    p.next_id_ = get_u64(in);
    p.pruned_count_ = get_u64(in);
    p.pruned_mass_bound_ = get_f64(in);
    p.branch_rate_ = get_f64(in);
    p.record_paths_ = get_u8(in) != 0;
    p.checkpoints_recorded_ = get_u64(in);
    const std::uint64_t n = get_u64(in);
    p.meta_.resize(n);
    p.pos_.resize(n);
    p.next_branch_.resize(n);
    p.flags_.resize(n);
    if (p.record_paths_) p.paths_.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      p.meta_[i].id = get_u64(in);
      p.meta_[i].parent = get_u64(in);
      p.meta_[i].birth = get_f64(in);
      p.pos_[i] = get_f64(in);
      p.next_branch_[i] = get_f64(in);
      p.flags_[i] = get_u32(in);
      if (p.record_paths_) {
        p.paths_[i].resize(p.checkpoints_recorded_);
        for (auto& v : p.paths_[i]) v = std::bit_cast<float>(get_u32(in));
      }
    }
    if (!in) throw data_error("Population::load: truncated input");
    return p;
  }

  void dump_file(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw data_error("Population::dump_file: cannot open " + path);
    dump(f);
  }

  static Population load_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw data_error("Population::load_file: cannot open " + path);
    return load(f);
  }

 private:
  Population() = default;

  double sample_branch_time(double now, RandomStream& stream) const {
    if (branch_rate_ == 0.0) return std::numeric_limits<double>::infinity();
    return now + stream.exponential() / branch_rate_;
  }

  // Moves every particle to seg_end, executing branch chains on the way.
  // Particles are independent between checkpoints, so they are settled one
  // lineage at a time in index order; spawned children are settled
  // depth-first right after their parent. The realized path law at segment
  // boundaries is exact, and the traversal order is deterministic.
  void settle_all(double seg_end, const OffspringLaw& law, RandomStream& stream) {
    const std::size_t n0 = pos_.size();
    const double seg_sigma = std::sqrt(seg_end - time_);
    for (std::size_t i = 0; i < n0; ++i) {
      if (next_branch_[i] > seg_end) {
        pos_[i] += stream.gaussian() * seg_sigma;  // no events: one exact step
        continue;
      }
      settle_chain(i, time_, seg_end, law, stream);
      while (!pending_.empty()) {
        const auto [j, tj] = pending_.back();
        pending_.pop_back();
        settle_chain(j, tj, seg_end, law, stream);
      }
    }
  }

  void settle_chain(std::size_t i, double t, double seg_end, const OffspringLaw& law,
                    RandomStream& stream) {
    while (true) {
      const double tb = next_branch_[i];
      if (tb > seg_end) {
        if (seg_end > t) pos_[i] += stream.gaussian() * std::sqrt(seg_end - t);
        return;
      }
      pos_[i] += stream.gaussian() * std::sqrt(tb - t);
      t = tb;
      const int k = law.sample(stream);
      const std::uint64_t pid = meta_[i].id;
      const double x = pos_[i];
      const std::uint32_t fl = flags_[i];
      meta_[i] = {next_id_++, pid, t};
      next_branch_[i] = sample_branch_time(t, stream);
      for (int c = 1; c < k; ++c) {
        meta_.push_back({next_id_++, pid, t});
        pos_.push_back(x);
        next_branch_.push_back(sample_branch_time(t, stream));
        flags_.push_back(fl);
        if (record_paths_) paths_.push_back(paths_[i]);
        pending_.emplace_back(pos_.size() - 1, t);
      }
    }
  }

  // Upper bound on exp(-sqrt(2) d) by table lookup with the exponent rounded
  // down; keeps the accumulated mass bound conservative while avoiding an
  // exp() per removal.
  static double exp_bound_table(double d) {
    static constexpr int kN = 4096;
    static constexpr double kStep = 1.0 / 64.0;
    struct Table {
      double v[kN];
      Table() {
        for (int k = 0; k < kN; ++k) v[k] = std::exp(-kSqrt2 * k * kStep);
      }
    };
    static const Table table;
    const int idx = std::min(kN - 1, static_cast<int>(d * 64.0));
    return table.v[idx];
  }

  void prune_now(const PruneConfig& cfg) {
    const double mx = *std::max_element(pos_.begin(), pos_.end());
    const double thr = mx - cfg.window;
    std::size_t w = 0;
    for (std::size_t i = 0; i < pos_.size(); ++i) {
      if (pos_[i] >= thr) {
        if (w != i) {
          pos_[w] = pos_[i];
          next_branch_[w] = next_branch_[i];
          meta_[w] = meta_[i];
          flags_[w] = flags_[i];
          if (record_paths_) paths_[w] = std::move(paths_[i]);
        }
        ++w;
      } else {
        ++pruned_count_;
        const double d = mx - pos_[i];
        pruned_mass_bound_ += cfg.gamma * (d + 1.0) * (d + 1.0) * exp_bound_table(d);
      }
    }
    pos_.resize(w);
    next_branch_.resize(w);
    meta_.resize(w);
    flags_.resize(w);
    if (record_paths_) paths_.resize(w);
  }

  // Serialization helpers (explicit little-endian).
  static void write_bytes(std::ostream& out, const char* p, std::size_t n) {
    out.write(p, static_cast<std::streamsize>(n));
  }
  static void put_u8(std::ostream& out, std::uint8_t v) {
    out.put(static_cast<char>(v));
  }
  static void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
  }
  static void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
  }
  static void put_f64(std::ostream& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  static std::uint8_t get_u8(std::istream& in) {
    return static_cast<std::uint8_t>(in.get());
  }
  static std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  static std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  static double get_f64(std::istream& in) {
    return std::bit_cast<double>(get_u64(in));
  }

  double time_ = 0.0;
  double grid_step_ = 0.1;
  double branch_rate_ = 1.0;
  bool record_paths_ = true;
  std::uint64_t run_seed_ = 0;
  std::uint64_t next_id_ = 1;
  std::int64_t next_checkpoint_ = 1;
  std::size_t checkpoints_recorded_ = 0;
  std::uint64_t pruned_count_ = 0;
  double pruned_mass_bound_ = 0.0;

  struct Meta {
    std::uint64_t id;
    std::uint64_t parent;
    double birth;
  };

  std::vector<double> pos_;
  std::vector<double> next_branch_;
  std::vector<Meta> meta_;
  std::vector<std::uint32_t> flags_;
  std::vector<std::vector<float>> paths_;
  std::vector<std::pair<std::size_t, double>> pending_;
};

// Free-function aliases matching the operation names used elsewhere.

inline Population init_population(double checkpoint_grid_step, RandomStream& stream,
                                  PopulationOptions opts = {}) {
  return Population::init(checkpoint_grid_step, stream, opts);
}

inline void advance(Population& pop, double to_time, const OffspringLaw& law,
                    const PruneConfig& prune, RandomStream& stream,
                    const Population::CheckpointHook& hook = {}) {
  pop.advance(to_time, law, prune, stream, hook);
}

inline std::vector<double> snapshot_positions(const Population& pop) {
  return pop.snapshot_positions();
}

inline PruneReport prune_report(const Population& pop) { return pop.prune_report(); }

}  // namespace bbm
