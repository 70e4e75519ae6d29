#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "bbm/errors.hpp"
#include "bbm/random.hpp"

namespace bbm {

// Offspring distribution with finite support: p_k for k = 1..K_max.
// Must be a proper probability vector with mean number of children 2.
class OffspringLaw {
 public:
  static constexpr double kTol = 1e-12;

  // probs[k-1] = p_k. Validates sum(p)=1 and sum(k p_k)=2 within kTol.
  static OffspringLaw from_probabilities(std::vector<double> probs) {
    if (probs.empty()) throw validation_error("OffspringLaw: empty support");
    double sum = 0.0, meankids = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] < 0.0) throw validation_error("OffspringLaw: negative probability");
      sum += probs[i];
      meankids += static_cast<double>(i + 1) * probs[i];
    }
    if (std::abs(sum - 1.0) > kTol)
      throw validation_error("OffspringLaw: probabilities must sum to 1");
    if (std::abs(meankids - 2.0) > kTol)
      throw validation_error("OffspringLaw: mean offspring number must be 2");
    return OffspringLaw(std::move(probs));
  }

  // Dyadic splitting, p_2 = 1. The default law everywhere.
  static OffspringLaw binary() { return OffspringLaw({0.0, 1.0}); }

  // Test hook: skips the mean/normalization checks.
  static OffspringLaw unchecked(std::vector<double> probs) {
    return OffspringLaw(std::move(probs));
  }

  std::size_t max_children() const { return probs_.size(); }
  double probability(std::size_t k) const {
    return (k >= 1 && k <= probs_.size()) ? probs_[k - 1] : 0.0;
  }
  const std::vector<double>& probabilities() const { return probs_; }

  // Second factorial moment K = sum_k k (k-1) p_k.
  double second_factorial_moment() const { return k_factorial_; }

  // Number of children at a branch event. Consumes one uniform unless the
  // support is a single point.
  int sample(RandomStream& stream) const {
    if (single_point_ > 0) return single_point_;
    const double u = stream.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      acc += probs_[i];
      if (u <= acc) return static_cast<int>(i + 1);
    }
    return static_cast<int>(probs_.size());
  }

  // sum_k p_k u^k, evaluated in Horner form. This is the reaction term of
  // the matching Fisher-KPP equation (minus u).
  double generating_value(double u) const {
    double acc = 0.0;
    for (std::size_t i = probs_.size(); i-- > 0;) acc = (acc + probs_[i]) * u;
    return acc;
  }

  bool operator==(const OffspringLaw& other) const { return probs_ == other.probs_; }

 private:
  explicit OffspringLaw(std::vector<double> probs) : probs_(std::move(probs)) {
    for (std::size_t i = 0; i < probs_.size(); ++i)
      k_factorial_ += static_cast<double>((i + 1) * i) * probs_[i];
    int nonzero = 0, where = 0;
    for (std::size_t i = 0; i < probs_.size(); ++i)
      if (probs_[i] > 0.0) {
        ++nonzero;
        where = static_cast<int>(i + 1);
      }
    single_point_ = (nonzero == 1) ? where : 0;
  }

  std::vector<double> probs_;
  double k_factorial_ = 0.0;
  int single_point_ = 0;  // k if the law is deterministic, else 0
};

}  // namespace bbm
