#pragma once

#include <advrisk/core.hpp>

#include <algorithm>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace advrisk {

// All I*J perturbation sizes of J models on one shared sample of I
// observations, sorted descending (infinite entries first).
class PerturbationPool {
public:
  explicit PerturbationPool(std::span<const AttackOutcomeSet> outcomes) {
    require_shared_sample(outcomes);
    observations_ = outcomes.front().size();
    models_ = outcomes.size();
    if (observations_ == 0) throw ConfigError("cannot pool empty outcome sets");
    values_.reserve(observations_ * models_);
    for (const auto& o : outcomes) {
      for (const auto& r : o.records()) values_.push_back(r.d_a.as_double());
    }
    std::sort(values_.begin(), values_.end(), std::greater<>());
  }

  std::size_t observations() const noexcept { return observations_; }
  std::size_t models() const noexcept { return models_; }
  std::span<const double> descending() const noexcept { return values_; }

  // W(tau): number of (observation, model) pairs with d_a > tau. Equals the
  // index of the first element <= tau in the descending array, so ties at tau
  // are not counted.
  std::size_t w_count(double tau) const {
    if (std::isnan(tau) || std::isinf(tau)) throw ConfigError("W(tau) needs a finite tau");
    return first_not_greater(tau);
  }

  std::size_t first_not_greater(double tau) const noexcept {
    return static_cast<std::size_t>(
        std::lower_bound(values_.begin(), values_.end(), tau, std::greater<>()) - values_.begin());
  }

private:
  std::size_t observations_ = 0;
  std::size_t models_ = 0;
  std::vector<double> values_;
};

}  // namespace advrisk
