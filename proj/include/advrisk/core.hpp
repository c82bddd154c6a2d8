#pragma once

#include <advrisk/error.hpp>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace advrisk {

using Vector = std::vector<double>;
using Label = int;

enum class Metric { linf, l2 };

inline std::string_view to_string(Metric m) { return m == Metric::linf ? "Linf" : "L2"; }

inline Metric parse_metric(std::string_view s) {
  if (s == "Linf" || s == "linf" || s == "Linfinity") return Metric::linf;
  if (s == "L2" || s == "l2") return Metric::l2;
  throw ConfigError("unknown metric '" + std::string(s) + "' (expected Linf or L2)");
}

enum class SuccessCriterion { ground_truth_disagreement, prediction_change };

inline std::string_view to_string(SuccessCriterion c) {
  return c == SuccessCriterion::ground_truth_disagreement ? "ground-truth" : "prediction-change";
}

inline SuccessCriterion parse_criterion(std::string_view s) {
  if (s == "ground-truth" || s == "ground-truth-disagreement") {
    return SuccessCriterion::ground_truth_disagreement;
  }
  if (s == "prediction-change") return SuccessCriterion::prediction_change;
  throw ConfigError("unknown success criterion '" + std::string(s) + "'");
}

struct Observation {
  std::string id;
  Vector features;
  Label label = 0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

class Dataset {
public:
  Dataset() = default;

  Dataset(std::vector<Observation> observations, int num_classes, std::size_t dim)
      : observations_(std::move(observations)), num_classes_(num_classes), dim_(dim) {
    if (num_classes_ <= 0) throw ConfigError("num_classes must be positive");
    if (dim_ == 0) throw ConfigError("dim must be positive");
    std::unordered_set<std::string> seen;
    for (const auto& o : observations_) {
      if (!seen.insert(o.id).second) throw ConfigError("duplicate observation id '" + o.id + "'");
      if (o.features.size() != dim_) throw DimensionError(dim_, o.features.size());
      for (double v : o.features) {
        if (!std::isfinite(v)) throw ConfigError("non-finite feature in observation '" + o.id + "'");
      }
      if (o.label < 0 || o.label >= num_classes_) {
        throw ConfigError("label out of range in observation '" + o.id + "'");
      }
    }
  }

  const std::vector<Observation>& observations() const noexcept { return observations_; }
  const Observation& operator[](std::size_t i) const { return observations_[i]; }
  std::size_t size() const noexcept { return observations_.size(); }
  bool empty() const noexcept { return observations_.empty(); }
  int num_classes() const noexcept { return num_classes_; }
  std::size_t dim() const noexcept { return dim_; }

  friend bool operator==(const Dataset&, const Dataset&) = default;

private:
  std::vector<Observation> observations_;
  int num_classes_ = 1;
  std::size_t dim_ = 1;
};

// Smallest successful perturbation size d_A(x, M). Either a positive finite
// distance or infinite, meaning no candidate succeeded.
class PerturbationSize {
public:
  static PerturbationSize infinite() noexcept { return PerturbationSize(); }

  static PerturbationSize finite(double d) {
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw ConfigError("finite perturbation size must be positive and finite");
    }
    return PerturbationSize(d);
  }

  bool is_finite() const noexcept { return value_.has_value(); }
  double value() const { return value_.value(); }
  // Finite value or +infinity, for arithmetic in comparisons.
  double as_double() const noexcept {
    return value_ ? *value_ : std::numeric_limits<double>::infinity();
  }

  friend bool operator==(const PerturbationSize&, const PerturbationSize&) = default;
  friend std::partial_ordering operator<=>(const PerturbationSize& a, const PerturbationSize& b) {
    return a.as_double() <=> b.as_double();
  }

private:
  PerturbationSize() = default;
  explicit PerturbationSize(double d) : value_(d) {}

  std::optional<double> value_;
};

struct AttackCandidate {
  std::string observation_id;
  std::string attack_name;
  std::map<std::string, double> attack_params;
  Vector perturbed_features;
  double distance = 0.0;
  bool success = false;

  friend bool operator==(const AttackCandidate&, const AttackCandidate&) = default;
};

struct PerturbationRecord {
  std::string observation_id;
  std::string model_id;
  PerturbationSize d_a = PerturbationSize::infinite();

  friend bool operator==(const PerturbationRecord&, const PerturbationRecord&) = default;
};

// 64-bit FNV-1a over the newline-joined, sorted observation ids.
inline std::uint64_t sample_hash(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) mix('\n');
    for (unsigned char c : ids[i]) mix(c);
  }
  return h;
}

inline std::uint64_t sample_hash(const Dataset& ds) {
  std::vector<std::string> ids;
  ids.reserve(ds.size());
  for (const auto& o : ds.observations()) ids.push_back(o.id);
  return sample_hash(std::move(ids));
}

// All perturbation records of one model over one sample.
class AttackOutcomeSet {
public:
  AttackOutcomeSet() = default;

  AttackOutcomeSet(std::string model_id, Metric metric, std::vector<PerturbationRecord> records)
      : model_id_(std::move(model_id)), metric_(metric), records_(std::move(records)) {
    std::unordered_set<std::string> seen;
    std::vector<std::string> ids;
    ids.reserve(records_.size());
    for (auto& r : records_) {
      if (!seen.insert(r.observation_id).second) {
        throw ConfigError("duplicate record for observation '" + r.observation_id + "'");
      }
      r.model_id = model_id_;
      ids.push_back(r.observation_id);
      if (r.d_a.is_finite()) sorted_finite_.push_back(r.d_a.value());
    }
    std::sort(sorted_finite_.begin(), sorted_finite_.end());
    hash_ = ::advrisk::sample_hash(std::move(ids));
  }

  const std::string& model_id() const noexcept { return model_id_; }
  Metric metric() const noexcept { return metric_; }
  const std::vector<PerturbationRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  // Ascending finite d_a values.
  std::span<const double> sorted_finite_distances() const noexcept { return sorted_finite_; }
  std::size_t finite_count() const noexcept { return sorted_finite_.size(); }
  std::uint64_t sample_hash() const noexcept { return hash_; }

  std::vector<PerturbationSize> distances() const {
    std::vector<PerturbationSize> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.d_a);
    return out;
  }

  friend bool operator==(const AttackOutcomeSet& a, const AttackOutcomeSet& b) {
    return a.model_id_ == b.model_id_ && a.metric_ == b.metric_ && a.records_ == b.records_;
  }

private:
  std::string model_id_;
  Metric metric_ = Metric::linf;
  std::vector<PerturbationRecord> records_;
  std::vector<double> sorted_finite_;
  std::uint64_t hash_ = ::advrisk::sample_hash(std::vector<std::string>{});
};

// Outcome sets that are pooled must share sample and metric.
inline void require_shared_sample(std::span<const AttackOutcomeSet> outcomes) {
  if (outcomes.empty()) throw ConfigError("at least one outcome set is required");
  const auto& first = outcomes.front();
  for (const auto& o : outcomes) {
    if (o.sample_hash() != first.sample_hash() || o.size() != first.size()) {
      throw SampleMismatchError("outcome sets for '" + first.model_id() + "' and '" +
                                o.model_id() + "' were computed on different samples");
    }
    if (o.metric() != first.metric()) {
      throw SampleMismatchError("outcome sets for '" + first.model_id() + "' and '" +
                                o.model_id() + "' use different distance metrics");
    }
  }
}

inline double distance(std::span<const double> x, std::span<const double> x_prime, Metric metric) {
  if (x.size() != x_prime.size()) throw DimensionError(x.size(), x_prime.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = std::abs(x[i] - x_prime[i]);
    if (metric == Metric::linf) {
      acc = std::max(acc, diff);
    } else {
      acc += diff * diff;
    }
  }
  return metric == Metric::linf ? acc : std::sqrt(acc);
}

inline bool evaluate_success(Label original_prediction, Label ground_truth, SuccessCriterion criterion,
                             Label perturbed_prediction) noexcept {
  if (criterion == SuccessCriterion::prediction_change) return perturbed_prediction != original_prediction;
  return perturbed_prediction != ground_truth;
}

}  // namespace advrisk
