#pragma once

#include <advrisk/core.hpp>
#include <advrisk/detection.hpp>
#include <advrisk/estimators.hpp>
#include <advrisk/random.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace advrisk {

// Nearest-rank percentile: the ceil(q*n)-th order statistic (1-indexed),
// the minimum for q = 0. q*n within 1e-9 of an integer counts as that integer.
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("percentile level must lie in [0, 1]");
  const double n = static_cast<double>(values.size());
  std::size_t rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

struct BootstrapMetric {
  enum class Kind { pdam_detector_free, pdam_surrogate, mps, aps, asr };

  Kind kind = Kind::pdam_detector_free;
  std::optional<DetectionFunction> detection;  // pdam_surrogate
  double tau = 0.0;                            // asr

  static BootstrapMetric detector_free() { return {}; }
  static BootstrapMetric surrogate(DetectionFunction f) { return {Kind::pdam_surrogate, std::move(f), 0.0}; }
  static BootstrapMetric min_perturbation() { return {Kind::mps, std::nullopt, 0.0}; }
  static BootstrapMetric average_perturbation() { return {Kind::aps, std::nullopt, 0.0}; }
  static BootstrapMetric success_ratio(double tau) { return {Kind::asr, std::nullopt, tau}; }

  std::string name() const {
    switch (kind) {
      case Kind::pdam_detector_free: return "pdam-detector-free";
      case Kind::pdam_surrogate: return "pdam-surrogate";
      case Kind::mps: return "mps";
      case Kind::aps: return "aps";
      case Kind::asr: {
        std::ostringstream os;
        os.precision(17);
        os << "asr@" << tau;
        return os.str();
      }
    }
    return "?";
  }
};

struct BandPoint {
  std::size_t n = 0;
  double p05 = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  std::size_t excluded = 0;  // resamples on which the metric was undefined

  friend bool operator==(const BandPoint&, const BandPoint&) = default;
};

struct BootstrapBand {
  std::string metric_name;
  std::string model_id;
  std::vector<std::size_t> n_grid;
  std::vector<BandPoint> points;  // one per n; NaN percentiles when every resample was excluded
  std::size_t reps = 0;
  std::uint64_t seed = 0;
};

inline std::vector<std::size_t> default_n_grid() {
  std::vector<std::size_t> g;
  for (std::size_t n = 20; n <= 200; n += 20) g.push_back(n);
  return g;
}

// Observation indices of resample `rep` at size n. Depends only on
// (seed, n, rep), so every model and every evaluation order sees the same
// draw.
inline std::vector<std::size_t> resample_indices(std::size_t population, std::size_t n, std::size_t rep,
                                                 std::uint64_t seed) {
  Rng rng = make_rng(seed, "bootstrap", n, rep);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) {
    i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(population));
    if (i >= population) i = population - 1;
  }
  return idx;
}

// Percentile bands of a metric over resamples drawn with replacement from
// the shared observation index set, one band per model.
inline std::vector<BootstrapBand> bootstrap_bands(std::span<const AttackOutcomeSet> outcomes,
                                                  const BootstrapMetric& metric, std::vector<std::size_t> n_grid,
                                                  std::size_t reps, std::uint64_t seed) {
  if (reps < 2) throw ConfigError("bootstrap needs reps >= 2");
  if (n_grid.empty()) throw ConfigError("bootstrap needs a nonempty n grid");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] == 0) throw ConfigError("bootstrap sample sizes must be positive");
    if (i > 0 && !(n_grid[i] > n_grid[i - 1])) throw ConfigError("bootstrap n grid must be strictly ascending");
  }
  require_shared_sample(outcomes);
  const std::size_t population = outcomes.front().size();
  if (population == 0) throw ConfigError("bootstrap of an empty sample");
  if (metric.kind == BootstrapMetric::Kind::pdam_surrogate && !metric.detection) {
    throw ConfigError("pdam-surrogate bootstrap needs a detection function");
  }

  std::vector<std::vector<double>> base;
  for (const auto& o : outcomes) base.push_back(raw_distances(o));
  const std::size_t J = outcomes.size();

  std::vector<BootstrapBand> bands(J);
  for (std::size_t j = 0; j < J; ++j) {
    bands[j] = {metric.name(), outcomes[j].model_id(), n_grid, {}, reps, seed};
  }

  std::vector<std::vector<double>> resampled(J);
  for (std::size_t n : n_grid) {
    std::vector<std::vector<double>> values(J);
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const auto idx = resample_indices(population, n, rep, seed);
      for (std::size_t j = 0; j < J; ++j) {
        resampled[j].resize(n);
        for (std::size_t k = 0; k < n; ++k) resampled[j][k] = base[j][idx[k]];
      }
      std::vector<std::optional<double>> v(J);
      switch (metric.kind) {
        case BootstrapMetric::Kind::pdam_detector_free: {
          const auto est = stats::pdam_detector_free(resampled);
          for (std::size_t j = 0; j < J; ++j) v[j] = est[j];
          break;
        }
        case BootstrapMetric::Kind::pdam_surrogate:
          for (std::size_t j = 0; j < J; ++j) v[j] = stats::pdam_surrogate(resampled[j], *metric.detection);
          break;
        case BootstrapMetric::Kind::mps:
          for (std::size_t j = 0; j < J; ++j) v[j] = stats::mps(resampled[j]);
          break;
        case BootstrapMetric::Kind::aps:
          for (std::size_t j = 0; j < J; ++j) v[j] = stats::aps(resampled[j]);
          break;
        case BootstrapMetric::Kind::asr:
          for (std::size_t j = 0; j < J; ++j) v[j] = stats::asr(resampled[j], metric.tau);
          break;
      }
      for (std::size_t j = 0; j < J; ++j) {
        if (v[j]) values[j].push_back(*v[j]);
      }
    }
    for (std::size_t j = 0; j < J; ++j) {
      BandPoint pt;
      pt.n = n;
      pt.excluded = reps - values[j].size();
      if (values[j].empty()) {
        pt.p05 = pt.p50 = pt.p95 = std::numeric_limits<double>::quiet_NaN();
      } else {
        pt.p05 = percentile(values[j], 0.05);
        pt.p50 = percentile(values[j], 0.50);
        pt.p95 = percentile(values[j], 0.95);
      }
      bands[j].points.push_back(pt);
    }
  }
  return bands;
}

}  // namespace advrisk
