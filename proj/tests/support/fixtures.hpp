#pragma once

// Shared test fixtures and independent oracles. Oracles here compute the
// same quantities as the library by direct enumeration, without touching
// its sorted-array or pooled code paths.

#include <advrisk/advrisk.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace advrisk::fixtures {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline std::vector<std::string> ids_for(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("x" + std::to_string(i));
  return ids;
}

// Outcome set with observation ids x0..x{n-1}; +inf marks no success.
inline AttackOutcomeSet outcomes(const std::string& model, const std::vector<double>& d,
                                 Metric metric = Metric::linf) {
  std::vector<PerturbationRecord> records;
  for (std::size_t i = 0; i < d.size(); ++i) {
    records.push_back({"x" + std::to_string(i), model,
                       std::isinf(d[i]) ? PerturbationSize::infinite() : PerturbationSize::finite(d[i])});
  }
  return AttackOutcomeSet(model, metric, std::move(records));
}

inline std::vector<AttackOutcomeSet> pool_of(const std::vector<std::vector<double>>& per_model) {
  std::vector<AttackOutcomeSet> out;
  for (std::size_t j = 0; j < per_model.size(); ++j) out.push_back(outcomes("M" + std::to_string(j + 1), per_model[j]));
  return out;
}

// Random pool with I observations and J models. Values come from a coarse
// grid so duplicates are frequent; about 15% of entries are infinite.
inline std::vector<std::vector<double>> random_pool(std::mt19937_64& rng, std::size_t I, std::size_t J) {
  std::uniform_int_distribution<int> grid(1, 12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> pool(J, std::vector<double>(I));
  for (auto& m : pool) {
    for (auto& v : m) v = u(rng) < 0.15 ? kInf : grid(rng) / 64.0;
  }
  return pool;
}

// --- oracles ---------------------------------------------------------------

inline std::size_t brute_w(const std::vector<std::vector<double>>& pool, double tau) {
  std::size_t count = 0;
  for (const auto& m : pool) {
    for (double v : m) count += v > tau ? 1 : 0;
  }
  return count;
}

inline double brute_asr(const std::vector<double>& d, double tau) {
  std::size_t count = 0;
  for (double v : d) count += v <= tau ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(d.size());
}

// (1/(I^2 J)) * sum over finite d_ij of W(d_ij), W by enumeration.
inline std::vector<double> brute_detector_free(const std::vector<std::vector<double>>& pool) {
  const double I = static_cast<double>(pool.front().size());
  const double J = static_cast<double>(pool.size());
  std::vector<double> out;
  for (const auto& m : pool) {
    double total = 0.0;
    for (double v : m) {
      if (std::isfinite(v)) total += static_cast<double>(brute_w(pool, v));
    }
    out.push_back(total / (I * I * J));
  }
  return out;
}

// --- synthetic populations ---------------------------------------------------

// Finite population of minimal perturbation sizes: lognormal around 0.1 with
// a fraction of unsuccessful (infinite) entries.
inline std::vector<double> synthetic_population(std::uint64_t seed, std::size_t size = 10000,
                                                double median = 0.1, double infinite_fraction = 0.15) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 0.6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(size);
  for (auto& v : out) v = u(rng) < infinite_fraction ? kInf : median * std::exp(gauss(rng));
  return out;
}

// Four models of decreasing vulnerability on a shared sample of 200.
inline std::vector<AttackOutcomeSet> model_population(std::uint64_t seed = 2024) {
  const std::vector<double> medians{0.01, 0.04, 0.05, 0.07};
  std::vector<std::vector<double>> per_model;
  for (std::size_t j = 0; j < medians.size(); ++j) {
    per_model.push_back(synthetic_population(seed + j, 200, medians[j], 0.05 * static_cast<double>(j)));
  }
  return pool_of(per_model);
}

inline double true_pdam(const std::vector<double>& population, const DetectionFunction& f) {
  double sum = 0.0;
  for (double v : population) {
    if (std::isfinite(v)) sum += f(v);
  }
  return sum / static_cast<double>(population.size());
}

// --- reference summary fixture ---------------------------------------------------

inline SummaryTable summary_fixture() {
  SummaryTable t;
  t.taus = {2.0 / 255.0, 8.0 / 255.0};
  t.rows = {
      {"Baseline", 0.76, {0.70, 1.00}, 0.00018, std::nullopt},
      {"Engstrom-Robust", 0.44, {0.16, 0.48}, 0.00020, std::nullopt},
      {"Rice-Overfit", 0.43, {0.20, 0.42}, 0.00119, std::nullopt},
      {"Carmon-Semi", 0.33, {0.13, 0.33}, 0.00095, std::nullopt},
  };
  flag_best(t);
  return t;
}

inline const char* kSummaryMarkdown =
    "| Model | P^dam | ASR(0.007843) | ASR(0.03137) | MPS |\n"
    "|---|---|---|---|---|\n"
    "| Baseline | 0.76 | 0.70 | 1.00 | 0.00018 |\n"
    "| Engstrom-Robust | 0.44 | 0.16 | 0.48 | 0.00020 |\n"
    "| Rice-Overfit | 0.43 | 0.20 | 0.42 | **0.00119** |\n"
    "| Carmon-Semi | **0.33** | **0.13** | **0.33** | 0.00095 |\n";

inline const io::ReportStyle kSummaryStyle{2, 5};

}  // namespace advrisk::fixtures
