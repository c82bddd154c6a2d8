#pragma once

#include <advrisk/attacks.hpp>
#include <advrisk/core.hpp>
#include <advrisk/detection.hpp>
#include <advrisk/pool.hpp>
#include <advrisk/random.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace advrisk {

enum class EstimateMethod { surrogate, monte_carlo, detector_free };

inline std::string_view to_string(EstimateMethod m) {
  switch (m) {
    case EstimateMethod::surrogate: return "surrogate";
    case EstimateMethod::monte_carlo: return "monte-carlo";
    case EstimateMethod::detector_free: return "detector-free";
  }
  return "?";
}

struct RiskEstimate {
  std::string model_id;
  double pdam_hat = 0.0;
  std::size_t n = 0;
  EstimateMethod method = EstimateMethod::surrogate;
  std::string detection_descriptor;
};

struct OperationalRisk {
  std::string model_id;
  double pdam_hat = 0.0;
  double c_dam = 0.0;
  double risk = 0.0;
};

// Estimators on raw perturbation sizes: one entry per observation, +infinity
// for observations without a successful attack.
namespace stats {

inline void require_nonempty(std::span<const double> d) {
  if (d.empty()) throw ConfigError("estimator needs a nonempty sample");
}

inline void require_finite_tau(double tau) {
  if (!std::isfinite(tau)) throw ConfigError("tau must be finite");
}

inline double asr(std::span<const double> d, double tau) {
  require_nonempty(d);
  require_finite_tau(tau);
  const auto hits = std::count_if(d.begin(), d.end(), [tau](double v) { return v <= tau; });
  return static_cast<double>(hits) / static_cast<double>(d.size());
}

inline std::optional<double> mps(std::span<const double> d) {
  std::optional<double> best;
  for (double v : d) {
    if (std::isfinite(v) && (!best || v < *best)) best = v;
  }
  return best;
}

inline std::optional<double> aps(std::span<const double> d) {
  double sum = 0.0;
  std::size_t count = 0;
  for (double v : d) {
    if (std::isfinite(v)) {
      sum += v;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

// (1/|X|) * sum over successful observations of f(d_a).
inline double pdam_surrogate(std::span<const double> d, const DetectionFunction& f) {
  require_nonempty(d);
  double sum = 0.0;
  for (double v : d) {
    if (std::isfinite(v)) sum += f(v);
  }
  return sum / static_cast<double>(d.size());
}

// Detector-free estimate for every model of a shared sample: pool all I*J
// values, sort descending, and sum for each model the first-occurrence index
// of its finite values; divide by I^2 * J.
inline std::vector<double> pdam_detector_free(std::span<const std::vector<double>> models) {
  if (models.empty()) throw ConfigError("detector-free estimation needs at least one model");
  const std::size_t I = models.front().size();
  if (I == 0) throw ConfigError("detector-free estimation needs a nonempty sample");
  const std::size_t J = models.size();
  std::vector<double> w;
  w.reserve(I * J);
  for (const auto& m : models) {
    if (m.size() != I) throw SampleMismatchError("models were evaluated on samples of different size");
    w.insert(w.end(), m.begin(), m.end());
  }
  std::sort(w.begin(), w.end(), std::greater<>());

  std::vector<double> out;
  out.reserve(J);
  const double denom = static_cast<double>(I) * static_cast<double>(I) * static_cast<double>(J);
  for (const auto& m : models) {
    std::uint64_t total = 0;
    for (double tau : m) {
      if (!std::isfinite(tau)) continue;
      total += static_cast<std::uint64_t>(std::lower_bound(w.begin(), w.end(), tau, std::greater<>()) - w.begin());
    }
    out.push_back(static_cast<double>(total) / denom);
  }
  return out;
}

}  // namespace stats

inline std::vector<double> raw_distances(const AttackOutcomeSet& o) {
  std::vector<double> out;
  out.reserve(o.size());
  for (const auto& r : o.records()) out.push_back(r.d_a.as_double());
  return out;
}

// Attack success ratio: fraction of observations with d_a <= tau.
inline double asr(const AttackOutcomeSet& o, double tau) {
  if (o.empty()) throw ConfigError("asr of an empty outcome set");
  stats::require_finite_tau(tau);
  const auto finite = o.sorted_finite_distances();
  const auto hits = std::upper_bound(finite.begin(), finite.end(), tau) - finite.begin();
  return static_cast<double>(hits) / static_cast<double>(o.size());
}

struct CurvePoint {
  double tau = 0.0;
  double value = 0.0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

// Step breakpoints of the ASR: one point per distinct finite d_a.
inline std::vector<CurvePoint> asr_curve(const AttackOutcomeSet& o) {
  std::vector<CurvePoint> out;
  if (o.empty()) return out;
  const auto finite = o.sorted_finite_distances();
  const double n = static_cast<double>(o.size());
  for (std::size_t i = 0; i < finite.size(); ++i) {
    if (i + 1 < finite.size() && finite[i + 1] == finite[i]) continue;
    out.push_back({finite[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

inline std::optional<double> mps(const AttackOutcomeSet& o) {
  const auto finite = o.sorted_finite_distances();
  if (finite.empty()) return std::nullopt;
  return finite.front();
}

struct ApsResult {
  std::optional<double> value;
  std::size_t excluded = 0;  // unsuccessful observations left out of the mean
};

inline ApsResult aps(const AttackOutcomeSet& o) {
  return {stats::aps(o.sorted_finite_distances()), o.size() - o.finite_count()};
}

inline RiskEstimate pdam_surrogate(const AttackOutcomeSet& o, const DetectionFunction& f) {
  if (o.empty()) throw ConfigError("pdam of an empty outcome set");
  const auto d = raw_distances(o);
  return {o.model_id(), stats::pdam_surrogate(d, f), o.size(), EstimateMethod::surrogate, f.describe()};
}

// The same estimate as a Stieltjes sum of f against the jumps of the ASR
// step function.
inline double pdam_stieltjes(const AttackOutcomeSet& o, const DetectionFunction& f) {
  if (o.empty()) throw ConfigError("pdam of an empty outcome set");
  double sum = 0.0;
  double previous = 0.0;
  for (const auto& bp : asr_curve(o)) {
    sum += f(bp.tau) * (bp.value - previous);
    previous = bp.value;
  }
  return sum;
}

// Monte Carlo estimate on given records: each successful observation is shown once to the
// simulated detector; the estimate is the undetected fraction of |X|.
inline RiskEstimate pdam_monte_carlo(const AttackOutcomeSet& o, const DetectionFunction& f, std::uint64_t seed) {
  if (o.empty()) throw ConfigError("pdam of an empty outcome set");
  std::size_t undetected = 0;
  for (const auto& r : o.records()) {
    if (!r.d_a.is_finite()) continue;
    Rng rng = make_rng(substream_seed(seed, "detector:" + r.observation_id), "");
    if (!simulate_detector(f, r.d_a.value(), rng)) ++undetected;
  }
  return {o.model_id(), static_cast<double>(undetected) / static_cast<double>(o.size()), o.size(),
          EstimateMethod::monte_carlo, f.describe()};
}

// Full Monte Carlo simulation: attack every observation, reduce to the
// attack strategy, then query the simulated detector.
inline RiskEstimate pdam_monte_carlo(const Dataset& ds, const Predictor& p, std::span<const AttackSpec> specs,
                                     const AttackContext& ctx, const DetectionFunction& f, std::uint64_t seed) {
  if (ds.empty()) throw ConfigError("Monte Carlo estimation needs a nonempty dataset");
  const auto candidates = run_attack_set(p, ds, specs, ctx);
  return pdam_monte_carlo(attack_strategy_reduce(candidates, ds, p.model_id(), ctx.metric), f, seed);
}

inline std::size_t w_count(std::span<const AttackOutcomeSet> outcomes, double tau) {
  return PerturbationPool(outcomes).w_count(tau);
}

inline DetectionFunction average_detection_fn(std::span<const AttackOutcomeSet> outcomes) {
  return DetectionFunction::average(outcomes);
}

// Both forms of the average detection function at tau, as exact counts over
// I*J: the W-form from the pooled descending sort and the ASR-form from each
// model's own ascending list, plus the floating 1 - mean ASR.
struct AverageDetectionForms {
  std::size_t w_form = 0;
  std::size_t asr_form = 0;
  double denominator = 1.0;
  double one_minus_mean_asr = 0.0;
};

inline AverageDetectionForms average_detection_forms(std::span<const AttackOutcomeSet> outcomes, double tau) {
  const PerturbationPool pool(outcomes);
  AverageDetectionForms r;
  r.w_form = pool.w_count(tau);
  double mean_asr = 0.0;
  for (const auto& o : outcomes) {
    const auto finite = o.sorted_finite_distances();
    const auto at_most = static_cast<std::size_t>(std::upper_bound(finite.begin(), finite.end(), tau) - finite.begin());
    r.asr_form += o.size() - at_most;
    mean_asr += asr(o, tau);
  }
  mean_asr /= static_cast<double>(outcomes.size());
  r.denominator = static_cast<double>(pool.observations() * pool.models());
  r.one_minus_mean_asr = 1.0 - mean_asr;
  return r;
}

inline std::vector<RiskEstimate> pdam_detector_free(std::span<const AttackOutcomeSet> outcomes) {
  require_shared_sample(outcomes);
  if (outcomes.front().empty()) throw ConfigError("detector-free estimation needs a nonempty sample");
  std::vector<std::vector<double>> models;
  models.reserve(outcomes.size());
  for (const auto& o : outcomes) models.push_back(raw_distances(o));
  const auto values = stats::pdam_detector_free(models);
  const std::string descriptor = "average:" + std::to_string(outcomes.size());
  std::vector<RiskEstimate> out;
  out.reserve(outcomes.size());
  for (std::size_t j = 0; j < outcomes.size(); ++j) {
    out.push_back({outcomes[j].model_id(), values[j], outcomes[j].size(), EstimateMethod::detector_free, descriptor});
  }
  return out;
}

inline OperationalRisk operational_risk(const RiskEstimate& est, double c_dam) {
  if (!(c_dam >= 0.0) || !std::isfinite(c_dam)) throw ConfigError("c_dam must be finite and nonnegative");
  return {est.model_id, est.pdam_hat, c_dam, est.pdam_hat * c_dam};
}

// ---------------------------------------------------------------------------
// Summary table

struct ReportRow {
  std::string model;
  double pdam = 0.0;
  std::vector<double> asr;  // one entry per tau of the table
  std::optional<double> mps;
  std::optional<double> risk;
};

struct SummaryTable {
  std::vector<double> taus;
  std::vector<ReportRow> rows;
  // best[column][row]; columns are P^dam, each ASR(tau), MPS.
  std::vector<std::vector<bool>> best;
  std::string pdam_method;
};

// Marks the best value per column: minimum for P^dam and ASR, maximum for
// MPS. Ties are all marked.
inline void flag_best(SummaryTable& t) {
  const std::size_t cols = 2 + t.taus.size();
  t.best.assign(cols, std::vector<bool>(t.rows.size(), false));
  auto mark = [&](std::size_t col, auto value_of, bool maximize) {
    std::optional<double> best;
    for (const auto& r : t.rows) {
      const std::optional<double> v = value_of(r);
      if (v && (!best || (maximize ? *v > *best : *v < *best))) best = v;
    }
    if (!best) return;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const std::optional<double> v = value_of(t.rows[i]);
      t.best[col][i] = v && *v == *best;
    }
  };
  mark(0, [](const ReportRow& r) { return std::optional<double>(r.pdam); }, false);
  for (std::size_t k = 0; k < t.taus.size(); ++k) {
    mark(1 + k, [k](const ReportRow& r) { return std::optional<double>(r.asr.at(k)); }, false);
  }
  mark(cols - 1, [](const ReportRow& r) { return r.mps; }, true);
}

// One row per model. Without a detection function, P^dam is the
// detector-free estimate over all given models.
inline SummaryTable summary_table(std::span<const AttackOutcomeSet> outcomes, std::vector<double> taus,
                                  const std::optional<DetectionFunction>& detection,
                                  std::optional<double> c_dam = std::nullopt) {
  if (outcomes.empty()) throw ConfigError("summary table needs at least one model");
  std::sort(taus.begin(), taus.end());
  SummaryTable t;
  t.taus = taus;
  std::vector<RiskEstimate> estimates;
  if (detection) {
    for (const auto& o : outcomes) estimates.push_back(pdam_surrogate(o, *detection));
    t.pdam_method = std::string(to_string(EstimateMethod::surrogate)) + " " + detection->describe();
  } else {
    estimates = pdam_detector_free(outcomes);
    t.pdam_method = std::string(to_string(EstimateMethod::detector_free));
  }
  for (std::size_t j = 0; j < outcomes.size(); ++j) {
    ReportRow r;
    r.model = outcomes[j].model_id();
    r.pdam = estimates[j].pdam_hat;
    for (double tau : taus) r.asr.push_back(asr(outcomes[j], tau));
    r.mps = mps(outcomes[j]);
    if (c_dam) r.risk = operational_risk(estimates[j], *c_dam).risk;
    t.rows.push_back(std::move(r));
  }
  flag_best(t);
  return t;
}

}  // namespace advrisk
