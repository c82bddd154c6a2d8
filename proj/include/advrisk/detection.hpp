#pragma once

#include <advrisk/core.hpp>
#include <advrisk/pool.hpp>
#include <advrisk/random.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <iterator>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace advrisk {

// Detection functions map a perturbation size tau >= 0 to the probability
// that the perturbation goes UNDETECTED.

struct StepDetection {
  double theta = 0.0;  // may be +infinity: nothing is ever detected
};

// sigma(beta0 - beta1 * tau)
struct LogisticDetection {
  double beta0 = 0.0;
  double beta1 = 0.0;
};

// Piecewise constant: value of the largest breakpoint <= tau. Below the
// first breakpoint the first value applies.
struct TableDetection {
  std::vector<std::pair<double, double>> breakpoints;
};

// Ensemble average 1 - mean_j ASR_j(tau) over a shared sample.
struct AverageDetection {
  std::shared_ptr<const PerturbationPool> pool;
};

inline double logistic_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

class DetectionFunction {
public:
  using Variant = std::variant<StepDetection, LogisticDetection, TableDetection, AverageDetection>;

  static DetectionFunction step(double theta) {
    if (std::isnan(theta)) throw ConfigError("step threshold is NaN");
    return DetectionFunction(StepDetection{theta});
  }
  static DetectionFunction logistic(double beta0, double beta1) {
    if (!std::isfinite(beta0) || !std::isfinite(beta1)) throw ConfigError("logistic parameters must be finite");
    return DetectionFunction(LogisticDetection{beta0, beta1});
  }
  static DetectionFunction table(std::vector<std::pair<double, double>> breakpoints) {
    if (breakpoints.empty()) throw ConfigError("detection table needs at least one breakpoint");
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
      const auto [tau, value] = breakpoints[i];
      if (!std::isfinite(tau) || tau < 0.0) throw ConfigError("detection table breakpoints must be finite and >= 0");
      if (!(value >= 0.0 && value <= 1.0)) throw ConfigError("detection table values must lie in [0, 1]");
      if (i > 0 && !(tau > breakpoints[i - 1].first)) {
        throw ConfigError("detection table breakpoints must be strictly ascending");
      }
      if (i > 0 && value > breakpoints[i - 1].second) {
        throw ConfigError("detection table must be non-increasing");
      }
    }
    return DetectionFunction(TableDetection{std::move(breakpoints)});
  }
  static DetectionFunction constant(double value) { return table({{0.0, value}}); }
  static DetectionFunction average(std::span<const AttackOutcomeSet> outcomes) {
    return DetectionFunction(AverageDetection{std::make_shared<const PerturbationPool>(outcomes)});
  }

  const Variant& variant() const noexcept { return v_; }

  double operator()(double tau) const {
    if (std::isnan(tau) || tau < 0.0) throw ConfigError("detection functions need tau >= 0");
    if (std::isinf(tau)) {
      throw ConfigError("detection functions are undefined at infinity; exclude unsuccessful records");
    }
    return std::visit([tau](const auto& f) { return eval(f, tau); }, v_);
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    std::visit(
        [&os](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, StepDetection>) {
            os << "step:" << f.theta;
          } else if constexpr (std::is_same_v<T, LogisticDetection>) {
            os << "logistic:" << f.beta0 << ',' << f.beta1;
          } else if constexpr (std::is_same_v<T, TableDetection>) {
            os << "table:" << f.breakpoints.size();
          } else {
            os << "average:" << f.pool->models();
          }
        },
        v_);
    return os.str();
  }

  // True for variants known to be non-increasing in tau.
  bool is_monotone() const {
    if (const auto* l = std::get_if<LogisticDetection>(&v_)) return l->beta1 >= 0.0;
    return true;
  }

private:
  explicit DetectionFunction(Variant v) : v_(std::move(v)) {}

  static double eval(const StepDetection& f, double tau) { return tau <= f.theta ? 1.0 : 0.0; }
  static double eval(const LogisticDetection& f, double tau) { return logistic_sigmoid(f.beta0 - f.beta1 * tau); }
  static double eval(const TableDetection& f, double tau) {
    auto it = std::upper_bound(f.breakpoints.begin(), f.breakpoints.end(), tau,
                               [](double t, const auto& bp) { return t < bp.first; });
    return it == f.breakpoints.begin() ? f.breakpoints.front().second : std::prev(it)->second;
  }
  static double eval(const AverageDetection& f, double tau) {
    return static_cast<double>(f.pool->w_count(tau)) /
           static_cast<double>(f.pool->observations() * f.pool->models());
  }

  Variant v_;
};

// ---------------------------------------------------------------------------
// Logistic fit

struct DetectionSample {
  double tau = 0.0;
  int undetected = 0;

  friend bool operator==(const DetectionSample&, const DetectionSample&) = default;
};

struct LogisticFit {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double log_likelihood = 0.0;  // mean per-sample Bernoulli log-likelihood
  std::size_t iterations = 0;
  // The fitted curve increases with tau, i.e. beta1 < 0.
  bool increasing = false;

  DetectionFunction function() const { return DetectionFunction::logistic(beta0, beta1); }
};

namespace detail {

struct LogisticObjective {
  std::span<const DetectionSample> samples;
  double l2;

  // Penalized mean log-likelihood in the (intercept, slope) parametrization
  // of P(undetected) = sigma(a + c * tau).
  double value(double a, double c, double* loglik = nullptr) const {
    double ll = 0.0;
    for (const auto& s : samples) {
      const double eta = a + c * s.tau;
      // log(1 + e^eta), stable
      const double softplus = eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
      ll += s.undetected * eta - softplus;
    }
    ll /= static_cast<double>(samples.size());
    if (loglik) *loglik = ll;
    return ll - 0.5 * l2 * (a * a + c * c);
  }
};

}  // namespace detail

// Ridge-penalized logistic regression of `undetected` on (1, tau) by Newton
// iterations (IRLS) with step halving. The penalty weighs the mean
// log-likelihood, so duplicating every sample leaves the fit unchanged.
inline LogisticFit fit_logistic(std::span<const DetectionSample> samples, double l2 = 1e-6) {
  if (samples.size() < 2) throw ConfigError("logistic fit needs at least 2 samples");
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw ConfigError("l2 must be a finite nonnegative number");
  std::size_t positives = 0;
  for (const auto& s : samples) {
    if (!std::isfinite(s.tau) || !(s.tau > 0.0)) throw ConfigError("detection sample tau must be finite and > 0");
    if (s.undetected != 0 && s.undetected != 1) throw ConfigError("detection sample label must be 0 or 1");
    positives += static_cast<std::size_t>(s.undetected);
  }
  if (l2 == 0.0 && (positives == 0 || positives == samples.size())) {
    throw NumericError("logistic fit does not converge when all labels are equal; use l2 > 0");
  }

  const detail::LogisticObjective objective{samples, l2};
  const double n = static_cast<double>(samples.size());
  double a = 0.0;
  double c = 0.0;
  double current = objective.value(a, c);
  constexpr std::size_t max_iterations = 100;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    double ga = 0.0, gc = 0.0, haa = 0.0, hac = 0.0, hcc = 0.0;
    for (const auto& s : samples) {
      const double p = logistic_sigmoid(a + c * s.tau);
      const double r = s.undetected - p;
      const double w = p * (1.0 - p);
      ga += r;
      gc += r * s.tau;
      haa += w;
      hac += w * s.tau;
      hcc += w * s.tau * s.tau;
    }
    ga = ga / n - l2 * a;
    gc = gc / n - l2 * c;
    haa = haa / n + l2;
    hac = hac / n;
    hcc = hcc / n + l2;
    const double det = haa * hcc - hac * hac;
    if (!(det > 0.0) || !std::isfinite(det)) {
      throw NumericError("logistic fit: singular curvature (try l2 > 0 or more varied tau)");
    }
    double da = (hcc * ga - hac * gc) / det;
    double dc = (haa * gc - hac * ga) / det;
    if (std::max(std::abs(da), std::abs(dc)) < 1e-10) {
      a += da;
      c += dc;
      LogisticFit fit;
      fit.beta0 = a;
      fit.beta1 = -c;
      objective.value(a, c, &fit.log_likelihood);
      fit.iterations = it;
      fit.increasing = fit.beta1 < 0.0;
      return fit;
    }

    // Steps that lose no more than rounding noise are accepted.
    const double slack = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(current));
    double next = objective.value(a + da, c + dc);
    for (int halving = 0; halving < 60 && !(next >= current - slack); ++halving) {
      da *= 0.5;
      dc *= 0.5;
      next = objective.value(a + da, c + dc);
    }
    if (!(next >= current - slack)) throw NumericError("logistic fit: no ascent direction (try l2 > 0)");
    a += da;
    c += dc;
    current = next;
    if (!std::isfinite(a) || !std::isfinite(c)) throw NumericError("logistic fit diverged");
  }
  throw NumericError("logistic fit did not converge in 100 iterations; use l2 > 0");
}

// Returns true when the simulated detector flags the perturbation, which
// happens with probability 1 - f(tau).
inline bool simulate_detector(const DetectionFunction& f, double tau, Rng& rng) {
  const double undetected = f(tau);
  return !(uniform01(rng) < undetected);
}

}  // namespace advrisk
