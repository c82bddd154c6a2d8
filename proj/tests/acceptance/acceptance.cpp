// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <advrisk/advrisk.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "support/fixtures.hpp"

using namespace advrisk;
using fixtures::kInf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Estimates of pdam_surrogate on `reps` size-n subsamples (with replacement).
std::vector<double> subsample_estimates(const std::vector<double>& population, const DetectionFunction& f,
                                        std::size_t n, std::size_t reps, std::uint64_t seed) {
  std::vector<double> out;
  std::vector<double> sample(n);
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rng = make_rng(seed, "subsample", n, r);
    for (auto& v : sample) {
      v = population[std::min(population.size() - 1,
                              static_cast<std::size_t>(uniform01(rng) * static_cast<double>(population.size())))];
    }
    out.push_back(stats::pdam_surrogate(sample, f));
  }
  return out;
}

Dataset scaled(const Dataset& ds, double factor) {
  std::vector<Observation> obs = ds.observations();
  for (auto& o : obs) {
    for (auto& v : o.features) v *= factor;
  }
  return Dataset(std::move(obs), ds.num_classes(), ds.dim());
}

// --- criteria ---------------------------------------------------------------

Outcome estimator_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<std::size_t> I(1, 50), J(1, 6);
  double worst = 0.0;
  std::size_t form_mismatches = 0, oracle_mismatches = 0, pools = 0;
  for (; pools < 1000; ++pools) {
    const auto raw = fixtures::random_pool(rng, I(rng), J(rng));
    const auto pool = fixtures::pool_of(raw);
    const auto est = pdam_detector_free(pool);
    const auto avg = average_detection_fn(pool);
    const auto oracle = fixtures::brute_detector_free(raw);
    for (std::size_t j = 0; j < pool.size(); ++j) {
      worst = std::max(worst, std::abs(est[j].pdam_hat - pdam_surrogate(pool[j], avg).pdam_hat));
      if (std::abs(est[j].pdam_hat - oracle[j]) > 1e-12) ++oracle_mismatches;
    }
    for (int k = 0; k <= 13; ++k) {
      const double tau = k / 64.0;
      const auto forms = average_detection_forms(pool, tau);
      const bool exact = forms.w_form == forms.asr_form && forms.w_form == fixtures::brute_w(raw, tau);
      const bool close =
          std::abs(static_cast<double>(forms.w_form) / forms.denominator - forms.one_minus_mean_asr) <= 1e-12;
      if (!exact || !close) ++form_mismatches;
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && form_mismatches == 0 && oracle_mismatches == 0 && secs < 10.0,
          fmt("%zu pools, max |detector-free - surrogate(avg)| = %.3g, form mismatches %zu, oracle mismatches %zu, %.2f s",
              pools, worst, form_mismatches, oracle_mismatches, secs)};
}

Outcome micro_instance() {
  const auto pool = fixtures::pool_of({{0.1, 0.3}, {0.2, kInf}});
  const auto df = pdam_detector_free(pool);
  const auto avg = average_detection_fn(pool);
  const double s1 = pdam_surrogate(pool[0], avg).pdam_hat;
  const double s2 = pdam_surrogate(pool[1], avg).pdam_hat;
  const bool ok = df[0].pdam_hat == 0.5 && df[1].pdam_hat == 0.25 && s1 == 0.5 && s2 == 0.25;
  return {ok, fmt("detector-free = (%.17g, %.17g), avg-sum = (%.17g, %.17g)", df[0].pdam_hat, df[1].pdam_hat, s1, s2)};
}

Outcome unbiasedness() {
  const auto t0 = Clock::now();
  const auto population = fixtures::synthetic_population(7, 10000);
  const auto f = DetectionFunction::logistic(5, 40);
  const double truth = fixtures::true_pdam(population, f);
  const auto est = subsample_estimates(population, f, 50, 500, 11);
  const double se = stddev_of(est) / std::sqrt(500.0);
  const double gap = std::abs(mean_of(est) - truth);
  const double secs = seconds_since(t0);
  return {gap <= 3 * se && secs < 30.0,
          fmt("truth %.5f, mean of 500 n=50 estimates %.5f, |gap| = %.2f SE, %.2f s", truth, mean_of(est), gap / se,
              secs)};
}

Outcome consistency() {
  const auto population = fixtures::synthetic_population(7, 10000);
  const auto f = DetectionFunction::logistic(5, 40);
  const double s100 = stddev_of(subsample_estimates(population, f, 100, 2000, 12));
  const double s400 = stddev_of(subsample_estimates(population, f, 400, 2000, 12));
  const double ratio = s400 / s100;
  return {ratio >= 0.35 && ratio <= 0.65, fmt("std(n=400)/std(n=100) = %.4f / %.4f = %.3f", s400, s100, ratio)};
}

Outcome monte_carlo_agreement() {
  const auto f = DetectionFunction::logistic(5, 40);
  int agree = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    // Blob features scaled so minimal perturbations span the detector's range.
    const auto ds = scaled(generate_dataset({SyntheticKind::gaussian_blobs, 200, 2, 2, 1.0, seed}), 0.1);
    const auto model = train(ds, Architecture::linear(), {0.5, 30, 16, 0.0, seed}, "blob");
    std::vector<double> grid;
    for (int k = 1; k <= 8; ++k) grid.push_back(0.04 * k);
    const std::vector<AttackSpec> specs{{AttackName::fgsm, grid, 1, {}, seed}, {AttackName::pgd, grid, 20, {}, seed}};
    const AttackContext ctx{Metric::linf, SuccessCriterion::ground_truth_disagreement, std::nullopt};
    const auto mc = pdam_monte_carlo(ds, model, specs, ctx, f, seed).pdam_hat;
    const auto records = attack_strategy_reduce(run_attack_set(model, ds, specs, ctx), ds, "blob", ctx.metric);
    const double p = pdam_surrogate(records, f).pdam_hat;
    const double se = std::sqrt(p * (1 - p) / static_cast<double>(ds.size()));
    const double z = se > 0 ? std::abs(mc - p) / se : (mc == p ? 0.0 : kInf);
    worst = std::max(worst, z);
    agree += z <= 3.0;
  }
  return {agree == 20, fmt("%d/20 seeds within 3 binomial SE (worst %.2f SE)", agree, worst)};
}

Outcome step_collapse() {
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<std::size_t> I(1, 60);
  std::uniform_real_distribution<double> theta(0.0, 0.25);
  int exact = 0;
  for (int t = 0; t < 100; ++t) {
    const auto o = fixtures::outcomes("m", fixtures::random_pool(rng, I(rng), 1)[0]);
    // Half the thresholds sit exactly on a grid value to exercise ties.
    const double th = t % 2 ? theta(rng) : static_cast<double>(t % 14) / 64.0;
    exact += pdam_surrogate(o, DetectionFunction::step(th)).pdam_hat == asr(o, th);
  }
  return {exact == 100, fmt("%d/100 (instance, theta) pairs exactly equal", exact)};
}

Outcome mps_bias() {
  const auto pool = fixtures::model_population();
  const auto grid = default_n_grid();
  const std::size_t trials = 200;
  bool monotone = true, endpoints = true;
  std::ostringstream detail;
  for (const auto& o : pool) {
    const auto d = raw_distances(o);
    // Nested design: the size-n resample is the first n draws of trial r.
    std::vector<double> mean_mps(grid.size(), 0.0);
    std::vector<std::size_t> defined(grid.size(), 0);
    for (std::size_t r = 0; r < trials; ++r) {
      Rng rng = make_rng(77, "mps-trial", r);
      double running = kInf;
      std::size_t next = 0;
      for (std::size_t k = 1; k <= grid.back(); ++k) {
        const auto idx = std::min(d.size() - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(d.size())));
        running = std::min(running, d[idx]);
        if (k == grid[next]) {
          if (std::isfinite(running)) {
            mean_mps[next] += running;
            ++defined[next];
          }
          ++next;
        }
      }
    }
    for (std::size_t g = 0; g < grid.size(); ++g) mean_mps[g] /= static_cast<double>(defined[g]);
    for (std::size_t g = 1; g < grid.size(); ++g) monotone = monotone && mean_mps[g] <= mean_mps[g - 1];
    // Independent resamples at the two ends of the grid.
    auto independent_mean = [&](std::size_t n) {
      double s = 0.0;
      std::size_t c = 0;
      for (std::size_t r = 0; r < trials; ++r) {
        double m = kInf;
        for (auto i : resample_indices(d.size(), n, r, 78)) m = std::min(m, d[i]);
        if (std::isfinite(m)) {
          s += m;
          ++c;
        }
      }
      return s / static_cast<double>(c);
    };
    const double lo = independent_mean(grid.front()), hi = independent_mean(grid.back());
    endpoints = endpoints && hi <= lo;
    detail << o.model_id() << " " << fmt("%.5f->%.5f", mean_mps.front(), mean_mps.back()) << "; ";
  }
  const auto bands = bootstrap_bands(pool, BootstrapMetric::detector_free(), grid, 50, 2024);
  bool narrows = true;
  for (const auto& b : bands) {
    narrows = narrows && (b.points.back().p95 - b.points.back().p05) < (b.points.front().p95 - b.points.front().p05);
  }
  detail << "pdam band narrows for all models: " << (narrows ? "yes" : "no");
  return {monotone && endpoints && narrows, "mean MPS n=20->200 " + detail.str()};
}

Outcome bootstrap_protocol() {
  const auto pool = fixtures::model_population();
  const auto a = bootstrap_bands(pool, BootstrapMetric::detector_free(), default_n_grid(), 50, 31);
  const auto b = bootstrap_bands(pool, BootstrapMetric::detector_free(), default_n_grid(), 50, 31);
  bool deterministic = true, narrows = true, ordered = true;
  std::ostringstream detail;
  for (std::size_t j = 0; j < a.size(); ++j) {
    deterministic = deterministic && a[j].points == b[j].points && a[j].points.size() == 10;
    const double w20 = a[j].points.front().p95 - a[j].points.front().p05;
    const double w200 = a[j].points.back().p95 - a[j].points.back().p05;
    narrows = narrows && w200 < w20;
    for (const auto& p : a[j].points) ordered = ordered && p.p05 <= p.p50 && p.p50 <= p.p95;
    detail << a[j].model_id << fmt(" %.4f->%.4f; ", w20, w200);
  }
  return {deterministic && narrows && ordered,
          "reps=50, n=20..200, width p95-p05 " + detail.str() + (deterministic ? "deterministic" : "NOT deterministic")};
}

Outcome logistic_recovery() {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> tau(0.0, 0.3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto truth = DetectionFunction::logistic(5, 40);
  std::vector<DetectionSample> samples;
  while (samples.size() < 500) {
    const double t = tau(rng);
    if (t > 0.0) samples.push_back({t, u(rng) < truth(t) ? 1 : 0});
  }
  const auto fit = fit_logistic(samples);
  const auto f = fit.function();
  double mae = 0.0;
  for (int k = 0; k <= 300; ++k) mae += std::abs(f(k * 0.001) - truth(k * 0.001));
  mae /= 301.0;
  return {mae <= 0.05, fmt("beta0 = %.3f, beta1 = %.3f, %zu iterations, MAE = %.4f", fit.beta0, fit.beta1,
                           fit.iterations, mae)};
}

double closest_kink(const Predictor& p, const Vector& x) {
  double closest = kInf;
  Vector a = x;
  const auto& layers = p.layers();
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    const auto& L = layers[l];
    Vector next(L.out);
    for (std::size_t o = 0; o < L.out; ++o) {
      double acc = p.weights()[L.offset + L.in * L.out + o];
      for (std::size_t i = 0; i < L.in; ++i) acc += p.weights()[L.offset + o * L.in + i] * a[i];
      closest = std::min(closest, std::abs(acc));
      next[o] = acc > 0 ? acc : 0.0;
    }
    a = next;
  }
  return closest;
}

Outcome gradient_correctness() {
  std::mt19937_64 rng(1010);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::vector<Architecture> archs{Architecture::linear(), Architecture::mlp({8, 6}, Activation::relu),
                                        Architecture::mlp({10}, Activation::tanh)};
  std::ostringstream detail;
  bool ok = true;
  for (const auto& arch : archs) {
    double worst = 0.0;
    std::size_t pairs = 0, skipped = 0;
    for (std::uint64_t s = 0; pairs < 100; ++s) {
      const auto p = Predictor::initialized("m", arch, 5, 3, 5000 + s);
      Vector x(5);
      for (auto& v : x) v = g(rng);
      if (arch.kind == Architecture::Kind::mlp && arch.activation == Activation::relu && closest_kink(p, x) < 1e-4) {
        ++skipped;
        continue;
      }
      const Label label = static_cast<Label>(s % 3);
      const auto grad = p.input_gradient(x, label);
      for (std::size_t i = 0; i < x.size(); ++i) {
        Vector xp = x, xm = x;
        xp[i] += 1e-5;
        xm[i] -= 1e-5;
        const double fd = (p.loss(xp, label) - p.loss(xm, label)) / 2e-5;
        worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-3}));
      }
      ++pairs;
    }
    ok = ok && worst <= 1e-4;
    detail << to_string(arch) << fmt(" %.2e (%zu pairs, %zu near relu kinks skipped); ", worst, pairs, skipped);
  }
  return {ok, "max relative error " + detail.str()};
}

Outcome attack_monotonicity() {
  const auto ds = generate_dataset({SyntheticKind::gaussian_blobs, 200, 2, 2, 0.8, 404});
  const std::vector<Predictor> models{train(ds, Architecture::linear(), {0.1, 100, 16, 0.0, 1}, "linear"),
                                      train(ds, Architecture::mlp({16}, Activation::tanh), {0.1, 100, 16, 1e-4, 2}, "mlp")};
  const std::vector<double> grid{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
  const AttackContext ctx{};
  const auto ids = observation_ids(ds);
  bool monotone = true, dominates = true;
  std::ostringstream detail;
  for (const auto& m : models) {
    const std::vector<AttackSpec> all{{AttackName::random, grid, 50, {}, 3},
                                      {AttackName::fgsm, grid, 1, {}, 0},
                                      {AttackName::pgd, grid, 20, {}, 0}};
    std::vector<AttackSpec> specs;
    std::optional<AttackOutcomeSet> previous;
    for (const auto& s : all) {
      specs.push_back(s);
      const auto o = attack_strategy_reduce(run_attack_set(m, ds, specs, ctx), ds, m.model_id(), ctx.metric);
      if (previous) {
        for (std::size_t i = 0; i < o.size(); ++i) monotone = monotone && o.records()[i].d_a <= previous->records()[i].d_a;
      }
      previous = o;
    }
    for (double eps : grid) {
      int fg = 0, pg = 0;
      for (const auto& x : ds.observations()) {
        fg += fgsm(m, x, eps, ctx).success;
        pg += pgd(m, x, eps, 20, std::nullopt, ctx).success;
      }
      dominates = dominates && pg >= fg;
      if (eps == 0.5 || eps == 1.0) detail << m.model_id() << fmt(" eps=%.2f pgd %d >= fgsm %d; ", eps, pg, fg);
    }
  }
  return {monotone && dominates, std::string(monotone ? "d_A non-increasing as attacks are added; " : "d_A increased; ") +
                                     detail.str()};
}

Outcome reference_fixture_report() {
  const auto t = fixtures::summary_fixture();
  const auto md = io::emit_report(t, io::ReportFormat::markdown, fixtures::kSummaryStyle);
  const auto again = io::emit_report(fixtures::summary_fixture(), io::ReportFormat::markdown, fixtures::kSummaryStyle);
  std::size_t bold = 0;
  for (std::size_t pos = md.find("**"); pos != std::string::npos; pos = md.find("**", pos + 2)) ++bold;
  const bool ok = md == fixtures::kSummaryMarkdown && md == again && bold == 8 &&
                  md.find("| Carmon-Semi | **0.33** | **0.13** | **0.33** | 0.00095 |") != std::string::npos &&
                  md.find("| Rice-Overfit | 0.43 | 0.20 | 0.42 | **0.00119** |") != std::string::npos;
  return {ok, fmt("12 values rendered, %zu best markers, byte-identical to the expected table: %s", bold / 2,
                  md == fixtures::kSummaryMarkdown ? "yes" : "no")};
}

Outcome round_trips() {
  std::vector<std::string> checked;
  bool ok = true;
  auto check = [&](const char* name, bool same) {
    ok = ok && same;
    checked.push_back(std::string(name) + (same ? "" : "(FAILED)"));
  };
  const auto ds = generate_dataset({SyntheticKind::two_moons, 50, 2, 2, 0.1, 5});
  check("dataset", io::parse_dataset(io::format_dataset(ds)) == ds);
  const auto model = Predictor::initialized("net", Architecture::mlp({4, 3}, Activation::tanh), 2, 2, 9);
  check("model", io::parse_model(io::format_model(model)) == model);
  const std::vector<AttackSpec> specs{{AttackName::pgd, {0.1, 0.3}, 5, {}, 0}, {AttackName::random, {0.3}, 5, {}, 1}};
  const auto cands = run_attack_set(model, ds, specs, {});
  check("candidates", io::parse_candidates(io::format_candidates(cands, "net", Metric::linf)).candidates == cands);
  const auto records = attack_strategy_reduce(cands, ds, "net", Metric::linf);
  check("records", io::parse_records(io::format_records(records)) == records);
  const auto inf_records = fixtures::outcomes("m", {0.125, kInf, 1e-300});
  check("records-inf", io::parse_records(io::format_records(inf_records)) == inf_records);
  const std::vector<DetectionSample> samples{{0.01, 1}, {0.1234567890123, 0}};
  check("detection-samples", io::parse_detection_samples(io::format_detection_samples(samples)) == samples);
  const LogisticFit fit{5.125, 39.75, -0.3, 6, false};
  const auto fit_back = io::parse_logistic_fit(io::format_logistic_fit(fit));
  check("detection-params", fit_back.beta0 == fit.beta0 && fit_back.beta1 == fit.beta1 &&
                                fit_back.log_likelihood == fit.log_likelihood && fit_back.iterations == fit.iterations);

  bool rejected = false;
  const std::vector<PerturbationRecord> other{{"x0", "b", PerturbationSize::finite(0.1)},
                                              {"y1", "b", PerturbationSize::infinite()}};
  const auto dir = std::filesystem::temp_directory_path() / "advrisk-acceptance";
  std::filesystem::create_directories(dir);
  io::write_records(fixtures::outcomes("a", {0.1, 0.2}), dir / "a.tsv");
  io::write_records(AttackOutcomeSet("b", Metric::linf, other), dir / "b.tsv");
  try {
    const std::vector<std::filesystem::path> paths{dir / "a.tsv", dir / "b.tsv"};
    io::read_record_pool(paths);
  } catch (const FormatError& e) {
    rejected = e.code() == FormatErrc::hash_mismatch;
  }
  bool tampered = false;
  try {
    auto text = io::format_records(fixtures::outcomes("a", {0.1, 0.2}));
    text.replace(text.find("x1\t"), 3, "z9\t");
    io::parse_records(text);
  } catch (const FormatError& e) {
    tampered = e.code() == FormatErrc::hash_mismatch;
  }
  std::string list;
  for (const auto& c : checked) list += (list.empty() ? "" : ", ") + c;
  return {ok && rejected && tampered, "read(write(x)) == x for " + list + "; mismatched sample hashes " +
                                          (rejected && tampered ? "rejected" : "NOT rejected")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"estimator equivalence", estimator_equivalence},
      {"hand-derived micro instance", micro_instance},
      {"unbiasedness", unbiasedness},
      {"consistency", consistency},
      {"Monte Carlo vs surrogate", monte_carlo_agreement},
      {"step detection collapses to ASR", step_collapse},
      {"MPS bias vs narrowing P^dam band", mps_bias},
      {"bootstrap protocol", bootstrap_protocol},
      {"logistic fit recovery", logistic_recovery},
      {"gradient correctness", gradient_correctness},
      {"attack-strategy monotonicity", attack_monotonicity},
      {"reference fixture report", reference_fixture_report},
      {"round trips and pooling guards", round_trips},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    failed += !r.pass;
    std::printf("[%s] %2zu %s: %s\n", r.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, r.detail.c_str());
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
