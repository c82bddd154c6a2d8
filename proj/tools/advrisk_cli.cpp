// advrisk command-line tool: generate -> train -> attack -> fit-detector ->
// estimate / bootstrap / curve. Exit codes: 0 ok, 2 config, 3 io, 4 numeric.

#include <advrisk/advrisk.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace advrisk;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

// Accepts plain decimals and fractions such as 8/255.
double parse_number(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) {
    const auto v = io::parse_double(text);
    if (!v) throw ConfigError("not a number: '" + text + "'");
    return *v;
  }
  const auto num = io::parse_double(std::string_view(text).substr(0, slash));
  const auto den = io::parse_double(std::string_view(text).substr(slash + 1));
  if (!num || !den || *den == 0.0) throw ConfigError("not a fraction: '" + text + "'");
  return *num / *den;
}

std::vector<double> parse_numbers(const std::vector<std::string>& items) {
  std::vector<double> out;
  for (const auto& s : items) out.push_back(parse_number(s));
  return out;
}

DetectionFunction parse_detection(const std::string& text, std::span<const AttackOutcomeSet> pool) {
  if (text == "average") return DetectionFunction::average(pool);
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (kind == "step" && !arg.empty()) return DetectionFunction::step(parse_number(arg));
  if (kind == "constant" && !arg.empty()) return DetectionFunction::constant(parse_number(arg));
  if (kind == "logistic" && !arg.empty()) {
    const auto comma = arg.find(',');
    if (comma != std::string::npos) {
      const auto b0 = io::parse_double(std::string_view(arg).substr(0, comma));
      const auto b1 = io::parse_double(std::string_view(arg).substr(comma + 1));
      if (b0 && b1) return DetectionFunction::logistic(*b0, *b1);
    }
    return io::parse_logistic_fit(io::read_file(arg)).function();
  }
  if (kind == "table" && !arg.empty()) return io::parse_detection_table(io::read_file(arg));
  throw ConfigError("unknown detection source '" + text +
                    "' (expected step:THETA, constant:V, logistic:FILE, logistic:B0,B1, table:FILE or average)");
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    io::write_file(out, text);
  }
}

std::vector<AttackOutcomeSet> load_pool(const std::vector<std::string>& paths) {
  if (paths.empty()) throw ConfigError("at least one records file is required");
  std::vector<fs::path> p(paths.begin(), paths.end());
  return io::read_record_pool(p);
}

// --- generate ---------------------------------------------------------------

struct GenerateOptions {
  std::string kind = "gaussian-blobs";
  std::size_t n = 200;
  std::size_t dim = 2;
  int classes = 2;
  double noise = 0.5;
  std::string out;
};

void cmd_generate(const GenerateOptions& o, std::uint64_t seed) {
  SyntheticSpec spec{parse_synthetic_kind(o.kind), o.n, o.dim, o.classes, o.noise, substream_seed(seed, "generate")};
  const auto ds = generate_dataset(spec);
  emit(io::format_dataset(ds), o.out);
  if (!o.out.empty()) std::cerr << "wrote " << ds.size() << " observations to " << o.out << "\n";
}

// --- train ------------------------------------------------------------------

struct TrainOptions {
  std::string data;
  std::string arch = "linear";
  std::string model_id = "model";
  double lr = 0.1;
  std::size_t epochs = 200;
  std::size_t batch = 16;
  double l2 = 0.0;
  std::string out;
};

void cmd_train(const TrainOptions& o, std::uint64_t seed) {
  const auto ds = io::read_dataset(o.data);
  const TrainHyper hyper{o.lr, o.epochs, o.batch, o.l2, substream_seed(seed, "train:" + o.model_id)};
  const auto model = train(ds, parse_architecture(o.arch), hyper, o.model_id);
  io::write_model(model, o.out);
  std::cout << o.model_id << "\taccuracy=" << io::format_fixed(accuracy(model, ds), 4)
            << "\tloss=" << io::format_fixed(mean_loss(model, ds), 6) << "\n";
}

// --- attack -----------------------------------------------------------------

struct AttackOptions {
  std::vector<std::string> models;
  std::string data;
  std::string metric = "Linf";
  std::string criterion = "ground-truth";
  std::vector<std::string> attacks{"fgsm", "pgd", "random"};
  std::vector<std::string> eps{"1/255", "2/255", "3/255", "4/255", "5/255", "6/255", "7/255", "8/255"};
  std::size_t steps = 20;
  std::size_t random_steps = 100;
  std::string step_size;
  std::vector<double> clip;
  bool filter_initially_correct = true;
  std::size_t limit = 200;
  std::string out_dir = ".";
};

void cmd_attack(const AttackOptions& o, std::uint64_t seed) {
  if (o.attacks.empty() || (o.attacks.size() == 1 && o.attacks[0] == "none")) {
    throw ConfigError("no attacks selected; the attack set must be nonempty");
  }
  if (o.models.empty()) throw ConfigError("at least one --model is required");
  AttackContext ctx{parse_metric(o.metric), parse_criterion(o.criterion), std::nullopt};
  if (!o.clip.empty()) {
    if (o.clip.size() != 2 || !(o.clip[0] < o.clip[1])) throw ConfigError("--clip takes LO HI with LO < HI");
    ctx.clip = Box{o.clip[0], o.clip[1]};
  }
  const auto grid = parse_numbers(o.eps);
  const std::optional<double> step_size =
      o.step_size.empty() ? std::nullopt : std::optional<double>(parse_number(o.step_size));
  std::vector<AttackSpec> specs;
  for (const auto& name : o.attacks) {
    const auto a = parse_attack_name(name);
    const std::size_t steps = a == AttackName::random ? o.random_steps : (a == AttackName::fgsm ? 1 : o.steps);
    specs.push_back({a, grid, steps, a == AttackName::pgd ? step_size : std::nullopt, substream_seed(seed, "attack")});
  }
  for (const auto& s : specs) s.validate();

  std::vector<Predictor> models;
  for (const auto& m : o.models) models.push_back(io::read_model(m));
  Dataset ds = io::read_dataset(o.data);
  if (o.filter_initially_correct) {
    const auto before = ds.size();
    ds = filter_initially_correct(ds, models);
    std::cerr << "kept " << ds.size() << " of " << before << " observations classified correctly by every model\n";
  }
  if (o.limit > 0 && ds.size() > o.limit) {
    std::vector<Observation> first(ds.observations().begin(), ds.observations().begin() + static_cast<long>(o.limit));
    ds = Dataset(std::move(first), ds.num_classes(), ds.dim());
  }
  if (ds.empty()) throw ConfigError("no observations left to attack");

  fs::create_directories(o.out_dir);
  std::cout << "|A|=" << attack_count(specs) << "\tobservations=" << ds.size() << "\n";
  for (const auto& model : models) {
    const auto candidates = run_attack_set(model, ds, specs, ctx);
    const auto outcomes = attack_strategy_reduce(candidates, ds, model.model_id(), ctx.metric);
    io::write_candidates(candidates, model.model_id(), ctx.metric,
                         fs::path(o.out_dir) / (model.model_id() + ".candidates.tsv"));
    io::write_records(outcomes, fs::path(o.out_dir) / (model.model_id() + ".records.tsv"));
    const double frac = static_cast<double>(outcomes.finite_count()) / static_cast<double>(outcomes.size());
    std::cout << model.model_id() << "\tsuccess=" << io::format_fixed(frac, 4) << "\n";
  }
}

// --- fit-detector -------------------------------------------------------------

struct FitOptions {
  std::string samples;
  double l2 = 1e-6;
  std::string out;
};

void cmd_fit(const FitOptions& o) {
  const auto content = io::read_file(o.samples);
  if (content.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ConfigError(o.samples + ": samples file is empty");
  }
  const auto samples = io::parse_detection_samples(content);
  const auto fit = fit_logistic(samples, o.l2);
  if (fit.increasing) warn("fitted curve increases with tau; larger perturbations look less detectable");
  emit(io::format_logistic_fit(fit), o.out);
  std::cerr << "beta0=" << io::format_double(fit.beta0, 6) << " beta1=" << io::format_double(fit.beta1, 6)
            << " iterations=" << fit.iterations << "\n";
}

// --- estimate -------------------------------------------------------------------

struct EstimateOptions {
  std::vector<std::string> records;
  std::string detection = "average";
  std::vector<std::string> taus{"2/255", "8/255"};
  std::optional<double> c_dam;
  bool monte_carlo = false;
  std::string format = "markdown";
  int probability_decimals = 4;
  int size_decimals = 6;
  std::string out;
};

void cmd_estimate(const EstimateOptions& o, std::uint64_t seed) {
  const auto pool = load_pool(o.records);
  if (o.taus.empty()) throw ConfigError("the tau list for ASR columns is empty");
  const auto taus = parse_numbers(o.taus);
  for (double t : taus) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("taus must be finite and nonnegative");
  }
  io::ReportFormat format;
  if (o.format == "markdown") {
    format = io::ReportFormat::markdown;
  } else if (o.format == "tsv") {
    format = io::ReportFormat::tsv;
  } else {
    throw ConfigError("unknown report format '" + o.format + "'");
  }
  std::optional<DetectionFunction> detection;
  if (o.detection == "average") {
    if (pool.size() == 1) warn("detector-free estimate with a single model compares the model only with itself");
    if (o.monte_carlo) detection = DetectionFunction::average(pool);
  } else {
    detection = parse_detection(o.detection, pool);
  }
  auto table = summary_table(pool, taus, detection, o.c_dam);
  if (o.monte_carlo) {
    const auto mc_seed = substream_seed(seed, "detector");
    for (std::size_t j = 0; j < pool.size(); ++j) {
      table.rows[j].pdam = pdam_monte_carlo(pool[j], *detection, mc_seed).pdam_hat;
      if (o.c_dam) table.rows[j].risk = table.rows[j].pdam * *o.c_dam;
    }
    table.pdam_method = "monte-carlo " + detection->describe();
    flag_best(table);
  }
  std::cerr << "P^dam: " << table.pdam_method << "\n";
  emit(io::emit_report(table, format, {o.probability_decimals, o.size_decimals}), o.out);
}

// --- bootstrap ----------------------------------------------------------------

struct BootstrapOptions {
  std::vector<std::string> records;
  std::vector<std::string> metrics{"pdam-detector-free", "mps"};
  std::string detection;
  std::size_t reps = 50;
  std::vector<std::size_t> n_grid;
  std::string out;
};

BootstrapMetric parse_bootstrap_metric(const std::string& name, const std::string& detection,
                                       std::span<const AttackOutcomeSet> pool) {
  if (name == "pdam-detector-free") return BootstrapMetric::detector_free();
  if (name == "mps") return BootstrapMetric::min_perturbation();
  if (name == "aps") return BootstrapMetric::average_perturbation();
  if (name == "pdam-surrogate") {
    if (detection.empty() || detection == "average") {
      throw ConfigError("pdam-surrogate needs --detection step:..., logistic:... or table:...");
    }
    return BootstrapMetric::surrogate(parse_detection(detection, pool));
  }
  if (name.starts_with("asr@")) return BootstrapMetric::success_ratio(parse_number(name.substr(4)));
  throw ConfigError("unknown bootstrap metric '" + name + "'");
}

void cmd_bootstrap(const BootstrapOptions& o, std::uint64_t seed) {
  const auto pool = load_pool(o.records);
  const auto grid = o.n_grid.empty() ? default_n_grid() : o.n_grid;
  std::vector<BootstrapBand> all;
  for (const auto& name : o.metrics) {
    const auto bands =
        bootstrap_bands(pool, parse_bootstrap_metric(name, o.detection, pool), grid, o.reps, substream_seed(seed, "bootstrap"));
    all.insert(all.end(), bands.begin(), bands.end());
  }
  emit(io::format_bands(all), o.out);
}

// --- curve --------------------------------------------------------------------

void cmd_curve(const std::string& records, const std::string& out) {
  emit(io::format_curve(asr_curve(io::read_records(records))), out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detection-aware adversarial risk estimation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; command line flags override it");
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Root seed; every component draws from a named substream")->capture_default_str();

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Generate a synthetic dataset");
  g->add_option("--kind", gen.kind, "gaussian-blobs, two-moons or xor-grid")->capture_default_str();
  g->add_option("-n,--n", gen.n, "Number of observations")->capture_default_str();
  g->add_option("--dim", gen.dim, "Feature dimension")->capture_default_str();
  g->add_option("--classes", gen.classes, "Number of classes")->capture_default_str();
  g->add_option("--noise", gen.noise, "Gaussian noise scale")->capture_default_str();
  g->add_option("-o,--out", gen.out, "Output dataset file (stdout if omitted)");

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train a predictor with minibatch SGD");
  t->add_option("--data", tr.data, "Dataset file")->required();
  t->add_option("--arch", tr.arch, "linear or mlp:H1,H2:relu|tanh")->capture_default_str();
  t->add_option("--model-id", tr.model_id, "Identifier stored with the model")->capture_default_str();
  t->add_option("--lr", tr.lr)->capture_default_str();
  t->add_option("--epochs", tr.epochs)->capture_default_str();
  t->add_option("--batch", tr.batch)->capture_default_str();
  t->add_option("--l2", tr.l2, "Weight decay")->capture_default_str();
  t->add_option("-o,--out", tr.out, "Output model file")->required();

  AttackOptions at;
  auto* a = app.add_subcommand("attack", "Attack every observation; write candidates and records per model");
  a->add_option("--model", at.models, "Model file (repeatable)")->required();
  a->add_option("--data", at.data, "Dataset file")->required();
  a->add_option("--metric", at.metric, "Linf or L2")->capture_default_str();
  a->add_option("--criterion", at.criterion, "ground-truth or prediction-change")->capture_default_str();
  a->add_option("--attacks", at.attacks, "fgsm,pgd,random or none")->delimiter(',')->capture_default_str();
  a->add_option("--eps", at.eps, "Epsilon grid shared by every attack")->delimiter(',')->capture_default_str();
  a->add_option("--steps", at.steps, "PGD iterations")->capture_default_str();
  a->add_option("--random-steps", at.random_steps, "Draws per random attack")->capture_default_str();
  a->add_option("--step-size", at.step_size, "PGD step size (default 2.5*eps/steps)");
  a->add_option("--clip", at.clip, "Feature box LO HI")->expected(2);
  a->add_flag("--filter-initially-correct,!--no-filter-initially-correct", at.filter_initially_correct,
              "Attack only observations every model classifies correctly")
      ->capture_default_str();
  a->add_option("--limit", at.limit, "Attack at most this many observations (0: all)")->capture_default_str();
  a->add_option("--out-dir", at.out_dir, "Directory for <model>.candidates.tsv and <model>.records.tsv")
      ->capture_default_str();

  FitOptions fit;
  auto* f = app.add_subcommand("fit-detector", "Fit a logistic detection function to tau,undetected samples");
  f->add_option("samples", fit.samples, "CSV with header tau,undetected")->required();
  f->add_option("--l2", fit.l2, "Ridge penalty")->capture_default_str();
  f->add_option("-o,--out", fit.out, "Output parameter file (stdout if omitted)");

  EstimateOptions est;
  auto* e = app.add_subcommand("estimate", "Summary table with P^dam, ASR and MPS per model");
  e->add_option("records", est.records, "Records files of models evaluated on one shared sample")->required();
  e->add_option("--detection", est.detection,
                "Probability of NON-detection: step:THETA, constant:V, logistic:FILE, logistic:B0,B1, table:FILE or average")
      ->capture_default_str();
  e->add_option("--taus", est.taus, "Thresholds for the ASR columns")->delimiter(',')->capture_default_str();
  e->add_option("--c-dam", est.c_dam, "Damage cost; adds an operational risk column");
  e->add_flag("--monte-carlo", est.monte_carlo, "Estimate P^dam by simulating the detector once per observation");
  e->add_option("--format", est.format, "markdown or tsv")->capture_default_str();
  e->add_option("--decimals", est.probability_decimals, "Decimals for probabilities")->capture_default_str();
  e->add_option("--size-decimals", est.size_decimals, "Decimals for perturbation sizes")->capture_default_str();
  e->add_option("-o,--out", est.out, "Output file (stdout if omitted)");

  BootstrapOptions bs;
  auto* b = app.add_subcommand("bootstrap", "Percentile bands over resample sizes");
  b->add_option("records", bs.records, "Records files")->required();
  b->add_option("--metric", bs.metrics, "pdam-detector-free, pdam-surrogate, mps, aps, asr@TAU")
      ->delimiter(',')
      ->capture_default_str();
  b->add_option("--detection", bs.detection, "Detection function for pdam-surrogate");
  b->add_option("--reps", bs.reps, "Resamples per size")->capture_default_str();
  b->add_option("--n-grid", bs.n_grid, "Resample sizes (default 20,40,...,200)")->delimiter(',');
  b->add_option("-o,--out", bs.out, "Output CSV (stdout if omitted)");

  std::string curve_records, curve_out;
  auto* c = app.add_subcommand("curve", "ASR step curve as tau,value CSV");
  c->add_option("records", curve_records, "Records file")->required();
  c->add_option("-o,--out", curve_out, "Output CSV (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitConfig;
  }

  try {
    if (*g) cmd_generate(gen, seed);
    if (*t) cmd_train(tr, seed);
    if (*a) cmd_attack(at, seed);
    if (*f) cmd_fit(fit);
    if (*e) cmd_estimate(est, seed);
    if (*b) cmd_bootstrap(bs, seed);
    if (*c) cmd_curve(curve_records, curve_out);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kExitConfig;
  } catch (const IoError& err) {
    std::cerr << "io error: " << err.what() << "\n";
    return kExitIo;
  } catch (const NumericError& err) {
    std::cerr << "numeric error: " << err.what() << "\n";
    return kExitNumeric;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "io error: " << err.what() << "\n";
    return kExitIo;
  }
  return 0;
}
