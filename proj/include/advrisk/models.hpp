#pragma once

#include <advrisk/core.hpp>
#include <advrisk/random.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace advrisk {

// ---------------------------------------------------------------------------
// Synthetic data

enum class SyntheticKind { gaussian_blobs, two_moons, xor_grid };

inline SyntheticKind parse_synthetic_kind(std::string_view s) {
  if (s == "gaussian-blobs") return SyntheticKind::gaussian_blobs;
  if (s == "two-moons") return SyntheticKind::two_moons;
  if (s == "xor-grid") return SyntheticKind::xor_grid;
  throw ConfigError("unsupported dataset kind '" + std::string(s) + "'");
}

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::gaussian_blobs;
  std::size_t n = 200;
  std::size_t dim = 2;
  int num_classes = 2;
  double noise = 0.5;
  std::uint64_t seed = 0;
};

namespace detail {

inline Vector blob_center(int cls, int num_classes, std::size_t dim) {
  Vector c(dim, 0.0);
  if (dim == 1) {
    c[0] = 4.0 * cls - 2.0 * (num_classes - 1);
    return c;
  }
  const double angle = 2.0 * std::numbers::pi * cls / num_classes;
  c[0] = 2.0 * std::cos(angle);
  c[1] = 2.0 * std::sin(angle);
  return c;
}

}  // namespace detail

// Deterministic given spec.seed. Labels cycle through the classes, so
// gaussian-blobs are balanced within one observation per class.
inline Dataset generate_dataset(const SyntheticSpec& spec) {
  if (spec.n == 0) throw ConfigError("n must be positive");
  if (spec.dim == 0) throw ConfigError("dim must be positive");
  if (spec.num_classes < 1) throw ConfigError("num_classes must be positive");
  if (!(spec.noise >= 0.0)) throw ConfigError("noise must be nonnegative");
  if (spec.kind != SyntheticKind::gaussian_blobs) {
    if (spec.num_classes != 2) throw ConfigError("two-moons and xor-grid have exactly 2 classes");
    if (spec.dim < 2) throw ConfigError("two-moons and xor-grid need dim >= 2");
  }

  Rng rng = make_rng(spec.seed, "generate");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);

  std::vector<Observation> obs;
  obs.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    Observation o;
    o.id = "x" + std::to_string(i);
    o.features.assign(spec.dim, 0.0);
    switch (spec.kind) {
      case SyntheticKind::gaussian_blobs: {
        o.label = static_cast<Label>(i % static_cast<std::size_t>(spec.num_classes));
        o.features = detail::blob_center(o.label, spec.num_classes, spec.dim);
        break;
      }
      case SyntheticKind::two_moons: {
        o.label = static_cast<Label>(i % 2);
        const double t = angle(rng);
        if (o.label == 0) {
          o.features[0] = std::cos(t);
          o.features[1] = std::sin(t);
        } else {
          o.features[0] = 1.0 - std::cos(t);
          o.features[1] = 0.5 - std::sin(t);
        }
        break;
      }
      case SyntheticKind::xor_grid: {
        o.features[0] = unit(rng);
        o.features[1] = unit(rng);
        o.label = ((o.features[0] > 0.0) != (o.features[1] > 0.0)) ? 1 : 0;
        break;
      }
    }
    if (spec.noise > 0.0) {
      for (double& v : o.features) v += spec.noise * gauss(rng);
    }
    obs.push_back(std::move(o));
  }
  return Dataset(std::move(obs), spec.num_classes, spec.dim);
}

// ---------------------------------------------------------------------------
// Predictors

enum class Activation { relu, tanh };

struct Architecture {
  enum class Kind { linear, mlp };

  Kind kind = Kind::linear;
  std::vector<std::size_t> hidden;
  Activation activation = Activation::relu;

  static Architecture linear() { return {}; }
  static Architecture mlp(std::vector<std::size_t> hidden, Activation act) {
    if (hidden.empty()) throw ConfigError("mlp needs at least one hidden layer");
    for (auto h : hidden) {
      if (h == 0) throw ConfigError("hidden layer sizes must be positive");
    }
    return {Kind::mlp, std::move(hidden), act};
  }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// Parses "linear", "mlp:16,16:relu" or "mlp:32:tanh".
inline Architecture parse_architecture(std::string_view s) {
  if (s == "linear") return Architecture::linear();
  if (!s.starts_with("mlp:")) throw ConfigError("unknown architecture '" + std::string(s) + "'");
  std::string_view rest = s.substr(4);
  Activation act = Activation::relu;
  if (auto colon = rest.find(':'); colon != std::string_view::npos) {
    const auto name = rest.substr(colon + 1);
    if (name == "relu") {
      act = Activation::relu;
    } else if (name == "tanh") {
      act = Activation::tanh;
    } else {
      throw ConfigError("unknown activation '" + std::string(name) + "'");
    }
    rest = rest.substr(0, colon);
  }
  std::vector<std::size_t> hidden;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto tok = std::string(rest.substr(0, comma));
    try {
      std::size_t pos = 0;
      const long v = std::stol(tok, &pos);
      if (pos != tok.size() || v <= 0) throw ConfigError("");
      hidden.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError("bad hidden layer size '" + tok + "'");
    }
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  return Architecture::mlp(std::move(hidden), act);
}

inline std::string to_string(const Architecture& a) {
  if (a.kind == Architecture::Kind::linear) return "linear";
  std::string s = "mlp:";
  for (std::size_t i = 0; i < a.hidden.size(); ++i) {
    if (i > 0) s += ',';
    s += std::to_string(a.hidden[i]);
  }
  s += a.activation == Activation::relu ? ":relu" : ":tanh";
  return s;
}

// Dense feed-forward classifier. Parameters are stored flat, layer by layer:
// weight matrix (out x in, row-major) followed by the bias vector.
class Predictor {
public:
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t offset = 0;  // start of the weight block; bias follows at offset + in*out
  };

  Predictor() = default;

  Predictor(std::string model_id, Architecture arch, std::size_t dim, int num_classes, Vector weights)
      : model_id_(std::move(model_id)), arch_(std::move(arch)), dim_(dim), num_classes_(num_classes),
        weights_(std::move(weights)) {
    if (dim_ == 0 || num_classes_ < 1) throw ConfigError("predictor needs dim > 0 and num_classes > 0");
    build_layers();
    if (weights_.size() != parameter_count()) {
      throw ConfigError("weight count " + std::to_string(weights_.size()) + " does not match architecture (" +
                        std::to_string(parameter_count()) + ")");
    }
    for (double w : weights_) {
      if (!std::isfinite(w)) throw NumericError("non-finite model weight");
    }
  }

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
  static Predictor initialized(std::string model_id, Architecture arch, std::size_t dim, int num_classes,
                               std::uint64_t seed) {
    Predictor p(std::move(model_id), std::move(arch), dim, num_classes,
                Vector(count_parameters(arch, dim, num_classes), 0.0));
    Rng rng = make_rng(seed, "init");
    for (const auto& layer : p.layers_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
      std::uniform_real_distribution<double> u(-bound, bound);
      const std::size_t n = layer.in * layer.out + layer.out;
      for (std::size_t k = 0; k < n; ++k) p.weights_[layer.offset + k] = u(rng);
    }
    return p;
  }

  static std::size_t count_parameters(const Architecture& arch, std::size_t dim, int num_classes) {
    std::size_t total = 0;
    std::size_t in = dim;
    for (auto h : arch.kind == Architecture::Kind::mlp ? arch.hidden : std::vector<std::size_t>{}) {
      total += in * h + h;
      in = h;
    }
    return total + in * static_cast<std::size_t>(num_classes) + static_cast<std::size_t>(num_classes);
  }

  const std::string& model_id() const noexcept { return model_id_; }
  const Architecture& architecture() const noexcept { return arch_; }
  std::size_t dim() const noexcept { return dim_; }
  int num_classes() const noexcept { return num_classes_; }
  const Vector& weights() const noexcept { return weights_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::size_t parameter_count() const noexcept {
    return layers_.empty() ? 0 : layers_.back().offset + layers_.back().in * layers_.back().out + layers_.back().out;
  }

  Vector logits(std::span<const double> x) const {
    check_input(x);
    Vector a(x.begin(), x.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      a = affine(layers_[l], a);
      if (l + 1 < layers_.size()) {
        for (double& v : a) v = activate(v);
      }
    }
    return a;
  }

  // argmax of the logits, ties toward the lowest class index.
  Label predict(std::span<const double> x) const {
    const Vector z = logits(x);
    return static_cast<Label>(std::max_element(z.begin(), z.end()) - z.begin());
  }

  double loss(std::span<const double> x, Label label) const {
    check_label(label);
    const Vector z = logits(x);
    return log_sum_exp(z) - z[static_cast<std::size_t>(label)];
  }

  // Gradient of the cross-entropy loss at `label` with respect to the input.
  Vector input_gradient(std::span<const double> x, Label label) const {
    check_input(x);
    check_label(label);
    return backward(x, label, nullptr);
  }

  // Adds d(loss)/d(weights) into `grad` and returns the loss.
  double accumulate_parameter_gradient(std::span<const double> x, Label label, Vector& grad) const {
    check_input(x);
    check_label(label);
    if (grad.size() != weights_.size()) throw DimensionError(weights_.size(), grad.size());
    double loss_value = 0.0;
    backward(x, label, &grad, &loss_value);
    return loss_value;
  }

  Vector& mutable_weights() noexcept { return weights_; }

  friend bool operator==(const Predictor& a, const Predictor& b) {
    return a.model_id_ == b.model_id_ && a.arch_ == b.arch_ && a.dim_ == b.dim_ &&
           a.num_classes_ == b.num_classes_ && a.weights_ == b.weights_;
  }

private:
  void build_layers() {
    layers_.clear();
    std::size_t in = dim_;
    std::size_t offset = 0;
    auto push = [&](std::size_t out) {
      layers_.push_back({in, out, offset});
      offset += in * out + out;
      in = out;
    };
    if (arch_.kind == Architecture::Kind::mlp) {
      for (auto h : arch_.hidden) push(h);
    }
    push(static_cast<std::size_t>(num_classes_));
  }

  void check_input(std::span<const double> x) const {
    if (x.size() != dim_) throw DimensionError(dim_, x.size());
  }

  void check_label(Label label) const {
    if (label < 0 || label >= num_classes_) throw ConfigError("label out of range");
  }

  Vector affine(const Layer& layer, std::span<const double> in) const {
    Vector out(layer.out, 0.0);
    const double* w = weights_.data() + layer.offset;
    const double* b = w + layer.in * layer.out;
    for (std::size_t o = 0; o < layer.out; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < layer.in; ++i) acc += w[o * layer.in + i] * in[i];
      out[o] = acc;
    }
    return out;
  }

  double activate(double v) const {
    return arch_.activation == Activation::relu ? (v > 0.0 ? v : 0.0) : std::tanh(v);
  }

  // Derivative expressed through the pre-activation; relu'(0) = 0.
  double activate_derivative(double pre) const {
    if (arch_.activation == Activation::relu) return pre > 0.0 ? 1.0 : 0.0;
    const double t = std::tanh(pre);
    return 1.0 - t * t;
  }

  static double log_sum_exp(std::span<const double> z) {
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return m + std::log(s);
  }

  Vector backward(std::span<const double> x, Label label, Vector* param_grad, double* loss_out = nullptr) const {
    // Forward pass keeping layer inputs and pre-activations.
    std::vector<Vector> inputs;
    std::vector<Vector> pre;
    inputs.reserve(layers_.size());
    pre.reserve(layers_.size());
    Vector a(x.begin(), x.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      inputs.push_back(a);
      pre.push_back(affine(layers_[l], a));
      a = pre.back();
      if (l + 1 < layers_.size()) {
        for (double& v : a) v = activate(v);
      }
    }

    const Vector& z = pre.back();
    const double lse = log_sum_exp(z);
    if (loss_out) *loss_out = lse - z[static_cast<std::size_t>(label)];
    Vector delta(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) delta[k] = std::exp(z[k] - lse);
    delta[static_cast<std::size_t>(label)] -= 1.0;

    for (std::size_t l = layers_.size(); l-- > 0;) {
      const Layer& layer = layers_[l];
      const double* w = weights_.data() + layer.offset;
      if (param_grad) {
        double* gw = param_grad->data() + layer.offset;
        double* gb = gw + layer.in * layer.out;
        for (std::size_t o = 0; o < layer.out; ++o) {
          for (std::size_t i = 0; i < layer.in; ++i) gw[o * layer.in + i] += delta[o] * inputs[l][i];
          gb[o] += delta[o];
        }
      }
      Vector prev(layer.in, 0.0);
      for (std::size_t o = 0; o < layer.out; ++o) {
        for (std::size_t i = 0; i < layer.in; ++i) prev[i] += w[o * layer.in + i] * delta[o];
      }
      if (l > 0) {
        for (std::size_t i = 0; i < layer.in; ++i) prev[i] *= activate_derivative(pre[l - 1][i]);
      }
      delta = std::move(prev);
    }
    return delta;
  }

  std::string model_id_;
  Architecture arch_;
  std::size_t dim_ = 1;
  int num_classes_ = 1;
  Vector weights_;
  std::vector<Layer> layers_;
};

// ---------------------------------------------------------------------------
// Training

struct TrainHyper {
  double lr = 0.1;
  std::size_t epochs = 200;
  std::size_t batch = 16;
  double l2 = 0.0;
  std::uint64_t seed = 0;
};

inline double mean_loss(const Predictor& p, const Dataset& ds) {
  if (ds.empty()) throw ConfigError("empty dataset");
  double total = 0.0;
  for (const auto& o : ds.observations()) total += p.loss(o.features, o.label);
  return total / static_cast<double>(ds.size());
}

inline double accuracy(const Predictor& p, const Dataset& ds) {
  if (ds.empty()) throw ConfigError("empty dataset");
  std::size_t correct = 0;
  for (const auto& o : ds.observations()) correct += p.predict(o.features) == o.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

// Minibatch SGD on mean cross-entropy plus (l2/2)*||weights||^2 (biases are
// not penalized). Deterministic given hyper.seed.
inline Predictor train(const Dataset& ds, const Architecture& arch, const TrainHyper& hyper,
                       std::string model_id = "model") {
  if (ds.empty()) throw ConfigError("cannot train on an empty dataset");
  if (hyper.batch == 0) throw ConfigError("batch size must be positive");
  if (!(hyper.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(hyper.l2 >= 0.0)) throw ConfigError("l2 must be nonnegative");

  Predictor p = Predictor::initialized(std::move(model_id), arch, ds.dim(), ds.num_classes(), hyper.seed);
  if (hyper.epochs == 0) return p;

  std::vector<bool> is_bias(p.parameter_count(), false);
  for (const auto& layer : p.layers()) {
    for (std::size_t o = 0; o < layer.out; ++o) is_bias[layer.offset + layer.in * layer.out + o] = true;
  }

  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng = make_rng(hyper.seed, "shuffle");
  Vector grad(p.parameter_count());
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
      const std::size_t end = std::min(order.size(), start + hyper.batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const auto& o = ds[order[k]];
        epoch_loss += p.accumulate_parameter_gradient(o.features, o.label, grad);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      Vector& w = p.mutable_weights();
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double g = grad[i] * scale + (is_bias[i] ? 0.0 : hyper.l2 * w[i]);
        w[i] -= hyper.lr * g;
      }
    }
    if (!std::isfinite(epoch_loss)) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + " (non-finite loss)");
    }
  }
  for (double w : p.weights()) {
    if (!std::isfinite(w)) throw NumericError("training diverged (non-finite weights)");
  }
  return p;
}

}  // namespace advrisk
