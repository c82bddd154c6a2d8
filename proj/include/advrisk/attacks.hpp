#pragma once

#include <advrisk/core.hpp>
#include <advrisk/models.hpp>
#include <advrisk/random.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace advrisk {

enum class AttackName { fgsm, pgd, random };

inline std::string to_string(AttackName n) {
  switch (n) {
    case AttackName::fgsm: return "fgsm";
    case AttackName::pgd: return "pgd";
    case AttackName::random: return "random";
  }
  return "?";
}

inline AttackName parse_attack_name(std::string_view s) {
  if (s == "fgsm") return AttackName::fgsm;
  if (s == "pgd") return AttackName::pgd;
  if (s == "random") return AttackName::random;
  throw ConfigError("unknown attack '" + std::string(s) + "'");
}

// One attack family instantiated once per epsilon of its grid.
struct AttackSpec {
  AttackName name = AttackName::pgd;
  std::vector<double> epsilon_grid;
  std::size_t steps = 20;
  std::optional<double> step_size;  // nullopt: 2.5 * eps / steps
  std::uint64_t seed = 0;

  void validate() const {
    if (epsilon_grid.empty()) throw ConfigError(to_string(name) + ": epsilon grid is empty");
    for (std::size_t i = 0; i < epsilon_grid.size(); ++i) {
      if (!(epsilon_grid[i] > 0.0) || !std::isfinite(epsilon_grid[i])) {
        throw ConfigError(to_string(name) + ": epsilons must be positive and finite");
      }
      if (i > 0 && !(epsilon_grid[i] > epsilon_grid[i - 1])) {
        throw ConfigError(to_string(name) + ": epsilon grid must be strictly ascending");
      }
    }
    if (name != AttackName::fgsm && steps == 0) throw ConfigError(to_string(name) + ": steps must be positive");
    if (step_size && !(*step_size > 0.0)) throw ConfigError(to_string(name) + ": step size must be positive");
  }
};

// Number of instantiated attacks |A|.
inline std::size_t attack_count(std::span<const AttackSpec> specs) {
  std::size_t n = 0;
  for (const auto& s : specs) n += s.epsilon_grid.size();
  return n;
}

struct Box {
  double lo = 0.0;
  double hi = 1.0;
};

// Run-wide settings shared by every attack.
struct AttackContext {
  Metric metric = Metric::linf;
  SuccessCriterion criterion = SuccessCriterion::ground_truth_disagreement;
  std::optional<Box> clip;
};

namespace detail {

inline Label loss_label(const Predictor& p, const Observation& x, const AttackContext& ctx) {
  return ctx.criterion == SuccessCriterion::prediction_change ? p.predict(x.features) : x.label;
}

inline void clip_to_box(Vector& v, const AttackContext& ctx) {
  if (!ctx.clip) return;
  for (double& c : v) c = std::clamp(c, ctx.clip->lo, ctx.clip->hi);
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Fills distance and success. A candidate identical to x is never a success.
inline AttackCandidate finish(const Predictor& p, const Observation& x, const AttackContext& ctx,
                              AttackName name, std::map<std::string, double> params, Vector perturbed,
                              std::optional<Label> original = std::nullopt) {
  AttackCandidate c;
  c.observation_id = x.id;
  c.attack_name = to_string(name);
  c.attack_params = std::move(params);
  c.distance = distance(x.features, perturbed, ctx.metric);
  const Label orig = original ? *original : p.predict(x.features);
  c.success = c.distance > 0.0 && evaluate_success(orig, x.label, ctx.criterion, p.predict(perturbed));
  c.perturbed_features = std::move(perturbed);
  return c;
}

}  // namespace detail

// One signed-gradient step of size eps on the cross-entropy loss.
inline AttackCandidate fgsm(const Predictor& p, const Observation& x, double eps, const AttackContext& ctx) {
  if (!(eps > 0.0)) throw ConfigError("fgsm: eps must be positive");
  const Vector g = p.input_gradient(x.features, detail::loss_label(p, x, ctx));
  Vector xp = x.features;
  for (std::size_t i = 0; i < xp.size(); ++i) xp[i] += eps * detail::sign(g[i]);
  detail::clip_to_box(xp, ctx);
  return detail::finish(p, x, ctx, AttackName::fgsm, {{"eps", eps}}, std::move(xp));
}

// Signed-gradient ascent from x, projected onto the Linf eps-ball after every
// step. Returns the final iterate.
inline AttackCandidate pgd(const Predictor& p, const Observation& x, double eps, std::size_t steps,
                           std::optional<double> step_size, const AttackContext& ctx) {
  if (!(eps > 0.0)) throw ConfigError("pgd: eps must be positive");
  if (steps == 0) throw ConfigError("pgd: steps must be positive");
  const double alpha = step_size ? *step_size : 2.5 * eps / static_cast<double>(steps);
  const Label target = detail::loss_label(p, x, ctx);
  Vector xp = x.features;
  for (std::size_t s = 0; s < steps; ++s) {
    const Vector g = p.input_gradient(xp, target);
    for (std::size_t i = 0; i < xp.size(); ++i) {
      const double next = xp[i] + alpha * detail::sign(g[i]);
      xp[i] = std::clamp(next, x.features[i] - eps, x.features[i] + eps);
    }
    detail::clip_to_box(xp, ctx);
  }
  return detail::finish(p, x, ctx, AttackName::pgd,
                        {{"eps", eps}, {"steps", static_cast<double>(steps)}, {"step_size", alpha}},
                        std::move(xp));
}

// Best (smallest distance) successful draw among `steps` uniform samples from
// the eps-ball of the configured metric; x itself when none succeeds.
inline AttackCandidate random_attack(const Predictor& p, const Observation& x, double eps, std::size_t steps,
                                     std::uint64_t seed, const AttackContext& ctx) {
  if (!(eps > 0.0)) throw ConfigError("random: eps must be positive");
  Rng rng(seed);
  const Label orig = p.predict(x.features);
  std::map<std::string, double> params{{"eps", eps}, {"steps", static_cast<double>(steps)}};
  std::optional<AttackCandidate> best;
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t dim = x.features.size();
  for (std::size_t s = 0; s < steps; ++s) {
    Vector xp = x.features;
    if (ctx.metric == Metric::linf) {
      for (double& v : xp) v += eps * (2.0 * uniform01(rng) - 1.0);
    } else {
      Vector dir(dim);
      double norm = 0.0;
      for (double& d : dir) {
        d = gauss(rng);
        norm += d * d;
      }
      norm = std::sqrt(norm);
      const double radius = eps * std::pow(uniform01(rng), 1.0 / static_cast<double>(dim));
      for (std::size_t i = 0; i < dim; ++i) xp[i] += norm > 0.0 ? radius * dir[i] / norm : 0.0;
    }
    detail::clip_to_box(xp, ctx);
    auto c = detail::finish(p, x, ctx, AttackName::random, params, std::move(xp), orig);
    if (c.success && (!best || c.distance < best->distance)) best = std::move(c);
  }
  if (best) return *best;
  return detail::finish(p, x, ctx, AttackName::random, std::move(params), x.features, orig);
}

namespace detail {

template <typename F>
auto with_context(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const NumericError& e) {
    throw NumericError(where + ": " + e.what());
  } catch (const DimensionError& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace detail

// Seed of the random attack for one (spec, observation, epsilon) triple; does
// not depend on evaluation order.
inline std::uint64_t random_attack_seed(std::uint64_t spec_seed, const std::string& observation_id,
                                        std::size_t eps_index) {
  return substream_seed(spec_seed, "random-attack:" + observation_id, eps_index);
}

// Candidate set Cand_A(x, M) for every observation: one candidate per
// (observation, spec, epsilon), in that nesting order.
inline std::vector<AttackCandidate> run_attack_set(const Predictor& p, const Dataset& ds,
                                                   std::span<const AttackSpec> specs, const AttackContext& ctx) {
  if (specs.empty()) throw ConfigError("at least one attack is required");
  for (const auto& s : specs) s.validate();
  if (!ds.empty() && ds.dim() != p.dim()) throw DimensionError(p.dim(), ds.dim());

  std::vector<AttackCandidate> out;
  out.reserve(ds.size() * attack_count(specs));
  for (const auto& x : ds.observations()) {
    for (const auto& spec : specs) {
      for (std::size_t e = 0; e < spec.epsilon_grid.size(); ++e) {
        const double eps = spec.epsilon_grid[e];
        const std::string where = "observation '" + x.id + "', attack " + to_string(spec.name) + " eps=" +
                                  std::to_string(eps);
        out.push_back(detail::with_context(where, [&] {
          switch (spec.name) {
            case AttackName::fgsm: return fgsm(p, x, eps, ctx);
            case AttackName::pgd: return pgd(p, x, eps, spec.steps, spec.step_size, ctx);
            case AttackName::random:
              return random_attack(p, x, eps, spec.steps, random_attack_seed(spec.seed, x.id, e), ctx);
          }
          throw ConfigError("unknown attack");
        }));
      }
    }
  }
  return out;
}

namespace detail {

inline double eps_of(const AttackCandidate& c) {
  auto it = c.attack_params.find("eps");
  return it == c.attack_params.end() ? 0.0 : it->second;
}

// Total order used to pick among successful candidates.
inline bool candidate_before(const AttackCandidate& a, const AttackCandidate& b) {
  return std::forward_as_tuple(a.distance, a.attack_name, eps_of(a), a.attack_params, a.perturbed_features) <
         std::forward_as_tuple(b.distance, b.attack_name, eps_of(b), b.attack_params, b.perturbed_features);
}

}  // namespace detail

struct ReducedOutcome {
  AttackOutcomeSet outcomes;
  // Per record, index into the candidate list of the witnessing candidate.
  std::vector<std::optional<std::size_t>> witnesses;
};

// Attack strategy: per observation, the smallest successful candidate.
inline ReducedOutcome attack_strategy_reduce_with_witnesses(std::span<const AttackCandidate> candidates,
                                                            std::span<const std::string> observation_ids,
                                                            const std::string& model_id, Metric metric) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < observation_ids.size(); ++i) {
    if (!index.emplace(observation_ids[i], i).second) {
      throw ConfigError("duplicate observation id '" + observation_ids[i] + "'");
    }
  }
  std::vector<std::optional<std::size_t>> best(observation_ids.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto& c = candidates[k];
    auto it = index.find(c.observation_id);
    if (it == index.end()) throw ConfigError("candidate references unknown observation '" + c.observation_id + "'");
    if (!c.success) continue;
    if (!(c.distance > 0.0) || !std::isfinite(c.distance)) {
      throw ConfigError("successful candidate for '" + c.observation_id + "' has non-positive distance");
    }
    auto& slot = best[it->second];
    if (!slot || detail::candidate_before(c, candidates[*slot])) slot = k;
  }
  std::vector<PerturbationRecord> records;
  records.reserve(observation_ids.size());
  for (std::size_t i = 0; i < observation_ids.size(); ++i) {
    records.push_back({observation_ids[i], model_id,
                       best[i] ? PerturbationSize::finite(candidates[*best[i]].distance)
                               : PerturbationSize::infinite()});
  }
  return {AttackOutcomeSet(model_id, metric, std::move(records)), std::move(best)};
}

inline std::vector<std::string> observation_ids(const Dataset& ds) {
  std::vector<std::string> ids;
  ids.reserve(ds.size());
  for (const auto& o : ds.observations()) ids.push_back(o.id);
  return ids;
}

inline AttackOutcomeSet attack_strategy_reduce(std::span<const AttackCandidate> candidates, const Dataset& ds,
                                               const std::string& model_id, Metric metric) {
  const auto ids = observation_ids(ds);
  return attack_strategy_reduce_with_witnesses(candidates, ids, model_id, metric).outcomes;
}

// Keeps observations that every given model classifies correctly.
inline Dataset filter_initially_correct(const Dataset& ds, std::span<const Predictor> models) {
  std::vector<Observation> kept;
  for (const auto& o : ds.observations()) {
    bool ok = true;
    for (const auto& m : models) ok = ok && m.predict(o.features) == o.label;
    if (ok) kept.push_back(o);
  }
  return Dataset(std::move(kept), ds.num_classes(), ds.dim());
}

}  // namespace advrisk
