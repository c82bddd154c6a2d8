#include <advrisk/attacks.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace advrisk;

namespace {

// 1-D two-class model with logits [0, x]: class 1 iff x > 0.
Predictor flip_model() { return Predictor("flip", Architecture::linear(), 1, 2, Vector{0.0, 1.0, 0.0, 0.0}); }

const Observation kFlipPoint{"p", {-0.1}, 0};

std::vector<double> k255_grid() {
  std::vector<double> g;
  for (int k = 1; k <= 8; ++k) g.push_back(k / 255.0);
  return g;
}

struct BlobScenario {
  Dataset ds;
  Predictor model;
};

const BlobScenario& blobs() {
  static const BlobScenario s = [] {
    auto ds = generate_dataset({SyntheticKind::gaussian_blobs, 200, 2, 2, 0.8, 21});
    auto model = train(ds, Architecture::mlp({16}, Activation::tanh), {0.1, 60, 16, 1e-4, 3}, "blob-mlp");
    return BlobScenario{std::move(ds), std::move(model)};
  }();
  return s;
}

}  // namespace

TEST(FgsmTest, ZeroGradientLeavesInputUnchanged) {
  Predictor zero("z", Architecture::linear(), 2, 2, Vector(6, 0.0));
  const Observation x{"a", {0.3, -0.2}, 0};
  const auto c = fgsm(zero, x, 0.5, {Metric::linf, SuccessCriterion::prediction_change, {}});
  EXPECT_EQ(c.perturbed_features, x.features);
  EXPECT_FALSE(c.success);
  EXPECT_EQ(c.distance, 0.0);
}

TEST(FgsmTest, OneDimensionalFlip) {
  for (auto criterion : {SuccessCriterion::prediction_change, SuccessCriterion::ground_truth_disagreement}) {
    const auto c = fgsm(flip_model(), kFlipPoint, 0.2, {Metric::linf, criterion, {}});
    ASSERT_EQ(c.perturbed_features.size(), 1u);
    EXPECT_NEAR(c.perturbed_features[0], 0.1, 1e-15);
    EXPECT_TRUE(c.success);
    EXPECT_EQ(c.attack_name, "fgsm");
    EXPECT_EQ(c.attack_params.at("eps"), 0.2);
  }
}

TEST(FgsmTest, LinfBound) {
  const auto& s = blobs();
  for (const auto& x : s.ds.observations()) {
    const auto c = fgsm(s.model, x, 0.05, {});
    EXPECT_LE(distance(x.features, c.perturbed_features, Metric::linf), 0.05 + 1e-15);
  }
}

TEST(FgsmTest, BoxClip) {
  AttackContext ctx{Metric::linf, SuccessCriterion::prediction_change, Box{-0.05, 1.0}};
  const auto c = fgsm(flip_model(), Observation{"p", {-0.01}, 0}, 0.5, ctx);
  EXPECT_DOUBLE_EQ(c.perturbed_features[0], 0.49);
  ctx.clip = Box{-1.0, 0.0};
  const auto d = fgsm(flip_model(), Observation{"p", {-0.01}, 0}, 0.5, ctx);
  EXPECT_EQ(d.perturbed_features[0], 0.0);
  EXPECT_FALSE(d.success);  // logits tie at 0, argmax picks class 0
}

TEST(PgdTest, SingleLargeStepEqualsFgsm) {
  const auto& s = blobs();
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& x = s.ds[i];
    const auto a = fgsm(s.model, x, 0.1, {});
    const auto b = pgd(s.model, x, 0.1, 1, 0.25, {});
    EXPECT_EQ(a.perturbed_features, b.perturbed_features);
    EXPECT_EQ(a.success, b.success);
  }
}

TEST(PgdTest, IteratesStayInBall) {
  const auto& s = blobs();
  const double eps = 0.07;
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t steps = 1; steps <= 20; ++steps) {
      // Every prefix run with the same step size reproduces one iterate.
      const auto c = pgd(s.model, s.ds[i], eps, steps, 0.02, {});
      EXPECT_LE(distance(s.ds[i].features, c.perturbed_features, Metric::linf), eps + 1e-12);
    }
  }
}

TEST(PgdTest, AutoStepSize) {
  const auto c = pgd(flip_model(), kFlipPoint, 0.2, 10, std::nullopt, {});
  EXPECT_DOUBLE_EQ(c.attack_params.at("step_size"), 2.5 * 0.2 / 10);
}

TEST(PgdTest, DominatesFgsmOnBlobs) {
  const auto& s = blobs();
  for (double eps : k255_grid()) {
    int fg = 0, pg = 0;
    for (const auto& x : s.ds.observations()) {
      fg += fgsm(s.model, x, eps * 20, {}).success;
      pg += pgd(s.model, x, eps * 20, 20, std::nullopt, {}).success;
    }
    EXPECT_GE(pg, fg) << "eps=" << eps * 20;
  }
}

TEST(RandomAttackTest, ZeroStepsIsUnsuccessful) {
  const auto c = random_attack(flip_model(), kFlipPoint, 0.2, 0, 1, {});
  EXPECT_FALSE(c.success);
  EXPECT_EQ(c.perturbed_features, kFlipPoint.features);
}

TEST(RandomAttackTest, Deterministic) {
  const auto& s = blobs();
  EXPECT_EQ(random_attack(s.model, s.ds[3], 0.5, 50, 123, {}), random_attack(s.model, s.ds[3], 0.5, 50, 123, {}));
}

TEST(RandomAttackTest, FlipNeedsToCrossBoundary) {
  for (Metric m : {Metric::linf, Metric::l2}) {
    const auto c = random_attack(flip_model(), kFlipPoint, 0.2, 1000, 9, {m, SuccessCriterion::prediction_change, {}});
    EXPECT_TRUE(c.success);
    EXPECT_GE(c.distance, 0.1);
    EXPECT_LE(c.distance, 0.2);
  }
}

TEST(RunAttackSetTest, FullSizeAttackSet) {
  const auto& s = blobs();
  const std::vector<AttackSpec> specs{{AttackName::fgsm, k255_grid(), 1, {}, 0},
                                      {AttackName::pgd, k255_grid(), 5, {}, 0},
                                      {AttackName::random, k255_grid(), 5, {}, 4}};
  EXPECT_EQ(attack_count(specs), 24u);
  const auto c = run_attack_set(s.model, s.ds, specs, {});
  EXPECT_EQ(c.size(), 4800u);
}

TEST(RunAttackSetTest, EmptyDatasetAndEmptySpecs) {
  const std::vector<AttackSpec> specs{{AttackName::fgsm, {0.1}, 1, {}, 0}};
  EXPECT_TRUE(run_attack_set(flip_model(), Dataset({}, 2, 1), specs, {}).empty());
  EXPECT_THROW(run_attack_set(flip_model(), Dataset({}, 2, 1), std::vector<AttackSpec>{}, {}), ConfigError);
}

TEST(RunAttackSetTest, ConstantClassifierNeverSucceeds) {
  const auto ds = generate_dataset({SyntheticKind::gaussian_blobs, 30, 2, 2, 0.5, 1});
  Predictor zero("z", Architecture::linear(), 2, 2, Vector(6, 0.0));
  const std::vector<AttackSpec> specs{{AttackName::fgsm, {0.1, 1.0}, 1, {}, 0},
                                      {AttackName::pgd, {0.1, 1.0}, 5, {}, 0},
                                      {AttackName::random, {0.1, 1.0}, 20, {}, 0}};
  for (const auto& c : run_attack_set(zero, ds, specs, {Metric::linf, SuccessCriterion::prediction_change, {}})) {
    EXPECT_FALSE(c.success);
  }
}

TEST(RunAttackSetTest, SpecValidation) {
  AttackSpec bad{AttackName::pgd, {0.2, 0.1}, 5, {}, 0};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad.epsilon_grid = {};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {AttackName::pgd, {0.1}, 0, {}, 0};
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(RunAttackSetTest, DimensionMismatch) {
  Dataset ds({{"obs-7", {0.0, 0.0}, 0}}, 2, 2);
  const std::vector<AttackSpec> specs{{AttackName::fgsm, {0.1}, 1, {}, 0}};
  EXPECT_THROW(run_attack_set(flip_model(), ds, specs, {}), DimensionError);
}

namespace {

AttackCandidate cand(std::string id, std::string name, double eps, double d, bool ok) {
  return {std::move(id), std::move(name), {{"eps", eps}}, {d}, d, ok};
}

}  // namespace

TEST(ReduceTest, MinimumAndInfinity) {
  const std::vector<std::string> ids{"a", "b"};
  const std::vector<AttackCandidate> c{cand("a", "pgd", 1, 0.3, true), cand("a", "pgd", 2, 0.1, true),
                                       cand("a", "fgsm", 1, 0.2, true), cand("a", "fgsm", 3, 0.05, false),
                                       cand("b", "pgd", 1, 0.1, false)};
  const auto r = attack_strategy_reduce_with_witnesses(c, ids, "m", Metric::linf);
  EXPECT_EQ(r.outcomes.records()[0].d_a, PerturbationSize::finite(0.1));
  EXPECT_EQ(r.outcomes.records()[1].d_a, PerturbationSize::infinite());
  EXPECT_EQ(r.witnesses[0], std::optional<std::size_t>(1));
  EXPECT_FALSE(r.witnesses[1].has_value());
}

TEST(ReduceTest, UnknownObservation) {
  const std::vector<std::string> ids{"a"};
  const std::vector<AttackCandidate> c{cand("zz", "pgd", 1, 0.3, true)};
  EXPECT_THROW(attack_strategy_reduce_with_witnesses(c, ids, "m", Metric::linf), ConfigError);
}

TEST(ReduceTest, TieBreakIndependentOfOrder) {
  const std::vector<std::string> ids{"a"};
  std::vector<AttackCandidate> c{cand("a", "pgd", 0.2, 0.1, true), cand("a", "fgsm", 0.3, 0.1, true),
                                 cand("a", "fgsm", 0.1, 0.1, true), cand("a", "random", 0.1, 0.1, true)};
  std::mt19937 rng(3);
  const auto first = attack_strategy_reduce_with_witnesses(c, ids, "m", Metric::linf);
  const auto winner = c[*first.witnesses[0]];
  EXPECT_EQ(winner.attack_name, "fgsm");
  EXPECT_EQ(winner.attack_params.at("eps"), 0.1);
  for (int t = 0; t < 20; ++t) {
    std::shuffle(c.begin(), c.end(), rng);
    const auto r = attack_strategy_reduce_with_witnesses(c, ids, "m", Metric::linf);
    EXPECT_EQ(c[*r.witnesses[0]], winner);
  }
}

TEST(ReduceTest, WitnessesAndMonotonicityOnBlobs) {
  const auto& s = blobs();
  const auto ids = observation_ids(s.ds);
  std::vector<AttackSpec> specs;
  const std::vector<AttackSpec> all{{AttackName::random, {0.5, 1.0, 2.0}, 30, {}, 8},
                                    {AttackName::fgsm, {0.25, 0.5, 1.0, 2.0}, 1, {}, 0},
                                    {AttackName::pgd, {0.25, 0.5, 1.0, 2.0}, 10, {}, 0}};
  std::optional<AttackOutcomeSet> previous;
  for (const auto& spec : all) {
    specs.push_back(spec);
    const auto c = run_attack_set(s.model, s.ds, specs, {});
    const auto r = attack_strategy_reduce_with_witnesses(c, ids, "m", Metric::linf);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto& d = r.outcomes.records()[i].d_a;
      if (d.is_finite()) {
        ASSERT_TRUE(r.witnesses[i]);
        const auto& w = c[*r.witnesses[i]];
        EXPECT_TRUE(w.success);
        EXPECT_EQ(w.distance, d.value());
        EXPECT_EQ(distance(s.ds[i].features, w.perturbed_features, Metric::linf), d.value());
      }
      if (previous) {
        EXPECT_LE(d, previous->records()[i].d_a);
      }
    }
    previous = r.outcomes;
  }
}

TEST(FilterTest, KeepsObservationsCorrectUnderAllModels) {
  Dataset ds({{"a", {-1.0}, 0}, {"b", {1.0}, 1}, {"c", {1.0}, 0}}, 2, 1);
  const std::vector<Predictor> models{flip_model()};
  const auto kept = filter_initially_correct(ds, models);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].id, "a");
  EXPECT_EQ(kept[1].id, "b");
}
