// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "gdu/errors.hpp"
#include "gdu/optim.hpp"
#include "gdu/tasks/adding.hpp"

using namespace gdu;

namespace {

Model tiny_model(Rng& rng, CellKind kind = CellKind::gdu) {
  CellConfig cfg;
  cfg.kind = kind;
  cfg.input_size = 2;
  cfg.state_size = 6;
  if (kind == CellKind::gdu) cfg.groups = GroupSpec::uniform(3, 2, 1.0);
  return init_model(cfg, 1, rng);
}

Gradients zero_grads_like(const Model& m) { return zero_gradients(m, 1); }

std::vector<double> flatten(const Model& m) {
  std::vector<double> out;
  visit_params(m.cell, m.out, [&](const double* p, std::size_t n) {
    out.insert(out.end(), p, p + n);
  });
  return out;
}

// independent scalar transcription of the update rule
struct ScalarAdam {
  double m = 0.0, v = 0.0;
  long long t = 0;
  double step(double theta, double g, const AdamConfig& cfg) {
    ++t;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    const double mhat = m / (1.0 - std::pow(cfg.beta1, static_cast<double>(t)));
    const double vhat = v / (1.0 - std::pow(cfg.beta2, static_cast<double>(t)));
    return theta - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
};

}  // namespace

TEST_CASE("adam: zero gradient leaves parameters unchanged, advances t") {
  Rng rng(1);
  Model m = tiny_model(rng);
  AdamState state = init_adam(m, {});
  const auto before = flatten(m);
  adam_step(m, zero_grads_like(m), state);
  CHECK(flatten(m) == before);
  CHECK(state.t == 1);
}

TEST_CASE("adam: first step with constant gradient is close to -lr * sign(g)") {
  Rng rng(2);
  Model m = tiny_model(rng);
  AdamState state = init_adam(m, {});
  Gradients g = zero_grads_like(m);
  g.out.b[0] = 0.37;  // one live coordinate
  const double theta0 = m.out.b[0];
  adam_step(m, g, state);
  // first-step update: -lr * g / (|g| + eps*sqrt(corr)) ~= -lr * sign(g)
  CHECK(m.out.b[0] == doctest::Approx(theta0 - 0.001).epsilon(1e-4));
}

TEST_CASE("adam matches an independent scalar transcription on random tensors") {
  Rng rng(3);
  Model m = tiny_model(rng, CellKind::lstm);
  AdamState state = init_adam(m, {});
  Model shadow = m;

  std::vector<ScalarAdam> scalar(flatten(m).size());
  for (int iter = 0; iter < 25; ++iter) {
    // random gradient tensor, same canonical order as the optimizer
    Gradients g = zero_grads_like(m);
    std::vector<double> gflat;
    visit_params_mut(g.cell, g.out, [&](double* p, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) {
        p[i] = rng.uniform(-2.0, 2.0);
        gflat.push_back(p[i]);
      }
    });
    adam_step(m, g, state);

    auto sflat = flatten(shadow);
    for (std::size_t i = 0; i < sflat.size(); ++i)
      sflat[i] = scalar[i].step(sflat[i], gflat[i], state.cfg);
    std::size_t cursor = 0;
    visit_params(shadow, [&](double* p, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) p[i] = sflat[cursor++];
    });

    const auto got = flatten(m);
    const auto want = flatten(shadow);
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("adam drives a quadratic toward the origin") {
  // minimize 0.5 x^2, gradient x, carried in a single live parameter slot
  Rng rng(4);
  Model m = tiny_model(rng);
  AdamConfig cfg;
  cfg.lr = 0.1;
  AdamState state = init_adam(m, cfg);
  m.out.b[0] = 5.0;
  double worst_after_burn_in = 0.0;
  for (int iter = 0; iter < 100; ++iter) {
    Gradients g = zero_grads_like(m);
    g.out.b[0] = m.out.b[0];
    adam_step(m, g, state);
    if (iter >= 60) worst_after_burn_in = std::max(worst_after_burn_in, std::abs(m.out.b[0]));
  }
  CHECK(std::abs(m.out.b[0]) < 1.0);
  CHECK(worst_after_burn_in < 2.0);
}

TEST_CASE("adam raises on non-finite updates") {
  Rng rng(5);
  Model m = tiny_model(rng);
  AdamState state = init_adam(m, {});
  Gradients g = zero_grads_like(m);
  g.out.b[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(adam_step(m, g, state), NumericFault);
}

TEST_CASE("train: max_steps = 0 returns initial params and empty metrics") {
  tasks::AddingTask task(20, 10, 7);
  Rng rng(6);
  CellConfig cfg;
  cfg.kind = CellKind::gdu;
  cfg.input_size = 2;
  cfg.state_size = 4;
  cfg.groups = GroupSpec::uniform(2, 2, 1.0);
  Model m = init_model(cfg, 1, rng);
  const auto before = flatten(m);

  TrainConfig tc;
  tc.max_steps = 0;
  tc.batch_size = 4;
  const TrainResult r = train(std::move(m), task, tc);
  CHECK(r.metrics.empty());
  CHECK_FALSE(r.stopped_at.has_value());
  CHECK(flatten(r.model) == before);
}

TEST_CASE("train: bit-identical metrics for identical seeds") {
  tasks::AddingTask task(16, 12, 7);
  auto run = [&task] {
    Rng rng(88);
    CellConfig cfg;
    cfg.kind = CellKind::gru;
    cfg.input_size = 2;
    cfg.state_size = 5;
    Model m = init_model(cfg, 1, rng);
    TrainConfig tc;
    tc.max_steps = 30;
    tc.eval_every = 10;
    tc.batch_size = 4;
    tc.seed = 123;
    return train(std::move(m), task, tc);
  };
  const TrainResult a = run();
  const TrainResult b = run();
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    CHECK(a.metrics[i].step == b.metrics[i].step);
    CHECK(a.metrics[i].train_loss == b.metrics[i].train_loss);
    CHECK(a.metrics[i].test_metric == b.metrics[i].test_metric);
  }
  CHECK(flatten(a.model) == flatten(b.model));
}

TEST_CASE("train: mse stop rule fires and evaluation does not mutate the model") {
  // L=4 is learnable within a few hundred steps at this scale
  tasks::AddingTask task(4, 30, 7);
  Rng rng(10);
  CellConfig cfg;
  cfg.kind = CellKind::gru;
  cfg.input_size = 2;
  cfg.state_size = 12;
  Model m = init_model(cfg, 1, rng);

  TrainConfig tc;
  tc.max_steps = 4000;
  tc.eval_every = 50;
  tc.batch_size = 20;
  tc.stop = StopRule::mse_below;
  tc.stop_threshold = 0.01;
  tc.seed = 5;
  const TrainResult r = train(std::move(m), task, tc);
  REQUIRE(r.stopped_at.has_value());
  CHECK(r.metrics.back().test_metric < 0.01);

  // evaluate twice: same result, parameters untouched
  const auto before = flatten(r.model);
  const EvalResult e1 = task.evaluate(r.model);
  const EvalResult e2 = task.evaluate(r.model);
  CHECK(e1.metric == e2.metric);
  CHECK(flatten(r.model) == before);
}

TEST_CASE("train: numeric fault persists the last evaluated checkpoint") {
  tasks::AddingTask task(8, 6, 7);
  Rng rng(11);
  CellConfig cfg;
  cfg.kind = CellKind::srn;
  cfg.input_size = 2;
  cfg.state_size = 4;
  Model m = init_model(cfg, 1, rng);

  TrainConfig tc;
  tc.max_steps = 50;
  tc.eval_every = 5;
  tc.batch_size = 2;
  tc.seed = 3;
  tc.adam.lr = 1e300;  // guaranteed blow-up
  tc.fault_checkpoint_dir = "/tmp/gdu_fault_test";
  CHECK_THROWS_AS(train(std::move(m), task, tc), NumericFault);
  const Model saved = load_checkpoint("/tmp/gdu_fault_test/last_good.ckpt");
  CHECK(saved.config.state_size == 4);
}
