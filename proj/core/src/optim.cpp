// SPDX-License-Identifier: Apache-2.0

#include "gdu/optim.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>

#include "gdu/errors.hpp"

namespace gdu {

const char* to_string(StopRule rule) {
  switch (rule) {
    case StopRule::none: return "none";
    case StopRule::mse_below: return "mse_below";
    case StopRule::accuracy_equals_one: return "accuracy_equals_one";
    case StopRule::sc_and_lc_equal_one: return "sc_and_lc_equal_one";
  }
  return "?";
}

AdamState init_adam(const Model& model, const AdamConfig& cfg) {
  AdamState st;
  st.cfg = cfg;
  std::size_t total = 0;
  visit_params(model.cell, model.out,
               [&](const double*, std::size_t n) { total += n; });
  st.m.assign(total, 0.0);
  st.v.assign(total, 0.0);
  return st;
}

void adam_step(Model& model, const Gradients& grads, AdamState& state) {
  state.t += 1;
  const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  const double lr = state.cfg.lr, eps = state.cfg.eps;

  // gather gradient views in the same canonical order as the model params
  std::vector<std::pair<const double*, std::size_t>> gviews;
  visit_params(grads.cell, grads.out, [&](const double* p, std::size_t n) {
    gviews.emplace_back(p, n);
  });

  std::size_t cursor = 0, view = 0;
  bool fault = false;
  visit_params(model, [&](double* p, std::size_t n) {
    const auto [gp, gn] = gviews[view++];
    if (gn != n) throw ConfigError("adam_step: gradient shape mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      const double g = gp[i];
      double& m = state.m[cursor + i];
      double& v = state.v[cursor + i];
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g * g;
      const double mhat = m / corr1;
      const double vhat = v / corr2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      if (!std::isfinite(p[i])) fault = true;
    }
    cursor += n;
  });
  if (fault) throw NumericFault("adam_step: non-finite parameter update");
}

TrainResult train(Model model, const Task& task, const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (model.config.input_size != task.input_size() ||
      model.output_size != task.output_size())
    throw ConfigError("train: model dimensions do not match task " + task.name());

  TrainResult result;
  result.metrics.reserve(64);

  Rng rng(cfg.seed);
  AdamState adam = init_adam(model, cfg.adam);
  Model last_evaluated = model;

  const auto t0 = std::chrono::steady_clock::now();
  auto wall_ms = [&t0] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                     t0)
        .count();
  };

  double train_loss = 0.0;
  try {
    for (long long step = 1; step <= cfg.max_steps; ++step) {
      const Batch batch = task.train_batch(rng, step - 1, cfg.batch_size);
      UnrollTape tape;
      train_loss = forward(model, batch, &tape);
      const Gradients grads = backward(model, batch, tape);
      adam_step(model, grads, adam);

      if (cfg.eval_every > 0 && step % cfg.eval_every == 0) {
        const EvalResult ev = task.evaluate(model);
        last_evaluated = model;
        MetricsRecord rec;
        rec.step = step;
        rec.train_loss = train_loss;
        rec.test_metric = ev.metric;
        rec.sc = ev.sc;
        rec.lc = ev.lc;
        rec.wall_ms = wall_ms();
        rec.seed = cfg.seed;
        result.metrics.push_back(rec);

        if (!result.first_sc_step && ev.sc == 1.0) result.first_sc_step = step;
        if (!result.first_lc_step && ev.lc == 1.0) result.first_lc_step = step;

        bool stop = false;
        switch (cfg.stop) {
          case StopRule::none: break;
          case StopRule::mse_below: stop = ev.metric < cfg.stop_threshold; break;
          case StopRule::accuracy_equals_one: stop = ev.metric == 1.0; break;
          case StopRule::sc_and_lc_equal_one: stop = ev.sc == 1.0 && ev.lc == 1.0; break;
        }
        if (stop) {
          result.stopped_at = step;
          break;
        }
      }
    }
  } catch (const NumericFault&) {
    if (!cfg.fault_checkpoint_dir.empty()) {
      std::filesystem::create_directories(cfg.fault_checkpoint_dir);
      save_checkpoint(cfg.fault_checkpoint_dir + "/last_good.ckpt", last_evaluated);
    }
    throw;
  }

  result.model = std::move(model);
  return result;
}

}  // namespace gdu
