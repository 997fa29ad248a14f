// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gdu/bptt.hpp"
#include "gdu/task.hpp"

namespace gdu {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moments are stored flattened in the canonical visit_params order.
struct AdamState {
  AdamConfig cfg;
  std::vector<double> m;
  std::vector<double> v;
  long long t = 0;
};

AdamState init_adam(const Model& model, const AdamConfig& cfg = {});

// theta -= lr * m_hat / (sqrt(v_hat) + eps) with bias-corrected moments.
void adam_step(Model& model, const Gradients& grads, AdamState& state);

enum class StopRule { none, mse_below, accuracy_equals_one, sc_and_lc_equal_one };

const char* to_string(StopRule rule);

struct TrainConfig {
  std::size_t batch_size = 20;
  long long max_steps = 10000;
  long long eval_every = 50;
  StopRule stop = StopRule::none;
  double stop_threshold = 0.002;  // mse_below only
  std::uint64_t seed = 1;
  AdamConfig adam;
  // When set, the most recent evaluated model is saved here as
  // last_good.ckpt if a numeric fault aborts training.
  std::string fault_checkpoint_dir;
};

struct MetricsRecord {
  long long step = 0;
  double train_loss = 0.0;
  double test_metric = 0.0;
  double sc = -1.0;
  double lc = -1.0;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
};

struct TrainResult {
  Model model;
  std::vector<MetricsRecord> metrics;
  std::optional<long long> stopped_at;
  // First evaluation step at which sc (resp. lc) reached 1; reber only.
  std::optional<long long> first_sc_step;
  std::optional<long long> first_lc_step;
};

// Runs until the stop rule fires or max_steps is reached, evaluating on the
// task's fixed test set every eval_every steps. Fully deterministic given
// (seed, config) apart from the wall_ms column.
TrainResult train(Model model, const Task& task, const TrainConfig& cfg);

}  // namespace gdu
