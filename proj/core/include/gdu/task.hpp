// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "gdu/bptt.hpp"

namespace gdu {

struct EvalResult {
  double metric = 0.0;  // headline test metric: MSE or accuracy or symbol rate
  double sc = -1.0;     // sequence criteria where defined (reber); -1 otherwise
  double lc = -1.0;
};

// A benchmark: deterministic data generation plus a fixed test set. All
// randomness flows through explicit seeds, so a (seed, params) pair
// regenerates byte-identical data.
class Task {
 public:
  virtual ~Task() = default;

  virtual std::string name() const = 0;
  virtual std::size_t input_size() const = 0;
  virtual std::size_t output_size() const = 0;
  virtual LossKind loss_kind() const = 0;

  // Training batch for a given step. Stochastic tasks draw from rng;
  // epoch-based tasks slice a deterministic shuffle by step index.
  virtual Batch train_batch(Rng& rng, long long step, std::size_t batch_size) const = 0;

  // Evaluate on the fixed test set. Never mutates the model.
  virtual EvalResult evaluate(const Model& model) const = 0;

  // Fixed batch (first test rows) for gradient-flow diagnostics.
  virtual Batch probe_batch(std::size_t rows) const = 0;
};

}  // namespace gdu
