// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "gdu/task.hpp"

namespace gdu::tasks {

// One regression instance: L random values in [0,1], two marked positions
// (first in the first half, second in the second half), target = sum of the
// two marked values.
struct AddingInstance {
  Vector values;
  std::size_t first_marker = 0;
  std::size_t second_marker = 0;
  double target = 0.0;
};

std::vector<AddingInstance> gen_adding(Rng& rng, std::size_t length, std::size_t n);

// Model IO: two inputs per step (value, indicator), one linear output, MSE at
// the final step.
Batch adding_batch(const std::vector<AddingInstance>& instances);

class AddingTask final : public Task {
 public:
  AddingTask(std::size_t length, std::size_t test_n, std::uint64_t data_seed);

  std::string name() const override { return "adding"; }
  std::size_t input_size() const override { return 2; }
  std::size_t output_size() const override { return 1; }
  LossKind loss_kind() const override { return LossKind::mse_final; }

  Batch train_batch(Rng& rng, long long step, std::size_t batch_size) const override;
  EvalResult evaluate(const Model& model) const override;  // metric = test MSE
  Batch probe_batch(std::size_t rows) const override;

  const std::vector<AddingInstance>& test_set() const { return test_; }
  std::size_t length() const { return length_; }

 private:
  std::size_t length_;
  std::vector<AddingInstance> test_;
};

}  // namespace gdu::tasks
