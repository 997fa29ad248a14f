// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "gdu/task.hpp"

namespace gdu::tasks {

// Symbols 0..5 = {a, b, c, d, X, Y}. Exactly three positions carry X or Y;
// position k (k = 0, 1, 2) falls in [floor(k*L/3), floor(k*L/3) + 10], both
// ends inclusive. The class encodes the X/Y pattern in order: X = 0, Y = 1,
// first symbol is the most significant bit (XXX = 0 ... YYY = 7).
struct TemporalOrderInstance {
  std::vector<std::uint8_t> symbols;
  int label = 0;
};

inline constexpr std::size_t kTemporalOrderInputSize = 6;
inline constexpr std::size_t kTemporalOrderClasses = 8;

std::vector<TemporalOrderInstance> gen_temporal_order(Rng& rng, std::size_t length,
                                                      std::size_t n);

Batch temporal_order_batch(const std::vector<TemporalOrderInstance>& instances);

class TemporalOrderTask final : public Task {
 public:
  TemporalOrderTask(std::size_t length, std::size_t test_n, std::uint64_t data_seed);

  std::string name() const override { return "temporal-order"; }
  std::size_t input_size() const override { return kTemporalOrderInputSize; }
  std::size_t output_size() const override { return kTemporalOrderClasses; }
  LossKind loss_kind() const override { return LossKind::softmax_ce_final; }

  Batch train_batch(Rng& rng, long long step, std::size_t batch_size) const override;
  EvalResult evaluate(const Model& model) const override;  // metric = accuracy
  Batch probe_batch(std::size_t rows) const override;

  const std::vector<TemporalOrderInstance>& test_set() const { return test_; }

 private:
  std::size_t length_;
  std::vector<TemporalOrderInstance> test_;
};

}  // namespace gdu::tasks
