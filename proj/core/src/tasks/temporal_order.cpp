// SPDX-License-Identifier: Apache-2.0

#include "gdu/tasks/temporal_order.hpp"

#include <algorithm>

#include "gdu/errors.hpp"

namespace gdu::tasks {

std::vector<TemporalOrderInstance> gen_temporal_order(Rng& rng, std::size_t length,
                                                      std::size_t n) {
  // windows [floor(k*L/3), floor(k*L/3)+10] must fit and stay disjoint
  if (length < 33) throw ConfigError("gen_temporal_order: length must be >= 33");
  std::vector<TemporalOrderInstance> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    TemporalOrderInstance inst;
    inst.symbols.resize(length);
    for (auto& s : inst.symbols) s = static_cast<std::uint8_t>(rng.next_below(4));
    int label = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      const std::size_t lo = k * length / 3;
      const std::size_t pos = lo + rng.next_below(11);
      const bool is_y = rng.next_below(2) == 1;
      inst.symbols[pos] = static_cast<std::uint8_t>(is_y ? 5 : 4);
      label = (label << 1) | (is_y ? 1 : 0);
    }
    inst.label = label;
    out.push_back(std::move(inst));
  }
  return out;
}

Batch temporal_order_batch(const std::vector<TemporalOrderInstance>& instances) {
  if (instances.empty()) throw ConfigError("temporal_order_batch: empty instance list");
  const std::size_t b = instances.size();
  const std::size_t t_len = instances[0].symbols.size();
  Batch batch;
  batch.loss = LossKind::softmax_ce_final;
  batch.inputs.assign(t_len, Matrix(b, kTemporalOrderInputSize, 0.0));
  batch.final_classes.resize(b);
  for (std::size_t row = 0; row < b; ++row) {
    const auto& inst = instances[row];
    if (inst.symbols.size() != t_len)
      throw ConfigError("temporal_order_batch: mixed sequence lengths");
    for (std::size_t t = 0; t < t_len; ++t) batch.inputs[t](row, inst.symbols[t]) = 1.0;
    batch.final_classes[row] = inst.label;
  }
  return batch;
}

TemporalOrderTask::TemporalOrderTask(std::size_t length, std::size_t test_n,
                                     std::uint64_t data_seed)
    : length_(length) {
  Rng rng(data_seed);
  test_ = gen_temporal_order(rng, length, test_n);
}

Batch TemporalOrderTask::train_batch(Rng& rng, long long, std::size_t batch_size) const {
  return temporal_order_batch(gen_temporal_order(rng, length_, batch_size));
}

EvalResult TemporalOrderTask::evaluate(const Model& model) const {
  const std::size_t chunk = 100;
  std::size_t correct = 0;
  for (std::size_t at = 0; at < test_.size(); at += chunk) {
    const std::size_t n = std::min(chunk, test_.size() - at);
    const std::vector<TemporalOrderInstance> slice(test_.begin() + at,
                                                   test_.begin() + at + n);
    const Batch batch = temporal_order_batch(slice);
    const Matrix logits = forward_final_logits(model, batch.inputs);
    for (std::size_t row = 0; row < n; ++row) {
      const double* lrow = logits.row(row);
      const std::size_t argmax =
          std::max_element(lrow, lrow + kTemporalOrderClasses) - lrow;
      if (static_cast<int>(argmax) == slice[row].label) ++correct;
    }
  }
  EvalResult ev;
  ev.metric = static_cast<double>(correct) / static_cast<double>(test_.size());
  return ev;
}

Batch TemporalOrderTask::probe_batch(std::size_t rows) const {
  const std::size_t n = std::min(rows, test_.size());
  return temporal_order_batch(
      std::vector<TemporalOrderInstance>(test_.begin(), test_.begin() + n));
}

}  // namespace gdu::tasks
