// SPDX-License-Identifier: Apache-2.0

#include "gdu/tasks/adding.hpp"

#include <algorithm>

#include "gdu/errors.hpp"

namespace gdu::tasks {

std::vector<AddingInstance> gen_adding(Rng& rng, std::size_t length, std::size_t n) {
  if (length < 2) throw ConfigError("gen_adding: length must be >= 2");
  std::vector<AddingInstance> out;
  out.reserve(n);
  const std::size_t half = length / 2;
  for (std::size_t i = 0; i < n; ++i) {
    AddingInstance inst;
    inst.values.resize(length);
    for (auto& v : inst.values) v = rng.next_double();
    inst.first_marker = rng.next_below(half);
    inst.second_marker = half + rng.next_below(length - half);
    inst.target = inst.values[inst.first_marker] + inst.values[inst.second_marker];
    out.push_back(std::move(inst));
  }
  return out;
}

Batch adding_batch(const std::vector<AddingInstance>& instances) {
  if (instances.empty()) throw ConfigError("adding_batch: empty instance list");
  const std::size_t b = instances.size();
  const std::size_t t_len = instances[0].values.size();
  Batch batch;
  batch.loss = LossKind::mse_final;
  batch.inputs.assign(t_len, Matrix(b, 2, 0.0));
  batch.final_targets = Matrix(b, 1, 0.0);
  for (std::size_t row = 0; row < b; ++row) {
    const AddingInstance& inst = instances[row];
    if (inst.values.size() != t_len)
      throw ConfigError("adding_batch: mixed sequence lengths");
    for (std::size_t t = 0; t < t_len; ++t) batch.inputs[t](row, 0) = inst.values[t];
    batch.inputs[inst.first_marker](row, 1) = 1.0;
    batch.inputs[inst.second_marker](row, 1) = 1.0;
    batch.final_targets(row, 0) = inst.target;
  }
  return batch;
}

AddingTask::AddingTask(std::size_t length, std::size_t test_n, std::uint64_t data_seed)
    : length_(length) {
  Rng rng(data_seed);
  test_ = gen_adding(rng, length, test_n);
}

Batch AddingTask::train_batch(Rng& rng, long long, std::size_t batch_size) const {
  return adding_batch(gen_adding(rng, length_, batch_size));
}

EvalResult AddingTask::evaluate(const Model& model) const {
  // chunked so L = 10000 test sets stay within memory
  const std::size_t chunk = 100;
  double total = 0.0;
  for (std::size_t at = 0; at < test_.size(); at += chunk) {
    const std::size_t n = std::min(chunk, test_.size() - at);
    const std::vector<AddingInstance> slice(test_.begin() + at, test_.begin() + at + n);
    const Batch batch = adding_batch(slice);
    Vector per_seq;
    forward(model, batch, nullptr, &per_seq);
    for (double v : per_seq) total += v;
  }
  EvalResult ev;
  ev.metric = total / static_cast<double>(test_.size());
  return ev;
}

Batch AddingTask::probe_batch(std::size_t rows) const {
  const std::size_t n = std::min(rows, test_.size());
  return adding_batch(std::vector<AddingInstance>(test_.begin(), test_.begin() + n));
}

}  // namespace gdu::tasks
