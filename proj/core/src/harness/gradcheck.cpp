// SPDX-License-Identifier: Apache-2.0

#include "gdu/harness/gradcheck.hpp"

#include "gdu/errors.hpp"

namespace gdu::harness {

namespace {

GroupSpec gdu_groups(std::size_t k, bool second_branch) {
  // two groups covering k units; second_branch pushes one delta above 1
  GroupSpec g;
  const std::size_t first = k / 2;
  g.sizes = {first, k - first};
  if (second_branch)
    g.deltas = {std::min(2.5, static_cast<double>(first) - 0.5), 1.0};
  else
    g.deltas = {1.0, 0.5};
  return g;
}

Batch random_batch(Rng& rng, LossKind loss, std::size_t t_len, std::size_t b,
                   std::size_t d_in, std::size_t k, std::size_t n_out, bool lstm) {
  Batch batch;
  batch.loss = loss;
  batch.inputs.assign(t_len, Matrix(b, d_in));
  for (auto& x : batch.inputs)
    for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
  switch (loss) {
    case LossKind::mse_final:
      batch.final_targets = Matrix(b, n_out);
      for (auto& v : batch.final_targets.data) v = rng.uniform(-1.0, 1.0);
      break;
    case LossKind::softmax_ce_final:
      batch.final_classes.resize(b);
      for (auto& c : batch.final_classes)
        c = static_cast<int>(rng.next_below(n_out));
      break;
    case LossKind::softmax_ce_per_step:
      batch.step_classes.assign(t_len, std::vector<int>(b));
      for (auto& row : batch.step_classes)
        for (auto& c : row) {
          // roughly one step in five masked out
          c = rng.next_below(5) == 0 ? -1 : static_cast<int>(rng.next_below(n_out));
        }
      // keep at least one target per sequence
      for (std::size_t col = 0; col < b; ++col) batch.step_classes[0][col] =
          static_cast<int>(rng.next_below(n_out));
      break;
  }
  batch.initial_s = Matrix(b, k);
  for (auto& v : batch.initial_s.data) v = rng.uniform(-0.5, 0.5);
  if (lstm) {
    batch.initial_h = Matrix(b, k);
    for (auto& v : batch.initial_h.data) v = rng.uniform(-0.5, 0.5);
  }
  return batch;
}

}  // namespace

GradCheckSummary grad_check_kind(CellKind kind, std::size_t instances,
                                 std::size_t t_len, std::size_t state_size,
                                 std::size_t input_size, std::uint64_t seed,
                                 double eps) {
  GradCheckSummary summary;
  summary.kind = kind;
  Rng rng(seed);
  constexpr LossKind kLosses[3] = {LossKind::mse_final, LossKind::softmax_ce_final,
                                   LossKind::softmax_ce_per_step};
  for (std::size_t i = 0; i < instances; ++i) {
    CellConfig cfg;
    cfg.kind = kind;
    cfg.input_size = input_size;
    cfg.state_size = state_size;
    if (kind == CellKind::gdu) cfg.groups = gdu_groups(state_size, i % 2 == 1);

    Rng model_rng = rng.fork();
    Model model = init_model(cfg, 3, model_rng);
    // nonzero biases so their gradients see a generic point
    for (auto& gate : model.cell.gates)
      for (auto& bias : gate.b) bias = rng.uniform(-0.3, 0.3);

    const LossKind loss = kLosses[i % 3];
    const Batch batch = random_batch(rng, loss, t_len, 2, input_size, state_size,
                                     model.output_size, kind == CellKind::lstm);
    const GradCheckReport report = gradient_check(model, batch, eps);
    summary.instances += 1;
    if (report.max_rel_err > summary.max_rel_err) {
      summary.max_rel_err = report.max_rel_err;
      summary.worst = report.worst;
    }
  }
  return summary;
}

}  // namespace gdu::harness
