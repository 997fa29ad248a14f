// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gdu/model.hpp"

namespace gdu {

enum class LossKind { mse_final, softmax_ce_final, softmax_ce_per_step };

// A batch of B equally-long sequences (shorter ones right-padded, with the
// padded steps masked out of the loss via step_classes = -1).
struct Batch {
  std::vector<Matrix> inputs;  // T entries, each B x D_in
  LossKind loss = LossKind::mse_final;

  Matrix final_targets;                        // B x n_out     (mse_final)
  std::vector<int> final_classes;              // B             (softmax_ce_final)
  std::vector<std::vector<int>> step_classes;  // T x B, -1 = masked (per_step)

  // Optional initial state; zeros when empty.
  Matrix initial_s;
  Matrix initial_h;

  std::size_t steps() const { return inputs.size(); }
  std::size_t batch_size() const { return inputs.empty() ? 0 : inputs[0].rows; }
};

// Cached activations of one unrolled forward pass, enough to reproduce the
// exact backward pass. logits holds one entry (final step) for final-loss
// kinds and T entries for per-step loss.
struct UnrollTape {
  std::vector<BatchTrace> traces;
  std::vector<Matrix> logits;
  Matrix final_s, final_h;
  double loss = 0.0;
};

// Loss averaged over the batch; per-sequence losses optionally returned.
// Throws NumericFault (with the step index) if any state or the loss goes
// non-finite.
double forward(const Model& model, const Batch& batch, UnrollTape* tape = nullptr,
               Vector* per_sequence_loss = nullptr);

// Readout-only passes used by evaluation.
Matrix forward_final_logits(const Model& model, const std::vector<Matrix>& inputs);
std::vector<Matrix> forward_all_logits(const Model& model,
                                       const std::vector<Matrix>& inputs);

struct Gradients {
  CellParams cell;
  OutputLayer out;
  Matrix initial_s;  // B x K: gradient w.r.t. the initial state
  Matrix initial_h;
};

Gradients zero_gradients(const Model& model, std::size_t batch_size);

// Norms of the error signal that reaches each time step,
// norms[t] = || dL/d s_{t+1} ||  (Frobenius over the batch; for lstm the
// concatenation of the s and h adjoints). Length T.
struct NormProbe {
  std::vector<double> norms;
};

// Exact gradients of the tape's loss w.r.t. every parameter and the initial
// state. Deterministic: accumulation order is fixed.
Gradients backward(const Model& model, const Batch& batch, const UnrollTape& tape,
                   NormProbe* probe = nullptr);

// Central finite-difference Jacobian of one step w.r.t. the previous state.
// K x K; for lstm 2K x 2K over the concatenated (s, h) with s first.
// Element (k, r) is d new_k / d prev_r.
Matrix transition_jacobian_fd(const CellConfig& cfg, const CellParams& params,
                              const Vector& x, const CellState& state,
                              double eps = 1e-5);

// Largest singular value by power iteration on J^T J.
double spectral_norm(const Matrix& j, double tol = 1e-8, std::size_t max_iter = 100000);

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

// Central finite differences (step eps) against the analytic backward pass,
// over every parameter and the initial state. Relative error uses
// max(|analytic|, |fd|, 1e-8) as denominator.
GradCheckReport gradient_check(const Model& model, const Batch& batch,
                               double eps = 1e-5);

}  // namespace gdu
