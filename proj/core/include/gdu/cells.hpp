// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gdu/numerics.hpp"

namespace gdu {

enum class CellKind { srn, lstm, gru, ugrnn, gdu };

const char* to_string(CellKind kind);
CellKind cell_kind_from_string(const std::string& name);

// State partition for the grouped distributor: group i holds sizes[i] units
// and distributes an overwrite budget deltas[i], with 0 < deltas[i] < sizes[i]
// (for singleton groups the gate degenerates to the constant deltas[i]).
// Group slices are contiguous in state-index order.
struct GroupSpec {
  std::vector<std::size_t> sizes;
  std::vector<double> deltas;

  std::size_t group_count() const { return sizes.size(); }
  std::size_t total_units() const;
  double delta_sum() const;
  void validate() const;

  static GroupSpec uniform(std::size_t group_size, std::size_t groups, double delta = 1.0);
};

struct CellConfig {
  CellKind kind = CellKind::srn;
  std::size_t input_size = 0;
  std::size_t state_size = 0;
  GroupSpec groups;  // gdu only; must be empty for the other kinds

  void validate() const;
};

// One affine map: pre = x * w + r * u + b with w [D_in x K], u [K x K], b [K]
// (row-vector convention; the recurrent input r is h for LSTM, s otherwise).
struct GateParams {
  Matrix w;
  Matrix u;
  Vector b;
};

// Gate order is fixed per kind and is the serialization order:
//   srn: [s]   lstm: [f, i, o, c]   gru: [r, z, c]   ugrnn: [a, c]   gdu: [a, c]
// where c is the candidate map and a the overwrite gate.
struct CellParams {
  std::vector<GateParams> gates;
};

std::size_t gate_count(CellKind kind);
const std::vector<std::string>& gate_names(CellKind kind);

// Xavier-uniform w/u, zero biases; draws in gate order, w before u.
CellParams init_cell_params(const CellConfig& cfg, Rng& rng);
CellParams zero_like(const CellParams& params);

// Recurrent-cell parameters only (no output layer):
// gate_count * (D_in*K + K*K + K).
std::size_t cell_param_count(const CellConfig& cfg);

struct CellState {
  Vector s;
  Vector h;  // lstm only (gated output); empty otherwise
};

CellState zero_state(const CellConfig& cfg);

// Everything observable about one step. beta = 1 - alpha for the coupled
// kinds (gru, ugrnn, gdu); beta = f and alpha = i for lstm.
struct StepTrace {
  Vector s_prev, h_prev;
  Vector s_new, h_new;
  Vector candidate, candidate_pre;
  Vector alpha, beta;
  Vector alpha_pre;   // gate pre-activation (z for gru, theta for ugrnn/gdu)
  Vector softmax_d;   // gdu: per-group softmax of theta
  Vector f, i, o, f_pre, i_pre, o_pre, tanh_s;  // lstm
  Vector r, r_pre;                              // gru read gate
};

// Per-group softmax with the overwrite budget folded in:
//   delta in (0,1]   : alpha = delta * d
//   delta in (1,M)   : alpha = (M-delta)/(M-1) * d + (delta-1)/(M-1)
// Per-group sums equal delta to within accumulation rounding.
Vector distributor(const Vector& logits, const GroupSpec& groups,
                   Vector* softmax_out = nullptr);

// One transition: pure function of (params, x, state).
CellState step(const CellConfig& cfg, const CellParams& params, const Vector& x,
               const CellState& prev, StepTrace* trace = nullptr);

// Batched transition over B sequences; states are B x K, one row per
// sequence. Row b of the batched result is bit-identical to a lone step on
// row b. The trace keeps exactly what the backward pass needs.
struct BatchTrace {
  Matrix s_prev, h_prev;
  Matrix candidate;
  Matrix alpha;
  Matrix softmax_d;          // gdu
  Matrix f, i, o, tanh_s;    // lstm
  Matrix r, rs;              // gru: read gate and r (*) s_prev
};

void step_batch(const CellConfig& cfg, const CellParams& params, const Matrix& x,
                Matrix& s, Matrix& h, BatchTrace* trace = nullptr);

}  // namespace gdu
