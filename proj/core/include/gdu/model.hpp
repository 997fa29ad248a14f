// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "gdu/cells.hpp"
#include "gdu/numerics.hpp"

namespace gdu {

// Linear readout stacked on the recurrent layer: logits = state * w + b.
struct OutputLayer {
  Matrix w;  // K x n_out
  Vector b;  // n_out
};

struct Model {
  CellConfig config;
  std::size_t output_size = 0;
  CellParams cell;
  OutputLayer out;
};

Model init_model(const CellConfig& cfg, std::size_t output_size, Rng& rng);

// Cell parameters plus the linear output layer (K*n_out + n_out).
std::size_t model_param_count(const CellConfig& cfg, std::size_t output_size);

// Apply fn(data, len) to every parameter array in fixed serialization order:
// gates in gate_names() order (w, u, b each), then out.w, out.b. The same
// order is used for checkpoints and optimizer state.
template <typename Fn>
void visit_params(Model& m, Fn&& fn) {
  for (auto& g : m.cell.gates) {
    fn(g.w.data.data(), g.w.data.size());
    fn(g.u.data.data(), g.u.data.size());
    fn(g.b.data(), g.b.size());
  }
  fn(m.out.w.data.data(), m.out.w.data.size());
  fn(m.out.b.data(), m.out.b.size());
}

template <typename Fn>
void visit_params(const CellParams& cell, const OutputLayer& out, Fn&& fn) {
  for (const auto& g : cell.gates) {
    fn(g.w.data.data(), g.w.data.size());
    fn(g.u.data.data(), g.u.data.size());
    fn(g.b.data(), g.b.size());
  }
  fn(out.w.data.data(), out.w.data.size());
  fn(out.b.data(), out.b.size());
}

template <typename Fn>
void visit_params_mut(CellParams& cell, OutputLayer& out, Fn&& fn) {
  for (auto& g : cell.gates) {
    fn(g.w.data.data(), g.w.data.size());
    fn(g.u.data.data(), g.u.data.size());
    fn(g.b.data(), g.b.size());
  }
  fn(out.w.data.data(), out.w.data.size());
  fn(out.b.data(), out.b.size());
}

// Checkpoint container, little-endian binary, round-trips bit-exactly:
//   magic "GDUCKPT1" | u32 version | u32 kind | u64 input/state/output sizes
//   u32 group count | per group: u64 size, f64 delta
//   u32 gate count  | per gate: u8 name length, name bytes,
//                     w (u64 rows, u64 cols, f64 raw), u likewise,
//                     b (u64 len, f64 raw)
//   output layer w and b in the same encoding.
// Files are written to a temp path and renamed into place.
void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path);

}  // namespace gdu
