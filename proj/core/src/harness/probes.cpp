// SPDX-License-Identifier: Apache-2.0

#include "gdu/harness/probes.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "gdu/errors.hpp"

namespace gdu::harness {

NormProbe probe_norms(const Model& model, const Batch& batch) {
  UnrollTape tape;
  forward(model, batch, &tape);
  NormProbe probe;
  backward(model, batch, tape, &probe);
  return probe;
}

double norm_ratio(const NormProbe& probe) {
  if (probe.norms.empty()) throw ConfigError("norm_ratio: empty probe");
  const double last = probe.norms.back();
  if (last == 0.0) return 0.0;
  return probe.norms.front() / last;
}

void write_norm_csv(const std::string& path, const NormProbe& probe) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for write: " + path);
  const double peak =
      probe.norms.empty() ? 1.0
                          : *std::max_element(probe.norms.begin(), probe.norms.end());
  const double denom = peak > 0.0 ? peak : 1.0;
  os << "t,norm,normalized\n";
  char buf[96];
  for (std::size_t t = 0; t < probe.norms.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", t + 1, probe.norms[t],
                  probe.norms[t] / denom);
    os << buf;
  }
  if (!os) throw IoError("write failed: " + path);
}

Matrix gate_activations(const Model& model, const std::vector<Matrix>& inputs,
                        bool beta) {
  if (inputs.empty()) throw ConfigError("gate_activations: empty sequence");
  const CellKind kind = model.config.kind;
  if (kind == CellKind::srn)
    throw ConfigError("gate_activations: srn has no gates");
  const std::size_t k = model.config.state_size;
  const std::size_t t_len = inputs.size();
  const std::size_t b = inputs[0].rows;
  const bool is_lstm = kind == CellKind::lstm;

  Matrix s(b, k, 0.0), h;
  if (is_lstm) h = Matrix(b, k, 0.0);
  Matrix out(k, t_len, 0.0);
  for (std::size_t t = 0; t < t_len; ++t) {
    BatchTrace trace;
    step_batch(model.config, model.cell, inputs[t], s, h, &trace);
    for (std::size_t unit = 0; unit < k; ++unit) {
      double alpha;
      if (is_lstm)
        alpha = beta ? 1.0 - trace.f(0, unit) : trace.i(0, unit);
      else
        alpha = trace.alpha(0, unit);
      out(unit, t) = beta ? 1.0 - alpha : alpha;
    }
  }
  return out;
}

void write_gate_csv(const std::string& path, const Matrix& activations) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for write: " + path);
  os << "unit";
  for (std::size_t t = 0; t < activations.cols; ++t) os << ",t" << t;
  os << '\n';
  char buf[40];
  for (std::size_t unit = 0; unit < activations.rows; ++unit) {
    os << unit;
    for (std::size_t t = 0; t < activations.cols; ++t) {
      std::snprintf(buf, sizeof buf, ",%.17g", activations(unit, t));
      os << buf;
    }
    os << '\n';
  }
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace gdu::harness
