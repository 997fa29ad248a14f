// SPDX-License-Identifier: Apache-2.0

#include "gdu/cells.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "gdu/errors.hpp"

namespace gdu {

const char* to_string(CellKind kind) {
  switch (kind) {
    case CellKind::srn: return "srn";
    case CellKind::lstm: return "lstm";
    case CellKind::gru: return "gru";
    case CellKind::ugrnn: return "ugrnn";
    case CellKind::gdu: return "gdu";
  }
  return "?";
}

CellKind cell_kind_from_string(const std::string& name) {
  static const std::map<std::string, CellKind> table = {
      {"srn", CellKind::srn}, {"lstm", CellKind::lstm}, {"gru", CellKind::gru},
      {"ugrnn", CellKind::ugrnn}, {"gdu", CellKind::gdu}};
  auto it = table.find(name);
  if (it == table.end()) throw ConfigError("unknown cell kind: " + name);
  return it->second;
}

std::size_t GroupSpec::total_units() const {
  std::size_t k = 0;
  for (std::size_t m : sizes) k += m;
  return k;
}

double GroupSpec::delta_sum() const {
  double d = 0.0;
  for (double v : deltas) d += v;
  return d;
}

void GroupSpec::validate() const {
  if (sizes.empty()) throw ConfigError("GroupSpec: at least one group required");
  if (sizes.size() != deltas.size())
    throw ConfigError("GroupSpec: sizes and deltas must have equal length");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 1) throw ConfigError("GroupSpec: group size must be >= 1");
    if (!(deltas[i] > 0.0) || !(deltas[i] < static_cast<double>(sizes[i])))
      throw ConfigError("GroupSpec: delta must satisfy 0 < delta < group size (group " +
                        std::to_string(i) + ")");
  }
}

GroupSpec GroupSpec::uniform(std::size_t group_size, std::size_t groups, double delta) {
  GroupSpec g;
  g.sizes.assign(groups, group_size);
  g.deltas.assign(groups, delta);
  return g;
}

void CellConfig::validate() const {
  if (input_size < 1) throw ConfigError("CellConfig: input_size must be >= 1");
  if (state_size < 1) throw ConfigError("CellConfig: state_size must be >= 1");
  if (kind == CellKind::gdu) {
    groups.validate();
    if (groups.total_units() != state_size)
      throw ConfigError("CellConfig: group sizes sum to " +
                        std::to_string(groups.total_units()) + " but state_size is " +
                        std::to_string(state_size));
  } else if (!groups.sizes.empty()) {
    throw ConfigError("CellConfig: groups are only meaningful for gdu");
  }
}

std::size_t gate_count(CellKind kind) {
  switch (kind) {
    case CellKind::srn: return 1;
    case CellKind::lstm: return 4;
    case CellKind::gru: return 3;
    case CellKind::ugrnn: return 2;
    case CellKind::gdu: return 2;
  }
  return 0;
}

const std::vector<std::string>& gate_names(CellKind kind) {
  static const std::vector<std::string> srn = {"s"};
  static const std::vector<std::string> lstm = {"f", "i", "o", "c"};
  static const std::vector<std::string> gru = {"r", "z", "c"};
  static const std::vector<std::string> two = {"a", "c"};
  switch (kind) {
    case CellKind::srn: return srn;
    case CellKind::lstm: return lstm;
    case CellKind::gru: return gru;
    case CellKind::ugrnn: return two;
    case CellKind::gdu: return two;
  }
  return srn;
}

CellParams init_cell_params(const CellConfig& cfg, Rng& rng) {
  cfg.validate();
  CellParams p;
  p.gates.resize(gate_count(cfg.kind));
  for (auto& g : p.gates) {
    g.w = xavier_uniform(rng, cfg.input_size, cfg.state_size);
    g.u = xavier_uniform(rng, cfg.state_size, cfg.state_size);
    g.b.assign(cfg.state_size, 0.0);
  }
  return p;
}

CellParams zero_like(const CellParams& params) {
  CellParams z;
  z.gates.reserve(params.gates.size());
  for (const auto& g : params.gates) {
    GateParams zg;
    zg.w = Matrix(g.w.rows, g.w.cols, 0.0);
    zg.u = Matrix(g.u.rows, g.u.cols, 0.0);
    zg.b.assign(g.b.size(), 0.0);
    z.gates.push_back(std::move(zg));
  }
  return z;
}

std::size_t cell_param_count(const CellConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.input_size, k = cfg.state_size;
  return gate_count(cfg.kind) * (d * k + k * k + k);
}

CellState zero_state(const CellConfig& cfg) {
  CellState st;
  st.s.assign(cfg.state_size, 0.0);
  if (cfg.kind == CellKind::lstm) st.h.assign(cfg.state_size, 0.0);
  return st;
}

namespace {

void distributor_row(const double* logits, double* alpha, double* softmax_d,
                     const GroupSpec& groups) {
  std::size_t off = 0;
  for (std::size_t g = 0; g < groups.sizes.size(); ++g) {
    const std::size_t m = groups.sizes[g];
    const double delta = groups.deltas[g];
    double mx = logits[off];
    for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, logits[off + j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double e = std::exp(logits[off + j] - mx);
      alpha[off + j] = e;
      sum += e;
    }
    if (delta <= 1.0) {
      for (std::size_t j = 0; j < m; ++j) {
        const double d = alpha[off + j] / sum;
        if (softmax_d) softmax_d[off + j] = d;
        alpha[off + j] = delta * d;
      }
    } else {
      const double scale = (static_cast<double>(m) - delta) / (static_cast<double>(m) - 1.0);
      const double shift = (delta - 1.0) / (static_cast<double>(m) - 1.0);
      for (std::size_t j = 0; j < m; ++j) {
        const double d = alpha[off + j] / sum;
        if (softmax_d) softmax_d[off + j] = d;
        // scale*d + shift can land one ulp above 1 when d saturates at 1
        alpha[off + j] = std::min(1.0, scale * d + shift);
      }
    }
    off += m;
  }
}

Matrix affine_batch(const Matrix& x, const Matrix& rin, const GateParams& g) {
  Matrix pre = matmul(x, g.w);
  matmul_acc(pre, rin, g.u);
  add_row_inplace(pre, g.b);
  return pre;
}

Vector affine_vec(const Vector& x, const Vector& rin, const GateParams& g) {
  Vector pre = tmatvec(g.w, x);
  const Vector rec = tmatvec(g.u, rin);
  for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += rec[i] + g.b[i];
  return pre;
}

}  // namespace

Vector distributor(const Vector& logits, const GroupSpec& groups, Vector* softmax_out) {
  groups.validate();
  if (groups.total_units() != logits.size())
    throw ConfigError("distributor: groups cover " + std::to_string(groups.total_units()) +
                      " units but got " + std::to_string(logits.size()) + " logits");
  Vector alpha(logits.size());
  if (softmax_out) softmax_out->assign(logits.size(), 0.0);
  distributor_row(logits.data(), alpha.data(),
                  softmax_out ? softmax_out->data() : nullptr, groups);
  return alpha;
}

void step_batch(const CellConfig& cfg, const CellParams& params, const Matrix& x,
                Matrix& s, Matrix& h, BatchTrace* trace) {
  const std::size_t batch = x.rows;
  const std::size_t k = cfg.state_size;
  if (x.cols != cfg.input_size || s.rows != batch || s.cols != k)
    throw ConfigError("step_batch: input/state shapes inconsistent with config");
  if (params.gates.size() != gate_count(cfg.kind))
    throw ConfigError("step_batch: wrong gate count for cell kind");

  if (trace) trace->s_prev = s;

  switch (cfg.kind) {
    case CellKind::srn: {
      Matrix pre = affine_batch(x, s, params.gates[0]);
      tanh_inplace(pre.data);
      if (trace) trace->candidate = pre;
      s = std::move(pre);
      break;
    }
    case CellKind::lstm: {
      if (h.rows != batch || h.cols != k)
        throw ConfigError("step_batch: lstm requires an h state of shape B x K");
      if (trace) trace->h_prev = h;
      Matrix f = affine_batch(x, h, params.gates[0]);
      Matrix i = affine_batch(x, h, params.gates[1]);
      Matrix o = affine_batch(x, h, params.gates[2]);
      Matrix c = affine_batch(x, h, params.gates[3]);
      sigmoid_inplace(f.data);
      sigmoid_inplace(i.data);
      sigmoid_inplace(o.data);
      tanh_inplace(c.data);
      Matrix s_new(batch, k);
      for (std::size_t idx = 0; idx < s_new.data.size(); ++idx)
        s_new.data[idx] = f.data[idx] * s.data[idx] + i.data[idx] * c.data[idx];
      Matrix ts = s_new;
      tanh_inplace(ts.data);
      for (std::size_t idx = 0; idx < h.data.size(); ++idx)
        h.data[idx] = o.data[idx] * ts.data[idx];
      if (trace) {
        trace->f = std::move(f);
        trace->i = std::move(i);
        trace->o = std::move(o);
        trace->candidate = std::move(c);
        trace->tanh_s = std::move(ts);
        trace->alpha = trace->i;  // alias copy for uniform access
      }
      s = std::move(s_new);
      break;
    }
    case CellKind::gru: {
      Matrix r = affine_batch(x, s, params.gates[0]);
      Matrix z = affine_batch(x, s, params.gates[1]);
      sigmoid_inplace(r.data);
      sigmoid_inplace(z.data);
      Matrix rs(batch, k);
      for (std::size_t idx = 0; idx < rs.data.size(); ++idx)
        rs.data[idx] = r.data[idx] * s.data[idx];
      Matrix c = affine_batch(x, rs, params.gates[2]);
      tanh_inplace(c.data);
      // keep gate is z; overwrite gate alpha = 1 - z
      Matrix alpha(batch, k);
      Matrix s_new(batch, k);
      for (std::size_t idx = 0; idx < s_new.data.size(); ++idx) {
        alpha.data[idx] = 1.0 - z.data[idx];
        s_new.data[idx] = z.data[idx] * s.data[idx] + alpha.data[idx] * c.data[idx];
      }
      if (trace) {
        trace->r = std::move(r);
        trace->rs = std::move(rs);
        trace->alpha = std::move(alpha);
        trace->candidate = std::move(c);
      }
      s = std::move(s_new);
      break;
    }
    case CellKind::ugrnn:
    case CellKind::gdu: {
      Matrix a = affine_batch(x, s, params.gates[0]);
      if (cfg.kind == CellKind::ugrnn) {
        sigmoid_inplace(a.data);
      } else {
        if (trace) trace->softmax_d = Matrix(batch, k);
        for (std::size_t b = 0; b < batch; ++b)
          distributor_row(a.row(b), a.row(b),
                          trace ? trace->softmax_d.row(b) : nullptr, cfg.groups);
      }
      Matrix c = affine_batch(x, s, params.gates[1]);
      tanh_inplace(c.data);
      Matrix s_new(batch, k);
      for (std::size_t idx = 0; idx < s_new.data.size(); ++idx)
        s_new.data[idx] = (1.0 - a.data[idx]) * s.data[idx] + a.data[idx] * c.data[idx];
      if (trace) {
        trace->alpha = std::move(a);
        trace->candidate = std::move(c);
      }
      s = std::move(s_new);
      break;
    }
  }
}

CellState step(const CellConfig& cfg, const CellParams& params, const Vector& x,
               const CellState& prev, StepTrace* trace) {
  cfg.validate();
  if (x.size() != cfg.input_size) throw ConfigError("step: input size mismatch");
  if (prev.s.size() != cfg.state_size) throw ConfigError("step: state size mismatch");

  Matrix xm(1, cfg.input_size);
  xm.data = x;
  Matrix sm(1, cfg.state_size);
  sm.data = prev.s;
  Matrix hm;
  if (cfg.kind == CellKind::lstm) {
    if (prev.h.size() != cfg.state_size) throw ConfigError("step: lstm h size mismatch");
    hm = Matrix(1, cfg.state_size);
    hm.data = prev.h;
  }

  BatchTrace bt;
  step_batch(cfg, params, xm, sm, hm, trace ? &bt : nullptr);

  CellState next;
  next.s = sm.data;
  if (cfg.kind == CellKind::lstm) next.h = hm.data;
  if (!all_finite(next.s) || !all_finite(next.h))
    throw NumericFault("step: non-finite state produced");

  if (trace) {
    trace->s_prev = prev.s;
    trace->h_prev = prev.h;
    trace->s_new = next.s;
    trace->h_new = next.h;
    trace->candidate = bt.candidate.data;
    trace->alpha = bt.alpha.data;
    trace->softmax_d = bt.softmax_d.data;
    trace->tanh_s = bt.tanh_s.data;
    trace->r = bt.r.data;
    trace->f = bt.f.data;
    trace->i = bt.i.data;
    trace->o = bt.o.data;
    switch (cfg.kind) {
      case CellKind::srn:
        trace->candidate_pre = affine_vec(x, prev.s, params.gates[0]);
        break;
      case CellKind::lstm:
        trace->f_pre = affine_vec(x, prev.h, params.gates[0]);
        trace->i_pre = affine_vec(x, prev.h, params.gates[1]);
        trace->o_pre = affine_vec(x, prev.h, params.gates[2]);
        trace->candidate_pre = affine_vec(x, prev.h, params.gates[3]);
        trace->beta = trace->f;
        break;
      case CellKind::gru: {
        trace->r_pre = affine_vec(x, prev.s, params.gates[0]);
        trace->alpha_pre = affine_vec(x, prev.s, params.gates[1]);
        trace->candidate_pre = affine_vec(x, bt.rs.data, params.gates[2]);
        break;
      }
      case CellKind::ugrnn:
      case CellKind::gdu:
        trace->alpha_pre = affine_vec(x, prev.s, params.gates[0]);
        trace->candidate_pre = affine_vec(x, prev.s, params.gates[1]);
        break;
    }
    if (cfg.kind != CellKind::srn && cfg.kind != CellKind::lstm) {
      trace->beta.resize(trace->alpha.size());
      for (std::size_t idx = 0; idx < trace->alpha.size(); ++idx)
        trace->beta[idx] = 1.0 - trace->alpha[idx];
    }
  }
  return next;
}

}  // namespace gdu
