// SPDX-License-Identifier: Apache-2.0

#include "gdu/bptt.hpp"

#include <algorithm>
#include <cmath>

#include "gdu/errors.hpp"

namespace gdu {

namespace {

double log_sum_exp_row(const double* p, std::size_t n) {
  double mx = p[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, p[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(p[i] - mx);
  return mx + std::log(sum);
}

Matrix readout(const OutputLayer& out, const Matrix& state) {
  Matrix logits = matmul(state, out.w);
  add_row_inplace(logits, out.b);
  return logits;
}

void validate_batch(const Model& model, const Batch& batch) {
  const std::size_t t = batch.steps();
  if (t == 0) throw ConfigError("forward: empty batch");
  const std::size_t b = batch.batch_size();
  for (const auto& x : batch.inputs)
    if (x.rows != b || x.cols != model.config.input_size)
      throw ConfigError("forward: input step shape mismatch");
  switch (batch.loss) {
    case LossKind::mse_final:
      if (batch.final_targets.rows != b || batch.final_targets.cols != model.output_size)
        throw ConfigError("forward: final_targets must be B x n_out");
      break;
    case LossKind::softmax_ce_final:
      if (batch.final_classes.size() != b)
        throw ConfigError("forward: final_classes must have batch_size entries");
      break;
    case LossKind::softmax_ce_per_step:
      if (batch.step_classes.size() != t)
        throw ConfigError("forward: step_classes must have one entry per step");
      for (const auto& sc : batch.step_classes)
        if (sc.size() != b) throw ConfigError("forward: step_classes row size mismatch");
      break;
  }
  if (batch.initial_s.data.size() &&
      (batch.initial_s.rows != b || batch.initial_s.cols != model.config.state_size))
    throw ConfigError("forward: initial_s must be B x K");
}

// number of unmasked steps per sequence, for per-step loss normalization
std::vector<double> valid_step_counts(const Batch& batch) {
  std::vector<double> v(batch.batch_size(), 0.0);
  for (const auto& sc : batch.step_classes)
    for (std::size_t b = 0; b < sc.size(); ++b)
      if (sc[b] >= 0) v[b] += 1.0;
  return v;
}

}  // namespace

double forward(const Model& model, const Batch& batch, UnrollTape* tape,
               Vector* per_sequence_loss) {
  model.config.validate();
  validate_batch(model, batch);
  const std::size_t t_len = batch.steps();
  const std::size_t b = batch.batch_size();
  const std::size_t k = model.config.state_size;
  const bool is_lstm = model.config.kind == CellKind::lstm;

  Matrix s = batch.initial_s.data.size() ? batch.initial_s : Matrix(b, k, 0.0);
  Matrix h;
  if (is_lstm) h = batch.initial_h.data.size() ? batch.initial_h : Matrix(b, k, 0.0);

  if (tape) {
    tape->traces.assign(t_len, BatchTrace{});
    tape->logits.clear();
  }

  Vector seq_loss(b, 0.0);
  const bool per_step = batch.loss == LossKind::softmax_ce_per_step;
  std::vector<double> valid_counts;
  if (per_step) valid_counts = valid_step_counts(batch);

  for (std::size_t t = 0; t < t_len; ++t) {
    step_batch(model.config, model.cell, batch.inputs[t], s, h,
               tape ? &tape->traces[t] : nullptr);
    if (!all_finite(s.data) || (is_lstm && !all_finite(h.data)))
      throw NumericFault("forward: non-finite state at step " + std::to_string(t));

    if (per_step) {
      Matrix logits = readout(model.out, is_lstm ? h : s);
      for (std::size_t row = 0; row < b; ++row) {
        const int cls = batch.step_classes[t][row];
        if (cls < 0) continue;
        const double lse = log_sum_exp_row(logits.row(row), model.output_size);
        seq_loss[row] += (lse - logits(row, cls)) / valid_counts[row];
      }
      if (tape) tape->logits.push_back(std::move(logits));
    }
  }

  if (!per_step) {
    Matrix logits = readout(model.out, is_lstm ? h : s);
    if (batch.loss == LossKind::mse_final) {
      for (std::size_t row = 0; row < b; ++row) {
        double acc = 0.0;
        for (std::size_t j = 0; j < model.output_size; ++j) {
          const double d = logits(row, j) - batch.final_targets(row, j);
          acc += d * d;
        }
        seq_loss[row] = acc / static_cast<double>(model.output_size);
      }
    } else {
      for (std::size_t row = 0; row < b; ++row) {
        const int cls = batch.final_classes[row];
        if (cls < 0 || static_cast<std::size_t>(cls) >= model.output_size)
          throw ConfigError("forward: class index out of range");
        const double lse = log_sum_exp_row(logits.row(row), model.output_size);
        seq_loss[row] = lse - logits(row, cls);
      }
    }
    if (tape) tape->logits.push_back(std::move(logits));
  }

  double total = 0.0;
  for (double v : seq_loss) total += v;
  total /= static_cast<double>(b);
  if (!std::isfinite(total)) throw NumericFault("forward: non-finite loss");

  if (tape) {
    tape->final_s = s;
    tape->final_h = h;
    tape->loss = total;
  }
  if (per_sequence_loss) *per_sequence_loss = std::move(seq_loss);
  return total;
}

Matrix forward_final_logits(const Model& model, const std::vector<Matrix>& inputs) {
  if (inputs.empty()) throw ConfigError("forward_final_logits: empty sequence");
  const std::size_t b = inputs[0].rows;
  const std::size_t k = model.config.state_size;
  const bool is_lstm = model.config.kind == CellKind::lstm;
  Matrix s(b, k, 0.0), h;
  if (is_lstm) h = Matrix(b, k, 0.0);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    step_batch(model.config, model.cell, inputs[t], s, h, nullptr);
    if (!all_finite(s.data))
      throw NumericFault("forward_final_logits: non-finite state at step " +
                         std::to_string(t));
  }
  return readout(model.out, is_lstm ? h : s);
}

std::vector<Matrix> forward_all_logits(const Model& model,
                                       const std::vector<Matrix>& inputs) {
  if (inputs.empty()) throw ConfigError("forward_all_logits: empty sequence");
  const std::size_t b = inputs[0].rows;
  const std::size_t k = model.config.state_size;
  const bool is_lstm = model.config.kind == CellKind::lstm;
  Matrix s(b, k, 0.0), h;
  if (is_lstm) h = Matrix(b, k, 0.0);
  std::vector<Matrix> all;
  all.reserve(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    step_batch(model.config, model.cell, inputs[t], s, h, nullptr);
    if (!all_finite(s.data))
      throw NumericFault("forward_all_logits: non-finite state at step " +
                         std::to_string(t));
    all.push_back(readout(model.out, is_lstm ? h : s));
  }
  return all;
}

Gradients zero_gradients(const Model& model, std::size_t batch_size) {
  Gradients g;
  g.cell = zero_like(model.cell);
  g.out.w = Matrix(model.out.w.rows, model.out.w.cols, 0.0);
  g.out.b.assign(model.out.b.size(), 0.0);
  g.initial_s = Matrix(batch_size, model.config.state_size, 0.0);
  if (model.config.kind == CellKind::lstm)
    g.initial_h = Matrix(batch_size, model.config.state_size, 0.0);
  return g;
}

namespace {

// grads for one affine map: pre = x*w + rin*u + b, given dpre
void accumulate_affine(GateParams& grad, const GateParams& param, const Matrix& x,
                       const Matrix& rin, const Matrix& dpre, Matrix& drin_acc) {
  matmul_tn_acc(grad.w, x, dpre);
  matmul_tn_acc(grad.u, rin, dpre);
  const Vector cs = colsum(dpre);
  for (std::size_t i = 0; i < cs.size(); ++i) grad.b[i] += cs[i];
  // drin += dpre * u^T
  const Matrix contrib = matmul_nt(dpre, param.u);
  for (std::size_t i = 0; i < drin_acc.data.size(); ++i)
    drin_acc.data[i] += contrib.data[i];
}

void distributor_backward_row(const double* dalpha, const double* softmax_d,
                              double* dtheta, const GroupSpec& groups) {
  std::size_t off = 0;
  for (std::size_t g = 0; g < groups.sizes.size(); ++g) {
    const std::size_t m = groups.sizes[g];
    const double delta = groups.deltas[g];
    const double coeff =
        delta <= 1.0 ? delta
                     : (static_cast<double>(m) - delta) / (static_cast<double>(m) - 1.0);
    double dot = 0.0;
    for (std::size_t j = 0; j < m; ++j) dot += dalpha[off + j] * softmax_d[off + j];
    for (std::size_t j = 0; j < m; ++j)
      dtheta[off + j] = coeff * softmax_d[off + j] * (dalpha[off + j] - dot);
    off += m;
  }
}

}  // namespace

Gradients backward(const Model& model, const Batch& batch, const UnrollTape& tape,
                   NormProbe* probe) {
  validate_batch(model, batch);
  const std::size_t t_len = batch.steps();
  if (tape.traces.size() != t_len)
    throw ConfigError("backward: tape does not match batch length");
  const std::size_t b = batch.batch_size();
  const std::size_t k = model.config.state_size;
  const std::size_t n_out = model.output_size;
  const CellKind kind = model.config.kind;
  const bool is_lstm = kind == CellKind::lstm;
  const bool per_step = batch.loss == LossKind::softmax_ce_per_step;
  const double inv_b = 1.0 / static_cast<double>(b);

  Gradients grads = zero_gradients(model, b);
  if (probe) probe->norms.assign(t_len, 0.0);

  std::vector<double> valid_counts;
  if (per_step) valid_counts = valid_step_counts(batch);

  Matrix ds(b, k, 0.0), dh;
  if (is_lstm) dh = Matrix(b, k, 0.0);

  for (std::size_t ti = t_len; ti-- > 0;) {
    const BatchTrace& tr = tape.traces[ti];
    const Matrix& x = batch.inputs[ti];
    const Matrix& s_t = (ti + 1 < t_len) ? tape.traces[ti + 1].s_prev : tape.final_s;
    const Matrix& h_t = (ti + 1 < t_len) ? tape.traces[ti + 1].h_prev : tape.final_h;

    // ---- loss injection at this step ----
    const bool inject = per_step || ti == t_len - 1;
    if (inject) {
      const Matrix& logits = per_step ? tape.logits[ti] : tape.logits.back();
      Matrix dlogits(b, n_out, 0.0);
      bool any = false;
      if (batch.loss == LossKind::mse_final) {
        const double scale = 2.0 * inv_b / static_cast<double>(n_out);
        for (std::size_t row = 0; row < b; ++row)
          for (std::size_t j = 0; j < n_out; ++j)
            dlogits(row, j) = scale * (logits(row, j) - batch.final_targets(row, j));
        any = true;
      } else if (batch.loss == LossKind::softmax_ce_final) {
        for (std::size_t row = 0; row < b; ++row) {
          Vector p(logits.row(row), logits.row(row) + n_out);
          softmax_stable_inplace(p);
          for (std::size_t j = 0; j < n_out; ++j) dlogits(row, j) = p[j] * inv_b;
          dlogits(row, static_cast<std::size_t>(batch.final_classes[row])) -= inv_b;
        }
        any = true;
      } else {
        for (std::size_t row = 0; row < b; ++row) {
          const int cls = batch.step_classes[ti][row];
          if (cls < 0) continue;
          const double w = inv_b / valid_counts[row];
          Vector p(logits.row(row), logits.row(row) + n_out);
          softmax_stable_inplace(p);
          for (std::size_t j = 0; j < n_out; ++j) dlogits(row, j) = p[j] * w;
          dlogits(row, static_cast<std::size_t>(cls)) -= w;
          any = true;
        }
      }
      if (any) {
        const Matrix& out_state = is_lstm ? h_t : s_t;
        matmul_tn_acc(grads.out.w, out_state, dlogits);
        const Vector cs = colsum(dlogits);
        for (std::size_t j = 0; j < n_out; ++j) grads.out.b[j] += cs[j];
        const Matrix inj = matmul_nt(dlogits, model.out.w);
        Matrix& target = is_lstm ? dh : ds;
        for (std::size_t idx = 0; idx < target.data.size(); ++idx)
          target.data[idx] += inj.data[idx];
      }
    }

    if (probe) {
      double acc = 0.0;
      for (double v : ds.data) acc += v * v;
      if (is_lstm)
        for (double v : dh.data) acc += v * v;
      probe->norms[ti] = std::sqrt(acc);
    }

    // ---- unwind the transition ----
    switch (kind) {
      case CellKind::srn: {
        Matrix dpre(b, k);
        for (std::size_t idx = 0; idx < dpre.data.size(); ++idx) {
          const double c = tr.candidate.data[idx];
          dpre.data[idx] = ds.data[idx] * (1.0 - c * c);
        }
        Matrix ds_prev(b, k, 0.0);
        accumulate_affine(grads.cell.gates[0], model.cell.gates[0], x, tr.s_prev, dpre, ds_prev);
        ds = std::move(ds_prev);
        break;
      }
      case CellKind::lstm: {
        Matrix dsl = ds;  // adjoint of s_t including the h_t path
        Matrix do_(b, k), dfp(b, k), dip(b, k), dcp(b, k);
        for (std::size_t idx = 0; idx < dsl.data.size(); ++idx) {
          const double ts = tr.tanh_s.data[idx];
          const double o = tr.o.data[idx];
          do_.data[idx] = dh.data[idx] * ts;
          dsl.data[idx] += dh.data[idx] * o * (1.0 - ts * ts);
        }
        Matrix ds_prev(b, k), dh_prev(b, k, 0.0);
        for (std::size_t idx = 0; idx < dsl.data.size(); ++idx) {
          const double f = tr.f.data[idx];
          const double i = tr.i.data[idx];
          const double c = tr.candidate.data[idx];
          const double o = tr.o.data[idx];
          const double dval = dsl.data[idx];
          dfp.data[idx] = dval * tr.s_prev.data[idx] * f * (1.0 - f);
          dip.data[idx] = dval * c * i * (1.0 - i);
          dcp.data[idx] = dval * i * (1.0 - c * c);
          do_.data[idx] = do_.data[idx] * o * (1.0 - o);
          ds_prev.data[idx] = dval * f;
        }
        accumulate_affine(grads.cell.gates[0], model.cell.gates[0], x, tr.h_prev, dfp, dh_prev);
        accumulate_affine(grads.cell.gates[1], model.cell.gates[1], x, tr.h_prev, dip, dh_prev);
        accumulate_affine(grads.cell.gates[2], model.cell.gates[2], x, tr.h_prev, do_, dh_prev);
        accumulate_affine(grads.cell.gates[3], model.cell.gates[3], x, tr.h_prev, dcp, dh_prev);
        ds = std::move(ds_prev);
        dh = std::move(dh_prev);
        break;
      }
      case CellKind::gru: {
        Matrix dzp(b, k), dcp(b, k), ds_prev(b, k);
        for (std::size_t idx = 0; idx < ds.data.size(); ++idx) {
          const double alpha = tr.alpha.data[idx];
          const double z = 1.0 - alpha;
          const double c = tr.candidate.data[idx];
          const double sp = tr.s_prev.data[idx];
          const double dval = ds.data[idx];
          dzp.data[idx] = dval * (sp - c) * z * (1.0 - z);
          dcp.data[idx] = dval * alpha * (1.0 - c * c);
          ds_prev.data[idx] = dval * z;
        }
        // candidate map reads rs = r (*) s_prev
        Matrix drs(b, k, 0.0);
        accumulate_affine(grads.cell.gates[2], model.cell.gates[2], x, tr.rs, dcp, drs);
        Matrix drp(b, k);
        for (std::size_t idx = 0; idx < drs.data.size(); ++idx) {
          const double r = tr.r.data[idx];
          drp.data[idx] = drs.data[idx] * tr.s_prev.data[idx] * r * (1.0 - r);
          ds_prev.data[idx] += drs.data[idx] * r;
        }
        accumulate_affine(grads.cell.gates[0], model.cell.gates[0], x, tr.s_prev, drp, ds_prev);
        accumulate_affine(grads.cell.gates[1], model.cell.gates[1], x, tr.s_prev, dzp, ds_prev);
        ds = std::move(ds_prev);
        break;
      }
      case CellKind::ugrnn:
      case CellKind::gdu: {
        Matrix dgate(b, k), dcp(b, k), ds_prev(b, k);
        for (std::size_t idx = 0; idx < ds.data.size(); ++idx) {
          const double a = tr.alpha.data[idx];
          const double c = tr.candidate.data[idx];
          const double sp = tr.s_prev.data[idx];
          const double dval = ds.data[idx];
          dgate.data[idx] = dval * (c - sp);  // dL/d alpha
          dcp.data[idx] = dval * a * (1.0 - c * c);
          ds_prev.data[idx] = dval * (1.0 - a);
        }
        if (kind == CellKind::ugrnn) {
          for (std::size_t idx = 0; idx < dgate.data.size(); ++idx) {
            const double a = tr.alpha.data[idx];
            dgate.data[idx] *= a * (1.0 - a);
          }
        } else {
          Matrix dtheta(b, k);
          for (std::size_t row = 0; row < b; ++row)
            distributor_backward_row(dgate.row(row), tr.softmax_d.row(row),
                                     dtheta.row(row), model.config.groups);
          dgate = std::move(dtheta);
        }
        accumulate_affine(grads.cell.gates[0], model.cell.gates[0], x, tr.s_prev, dgate, ds_prev);
        accumulate_affine(grads.cell.gates[1], model.cell.gates[1], x, tr.s_prev, dcp, ds_prev);
        ds = std::move(ds_prev);
        break;
      }
    }
  }

  grads.initial_s = std::move(ds);
  if (is_lstm) grads.initial_h = std::move(dh);
  return grads;
}

Matrix transition_jacobian_fd(const CellConfig& cfg, const CellParams& params,
                              const Vector& x, const CellState& state, double eps) {
  cfg.validate();
  const std::size_t k = cfg.state_size;
  const bool is_lstm = cfg.kind == CellKind::lstm;
  const std::size_t dim = is_lstm ? 2 * k : k;
  Matrix j(dim, dim, 0.0);

  for (std::size_t col = 0; col < dim; ++col) {
    CellState plus = state, minus = state;
    double& pv = col < k ? plus.s[col] : plus.h[col - k];
    double& mv = col < k ? minus.s[col] : minus.h[col - k];
    pv += eps;
    mv -= eps;
    const CellState sp = step(cfg, params, x, plus);
    const CellState sm = step(cfg, params, x, minus);
    for (std::size_t row = 0; row < k; ++row)
      j(row, col) = (sp.s[row] - sm.s[row]) / (2.0 * eps);
    if (is_lstm)
      for (std::size_t row = 0; row < k; ++row)
        j(k + row, col) = (sp.h[row] - sm.h[row]) / (2.0 * eps);
  }
  return j;
}

double spectral_norm(const Matrix& j, double tol, std::size_t max_iter) {
  if (j.rows == 0 || j.cols == 0) return 0.0;
  if (!all_finite(j.data)) throw NumericFault("spectral_norm: non-finite matrix");
  Rng rng(0x5eedULL);
  Vector v(j.cols);
  for (auto& e : v) e = rng.uniform(-1.0, 1.0);
  double norm = 0.0;
  for (double e : v) norm += e * e;
  norm = std::sqrt(norm);
  for (auto& e : v) e /= norm;

  double sigma = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    const Vector u = matvec(j, v);
    double ulen = 0.0;
    for (double e : u) ulen += e * e;
    ulen = std::sqrt(ulen);
    if (ulen == 0.0) return 0.0;
    Vector w = tmatvec(j, u);
    double wlen = 0.0;
    for (double e : w) wlen += e * e;
    wlen = std::sqrt(wlen);
    if (wlen == 0.0) return ulen;
    for (auto& e : w) e /= wlen;
    v = std::move(w);
    const double next = ulen;
    if (std::abs(next - sigma) <= tol * std::max(1.0, next)) return next;
    sigma = next;
  }
  return sigma;
}

GradCheckReport gradient_check(const Model& model, const Batch& batch, double eps) {
  Model work = model;
  Batch wbatch = batch;
  const std::size_t b = batch.batch_size();
  const std::size_t k = model.config.state_size;
  if (!wbatch.initial_s.data.size()) wbatch.initial_s = Matrix(b, k, 0.0);
  if (model.config.kind == CellKind::lstm && !wbatch.initial_h.data.size())
    wbatch.initial_h = Matrix(b, k, 0.0);

  UnrollTape tape;
  forward(work, wbatch, &tape);
  const Gradients analytic = backward(work, wbatch, tape);

  GradCheckReport report;
  auto probe_element = [&](double* elem, double analytic_grad, const std::string& name) {
    const double saved = *elem;
    *elem = saved + eps;
    const double lp = forward(work, wbatch);
    *elem = saved - eps;
    const double lm = forward(work, wbatch);
    *elem = saved;
    const double fd = (lp - lm) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic_grad), std::abs(fd), 1e-8});
    const double rel = std::abs(analytic_grad - fd) / denom;
    ++report.checked;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst = name;
    }
  };

  const auto& names = gate_names(model.config.kind);
  for (std::size_t g = 0; g < work.cell.gates.size(); ++g) {
    auto& gate = work.cell.gates[g];
    const auto& agate = analytic.cell.gates[g];
    for (std::size_t i = 0; i < gate.w.data.size(); ++i)
      probe_element(&gate.w.data[i], agate.w.data[i], "gate " + names[g] + ".w");
    for (std::size_t i = 0; i < gate.u.data.size(); ++i)
      probe_element(&gate.u.data[i], agate.u.data[i], "gate " + names[g] + ".u");
    for (std::size_t i = 0; i < gate.b.size(); ++i)
      probe_element(&gate.b[i], agate.b[i], "gate " + names[g] + ".b");
  }
  for (std::size_t i = 0; i < work.out.w.data.size(); ++i)
    probe_element(&work.out.w.data[i], analytic.out.w.data[i], "out.w");
  for (std::size_t i = 0; i < work.out.b.size(); ++i)
    probe_element(&work.out.b[i], analytic.out.b[i], "out.b");
  for (std::size_t i = 0; i < wbatch.initial_s.data.size(); ++i)
    probe_element(&wbatch.initial_s.data[i], analytic.initial_s.data[i], "initial s");
  if (model.config.kind == CellKind::lstm)
    for (std::size_t i = 0; i < wbatch.initial_h.data.size(); ++i)
      probe_element(&wbatch.initial_h.data[i], analytic.initial_h.data[i], "initial h");

  return report;
}

}  // namespace gdu
