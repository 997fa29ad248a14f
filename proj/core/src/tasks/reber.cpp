// SPDX-License-Identifier: Apache-2.0

#include "gdu/tasks/reber.hpp"

#include <algorithm>
#include <array>
#include <bit>

#include "gdu/errors.hpp"

namespace gdu::tasks {

namespace {

constexpr std::uint8_t kB = 0, kT = 1, kP = 2, kS = 3, kX = 4, kV = 5, kE = 6;

constexpr std::uint8_t bit(std::uint8_t sym) { return static_cast<std::uint8_t>(1u << sym); }

// Inner Reber walk. States 0..5; state 5 closes with E. Two outgoing edges
// everywhere else:
//   0: T->1  P->2
//   1: S->1  X->3
//   2: T->2  V->4
//   3: X->2  S->5
//   4: P->3  V->5
struct Edge {
  std::uint8_t symbol;
  int next;
};
constexpr Edge kInnerEdges[5][2] = {
    {{kT, 1}, {kP, 2}}, {{kS, 1}, {kX, 3}}, {{kT, 2}, {kV, 4}},
    {{kX, 2}, {kS, 5}}, {{kP, 3}, {kV, 5}},
};

}  // namespace

std::vector<std::uint8_t> parse_reber_string(const std::string& s) {
  std::vector<std::uint8_t> out;
  out.reserve(s.size());
  for (char c : s) {
    const char* pos = std::char_traits<char>::find(kReberSymbols, kReberSymbolCount, c);
    if (!pos) throw ConfigError(std::string("parse_reber_string: bad symbol '") + c + "'");
    out.push_back(static_cast<std::uint8_t>(pos - kReberSymbols));
  }
  return out;
}

std::string reber_to_string(const std::vector<std::uint8_t>& symbols) {
  std::string s;
  s.reserve(symbols.size());
  for (std::uint8_t v : symbols) {
    if (v >= kReberSymbolCount) throw ConfigError("reber_to_string: bad symbol index");
    s.push_back(kReberSymbols[v]);
  }
  return s;
}

MergAutomaton::MergAutomaton(std::size_t m) : m_(m) {
  if (m < 1) throw ConfigError("MergAutomaton: m must be >= 1");
  reset();
}

void MergAutomaton::reset() {
  phase_ = Phase::expect_outer_b;
  inner_state_ = 0;
  embeds_done_ = 0;
  outer_symbol_ = 0;
}

std::uint8_t MergAutomaton::legal_mask() const {
  switch (phase_) {
    case Phase::expect_outer_b: return bit(kB);
    case Phase::expect_outer_symbol: return bit(kT) | bit(kP);
    case Phase::inner_expect_b: return bit(kB);
    case Phase::inner_walk:
      if (inner_state_ == 5) return bit(kE);
      return bit(kInnerEdges[inner_state_][0].symbol) |
             bit(kInnerEdges[inner_state_][1].symbol);
    case Phase::expect_close_symbol: return bit(outer_symbol_);
    case Phase::expect_final_e: return bit(kE);
    case Phase::finished: return 0;
  }
  return 0;
}

bool MergAutomaton::consume(std::uint8_t symbol) {
  if (symbol >= kReberSymbolCount) return false;
  if ((legal_mask() & bit(symbol)) == 0) return false;
  switch (phase_) {
    case Phase::expect_outer_b:
      phase_ = Phase::expect_outer_symbol;
      break;
    case Phase::expect_outer_symbol:
      outer_symbol_ = symbol;
      phase_ = Phase::inner_expect_b;
      break;
    case Phase::inner_expect_b:
      inner_state_ = 0;
      phase_ = Phase::inner_walk;
      break;
    case Phase::inner_walk:
      if (inner_state_ == 5) {
        ++embeds_done_;
        phase_ = embeds_done_ < m_ ? Phase::inner_expect_b : Phase::expect_close_symbol;
      } else {
        inner_state_ = kInnerEdges[inner_state_][0].symbol == symbol
                           ? kInnerEdges[inner_state_][0].next
                           : kInnerEdges[inner_state_][1].next;
      }
      break;
    case Phase::expect_close_symbol:
      phase_ = Phase::expect_final_e;
      break;
    case Phase::expect_final_e:
      phase_ = Phase::finished;
      break;
    case Phase::finished:
      return false;
  }
  return true;
}

bool MergAutomaton::done() const { return phase_ == Phase::finished; }

bool merg_validate(const std::vector<std::uint8_t>& symbols, std::size_t m) {
  MergAutomaton a(m);
  for (std::uint8_t s : symbols)
    if (!a.consume(s)) return false;
  return a.done();
}

std::uint8_t legal_successors(const std::vector<std::uint8_t>& prefix, std::size_t m) {
  MergAutomaton a(m);
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (!a.consume(prefix[i]))
      throw ConfigError("legal_successors: invalid prefix at position " +
                        std::to_string(i));
  return a.legal_mask();
}

std::vector<std::uint8_t> merg_minimal_string(std::size_t m) {
  // distance-to-E from each inner walk state, for a deterministic
  // shortest-path choice (ties broken by smaller symbol index)
  int dist[6] = {1 << 20, 1 << 20, 1 << 20, 1 << 20, 1 << 20, 1};
  for (int pass = 0; pass < 6; ++pass)
    for (int st = 4; st >= 0; --st) {
      int best = 1 << 20;
      for (const Edge& e : kInnerEdges[st]) best = std::min(best, 1 + dist[e.next]);
      dist[st] = best;
    }

  std::vector<std::uint8_t> out{kB, kT};
  for (std::size_t k = 0; k < m; ++k) {
    out.push_back(kB);
    int st = 0;
    while (st != 5) {
      const Edge& e0 = kInnerEdges[st][0];
      const Edge& e1 = kInnerEdges[st][1];
      Edge pick = e0;
      if (dist[e1.next] < dist[e0.next] ||
          (dist[e1.next] == dist[e0.next] && e1.symbol < e0.symbol))
        pick = e1;
      out.push_back(pick.symbol);
      st = pick.next;
    }
    out.push_back(kE);
  }
  out.push_back(kT);
  out.push_back(kE);
  return out;
}

MergInstance make_merg_instance(std::vector<std::uint8_t> symbols, std::size_t m) {
  MergInstance inst;
  inst.legal.reserve(symbols.size());
  MergAutomaton a(m);
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    inst.legal.push_back(a.legal_mask());
    if (!a.consume(symbols[i]))
      throw ConfigError("make_merg_instance: string is not grammatical at position " +
                        std::to_string(i));
  }
  if (!a.done()) throw ConfigError("make_merg_instance: incomplete string");
  inst.symbols = std::move(symbols);
  return inst;
}

std::vector<MergInstance> gen_merg(Rng& rng, std::size_t m, std::size_t n, bool unique,
                                   const std::unordered_set<std::string>& exclude) {
  std::vector<MergInstance> out;
  out.reserve(n);
  std::unordered_set<std::string> seen;
  std::size_t attempts = 0;
  const std::size_t max_attempts = 1000 * (n + 10);
  while (out.size() < n) {
    if (++attempts > max_attempts)
      throw ConfigError("gen_merg: unable to draw enough distinct strings");
    MergAutomaton a(m);
    std::vector<std::uint8_t> symbols;
    while (!a.done()) {
      const std::uint8_t mask = a.legal_mask();
      std::uint8_t choices[2];
      int count = 0;
      for (std::uint8_t sym = 0; sym < kReberSymbolCount; ++sym)
        if (mask & (1u << sym)) choices[count++] = sym;
      const std::uint8_t pick =
          count == 1 ? choices[0] : choices[rng.next_below(static_cast<std::uint64_t>(count))];
      a.consume(pick);
      symbols.push_back(pick);
    }
    if (unique) {
      const std::string key = reber_to_string(symbols);
      if (exclude.count(key) || !seen.insert(key).second) continue;
    }
    out.push_back(make_merg_instance(std::move(symbols), m));
  }
  return out;
}

Batch merg_batch(const std::vector<const MergInstance*>& instances) {
  if (instances.empty()) throw ConfigError("merg_batch: empty instance list");
  const std::size_t b = instances.size();
  std::size_t t_len = 0;
  for (const MergInstance* inst : instances)
    t_len = std::max(t_len, inst->symbols.size());

  Batch batch;
  batch.loss = LossKind::softmax_ce_per_step;
  batch.inputs.assign(t_len, Matrix(b, kReberSymbolCount, 0.0));
  batch.step_classes.assign(t_len, std::vector<int>(b, -1));
  for (std::size_t row = 0; row < b; ++row) {
    const auto& symbols = instances[row]->symbols;
    for (std::size_t t = 0; t < symbols.size(); ++t) {
      batch.inputs[t](row, symbols[t]) = 1.0;
      // predict the next symbol at every step that has one
      if (t + 1 < symbols.size())
        batch.step_classes[t][row] = static_cast<int>(symbols[t + 1]);
    }
  }
  return batch;
}

ScLc evaluate_sc_lc(const Model& model, const std::vector<MergInstance>& test_set) {
  if (test_set.empty()) throw ConfigError("evaluate_sc_lc: empty test set");
  std::size_t sc_hits = 0, lc_hits = 0;
  std::size_t symbol_hits = 0, symbol_total = 0;

  const std::size_t chunk = 32;
  for (std::size_t at = 0; at < test_set.size(); at += chunk) {
    const std::size_t n = std::min(chunk, test_set.size() - at);
    std::vector<const MergInstance*> slice;
    slice.reserve(n);
    for (std::size_t i = 0; i < n; ++i) slice.push_back(&test_set[at + i]);
    const Batch batch = merg_batch(slice);
    const std::vector<Matrix> logits = forward_all_logits(model, batch.inputs);

    for (std::size_t row = 0; row < n; ++row) {
      const MergInstance& inst = *slice[row];
      const std::size_t len = inst.symbols.size();
      bool sc_ok = true, lc_ok = true;
      // prediction after consuming t+1 symbols targets the set inst.legal[t+1]
      for (std::size_t t = 0; t + 1 < len; ++t) {
        const std::uint8_t mask = inst.legal[t + 1];
        const int want = std::popcount(static_cast<unsigned>(mask));
        const double* lrow = logits[t].row(row);
        std::array<int, kReberSymbolCount> order{0, 1, 2, 3, 4, 5, 6};
        std::partial_sort(order.begin(), order.begin() + want, order.end(),
                          [&](int a, int b) { return lrow[a] > lrow[b]; });
        std::uint8_t top = 0;
        for (int i = 0; i < want; ++i) top |= static_cast<std::uint8_t>(1u << order[i]);
        const bool correct = top == mask;
        ++symbol_total;
        if (correct) ++symbol_hits;
        // symbol before last is predicted at step len - 3
        if (t == len - 3) {
          lc_ok = correct;
        } else if (!correct) {
          sc_ok = false;
        }
      }
      if (sc_ok) ++sc_hits;
      if (lc_ok) ++lc_hits;
    }
  }

  ScLc r;
  r.sc = static_cast<double>(sc_hits) / static_cast<double>(test_set.size());
  r.lc = static_cast<double>(lc_hits) / static_cast<double>(test_set.size());
  r.symbol_rate = static_cast<double>(symbol_hits) / static_cast<double>(symbol_total);
  return r;
}

MergTask::MergTask(std::size_t m, std::size_t train_n, std::size_t test_n,
                   std::uint64_t data_seed)
    : m_(m) {
  Rng rng(data_seed);
  train_ = gen_merg(rng, m, train_n, false);
  std::unordered_set<std::string> exclude;
  for (const auto& inst : train_) exclude.insert(reber_to_string(inst.symbols));
  test_ = gen_merg(rng, m, test_n, true, exclude);
}

Batch MergTask::train_batch(Rng& rng, long long, std::size_t batch_size) const {
  std::vector<const MergInstance*> picks;
  picks.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i)
    picks.push_back(&train_[rng.next_below(train_.size())]);
  return merg_batch(picks);
}

EvalResult MergTask::evaluate(const Model& model) const {
  const ScLc r = evaluate_sc_lc(model, test_);
  EvalResult ev;
  ev.metric = r.symbol_rate;
  ev.sc = r.sc;
  ev.lc = r.lc;
  return ev;
}

Batch MergTask::probe_batch(std::size_t rows) const {
  const std::size_t n = std::min(rows, test_.size());
  std::vector<const MergInstance*> picks;
  picks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) picks.push_back(&test_[i]);
  return merg_batch(picks);
}

}  // namespace gdu::tasks
