// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "gdu/task.hpp"

namespace gdu::tasks {

// Symbol indices 0..6 = {B, T, P, S, X, V, E}.
inline constexpr char kReberSymbols[8] = "BTPSXVE";
inline constexpr std::size_t kReberSymbolCount = 7;

std::vector<std::uint8_t> parse_reber_string(const std::string& s);
std::string reber_to_string(const std::vector<std::uint8_t>& symbols);

// Walks the multi-embedded grammar: B T' (R_1)...(R_m) T' E where T' is one
// outer symbol (T or P, repeated before the final E) and each R_k is a full
// Reber string. Tracks the embed counter, the inner automaton state and the
// outer symbol, so legal_mask() is the exact successor set of the prefix
// consumed so far (size 1 or 2 as a bitmask over symbol indices).
class MergAutomaton {
 public:
  explicit MergAutomaton(std::size_t m);

  void reset();
  // Consume one symbol; returns false (and stays put) if it is not legal.
  bool consume(std::uint8_t symbol);
  std::uint8_t legal_mask() const;
  bool done() const;

 private:
  enum class Phase : std::uint8_t {
    expect_outer_b,
    expect_outer_symbol,
    inner_expect_b,
    inner_walk,
    expect_close_symbol,
    expect_final_e,
    finished,
  };
  std::size_t m_;
  Phase phase_ = Phase::expect_outer_b;
  int inner_state_ = 0;
  std::size_t embeds_done_ = 0;
  std::uint8_t outer_symbol_ = 0;
};

// True iff the string is a complete sentence of the m-embedded grammar.
bool merg_validate(const std::vector<std::uint8_t>& symbols, std::size_t m);

// Exact successor set of a valid prefix; throws ConfigError on an invalid one.
std::uint8_t legal_successors(const std::vector<std::uint8_t>& prefix, std::size_t m);

// Deterministic shortest sentence, length 5m + 4.
std::vector<std::uint8_t> merg_minimal_string(std::size_t m);

struct MergInstance {
  std::vector<std::uint8_t> symbols;
  // legal[i] = successor set after consuming symbols[0..i); legal[0] = {B}.
  std::vector<std::uint8_t> legal;
};

MergInstance make_merg_instance(std::vector<std::uint8_t> symbols, std::size_t m);

// Random sentences by uniform walk over the legal successors. When `unique`
// is set the result contains no duplicates and nothing from `exclude`.
std::vector<MergInstance> gen_merg(Rng& rng, std::size_t m, std::size_t n, bool unique,
                                   const std::unordered_set<std::string>& exclude = {});

// Fraction of test strings fully predicted (except the symbol before last)
// and fraction whose symbol before last is predicted. A prediction is
// correct when the top-|set| logits equal the legal successor set.
struct ScLc {
  double sc = 0.0;
  double lc = 0.0;
  double symbol_rate = 0.0;  // overall per-symbol correctness
};

ScLc evaluate_sc_lc(const Model& model, const std::vector<MergInstance>& test_set);

class MergTask final : public Task {
 public:
  MergTask(std::size_t m, std::size_t train_n, std::size_t test_n,
           std::uint64_t data_seed);

  std::string name() const override { return "merg"; }
  std::size_t input_size() const override { return kReberSymbolCount; }
  std::size_t output_size() const override { return kReberSymbolCount; }
  LossKind loss_kind() const override { return LossKind::softmax_ce_per_step; }

  // Samples uniformly with replacement from the fixed training pool.
  Batch train_batch(Rng& rng, long long step, std::size_t batch_size) const override;
  EvalResult evaluate(const Model& model) const override;
  Batch probe_batch(std::size_t rows) const override;

  const std::vector<MergInstance>& train_set() const { return train_; }
  const std::vector<MergInstance>& test_set() const { return test_; }
  std::size_t embed_count() const { return m_; }

 private:
  std::size_t m_;
  std::vector<MergInstance> train_;
  std::vector<MergInstance> test_;
};

// Right-padded batch over explicit instances; padded steps are masked.
Batch merg_batch(const std::vector<const MergInstance*>& instances);

}  // namespace gdu::tasks
