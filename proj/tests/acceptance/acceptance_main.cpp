// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Each criterion prints one PASS/FAIL line; the process
// exits nonzero if any executed criterion fails. Run a single criterion with
// --criterion N (used by ctest to run them in parallel), or everything with
// no arguments.

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "gdu/harness/experiment.hpp"
#include "gdu/harness/gradcheck.hpp"
#include "gdu/harness/probes.hpp"
#include "gdu/optim.hpp"
#include "gdu/tasks/adding.hpp"
#include "gdu/tasks/mnist.hpp"
#include "gdu/tasks/reber.hpp"
#include "gdu/tasks/temporal_order.hpp"

using namespace gdu;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kDataSeed = 13;  // canonical fixed datasets

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s — %s\n", criterion, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---- 1: analytic BPTT vs central finite differences --------------------

void criterion_1() {
  bool pass = true;
  std::string detail;
  for (CellKind kind : {CellKind::srn, CellKind::lstm, CellKind::gru, CellKind::ugrnn,
                        CellKind::gdu}) {
    const auto s = harness::grad_check_kind(kind, 20, 10, 8, 3, 42);
    pass = pass && s.max_rel_err < 1e-4;
    detail += fmt("%s %.2e  ", to_string(kind), s.max_rel_err);
  }
  report(1, pass, "gradients vs central differences (20 instances each, tol 1e-4): " +
                      detail);
}

// ---- 2: distributor invariants ------------------------------------------

void criterion_2() {
  Rng rng(0xD157);
  std::size_t checked = 0;
  bool sums_ok = true, bounds_ok = true, strict_ok = true;
  for (int rep = 0; rep < 10000; ++rep) {
    GroupSpec g;
    const std::size_t ngroups = 1 + rng.next_below(5);
    for (std::size_t i = 0; i < ngroups; ++i) {
      const std::size_t m = 1 + rng.next_below(12);
      g.sizes.push_back(m);
      if (m == 1 || rng.next_below(2) == 0)
        g.deltas.push_back(0.02 + 0.96 * rng.next_double());
      else
        g.deltas.push_back(1.0 + (static_cast<double>(m) - 1.0) * 0.98 * rng.next_double());
    }
    const double mag = rep % 4 == 0 ? 1000.0 : 6.0;
    Vector logits(g.total_units());
    for (auto& v : logits) v = rng.uniform(-mag, mag);
    const Vector alpha = distributor(logits, g);

    std::size_t off = 0;
    for (std::size_t i = 0; i < g.sizes.size(); ++i) {
      const std::size_t m = g.sizes[i];
      const double delta = g.deltas[i];
      double sum = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double v = alpha[off + j];
        sum += v;
        if (delta <= 1.0) {
          bounds_ok = bounds_ok && v >= 0.0 && v <= delta;
          // the open upper end is attainable only through double rounding at
          // extreme logit gaps; away from saturation it must hold strictly
          if (mag <= 6.0 && m > 1) strict_ok = strict_ok && v < delta;
        } else {
          const double lo = (delta - 1.0) / (static_cast<double>(m) - 1.0);
          bounds_ok = bounds_ok && v >= lo && v <= 1.0;
          if (mag <= 6.0) strict_ok = strict_ok && v > lo;
        }
        ++checked;
      }
      sums_ok = sums_ok && std::abs(sum - delta) < 1e-12;
      off += m;
    }
  }
  report(2, sums_ok && bounds_ok && strict_ok,
         fmt("%zu gate values over 10000 random (groups, logits) incl. |logit|=1e3: "
             "budget sums within 1e-12 %s, bounds %s, strict interior %s",
             checked, sums_ok ? "ok" : "VIOLATED", bounds_ok ? "ok" : "VIOLATED",
             strict_ok ? "ok" : "VIOLATED"));
}

// ---- 3: parameter-count reproduction -------------------------------------

void criterion_3() {
  struct Case {
    const char* label;
    CellKind kind;
    std::size_t units;          // non-gdu
    const char* groups;         // gdu
    std::size_t d_in, n_out;
    std::size_t expect;
  };
  const Case cases[] = {
      // adding problem
      {"lstm(100) adding", CellKind::lstm, 100, nullptr, 2, 1, 41301},
      {"gru(100) adding", CellKind::gru, 100, nullptr, 2, 1, 31001},
      {"gdu(10x10) adding", CellKind::gdu, 0, "10x10", 2, 1, 20701},
      {"gdu(10x1) adding", CellKind::gdu, 0, "10x1", 2, 1, 271},
      // temporal order
      {"lstm(100) temporal", CellKind::lstm, 100, nullptr, 6, 8, 43608},
      {"gru(100) temporal", CellKind::gru, 100, nullptr, 6, 8, 32908},
      {"gdu(10x10) temporal", CellKind::gdu, 0, "10x10", 6, 8, 22208},
      // embedded reber
      {"lstm(100) merg", CellKind::lstm, 100, nullptr, 7, 7, 43907},
      {"gru(100) merg", CellKind::gru, 100, nullptr, 7, 7, 33107},
      {"gdu(2x35+10x3) merg", CellKind::gdu, 0, "2x35+10x3", 7, 7, 22307},
      // pixel-sequence task
      {"lstm(128) pmnist", CellKind::lstm, 128, nullptr, 1, 10, 67850},
      {"gru(128) pmnist", CellKind::gru, 128, nullptr, 1, 10, 51210},
      {"gdu(4x32) pmnist", CellKind::gdu, 0, "4x32", 1, 10, 34570},
      {"gdu(5x25) pmnist", CellKind::gdu, 0, "5x25", 1, 10, 33010},
      {"lstm(256) pmnist", CellKind::lstm, 256, nullptr, 1, 10, 266762},
      {"gru(256) pmnist", CellKind::gru, 256, nullptr, 1, 10, 200714},
      {"gdu(5x51) pmnist", CellKind::gdu, 0, "5x51", 1, 10, 133630},
      // 4x62 (K=248) gives 126,490 by the counting rule; the published
      // 134.7K figure matches 4x64 (K=256) instead -- both are asserted so
      // the discrepancy stays documented
      {"gdu(4x62) pmnist", CellKind::gdu, 0, "4x62", 1, 10, 126490},
      {"gdu(4x64) pmnist", CellKind::gdu, 0, "4x64", 1, 10, 134666},
  };
  bool pass = true;
  std::string wrong;
  for (const Case& c : cases) {
    harness::ModelSpec spec;
    spec.kind = c.kind;
    spec.units = c.units;
    if (c.groups) spec.groups = c.groups;
    const CellConfig cfg = harness::make_cell_config(spec, c.d_in);
    const std::size_t got = model_param_count(cfg, c.n_out);
    if (got != c.expect) {
      pass = false;
      wrong += fmt("%s got %zu want %zu; ", c.label, got, c.expect);
    }
  }
  report(3, pass,
         pass ? fmt("%zu configurations exact, 4x62-vs-134.7K discrepancy documented "
                    "(126490 vs 4x64 = 134666)",
                    std::size(cases))
              : wrong);
}

// ---- 4: adding problem at desk scale --------------------------------------

void criterion_4() {
  // constant-1 predictor on the canonical fixed test set
  tasks::AddingTask task(200, 500, kDataSeed);
  double baseline = 0.0;
  for (const auto& inst : task.test_set())
    baseline += (1.0 - inst.target) * (1.0 - inst.target);
  baseline /= static_cast<double>(task.test_set().size());
  const bool baseline_ok = std::abs(baseline - 0.167) <= 0.005;

  auto converge = [](const char* groups, int& converged, std::string& detail) {
    for (std::uint64_t seed : {1, 2, 3}) {
      harness::ExperimentSpec spec;
      spec.task.name = "adding";
      spec.task.length = 200;
      spec.task.test_n = 500;
      spec.task.data_seed = kDataSeed;
      spec.model.kind = CellKind::gdu;
      spec.model.groups = groups;
      spec.trials = 1;
      spec.train.seed = seed;
      spec.train.max_steps = 10000;
      spec.train.eval_every = 50;
      spec.train.batch_size = 20;
      spec.train.stop = StopRule::mse_below;
      spec.train.stop_threshold = 0.002;
      spec.output_dir = "/tmp/gdu_accept_adding_" + std::string(groups) + "_" +
                        std::to_string(seed);
      fs::remove_all(spec.output_dir);
      const auto result = harness::run_experiment(spec);
      const auto& trial = result.trials[0];
      if (trial.stopped_at) {
        ++converged;
        detail += fmt("seed %llu: %lld steps; ", (unsigned long long)seed,
                      (long long)*trial.stopped_at);
      } else {
        detail += fmt("seed %llu: no stop (mse %.4g); ", (unsigned long long)seed,
                      trial.final_metric);
      }
      fs::remove_all(spec.output_dir);
    }
  };

  int big_converged = 0, small_converged = 0;
  std::string big_detail, small_detail;
  converge("10x10", big_converged, big_detail);
  converge("10x1", small_converged, small_detail);

  report(4, baseline_ok && big_converged >= 2 && small_converged >= 2,
         fmt("const-1 baseline %.4f (0.167±0.005); 10x10: %d/3 seeds < 0.002 within "
             "10k [%s]; 10x1 (271 params): %d/3 [%s]",
             baseline, big_converged, big_detail.c_str(), small_converged,
             small_detail.c_str()));
}

// ---- 5: temporal order at desk scale --------------------------------------

void criterion_5() {
  // class-frequency baseline over a large fresh sample
  Rng rng(0xBA5E);
  const auto sample = tasks::gen_temporal_order(rng, 100, 100000);
  std::size_t class0 = 0;
  for (const auto& inst : sample) class0 += inst.label == 0;
  const double baseline = static_cast<double>(class0) / 100000.0;
  const bool baseline_ok = std::abs(baseline - 0.125) <= 0.01;

  int converged = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    harness::ExperimentSpec spec;
    spec.task.name = "temporal-order";
    spec.task.length = 100;
    spec.task.test_n = 500;
    spec.task.data_seed = kDataSeed;
    spec.model.kind = CellKind::gdu;
    spec.model.groups = "10x10";
    spec.trials = 1;
    spec.train.seed = seed;
    spec.train.max_steps = 20000;
    spec.train.eval_every = 50;
    spec.train.batch_size = 20;
    spec.train.stop = StopRule::accuracy_equals_one;
    spec.output_dir = "/tmp/gdu_accept_temporal_" + std::to_string(seed);
    fs::remove_all(spec.output_dir);
    const auto result = harness::run_experiment(spec);
    const auto& trial = result.trials[0];
    if (trial.stopped_at) {
      ++converged;
      detail += fmt("seed %llu: %lld steps; ", (unsigned long long)seed,
                    (long long)*trial.stopped_at);
    } else {
      detail += fmt("seed %llu: acc %.4f; ", (unsigned long long)seed,
                    trial.final_metric);
    }
    fs::remove_all(spec.output_dir);
  }
  report(5, baseline_ok && converged >= 2,
         fmt("one-class baseline %.4f (0.125±0.01); gdu(10x10) L=100 accuracy 1.0 "
             "within 20k: %d/3 seeds [%s]",
             baseline, converged, detail.c_str()));
}

// ---- 6: embedded reber at desk scale ---------------------------------------

void criterion_6() {
  // documented step budget for SC = LC = 1 on the 256-string test set
  constexpr long long kStepBudget = 60000;

  tasks::MergTask task(10, 1000, 256, kDataSeed);
  Rng guess(123);
  std::size_t hits = 0;
  for (const auto& inst : task.test_set())
    hits += (guess.next_below(2) ? 1 : 2) == inst.symbols[1];
  const double lc_baseline = static_cast<double>(hits) / 256.0;
  const bool baseline_ok = std::abs(lc_baseline - 0.5) <= 0.05;

  harness::ExperimentSpec spec;
  spec.task.name = "merg";
  spec.task.m = 10;
  spec.task.train_n = 1000;
  spec.task.data_seed = kDataSeed;
  spec.model.kind = CellKind::gdu;
  spec.model.groups = "2x35+10x3";
  spec.trials = 1;
  spec.train.seed = 1;
  spec.train.max_steps = kStepBudget;
  spec.train.eval_every = 50;
  spec.train.batch_size = 1;
  spec.train.stop = StopRule::sc_and_lc_equal_one;
  spec.output_dir = "/tmp/gdu_accept_merg";
  fs::remove_all(spec.output_dir);
  const auto result = harness::run_experiment(spec);
  const auto& trial = result.trials[0];
  fs::remove_all(spec.output_dir);

  report(6, baseline_ok && trial.stopped_at.has_value(),
         fmt("coin-flip LC baseline %.4f (0.5±0.05); gdu(2x35+10x3) m=10 SC=LC=1: %s "
             "(budget %lld, sc first at %lld, lc first at %lld)",
             lc_baseline,
             trial.stopped_at ? fmt("stopped at %lld", (long long)*trial.stopped_at).c_str()
                              : fmt("NOT reached (sc %.3f lc %.3f)", trial.final_sc,
                                    trial.final_lc)
                                    .c_str(),
             kStepBudget, trial.sc_step ? (long long)*trial.sc_step : -1,
             trial.lc_step ? (long long)*trial.lc_step : -1));
}

// ---- 7: gradient-flow restated --------------------------------------------

void criterion_7() {
  // fixed evaluation batch: uniform [0,1] pixel stream, T = 784
  const std::size_t t_len = 784, rows = 16, k = 100;
  std::vector<double> gdu_ratios, srn_ratios;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng data_rng(1000 + seed);
    Batch batch;
    batch.loss = LossKind::softmax_ce_final;
    batch.inputs.assign(t_len, Matrix(rows, 1));
    for (auto& x : batch.inputs)
      for (auto& v : x.data) v = data_rng.next_double();
    batch.final_classes.resize(rows);
    for (auto& c : batch.final_classes) c = static_cast<int>(data_rng.next_below(10));

    CellConfig gcfg;
    gcfg.kind = CellKind::gdu;
    gcfg.input_size = 1;
    gcfg.state_size = k;
    gcfg.groups = GroupSpec::uniform(10, 10, 1.0);
    Rng gr(seed);
    gdu_ratios.push_back(
        harness::norm_ratio(harness::probe_norms(init_model(gcfg, 10, gr), batch)));

    CellConfig scfg{CellKind::srn, 1, k, {}};
    Rng sr(seed);
    srn_ratios.push_back(
        harness::norm_ratio(harness::probe_norms(init_model(scfg, 10, sr), batch)));
  }
  const double gdu_med = median(gdu_ratios);
  const double srn_med = median(srn_ratios);
  report(7, gdu_med > srn_med && gdu_med > 1e-6 && srn_med < 1e-3,
         fmt("untrained T=784 K=100, 10 paired seeds: median ||eps_1||/||eps_T|| "
             "gdu %.3e (> 1e-6) vs srn %.3e (< 1e-3)",
             gdu_med, srn_med));
}

// ---- 8: pixel-sequence task -------------------------------------------------

void criterion_8() {
  // (a) IDX ingestion round trip and permutation bijection
  Rng rng(88);
  const fs::path dir = "/tmp/gdu_accept_idx";
  fs::create_directories(dir);
  const tasks::MnistSet made = tasks::synthetic_digits(rng, 256);
  tasks::write_mnist_idx((dir / "train-images-idx3-ubyte").string(),
                         (dir / "train-labels-idx1-ubyte").string(), made);
  const tasks::MnistSet loaded =
      tasks::load_mnist_idx((dir / "train-images-idx3-ubyte").string(),
                            (dir / "train-labels-idx1-ubyte").string());
  const bool round_trip =
      loaded.images.data == made.images.data && loaded.labels == made.labels;

  const auto perm = tasks::random_permutation(rng, 784);
  const auto inv = tasks::invert_permutation(perm);
  const tasks::MnistSet once = tasks::permute_pixels(loaded, perm);
  const tasks::MnistSet back = tasks::permute_pixels(once, inv);
  bool bijection = back.images.data == loaded.images.data;
  std::vector<bool> seen(perm.size(), false);
  for (const std::size_t p : perm) {
    if (p >= perm.size() || seen[p]) bijection = false;
    else seen[p] = true;
  }
  fs::remove_all(dir);

  // (b) end-to-end learning at T=784: 3 epochs on a fixed 5000-image subset.
  // Real IDX files are used when MNIST_DATA_DIR is set; otherwise the
  // synthetic glyph corpus stands in (written and re-read through the same
  // IDX pipeline above).
  harness::TaskSpec tspec;
  tspec.name = "pmnist";
  tspec.data_seed = kDataSeed;
  tspec.subset_n = 5000;
  tspec.test_subset_n = 1000;
  const char* env = std::getenv("MNIST_DATA_DIR");
  std::string source;
  if (env && *env) {
    tspec.mnist_dir = env;
    source = std::string("idx files from ") + env;
  } else {
    tspec.synthetic_n = 5000;
    source = "synthetic glyph corpus (MNIST_DATA_DIR unset)";
  }
  const auto task = harness::make_task(tspec);

  harness::ModelSpec mspec;
  mspec.kind = CellKind::gdu;
  mspec.groups = "4x32";
  const CellConfig cfg = harness::make_cell_config(mspec, task->input_size());

  TrainConfig tc;
  tc.batch_size = 100;
  const long long per_epoch = 5000 / 100;
  tc.max_steps = 3 * per_epoch;
  tc.eval_every = per_epoch;
  tc.stop = StopRule::none;
  tc.seed = 1;
  Rng init_rng(tc.seed);
  Model model = init_model(cfg, task->output_size(), init_rng);
  const TrainResult tr = train(std::move(model), *task, tc);
  const double acc = tr.metrics.empty() ? 0.0 : tr.metrics.back().test_metric;

  report(8, round_trip && bijection && acc > 0.5,
         fmt("idx round-trip %s, permutation bijection %s; gdu(4x32) 3 epochs on "
             "5000-image subset (%s): test accuracy %.4f (> 0.5)",
             round_trip ? "ok" : "FAILED", bijection ? "ok" : "FAILED", source.c_str(),
             acc));
}

// ---- 9: grammar oracle -------------------------------------------------------

void criterion_9() {
  const auto example = tasks::parse_reber_string("BTBPVVEBTSXSEBTXXVVETE");
  const bool example_ok = tasks::merg_validate(example, 3);

  bool lengths_ok = true;
  std::string detail;
  for (const auto& [m, want] : {std::pair<std::size_t, std::size_t>{10, 54},
                                {20, 104},
                                {40, 204}}) {
    const auto minimal = tasks::merg_minimal_string(m);
    const bool ok = minimal.size() == want && tasks::merg_validate(minimal, m);
    lengths_ok = lengths_ok && ok;
    detail += fmt("m=%zu len %zu; ", m, minimal.size());
  }
  report(9, example_ok && lengths_ok,
         fmt("published 3-embedded example validates: %s; minimal lengths %s(want "
             "54/104/204)",
             example_ok ? "yes" : "NO", detail.c_str()));
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
      only = std::atoi(argv[i + 1]);
  }

  using CriterionFn = void (*)();
  const CriterionFn criteria[] = {criterion_1, criterion_2, criterion_3, criterion_4,
                                  criterion_5, criterion_6, criterion_7, criterion_8,
                                  criterion_9};
  for (int i = 0; i < 9; ++i) {
    if (only != 0 && only != i + 1) continue;
    criteria[i]();
  }
  return failures == 0 ? 0 : 1;
}
