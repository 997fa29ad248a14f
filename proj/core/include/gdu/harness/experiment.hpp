// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gdu/harness/metrics.hpp"
#include "gdu/optim.hpp"
#include "gdu/task.hpp"

namespace gdu::harness {

// "2x35+10x3" = 35 groups of size 2 plus 3 groups of size 10. deltas holds
// one value per '+'-clause (applied to every group of that clause); empty
// means 1.0 everywhere.
GroupSpec parse_groups(const std::string& spec, const std::vector<double>& deltas = {});

struct ModelSpec {
  CellKind kind = CellKind::gdu;
  std::size_t units = 100;    // state size for srn/lstm/gru/ugrnn
  std::string groups;         // gdu group syntax; overrides units
  std::vector<double> deltas; // per clause
};

struct TaskSpec {
  std::string name;  // adding | temporal-order | merg | pmnist
  std::size_t length = 200;          // adding / temporal-order
  std::size_t m = 10;                // merg
  std::size_t train_n = 1000;        // merg pool
  std::size_t test_n = 500;          // adding/temporal-order (merg uses 256)
  std::uint64_t data_seed = 13;      // canonical fixed datasets
  // pmnist ingestion: directory with the standard IDX file names, or a
  // synthetic glyph corpus when synthetic_n > 0. subset_n > 0 trims the
  // training set (fixed prefix) for short runs.
  std::string mnist_dir;
  std::size_t synthetic_n = 0;
  std::size_t subset_n = 0;
  std::size_t test_subset_n = 0;
  std::uint64_t permutation_seed = 0x9e37;
};

std::unique_ptr<Task> make_task(const TaskSpec& spec);
CellConfig make_cell_config(const ModelSpec& spec, std::size_t input_size);
StopRule default_stop_rule(const std::string& task_name);
std::size_t default_batch_size(const std::string& task_name);

struct ExperimentSpec {
  TaskSpec task;
  ModelSpec model;
  TrainConfig train;
  std::size_t trials = 1;
  std::vector<std::uint64_t> seeds;  // explicit per-trial seeds; else seed+i
  std::string output_dir;
};

struct TrialSummary {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::optional<long long> stopped_at;
  double final_metric = 0.0;
  double final_sc = -1.0;
  double final_lc = -1.0;
  std::optional<long long> sc_step;
  std::optional<long long> lc_step;
  double wall_ms = 0.0;
};

struct ExperimentResult {
  std::vector<TrialSummary> trials;
};

// Runs trial_count independent seeded trials; writes per-trial metrics
// (csv + jsonl) and checkpoints under output_dir/trial_<i>/, a summary.csv
// across trials and box-whisker statistics of the stop steps.
ExperimentResult run_experiment(const ExperimentSpec& spec);

std::vector<std::uint64_t> trial_seeds(const ExperimentSpec& spec);

}  // namespace gdu::harness
