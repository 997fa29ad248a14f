// SPDX-License-Identifier: Apache-2.0

#include "gdu/harness/experiment.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>

#include "gdu/errors.hpp"
#include "gdu/tasks/adding.hpp"
#include "gdu/tasks/mnist.hpp"
#include "gdu/tasks/reber.hpp"
#include "gdu/tasks/temporal_order.hpp"

namespace gdu::harness {

namespace fs = std::filesystem;

GroupSpec parse_groups(const std::string& spec, const std::vector<double>& deltas) {
  if (spec.empty()) throw ConfigError("parse_groups: empty group spec");
  GroupSpec g;
  std::size_t clause_index = 0;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const std::size_t end = std::min(spec.find('+', pos), spec.size());
    const std::string clause = spec.substr(pos, end - pos);
    const std::size_t x = clause.find('x');
    if (x == std::string::npos || x == 0 || x + 1 >= clause.size())
      throw ConfigError("parse_groups: bad clause '" + clause + "' (want SIZExCOUNT)");
    std::size_t size = 0, count = 0;
    const auto r1 = std::from_chars(clause.data(), clause.data() + x, size);
    const auto r2 =
        std::from_chars(clause.data() + x + 1, clause.data() + clause.size(), count);
    if (r1.ec != std::errc() || r1.ptr != clause.data() + x || r2.ec != std::errc() ||
        r2.ptr != clause.data() + clause.size() || size == 0 || count == 0)
      throw ConfigError("parse_groups: bad clause '" + clause + "'");
    double delta = 1.0;
    if (!deltas.empty()) {
      if (clause_index >= deltas.size())
        throw ConfigError("parse_groups: fewer deltas than clauses");
      delta = deltas[clause_index];
    }
    for (std::size_t i = 0; i < count; ++i) {
      g.sizes.push_back(size);
      g.deltas.push_back(delta);
    }
    ++clause_index;
    if (end == spec.size()) break;
    pos = end + 1;
  }
  if (!deltas.empty() && deltas.size() != clause_index)
    throw ConfigError("parse_groups: more deltas than clauses");
  g.validate();
  return g;
}

std::unique_ptr<Task> make_task(const TaskSpec& spec) {
  if (spec.name == "adding")
    return std::make_unique<tasks::AddingTask>(spec.length, spec.test_n, spec.data_seed);
  if (spec.name == "temporal-order")
    return std::make_unique<tasks::TemporalOrderTask>(spec.length, spec.test_n,
                                                      spec.data_seed);
  if (spec.name == "merg")
    return std::make_unique<tasks::MergTask>(spec.m, spec.train_n, 256, spec.data_seed);
  if (spec.name == "pmnist") {
    tasks::MnistSet train, test;
    if (spec.synthetic_n > 0) {
      Rng rng(spec.data_seed);
      train = tasks::synthetic_digits(rng, spec.synthetic_n);
      test = tasks::synthetic_digits(rng, std::max<std::size_t>(spec.synthetic_n / 5, 1));
    } else {
      if (spec.mnist_dir.empty())
        throw ConfigError(
            "pmnist: no data directory (flag or MNIST_DATA_DIR) and no synthetic "
            "corpus requested");
      train = tasks::load_mnist_idx(spec.mnist_dir + "/train-images-idx3-ubyte",
                                    spec.mnist_dir + "/train-labels-idx1-ubyte");
      test = tasks::load_mnist_idx(spec.mnist_dir + "/t10k-images-idx3-ubyte",
                                   spec.mnist_dir + "/t10k-labels-idx1-ubyte");
    }
    auto trim = [](tasks::MnistSet& set, std::size_t keep) {
      if (keep == 0 || keep >= set.images.rows) return;
      Matrix images(keep, set.images.cols);
      std::copy(set.images.data.begin(),
                set.images.data.begin() + keep * set.images.cols, images.data.begin());
      set.images = std::move(images);
      set.labels.resize(keep);
    };
    trim(train, spec.subset_n);
    trim(test, spec.test_subset_n);
    Rng perm_rng(spec.permutation_seed);
    const auto perm = tasks::random_permutation(perm_rng, train.images.cols);
    return std::make_unique<tasks::PmnistTask>(tasks::permute_pixels(train, perm),
                                               tasks::permute_pixels(test, perm),
                                               spec.data_seed);
  }
  throw ConfigError("unknown task: " + spec.name);
}

CellConfig make_cell_config(const ModelSpec& spec, std::size_t input_size) {
  CellConfig cfg;
  cfg.kind = spec.kind;
  cfg.input_size = input_size;
  if (spec.kind == CellKind::gdu) {
    if (spec.groups.empty())
      throw ConfigError("gdu model requires --groups (e.g. 10x10 or 2x35+10x3)");
    cfg.groups = parse_groups(spec.groups, spec.deltas);
    cfg.state_size = cfg.groups.total_units();
  } else {
    cfg.state_size = spec.units;
  }
  cfg.validate();
  return cfg;
}

StopRule default_stop_rule(const std::string& task_name) {
  if (task_name == "adding") return StopRule::mse_below;
  if (task_name == "temporal-order") return StopRule::accuracy_equals_one;
  if (task_name == "merg") return StopRule::sc_and_lc_equal_one;
  return StopRule::none;
}

std::size_t default_batch_size(const std::string& task_name) {
  if (task_name == "merg") return 1;
  if (task_name == "pmnist") return 100;
  return 20;
}

std::vector<std::uint64_t> trial_seeds(const ExperimentSpec& spec) {
  std::vector<std::uint64_t> seeds;
  if (!spec.seeds.empty()) {
    if (spec.seeds.size() < spec.trials)
      throw ConfigError("run_experiment: fewer --seeds than trials");
    seeds.assign(spec.seeds.begin(), spec.seeds.begin() + spec.trials);
  } else {
    for (std::size_t i = 0; i < spec.trials; ++i)
      seeds.push_back(spec.train.seed + i);
  }
  return seeds;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  if (spec.trials < 1) throw ConfigError("run_experiment: trials must be >= 1");
  const std::unique_ptr<Task> task = make_task(spec.task);
  const CellConfig cell_cfg = make_cell_config(spec.model, task->input_size());

  const std::vector<std::uint64_t> seeds = trial_seeds(spec);
  fs::create_directories(spec.output_dir);

  ExperimentResult result;
  for (std::size_t trial = 0; trial < spec.trials; ++trial) {
    const fs::path trial_dir = fs::path(spec.output_dir) /
                               ("trial_" + std::string(trial < 10 ? "00" : trial < 100 ? "0" : "") +
                                std::to_string(trial));
    fs::create_directories(trial_dir);

    TrainConfig cfg = spec.train;
    cfg.seed = seeds[trial];
    cfg.fault_checkpoint_dir = trial_dir.string();

    Rng init_rng(cfg.seed);
    Model model = init_model(cell_cfg, task->output_size(), init_rng);
    TrainResult tr = train(std::move(model), *task, cfg);

    write_metrics_csv((trial_dir / "metrics.csv").string(), tr.metrics);
    write_metrics_jsonl((trial_dir / "metrics.jsonl").string(), tr.metrics);
    save_checkpoint((trial_dir / "checkpoint.bin").string(), tr.model);

    TrialSummary summary;
    summary.trial = trial;
    summary.seed = seeds[trial];
    summary.stopped_at = tr.stopped_at;
    if (!tr.metrics.empty()) {
      summary.final_metric = tr.metrics.back().test_metric;
      summary.final_sc = tr.metrics.back().sc;
      summary.final_lc = tr.metrics.back().lc;
      summary.wall_ms = tr.metrics.back().wall_ms;
    }
    summary.sc_step = tr.first_sc_step;
    summary.lc_step = tr.first_lc_step;
    result.trials.push_back(summary);
  }

  // summary.csv across trials
  {
    std::ofstream os(fs::path(spec.output_dir) / "summary.csv", std::ios::trunc);
    if (!os) throw IoError("cannot open summary.csv for write");
    os << "trial,seed,stopped_at,final_metric,final_sc,final_lc,sc_step,lc_step,"
          "wall_ms\n";
    for (const auto& s : result.trials) {
      os << s.trial << ',' << s.seed << ',' << (s.stopped_at ? *s.stopped_at : -1) << ','
         << s.final_metric << ',' << s.final_sc << ',' << s.final_lc << ','
         << (s.sc_step ? *s.sc_step : -1) << ',' << (s.lc_step ? *s.lc_step : -1) << ','
         << s.wall_ms << '\n';
    }
  }

  // box-whisker stats over the steps-to-criterion columns
  {
    std::ofstream os(fs::path(spec.output_dir) / "boxstats.csv", std::ios::trunc);
    if (!os) throw IoError("cannot open boxstats.csv for write");
    os << "quantity,n,median,q25,q75,min,max\n";
    auto emit = [&os](const char* name, const std::vector<double>& vals) {
      if (vals.empty()) return;
      const BoxStats b = box_stats(vals);
      os << name << ',' << b.n << ',' << b.median << ',' << b.q25 << ',' << b.q75 << ','
         << b.min << ',' << b.max << '\n';
    };
    std::vector<double> stop, sc, lc;
    for (const auto& s : result.trials) {
      if (s.stopped_at) stop.push_back(static_cast<double>(*s.stopped_at));
      if (s.sc_step) sc.push_back(static_cast<double>(*s.sc_step));
      if (s.lc_step) lc.push_back(static_cast<double>(*s.lc_step));
    }
    emit("stop_step", stop);
    emit("sc_step", sc);
    emit("lc_step", lc);
  }

  return result;
}

}  // namespace gdu::harness
