// SPDX-License-Identifier: Apache-2.0
//
// Experiment front door. Subcommands:
//   train        run seeded training trials, emit metrics/checkpoints
//   param-count  exact and K-rounded parameter counts for a model/task pair
//   probe-norms  back-propagated error-signal norms per time step
//   dump-gates   keep-gate activations over one sequence as a K x T matrix
//   gen-data     write dataset caches (or synthetic IDX images) to disk
//   grad-check   finite-difference validation of the analytic gradients
//
// Exit codes: 0 success, 1 check failed, 2 usage, 3 numeric fault, 4 I/O.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gdu/errors.hpp"
#include "gdu/harness/experiment.hpp"
#include "gdu/harness/gradcheck.hpp"
#include "gdu/harness/metrics.hpp"
#include "gdu/harness/probes.hpp"
#include "gdu/optim.hpp"
#include "gdu/tasks/adding.hpp"
#include "gdu/tasks/dataset_io.hpp"
#include "gdu/tasks/mnist.hpp"
#include "gdu/tasks/reber.hpp"
#include "gdu/tasks/temporal_order.hpp"

namespace fs = std::filesystem;
using gdu::CellKind;
using gdu::harness::ExperimentSpec;
using gdu::harness::ModelSpec;
using gdu::harness::TaskSpec;

namespace {

struct TrainCli {
  TaskSpec task;
  ModelSpec model;
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds;
  long long max_steps = 10000;
  long long eval_every = 0;  // 0 = task default
  std::size_t batch_size = 0;
  double lr = 1e-3;
  std::string stop = "auto";
  double stop_threshold = 0.002;
  std::string out = "runs/out";
  std::string config_file;
};

std::pair<std::size_t, std::size_t> task_dimensions(const std::string& name) {
  if (name == "adding") return {2, 1};
  if (name == "temporal-order") return {6, 8};
  if (name == "merg") return {7, 7};
  if (name == "pmnist") return {1, 10};
  throw gdu::ConfigError("unknown task: " + name);
}

void add_model_flags(CLI::App* cmd, ModelSpec& model) {
  cmd->add_option("--model", [&model](const std::vector<std::string>& vals) {
        model.kind = gdu::cell_kind_from_string(vals.back());
        return true;
      },
      "Cell kind: srn | lstm | gru | ugrnn | gdu")
      ->type_name("KIND");
  cmd->add_option("--units", model.units, "State size for srn/lstm/gru/ugrnn");
  cmd->add_option("--groups", model.groups,
                  "gdu groups as SIZExCOUNT[+SIZExCOUNT...], e.g. 2x35+10x3");
  cmd->add_option("--delta", model.deltas,
                  "Overwrite budget per group clause (default 1 each)")
      ->delimiter(',');
}

void add_task_flags(CLI::App* cmd, TaskSpec& task) {
  cmd->add_option("--task", task.name, "adding | temporal-order | merg | pmnist")
      ->required();
  cmd->add_option("--len", task.length, "Sequence length (adding, temporal-order)");
  cmd->add_option("--m", task.m, "Embedded string count (merg)");
  cmd->add_option("--test-n", task.test_n, "Test set size (adding, temporal-order)");
  cmd->add_option("--train-n", task.train_n, "Training pool size (merg)");
  cmd->add_option("--data-seed", task.data_seed, "Seed for dataset generation");
  cmd->add_option("--mnist-dir", task.mnist_dir,
                  "Directory with IDX files (defaults to $MNIST_DATA_DIR)");
  cmd->add_option("--synthetic-n", task.synthetic_n,
                  "pmnist: use N synthetic glyph images instead of IDX files");
  cmd->add_option("--subset-n", task.subset_n, "pmnist: cap training images");
  cmd->add_option("--test-subset-n", task.test_subset_n, "pmnist: cap test images");
  cmd->add_option("--perm-seed", task.permutation_seed, "Pixel permutation seed");
}

void finalize_task(TaskSpec& task) {
  if (task.name == "pmnist" && task.mnist_dir.empty()) {
    if (const char* env = std::getenv("MNIST_DATA_DIR")) task.mnist_dir = env;
  }
}

gdu::StopRule parse_stop(const std::string& s, const std::string& task) {
  if (s == "auto") return gdu::harness::default_stop_rule(task);
  if (s == "none") return gdu::StopRule::none;
  if (s == "mse") return gdu::StopRule::mse_below;
  if (s == "accuracy") return gdu::StopRule::accuracy_equals_one;
  if (s == "sclc") return gdu::StopRule::sc_and_lc_equal_one;
  throw gdu::ConfigError("unknown stop rule: " + s);
}

// JSON config mirrors the flags; values present in the file override flags.
void apply_config_file(TrainCli& cli) {
  std::ifstream is(cli.config_file);
  if (!is) throw gdu::IoError("cannot open config file: " + cli.config_file);
  nlohmann::json j;
  is >> j;
  if (j.contains("task")) {
    const auto& t = j["task"];
    if (t.contains("name")) cli.task.name = t["name"];
    if (t.contains("len")) cli.task.length = t["len"];
    if (t.contains("m")) cli.task.m = t["m"];
    if (t.contains("test_n")) cli.task.test_n = t["test_n"];
    if (t.contains("train_n")) cli.task.train_n = t["train_n"];
    if (t.contains("data_seed")) cli.task.data_seed = t["data_seed"];
    if (t.contains("mnist_dir")) cli.task.mnist_dir = t["mnist_dir"];
    if (t.contains("synthetic_n")) cli.task.synthetic_n = t["synthetic_n"];
    if (t.contains("subset_n")) cli.task.subset_n = t["subset_n"];
    if (t.contains("test_subset_n")) cli.task.test_subset_n = t["test_subset_n"];
    if (t.contains("perm_seed")) cli.task.permutation_seed = t["perm_seed"];
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    if (m.contains("kind")) cli.model.kind = gdu::cell_kind_from_string(m["kind"]);
    if (m.contains("units")) cli.model.units = m["units"];
    if (m.contains("groups")) cli.model.groups = m["groups"];
    if (m.contains("delta")) cli.model.deltas = m["delta"].get<std::vector<double>>();
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    if (t.contains("trials")) cli.trials = t["trials"];
    if (t.contains("seed")) cli.seed = t["seed"];
    if (t.contains("seeds")) cli.seeds = t["seeds"].get<std::vector<std::uint64_t>>();
    if (t.contains("max_steps")) cli.max_steps = t["max_steps"];
    if (t.contains("eval_every")) cli.eval_every = t["eval_every"];
    if (t.contains("batch_size")) cli.batch_size = t["batch_size"];
    if (t.contains("lr")) cli.lr = t["lr"];
    if (t.contains("stop")) cli.stop = t["stop"];
    if (t.contains("stop_threshold")) cli.stop_threshold = t["stop_threshold"];
  }
  if (j.contains("out")) cli.out = j["out"];
}

nlohmann::json resolved_config_json(const TrainCli& cli) {
  nlohmann::json j;
  j["task"] = {{"name", cli.task.name},
               {"len", cli.task.length},
               {"m", cli.task.m},
               {"test_n", cli.task.test_n},
               {"train_n", cli.task.train_n},
               {"data_seed", cli.task.data_seed},
               {"mnist_dir", cli.task.mnist_dir},
               {"synthetic_n", cli.task.synthetic_n},
               {"subset_n", cli.task.subset_n},
               {"test_subset_n", cli.task.test_subset_n},
               {"perm_seed", cli.task.permutation_seed}};
  j["model"] = {{"kind", gdu::to_string(cli.model.kind)},
                {"units", cli.model.units},
                {"groups", cli.model.groups},
                {"delta", cli.model.deltas}};
  j["train"] = {{"trials", cli.trials},
                {"seed", cli.seed},
                {"seeds", cli.seeds},
                {"max_steps", cli.max_steps},
                {"eval_every", cli.eval_every},
                {"batch_size", cli.batch_size},
                {"lr", cli.lr},
                {"stop", cli.stop},
                {"stop_threshold", cli.stop_threshold}};
  j["out"] = cli.out;
  return j;
}

int cmd_train(TrainCli& cli) {
  if (!cli.config_file.empty()) apply_config_file(cli);
  finalize_task(cli.task);

  ExperimentSpec spec;
  spec.task = cli.task;
  spec.model = cli.model;
  spec.trials = cli.trials;
  spec.seeds = cli.seeds;
  spec.output_dir = cli.out;
  spec.train.seed = cli.seed;
  spec.train.max_steps = cli.max_steps;
  spec.train.adam.lr = cli.lr;
  spec.train.stop = parse_stop(cli.stop, cli.task.name);
  spec.train.stop_threshold = cli.stop_threshold;
  spec.train.batch_size = cli.batch_size ? cli.batch_size
                                         : gdu::harness::default_batch_size(cli.task.name);
  if (cli.eval_every > 0) {
    spec.train.eval_every = cli.eval_every;
  } else if (cli.task.name == "pmnist") {
    // once per epoch
    const auto task = gdu::harness::make_task(spec.task);
    const auto* pm = dynamic_cast<const gdu::tasks::PmnistTask*>(task.get());
    spec.train.eval_every =
        static_cast<long long>(pm->steps_per_epoch(spec.train.batch_size));
  } else {
    spec.train.eval_every = 50;
  }

  fs::create_directories(spec.output_dir);
  {
    std::ofstream os(fs::path(spec.output_dir) / "config.json", std::ios::trunc);
    os << resolved_config_json(cli).dump(2) << '\n';
  }

  const auto result = gdu::harness::run_experiment(spec);
  for (const auto& t : result.trials) {
    std::printf("trial %zu seed %llu: ", t.trial,
                static_cast<unsigned long long>(t.seed));
    if (t.stopped_at)
      std::printf("stopped at step %lld", static_cast<long long>(*t.stopped_at));
    else
      std::printf("ran to max_steps");
    std::printf(" (final metric %.6g", t.final_metric);
    if (t.final_sc >= 0) std::printf(", sc %.4g, lc %.4g", t.final_sc, t.final_lc);
    std::printf(")\n");
  }
  std::printf("artifacts in %s\n", spec.output_dir.c_str());
  return 0;
}

int cmd_param_count(const std::string& task, ModelSpec& model) {
  const auto [d_in, n_out] = task_dimensions(task);
  const gdu::CellConfig cfg = gdu::harness::make_cell_config(model, d_in);
  const std::size_t exact = gdu::model_param_count(cfg, n_out);
  std::printf("task %s, model %s, state size %zu\n", task.c_str(),
              gdu::to_string(cfg.kind), cfg.state_size);
  std::printf("parameters: %zu (%.1fK)\n", exact, static_cast<double>(exact) / 1000.0);
  return 0;
}

// B=1 slice of a batch row, for single-sequence diagnostics
gdu::Batch batch_row(const gdu::Batch& batch, std::size_t row) {
  gdu::Batch out;
  out.loss = batch.loss;
  out.inputs.reserve(batch.steps());
  for (const auto& x : batch.inputs) {
    gdu::Matrix m(1, x.cols);
    for (std::size_t j = 0; j < x.cols; ++j) m(0, j) = x(row, j);
    out.inputs.push_back(std::move(m));
  }
  if (batch.final_targets.data.size()) {
    out.final_targets = gdu::Matrix(1, batch.final_targets.cols);
    for (std::size_t j = 0; j < batch.final_targets.cols; ++j)
      out.final_targets(0, j) = batch.final_targets(row, j);
  }
  if (!batch.final_classes.empty()) out.final_classes = {batch.final_classes[row]};
  if (!batch.step_classes.empty()) {
    out.step_classes.assign(batch.steps(), std::vector<int>(1));
    for (std::size_t t = 0; t < batch.steps(); ++t)
      out.step_classes[t][0] = batch.step_classes[t][row];
  }
  return out;
}

int cmd_probe_norms(TaskSpec& task, ModelSpec& model,
                    const std::vector<std::string>& checkpoints, bool untrained,
                    std::uint64_t seed, std::size_t rows, const std::string& out_dir) {
  finalize_task(task);
  const auto task_obj = gdu::harness::make_task(task);
  const gdu::Batch batch = task_obj->probe_batch(rows);
  fs::create_directories(out_dir);

  auto emit = [&](const gdu::Model& m, const std::string& tag) {
    const gdu::NormProbe probe = gdu::harness::probe_norms(m, batch);
    const std::string path = out_dir + "/norms_" + tag + ".csv";
    gdu::harness::write_norm_csv(path, probe);
    std::printf("%s: T=%zu ratio ||eps_1||/||eps_T|| = %.6g -> %s\n", tag.c_str(),
                probe.norms.size(), gdu::harness::norm_ratio(probe), path.c_str());
  };

  if (untrained) {
    const gdu::CellConfig cfg =
        gdu::harness::make_cell_config(model, task_obj->input_size());
    gdu::Rng rng(seed);
    emit(gdu::init_model(cfg, task_obj->output_size(), rng), "untrained");
  }
  for (const auto& ck : checkpoints) {
    const gdu::Model m = gdu::load_checkpoint(ck);
    if (m.config.input_size != task_obj->input_size() ||
        m.output_size != task_obj->output_size())
      throw gdu::ConfigError("checkpoint " + ck + " does not fit task " + task.name);
    emit(m, fs::path(ck).stem().string());
  }
  if (!untrained && checkpoints.empty())
    throw gdu::ConfigError("probe-norms: give --checkpoint or --untrained");
  return 0;
}

int cmd_dump_gates(TaskSpec& task, const std::string& checkpoint, std::size_t seq_index,
                   bool beta, const std::string& out_file) {
  finalize_task(task);
  const auto task_obj = gdu::harness::make_task(task);
  const gdu::Model model = gdu::load_checkpoint(checkpoint);
  if (model.config.input_size != task_obj->input_size())
    throw gdu::ConfigError("checkpoint does not fit task " + task.name);
  const gdu::Batch batch = batch_row(task_obj->probe_batch(seq_index + 1), seq_index);
  const gdu::Matrix acts = gdu::harness::gate_activations(model, batch.inputs, beta);
  gdu::harness::write_gate_csv(out_file, acts);
  std::printf("wrote %zu x %zu gate matrix to %s\n", acts.rows, acts.cols,
              out_file.c_str());
  return 0;
}

int cmd_gen_data(TaskSpec& task, std::size_t n, std::uint64_t seed,
                 const std::string& out_dir) {
  finalize_task(task);
  fs::create_directories(out_dir);
  gdu::Rng rng(seed);
  if (task.name == "adding") {
    const auto set = gdu::tasks::gen_adding(rng, task.length, n);
    const std::string path = out_dir + "/adding_L" + std::to_string(task.length) +
                             "_n" + std::to_string(n) + ".bin";
    gdu::tasks::write_adding_cache(path, set, seed, task.length);
    std::printf("wrote %zu instances to %s\n", set.size(), path.c_str());
  } else if (task.name == "temporal-order") {
    const auto set = gdu::tasks::gen_temporal_order(rng, task.length, n);
    const std::string path = out_dir + "/temporal_L" + std::to_string(task.length) +
                             "_n" + std::to_string(n) + ".bin";
    gdu::tasks::write_temporal_order_cache(path, set, seed, task.length);
    std::printf("wrote %zu instances to %s\n", set.size(), path.c_str());
  } else if (task.name == "merg") {
    const auto set = gdu::tasks::gen_merg(rng, task.m, n, false);
    const std::string path = out_dir + "/merg_m" + std::to_string(task.m) + "_n" +
                             std::to_string(n) + ".bin";
    gdu::tasks::write_merg_cache(path, set, seed, task.m);
    std::printf("wrote %zu instances to %s\n", set.size(), path.c_str());
  } else if (task.name == "pmnist") {
    const auto set = gdu::tasks::synthetic_digits(rng, n);
    gdu::tasks::write_mnist_idx(out_dir + "/train-images-idx3-ubyte",
                                out_dir + "/train-labels-idx1-ubyte", set);
    gdu::Rng rng2 = rng.fork();
    const auto test = gdu::tasks::synthetic_digits(rng2, std::max<std::size_t>(n / 5, 1));
    gdu::tasks::write_mnist_idx(out_dir + "/t10k-images-idx3-ubyte",
                                out_dir + "/t10k-labels-idx1-ubyte", test);
    std::printf("wrote synthetic IDX corpus (%zu train / %zu test) to %s\n",
                set.images.rows, test.images.rows, out_dir.c_str());
  } else {
    throw gdu::ConfigError("gen-data: unknown task " + task.name);
  }
  return 0;
}

int cmd_grad_check(const std::string& kind, std::size_t instances, std::size_t t_len,
                   std::size_t k, std::size_t d_in, std::uint64_t seed, double tol) {
  std::vector<CellKind> kinds;
  if (kind == "all")
    kinds = {CellKind::srn, CellKind::lstm, CellKind::gru, CellKind::ugrnn,
             CellKind::gdu};
  else
    kinds = {gdu::cell_kind_from_string(kind)};

  bool ok = true;
  for (CellKind ck : kinds) {
    const auto summary =
        gdu::harness::grad_check_kind(ck, instances, t_len, k, d_in, seed);
    const bool pass = summary.max_rel_err < tol;
    ok = ok && pass;
    std::printf("%-6s %zu instances: max rel err %.3e (worst: %s) %s\n",
                gdu::to_string(ck), summary.instances, summary.max_rel_err,
                summary.worst.c_str(), pass ? "OK" : "FAIL");
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grouped-distributor recurrent network workbench"};
  app.require_subcommand(1);

  // train
  TrainCli train_cli;
  CLI::App* train = app.add_subcommand("train", "Run seeded training trials");
  add_task_flags(train, train_cli.task);
  add_model_flags(train, train_cli.model);
  train->add_option("--trials", train_cli.trials, "Independent trials");
  train->add_option("--seed", train_cli.seed, "Base seed (trial i uses seed+i)");
  train->add_option("--seeds", train_cli.seeds, "Explicit per-trial seeds")
      ->delimiter(',');
  train->add_option("--max-steps", train_cli.max_steps, "Training step budget");
  train->add_option("--eval-every", train_cli.eval_every,
                    "Evaluation cadence in steps (0 = task default)");
  train->add_option("--batch-size", train_cli.batch_size, "0 = task default");
  train->add_option("--lr", train_cli.lr, "Adam learning rate");
  train->add_option("--stop", train_cli.stop,
                    "auto | none | mse | accuracy | sclc");
  train->add_option("--stop-threshold", train_cli.stop_threshold,
                    "Threshold for --stop mse");
  train->add_option("--out", train_cli.out, "Output directory");
  train->add_option("--config", train_cli.config_file,
                    "JSON config; file values win over flags");

  // param-count
  std::string pc_task;
  ModelSpec pc_model;
  CLI::App* pc = app.add_subcommand("param-count", "Print parameter counts");
  pc->add_option("--task", pc_task, "adding | temporal-order | merg | pmnist")
      ->required();
  add_model_flags(pc, pc_model);

  // probe-norms
  TaskSpec pn_task;
  ModelSpec pn_model;
  std::vector<std::string> pn_checkpoints;
  bool pn_untrained = false;
  std::uint64_t pn_seed = 1;
  std::size_t pn_rows = 16;
  std::string pn_out = "runs/norms";
  CLI::App* pn = app.add_subcommand("probe-norms",
                                    "Back-propagated norm ||dL/ds_t|| per step");
  add_task_flags(pn, pn_task);
  add_model_flags(pn, pn_model);
  pn->add_option("--checkpoint", pn_checkpoints, "Checkpoint(s) to probe");
  pn->add_flag("--untrained", pn_untrained, "Probe freshly initialized parameters");
  pn->add_option("--seed", pn_seed, "Init seed for --untrained");
  pn->add_option("--rows", pn_rows, "Evaluation batch rows");
  pn->add_option("--out", pn_out, "Output directory");

  // dump-gates
  TaskSpec dg_task;
  std::string dg_checkpoint;
  std::size_t dg_index = 0;
  bool dg_alpha = false;
  std::string dg_out = "gates.csv";
  CLI::App* dg = app.add_subcommand("dump-gates",
                                    "Keep-gate activations for one test sequence");
  add_task_flags(dg, dg_task);
  dg->add_option("--checkpoint", dg_checkpoint, "Trained checkpoint")->required();
  dg->add_option("--seq-index", dg_index, "Test sequence index");
  dg->add_flag("--alpha", dg_alpha, "Emit the overwrite gate instead of the keep gate");
  dg->add_option("--out", dg_out, "Output CSV path");

  // gen-data
  TaskSpec gd_task;
  std::size_t gd_n = 500;
  std::uint64_t gd_seed = 13;
  std::string gd_out = "data";
  CLI::App* gd = app.add_subcommand("gen-data", "Write dataset caches to disk");
  add_task_flags(gd, gd_task);
  gd->add_option("--n", gd_n, "Instance count");
  gd->add_option("--seed", gd_seed, "Generation seed");
  gd->add_option("--out", gd_out, "Output directory");

  // grad-check
  std::string gc_kind = "all";
  std::size_t gc_instances = 20, gc_t = 10, gc_k = 8, gc_din = 3;
  std::uint64_t gc_seed = 42;
  double gc_tol = 1e-4;
  CLI::App* gc = app.add_subcommand("grad-check",
                                    "Finite-difference gradient validation");
  gc->add_option("--kind", gc_kind, "all | srn | lstm | gru | ugrnn | gdu");
  gc->add_option("--instances", gc_instances, "Random instances per kind");
  gc->add_option("--t", gc_t, "Sequence length");
  gc->add_option("--k", gc_k, "State size");
  gc->add_option("--din", gc_din, "Input size");
  gc->add_option("--seed", gc_seed, "Base seed");
  gc->add_option("--tol", gc_tol, "Max relative error allowed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(train_cli);
    if (*pc) return cmd_param_count(pc_task, pc_model);
    if (*pn)
      return cmd_probe_norms(pn_task, pn_model, pn_checkpoints, pn_untrained, pn_seed,
                             pn_rows, pn_out);
    if (*dg) return cmd_dump_gates(dg_task, dg_checkpoint, dg_index, !dg_alpha, dg_out);
    if (*gd) return cmd_gen_data(gd_task, gd_n, gd_seed, gd_out);
    if (*gc)
      return cmd_grad_check(gc_kind, gc_instances, gc_t, gc_k, gc_din, gc_seed, gc_tol);
  } catch (const gdu::NumericFault& e) {
    std::fprintf(stderr, "numeric fault: %s\n", e.what());
    return 3;
  } catch (const gdu::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  } catch (const gdu::ConfigError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
