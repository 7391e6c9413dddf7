// dynshot command-line driver: data generation, training, evaluation grids,
// verification, and assembly benchmarking.
//
// Exit codes: 0 success, 1 verification failure, 2 usage, 3 data/IO, 4 numeric.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dynshot/assembly.hpp"
#include "dynshot/checkpoint.hpp"
#include "dynshot/dataset.hpp"
#include "dynshot/errors.hpp"
#include "dynshot/graph.hpp"
#include "dynshot/manifest.hpp"
#include "dynshot/trainer.hpp"
#include "dynshot/verify.hpp"

namespace fs = std::filesystem;
using namespace dynshot;

namespace {

constexpr const char* kToolVersion = "dynshot 1.0.0";

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kUsage = 2, kDataError = 3, kNumericError = 4 };

std::string join(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
  return out;
}

std::vector<std::size_t> split_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(std::stoull(item));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest <-> config

void put_spec(RunManifest& m, const ModelSpec& spec) {
  m.set("model.feature_dim", std::to_string(spec.feature_dim));
  m.set("model.g.hidden", join(spec.g.hidden_sizes));
  m.set("model.g.embed_dim", std::to_string(spec.g.embed_dim));
  m.set("model.g.activation", std::string(to_string(spec.g.activation)));
  m.set("model.g.symmetrize", spec.g.symmetrize ? "true" : "false");
  m.set("model.f.hidden", join(spec.f.hidden_sizes));
  m.set("model.f.activation", std::string(to_string(spec.f.activation)));
  m.set("model.init_seed", std::to_string(spec.init_seed));
  m.set("model.max_n", std::to_string(spec.max_n));
}

ModelSpec get_spec(const RunManifest& m) {
  ModelSpec spec;
  spec.feature_dim = std::stoull(m.require("model.feature_dim"));
  spec.g.hidden_sizes = split_sizes(m.require("model.g.hidden"));
  spec.g.embed_dim = std::stoull(m.require("model.g.embed_dim"));
  spec.g.activation = parse_activation(m.require("model.g.activation"));
  spec.g.symmetrize = m.require("model.g.symmetrize") == "true";
  spec.f.hidden_sizes = split_sizes(m.require("model.f.hidden"));
  spec.f.activation = parse_activation(m.require("model.f.activation"));
  spec.init_seed = std::stoull(m.require("model.init_seed"));
  spec.max_n = std::stoull(m.require("model.max_n"));
  return spec;
}

void put_train(RunManifest& m, const TrainConfig& cfg) {
  m.set("train.alpha", format_double(cfg.alpha));
  m.set("train.mu", format_double(cfg.mu));
  m.set("train.batch_size", std::to_string(cfg.batch_size));
  m.set("train.momentum", std::string(to_string(cfg.momentum)));
  m.set("train.n_min", std::to_string(cfg.n_min));
  m.set("train.n_max", std::to_string(cfg.n_max));
  m.set("train.steps", std::to_string(cfg.steps));
  m.set("train.seed", std::to_string(cfg.seed));
  m.set("train.execution", std::string(to_string(cfg.execution)));
}

TrainConfig get_train(const RunManifest& m) {
  TrainConfig cfg;
  cfg.alpha = std::stod(m.require("train.alpha"));
  cfg.mu = std::stod(m.require("train.mu"));
  cfg.batch_size = std::stoull(m.require("train.batch_size"));
  cfg.momentum = parse_momentum(m.require("train.momentum"));
  cfg.n_min = std::stoull(m.require("train.n_min"));
  cfg.n_max = std::stoull(m.require("train.n_max"));
  cfg.steps = std::stoull(m.require("train.steps"));
  cfg.seed = std::stoull(m.require("train.seed"));
  cfg.execution = parse_execution(m.require("train.execution"));
  return cfg;
}

RunManifest base_manifest(const std::string& command) {
  RunManifest m;
  m.set("tool.version", kToolVersion);
  m.set("tool.command", command);
  m.set("checkpoint.format", "DYNP v" + std::to_string(kCheckpointVersion));
  return m;
}

// Widths recovered from checkpoint shapes, for checkpoints without a manifest.
ModelSpec infer_spec(const std::vector<NamedTensor>& tensors) {
  auto shape_of = [&](const std::string& name) -> const Shape* {
    for (const auto& t : tensors) {
      if (t.name == name) return &t.value.shape();
    }
    return nullptr;
  };
  auto layers = [&](const std::string& prefix) {
    std::vector<Shape> out;
    for (std::size_t k = 0;; ++k) {
      const Shape* s = shape_of(prefix + "/layer" + std::to_string(k) + "/W");
      if (!s) break;
      out.push_back(*s);
    }
    if (out.size() < 2) throw DataError("checkpoint lacks a complete '" + prefix + "' network");
    return out;
  };
  const auto g = layers("g");
  const auto f = layers("f");
  ModelSpec spec;
  spec.feature_dim = g.front()[1] / 2;
  spec.g.hidden_sizes.clear();
  for (std::size_t k = 0; k + 1 < g.size(); ++k) spec.g.hidden_sizes.push_back(g[k][0]);
  spec.g.embed_dim = g.back()[0];
  spec.f.hidden_sizes.clear();
  for (std::size_t k = 0; k + 1 < f.size(); ++k) spec.f.hidden_sizes.push_back(f[k][0]);
  return spec;
}

// Shared model-architecture flags.
struct ArchFlags {
  std::vector<std::size_t> g_hidden{64};
  std::size_t embed_dim = 32;
  std::vector<std::size_t> f_hidden{64};
  std::string activation = "relu";
  bool no_symmetrize = false;
  std::size_t max_n = 32;

  void add(CLI::App* app) {
    app->add_option("--g-hidden", g_hidden, "Hidden widths of the pairwise network g")->delimiter(',');
    app->add_option("--embed-dim", embed_dim, "Class-embedding width produced by g");
    app->add_option("--f-hidden", f_hidden, "Hidden widths of the metric network f")->delimiter(',');
    app->add_option("--activation", activation, "Hidden activation for g and f")
        ->check(CLI::IsMember({"relu", "tanh"}));
    app->add_flag("--no-symmetrize", no_symmetrize, "Use g(a,b) only instead of averaging g(a,b) and g(b,a)");
    app->add_option("--max-n", max_n, "Largest support size the model cache will assemble");
  }

  ModelSpec spec(std::size_t feature_dim, std::uint64_t seed) const {
    ModelSpec s;
    s.feature_dim = feature_dim;
    s.g.hidden_sizes = g_hidden;
    s.g.embed_dim = embed_dim;
    s.g.activation = parse_activation(activation);
    s.g.symmetrize = !no_symmetrize;
    s.f.hidden_sizes = f_hidden;
    s.f.activation = s.g.activation;
    s.init_seed = seed;
    s.max_n = max_n;
    return s;
  }
};

struct OptFlags {
  std::size_t steps = 1000;
  std::size_t batch = 128;
  double alpha = 0.001;
  double mu = 0.9;
  std::string momentum = "classic";
  std::uint64_t seed = 1;
  std::string execution = "parallel";

  void add(CLI::App* app) {
    app->add_option("--steps", steps, "Optimizer steps");
    app->add_option("--batch", batch, "Episodes per optimizer step");
    app->add_option("--alpha", alpha, "Learning rate");
    app->add_option("--mu", mu, "Momentum coefficient");
    app->add_option("--momentum", momentum, "Momentum scheme")->check(CLI::IsMember({"classic", "nesterov"}));
    app->add_option("--seed", seed, "Seed for initial weights and episode sampling");
    app->add_option("--exec", execution, "Episode kernels")->check(CLI::IsMember({"serial", "parallel"}));
  }

  TrainConfig config(std::size_t n_min, std::size_t n_max) const {
    TrainConfig cfg;
    cfg.steps = steps;
    cfg.batch_size = batch;
    cfg.alpha = alpha;
    cfg.mu = mu;
    cfg.momentum = parse_momentum(momentum);
    cfg.seed = seed;
    cfg.n_min = n_min;
    cfg.n_max = n_max;
    cfg.execution = parse_execution(execution);
    return cfg;
  }
};

template <typename Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  writer(out);
  if (!out) throw DataError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataArgs {
  SynthConfig synth;
  double heldout = 0.3;
  std::uint64_t split_seed = 0;
  std::string out;
};

int cmd_gen_data(const GenDataArgs& args) {
  FeatureDataset data = gen_synthetic(args.synth);
  if (args.heldout > 0.0) data = split_classes(data, args.heldout, args.split_seed ? args.split_seed : args.synth.seed);
  save_features(data, args.out);
  std::cout << "wrote " << data.num_examples() << " rows (" << data.classes().size() << " classes, "
            << data.class_indices(Split::heldout).size() << " heldout) to " << args.out
            << "; nearest-center accuracy " << nearest_center_accuracy(data) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data;
  std::optional<std::size_t> fixed_shot;
  std::vector<std::size_t> shot_range;
  ArchFlags arch;
  OptFlags opt;
  std::string checkpoint;
  std::string history;
  std::string manifest;
  std::string from_manifest;
};

int cmd_train(const TrainArgs& args) {
  RunManifest manifest = base_manifest("train");
  ModelSpec spec;
  TrainConfig cfg;
  std::string data_path = args.data;
  std::string checkpoint = args.checkpoint;
  std::string history_path = args.history;

  if (!args.from_manifest.empty()) {
    const RunManifest src = RunManifest::read(args.from_manifest);
    spec = get_spec(src);
    cfg = get_train(src);
    if (data_path.empty()) data_path = src.require("data.path");
    // Recorded output paths apply only when the checkpoint is not redirected.
    if (checkpoint.empty()) {
      checkpoint = src.get("out.checkpoint").value_or("");
      if (history_path.empty()) history_path = src.get("out.history").value_or("");
    }
  } else {
    if (data_path.empty()) throw CLI::RequiredError("--data");
    std::size_t n_min = 2, n_max = 5;
    if (args.fixed_shot) {
      n_min = n_max = *args.fixed_shot;
    } else if (!args.shot_range.empty()) {
      n_min = args.shot_range[0];
      n_max = args.shot_range[1];
    }
    cfg = args.opt.config(n_min, n_max);
    spec = args.arch.spec(0, cfg.seed);
  }
  if (checkpoint.empty()) throw CLI::RequiredError("--checkpoint");
  if (history_path.empty()) history_path = checkpoint + ".history.csv";
  const std::string manifest_path = args.manifest.empty() ? checkpoint + ".manifest" : args.manifest;

  const FeatureDataset data = load_features(data_path);
  if (spec.feature_dim == 0) spec.feature_dim = data.dim();
  cfg.validate();
  spec.validate();

  manifest.set("data.path", data_path);
  manifest.set("data.dim", std::to_string(data.dim()));
  put_spec(manifest, spec);
  put_train(manifest, cfg);
  manifest.set("out.checkpoint", checkpoint);
  manifest.set("out.history", history_path);
  manifest.write(manifest_path);

  ModelCache cache(spec);
  const auto start = std::chrono::steady_clock::now();
  const TrainingHistory history = train(cache, data, cfg);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  save_checkpoint(cache.registry(), checkpoint);
  write_file(history_path, [&](std::ostream& out) { write_history_csv(history, out); });
  const std::size_t tail = std::min<std::size_t>(50, history.steps());
  std::cout << "trained " << history.steps() << " steps in " << seconds << "s; final " << tail
            << "-step mean loss " << history.mean_loss(history.steps() - tail, history.steps()) << "\n"
            << "checkpoint " << checkpoint << ", history " << history_path << ", manifest " << manifest_path << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::string data;
  std::vector<std::string> models;
  std::vector<std::size_t> eval_sizes{2, 3, 4, 5};
  std::size_t episodes = 1000;
  std::uint64_t seed = 1;
  std::string exec = "parallel";
  std::string out_csv;
  std::string out_text;
};

int cmd_report(const ReportArgs& args) {
  const FeatureDataset data = load_features(args.data);
  const Execution exec = parse_execution(args.exec);
  ResultGrid grid;
  grid.eval_sizes = args.eval_sizes;

  for (const auto& path : args.models) {
    if (!fs::exists(path)) throw DataError("missing checkpoint " + path);
    const auto tensors = load_checkpoint(path);
    ModelSpec spec;
    GridRow row;
    const fs::path manifest_path = path + ".manifest";
    if (fs::exists(manifest_path)) {
      const RunManifest m = RunManifest::read(manifest_path);
      spec = get_spec(m);
      row.n_min = std::stoull(m.require("train.n_min"));
      row.n_max = std::stoull(m.require("train.n_max"));
      row.steps.push_back(std::stoull(m.require("train.steps")));
      row.label = row.dynamic() ? "dynamic" : std::to_string(row.n_min) + "-shot";
    } else {
      spec = infer_spec(tensors);
      row.label = fs::path(path).stem().string();
    }
    ModelCache cache(spec);
    cache.ensure_parameters();
    apply_checkpoint(cache.registry(), tensors);
    for (std::size_t n_eval : args.eval_sizes) {
      Rng rng(derive_seed(derive_seed(args.seed, "eval-heldout"), n_eval));
      row.heldout.push_back({evaluate(cache, data, n_eval, args.episodes, rng, Split::heldout, exec)});
    }
    grid.rows.push_back(std::move(row));
  }

  const std::string text = format_grid_text(grid);
  std::cout << text;
  if (!args.out_csv.empty()) write_file(args.out_csv, [&](std::ostream& out) { write_grid_csv(grid, out); });
  if (!args.out_text.empty()) write_file(args.out_text, [&](std::ostream& out) { out << text; });
  return kOk;
}

// ---------------------------------------------------------------------------
// grid

struct GridArgs {
  std::string data;
  std::vector<std::size_t> train_sizes{2, 3, 4, 5};
  std::vector<std::size_t> eval_sizes{2, 3, 4, 5};
  std::vector<std::size_t> shot_range{2, 5};
  std::vector<std::uint64_t> seeds{1};
  std::size_t episodes = 1000;
  bool no_dynamic = false;
  bool measure_train = false;
  ArchFlags arch;
  OptFlags opt;
  std::string out_csv;
  std::string out_text;
  std::string manifest;
};

int cmd_grid(const GridArgs& args) {
  const FeatureDataset data = load_features(args.data);
  const TrainConfig cfg = args.opt.config(args.shot_range[0], args.shot_range[1]);
  const ModelSpec spec = args.arch.spec(data.dim(), cfg.seed);
  GridSpec gs;
  gs.train_sizes = args.train_sizes;
  gs.eval_sizes = args.eval_sizes;
  gs.seeds = args.seeds;
  gs.eval_episodes = args.episodes;
  gs.include_dynamic = !args.no_dynamic;
  gs.measure_train_split = args.measure_train;

  if (!args.manifest.empty()) {
    RunManifest m = base_manifest("grid");
    m.set("data.path", args.data);
    put_spec(m, spec);
    put_train(m, cfg);
    m.set("grid.train_sizes", join(gs.train_sizes));
    m.set("grid.eval_sizes", join(gs.eval_sizes));
    std::string seeds;
    for (std::size_t i = 0; i < gs.seeds.size(); ++i) seeds += (i ? "," : "") + std::to_string(gs.seeds[i]);
    m.set("grid.seeds", seeds);
    m.set("grid.eval_episodes", std::to_string(gs.eval_episodes));
    m.set("grid.include_dynamic", gs.include_dynamic ? "true" : "false");
    m.write(args.manifest);
  }

  const ResultGrid grid = run_grid(data, spec, cfg, gs);
  const std::string text = format_grid_text(grid);
  std::cout << text;
  if (gs.measure_train_split) {
    for (const auto& row : grid.rows) {
      std::cout << row.label << ": train " << row.overall_train_mean() << " heldout " << row.overall_mean()
                << " gap " << row.overall_train_mean() - row.overall_mean() << "\n";
    }
  }
  if (!args.out_csv.empty()) write_file(args.out_csv, [&](std::ostream& out) { write_grid_csv(grid, out); });
  if (!args.out_text.empty()) write_file(args.out_text, [&](std::ostream& out) { out << text; });
  return kOk;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyArgs {
  std::vector<std::string> only;
  std::uint64_t seed = 17;
  std::string sabotage;
};

int cmd_verify(const VerifyArgs& args) {
  if (args.sabotage == "mean-to-sum") testing::set_mean_as_sum(true);
  VerifyOptions options;
  options.only = args.only;
  options.seed = args.seed;
  const auto results = run_verification(options);
  testing::set_mean_as_sum(false);

  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.group << ": " << r.name << " (" << r.seconds << "s) "
              << r.detail << "\n";
    ok = ok && r.passed;
  }
  std::cout << (ok ? "all checks passed" : "verification FAILED") << "\n";
  return ok ? kOk : kVerifyFailed;
}

// ---------------------------------------------------------------------------
// bench-assembly

struct BenchArgs {
  std::size_t n_min = 2;
  std::size_t n_max = 16;
  std::size_t dim = 32;
  std::size_t repeats = 5;
  ArchFlags arch;
  std::string out;
};

int cmd_bench_assembly(const BenchArgs& args) {
  ModelSpec spec = args.arch.spec(args.dim, 1);
  spec.max_n = std::max(spec.max_n, args.n_max);
  std::ostringstream csv;
  csv << "n,g_instances,node_count,param_count,assemble_micros\n";
  auto registry = std::make_shared<ParameterRegistry>();
  assemble(registry, 2, spec);  // registers parameters so timings measure graph construction only
  for (std::size_t n = args.n_min; n <= args.n_max; ++n) {
    double best = 0.0;
    Census census;
    for (std::size_t r = 0; r < std::max<std::size_t>(1, args.repeats); ++r) {
      const auto start = std::chrono::steady_clock::now();
      const AssembledModel model = assemble(registry, n, spec);
      const double micros =
          std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
      best = r == 0 ? micros : std::min(best, micros);
      census = assembly_census(model);
    }
    csv << n << ',' << census.g_instances << ',' << census.node_count << ',' << census.param_count << ','
        << format_double(best) << '\n';
  }
  if (args.out.empty()) {
    std::cout << csv.str();
  } else {
    write_file(args.out, [&](std::ostream& out) { out << csv.str(); });
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot membership classifier with per-size graph assembly over shared weights"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic feature-cluster dataset (CSV)");
  gen_cmd->add_option("--classes", gen.synth.num_classes, "Number of classes");
  gen_cmd->add_option("--per-class", gen.synth.examples_per_class, "Examples per class");
  gen_cmd->add_option("--dim", gen.synth.dim, "Feature dimension");
  gen_cmd->add_option("--center-scale", gen.synth.center_scale, "Spread of class centers");
  gen_cmd->add_option("--noise-scale", gen.synth.noise_scale, "Spread of examples around their center");
  gen_cmd->add_option("--seed", gen.synth.seed, "Generator seed");
  gen_cmd->add_option("--heldout", gen.heldout, "Fraction of classes tagged heldout (0 disables)");
  gen_cmd->add_option("--split-seed", gen.split_seed, "Seed for the class split (defaults to --seed)");
  gen_cmd->add_option("--out", gen.out, "Output CSV path")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a DYNP checkpoint");
  train_cmd->add_option("--data", tr.data, "Feature CSV");
  auto* fixed = train_cmd->add_option("--fixed-shot", tr.fixed_shot, "Train on one support size only");
  auto* range = train_cmd->add_option("--shot-range", tr.shot_range, "Random support size per batch, inclusive")
                    ->expected(2);
  fixed->excludes(range);
  tr.arch.add(train_cmd);
  tr.opt.add(train_cmd);
  train_cmd->add_option("--checkpoint", tr.checkpoint, "Output checkpoint path");
  train_cmd->add_option("--history", tr.history, "Output history CSV (default <checkpoint>.history.csv)");
  train_cmd->add_option("--manifest", tr.manifest, "Output manifest (default <checkpoint>.manifest)");
  train_cmd->add_option("--from-manifest", tr.from_manifest, "Re-run the configuration recorded in a manifest");

  ReportArgs rep;
  auto* report_cmd = app.add_subcommand("report", "Evaluate checkpoints across support sizes");
  report_cmd->add_option("--data", rep.data, "Feature CSV")->required();
  report_cmd->add_option("--model", rep.models, "Checkpoint path (repeatable; rows in given order)")->required();
  report_cmd->add_option("--eval-sizes", rep.eval_sizes, "Support sizes to evaluate")->delimiter(',');
  report_cmd->add_option("--episodes", rep.episodes, "Episodes per cell");
  report_cmd->add_option("--seed", rep.seed, "Evaluation seed");
  report_cmd->add_option("--exec", rep.exec, "Episode kernels")->check(CLI::IsMember({"serial", "parallel"}));
  report_cmd->add_option("--out-csv", rep.out_csv, "Grid CSV path");
  report_cmd->add_option("--out-text", rep.out_text, "Aligned text table path");

  GridArgs grid;
  auto* grid_cmd = app.add_subcommand("grid", "Train fixed-size and dynamic models, then evaluate the size grid");
  grid_cmd->add_option("--data", grid.data, "Feature CSV")->required();
  grid_cmd->add_option("--train-sizes", grid.train_sizes, "Fixed-shot baselines")->delimiter(',');
  grid_cmd->add_option("--eval-sizes", grid.eval_sizes, "Evaluation support sizes")->delimiter(',');
  grid_cmd->add_option("--shot-range", grid.shot_range, "Dynamic model's support-size range")->expected(2);
  grid_cmd->add_option("--seeds", grid.seeds, "Seeds to average over")->delimiter(',');
  grid_cmd->add_option("--episodes", grid.episodes, "Evaluation episodes per cell");
  grid_cmd->add_flag("--no-dynamic", grid.no_dynamic, "Omit the dynamic row");
  grid_cmd->add_flag("--measure-train", grid.measure_train, "Also report accuracy on training classes");
  grid.arch.add(grid_cmd);
  grid.opt.add(grid_cmd);
  grid_cmd->add_option("--out-csv", grid.out_csv, "Grid CSV path");
  grid_cmd->add_option("--out-text", grid.out_text, "Aligned text table path");
  grid_cmd->add_option("--manifest", grid.manifest, "Write a run manifest here before training");

  VerifyArgs ver;
  auto* verify_cmd = app.add_subcommand("verify", "Run the built-in invariant suite");
  verify_cmd->add_option("--only", ver.only, "Restrict to these check groups")
      ->check(CLI::IsMember(verification_groups()));
  verify_cmd->add_option("--seed", ver.seed, "Seed for random inputs");
#ifdef DYNSHOT_MUTATION_HOOKS
  verify_cmd->add_option("--break", ver.sabotage, "Negative control: sabotage an operation")
      ->check(CLI::IsMember({"mean-to-sum"}));
#endif

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench-assembly", "Time per-size graph assembly (CSV)");
  bench_cmd->add_option("--n-min", bench.n_min, "Smallest support size");
  bench_cmd->add_option("--n-max", bench.n_max, "Largest support size");
  bench_cmd->add_option("--dim", bench.dim, "Feature dimension");
  bench_cmd->add_option("--repeats", bench.repeats, "Assemblies per size; the fastest is reported");
  bench.arch.add(bench_cmd);
  bench_cmd->add_option("--out", bench.out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*train_cmd) return cmd_train(tr);
    if (*report_cmd) return cmd_report(rep);
    if (*grid_cmd) return cmd_grid(grid);
    if (*verify_cmd) return cmd_verify(ver);
    if (*bench_cmd) return cmd_bench_assembly(bench);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const GraphError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
