#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dynshot/assembly.hpp"
#include "dynshot/dataset.hpp"
#include "dynshot/episode.hpp"
#include "dynshot/kernels.hpp"
#include "dynshot/optimizer.hpp"
#include "dynshot/rng.hpp"

namespace dynshot {

struct TrainConfig {
  double alpha = 0.001;
  double mu = 0.9;
  std::size_t batch_size = 128;
  MomentumKind momentum = MomentumKind::classic;
  // Support sizes are drawn uniformly from [n_min, n_max], once per batch.
  std::size_t n_min = 2;
  std::size_t n_max = 5;
  std::size_t steps = 1000;
  std::uint64_t seed = 1;
  Execution execution = Execution::parallel;

  OptimizerConfig optimizer() const { return {alpha, mu, momentum}; }
  void validate() const;
};

// `count` episodes of support size n drawn from the classes tagged `split`.
// Labels alternate member/non-member starting with member, so any even count is
// exactly balanced. Members take the query from the support class (never one of
// the support rows); non-members take it from a different class chosen uniformly.
std::vector<Episode> sample_episodes(const FeatureDataset& dataset, Split split, std::size_t n, std::size_t count,
                                     Rng& rng);

// Draws n once, then batch_size training-split episodes of that size.
SizedBatch sample_training_batch(const FeatureDataset& dataset, const TrainConfig& cfg, Rng& rng);

struct HistoryRow {
  std::size_t step = 0;
  double loss = 0.0;
  std::size_t n = 0;

  friend bool operator==(const HistoryRow&, const HistoryRow&) = default;
};

struct TrainingHistory {
  std::vector<HistoryRow> rows;

  std::size_t steps() const { return rows.size(); }
  // Mean loss over rows [begin, end).
  double mean_loss(std::size_t begin, std::size_t end) const;
};

// One optimizer step per sampled batch, routed through the cache by batch size.
// Deterministic given cfg.seed, the dataset, and the cache's initial parameters.
TrainingHistory train(ModelCache& cache, const FeatureDataset& dataset, const TrainConfig& cfg);

// Accuracy over num_episodes balanced episodes of size n_eval from `split` classes.
double evaluate(ModelCache& cache, const FeatureDataset& dataset, std::size_t n_eval, std::size_t num_episodes,
                Rng& rng, Split split = Split::heldout, Execution exec = Execution::parallel);

// Mean per-coordinate variance of the class embedding across `draws` random
// support sets of one class, averaged over the classes of `split`.
double embedding_spread(ModelCache& cache, const FeatureDataset& dataset, std::size_t n, std::size_t draws,
                        Rng& rng, Split split = Split::heldout);

struct GridSpec {
  std::vector<std::size_t> train_sizes{2, 3, 4, 5};
  std::vector<std::size_t> eval_sizes{2, 3, 4, 5};
  std::vector<std::uint64_t> seeds{1};
  std::size_t eval_episodes = 1000;
  // Adds a row trained over the base config's full [n_min, n_max] range.
  bool include_dynamic = true;
  // Also evaluates every model on training-split classes.
  bool measure_train_split = false;
};

struct GridRow {
  std::string label;  // "2-shot", ..., "dynamic"
  std::size_t n_min = 0;
  std::size_t n_max = 0;
  std::vector<std::vector<double>> heldout;  // [eval size][seed]
  std::vector<std::vector<double>> train;    // same layout, empty unless measured
  std::vector<std::size_t> steps;            // optimizer steps per seed

  bool dynamic() const { return n_min != n_max; }
  double mean(std::size_t col) const;
  double sd(std::size_t col) const;
  // Mean over eval sizes of the per-seed values, then over seeds.
  double overall_mean() const;
  double overall_train_mean() const;
};

struct ResultGrid {
  std::vector<std::size_t> eval_sizes;
  std::vector<GridRow> rows;

  friend bool operator==(const ResultGrid&, const ResultGrid&) = default;
};

inline bool operator==(const GridRow& a, const GridRow& b) {
  return a.label == b.label && a.n_min == b.n_min && a.n_max == b.n_max && a.heldout == b.heldout &&
         a.train == b.train && a.steps == b.steps;
}

// Trains one fixed-size model per train size plus (optionally) one dynamic model,
// each for cfg_base.steps optimizer steps from the same initial weights, and
// evaluates every model at every eval size on identical episodes.
ResultGrid run_grid(const FeatureDataset& dataset, const ModelSpec& spec, const TrainConfig& cfg_base,
                    const GridSpec& grid);

void write_history_csv(const TrainingHistory& history, std::ostream& out);
TrainingHistory read_history_csv(std::istream& in);
void write_grid_csv(const ResultGrid& grid, std::ostream& out);
std::string format_grid_text(const ResultGrid& grid);

std::string format_double(double v);

}  // namespace dynshot
