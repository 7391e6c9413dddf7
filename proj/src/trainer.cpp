#include "dynshot/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "dynshot/errors.hpp"

namespace dynshot {

void TrainConfig::validate() const {
  optimizer().validate();
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (n_min < 2 || n_min > n_max) {
    throw std::invalid_argument("shot range must satisfy 2 <= n_min <= n_max, got [" + std::to_string(n_min) +
                                ", " + std::to_string(n_max) + "]");
  }
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<Episode> sample_episodes(const FeatureDataset& dataset, Split split, std::size_t n, std::size_t count,
                                     Rng& rng) {
  if (n < 2) throw DataError("support size must be >= 2, got " + std::to_string(n));
  const auto pool = dataset.class_indices(split);
  if (pool.size() < 2) {
    throw DataError("need at least 2 " + std::string(to_string(split)) + " classes to form negatives, have " +
                    std::to_string(pool.size()));
  }
  for (std::size_t c : pool) {
    if (dataset.classes()[c].size() < n + 1) {
      throw DataError("class '" + dataset.classes()[c].id + "' has " + std::to_string(dataset.classes()[c].size()) +
                      " examples, too few for support size " + std::to_string(n) + " plus a query");
    }
  }

  const std::size_t dim = dataset.dim();
  std::vector<Episode> episodes;
  episodes.reserve(count);
  std::vector<std::size_t> order;
  for (std::size_t e = 0; e < count; ++e) {
    const std::uint8_t label = e % 2 == 0 ? 1 : 0;
    const std::size_t pick = rng.index(pool.size());
    const FeatureClass& cls = dataset.classes()[pool[pick]];

    // Partial Fisher-Yates: the first n+1 slots become a uniform draw without replacement.
    order.resize(cls.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t k = 0; k <= n; ++k) std::swap(order[k], order[k + rng.index(cls.size() - k)]);

    Tensor support({n, dim});
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = cls.examples.row(order[r]);
      std::copy(row.begin(), row.end(), support.data() + r * dim);
    }

    Tensor query({dim});
    if (label == 1) {
      const auto row = cls.examples.row(order[n]);
      std::copy(row.begin(), row.end(), query.data());
    } else {
      std::size_t other = rng.index(pool.size() - 1);
      if (other >= pick) ++other;
      const FeatureClass& neg = dataset.classes()[pool[other]];
      const auto row = neg.examples.row(rng.index(neg.size()));
      std::copy(row.begin(), row.end(), query.data());
    }
    episodes.push_back(Episode{ClassSet(std::move(support)), std::move(query), label});
  }
  return episodes;
}

SizedBatch sample_training_batch(const FeatureDataset& dataset, const TrainConfig& cfg, Rng& rng) {
  const std::size_t n = cfg.n_min + rng.index(cfg.n_max - cfg.n_min + 1);
  return SizedBatch{n, sample_episodes(dataset, Split::train, n, cfg.batch_size, rng)};
}

// ---------------------------------------------------------------------------
// Training and evaluation

double TrainingHistory::mean_loss(std::size_t begin, std::size_t end) const {
  end = std::min(end, rows.size());
  if (begin >= end) return 0.0;
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) sum += rows[i].loss;
  return sum / static_cast<double>(end - begin);
}

TrainingHistory train(ModelCache& cache, const FeatureDataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.dim() != cache.spec().feature_dim) {
    throw DataError("dataset feature dimension " + std::to_string(dataset.dim()) + " does not match model's " +
                    std::to_string(cache.spec().feature_dim));
  }
  TrainingHistory history;
  if (cfg.steps == 0) return history;

  cache.ensure_parameters();
  ParameterRegistry& registry = cache.registry();
  OptState state(registry);
  const OptimizerConfig opt = cfg.optimizer();
  Rng rng(derive_seed(cfg.seed, "train-sampler"));
  history.rows.reserve(cfg.steps);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const SizedBatch batch = sample_training_batch(dataset, cfg, rng);
    const AssembledModel& model = cache.get_or_assemble(batch.n);
    const double loss = batch_gradient(model, batch.episodes, registry, cfg.execution);
    if (!std::isfinite(loss)) {
      throw NumericError("non-finite loss at step " + std::to_string(step) + " (n=" + std::to_string(batch.n) + ")");
    }
    optimizer_step(registry, state, opt);
    history.rows.push_back({step, loss, batch.n});
  }
  return history;
}

double evaluate(ModelCache& cache, const FeatureDataset& dataset, std::size_t n_eval, std::size_t num_episodes,
                Rng& rng, Split split, Execution exec) {
  if (num_episodes == 0) throw DataError("empty evaluation (num_episodes = 0)");
  if (n_eval < 2) throw DataError("evaluation support size must be >= 2");
  const auto episodes = sample_episodes(dataset, split, n_eval, num_episodes, rng);
  const AssembledModel& model = cache.get_or_assemble(n_eval);
  const std::size_t correct = count_correct(model, episodes, exec);
  return static_cast<double>(correct) / static_cast<double>(num_episodes);
}

double embedding_spread(ModelCache& cache, const FeatureDataset& dataset, std::size_t n, std::size_t draws,
                        Rng& rng, Split split) {
  if (draws < 2) throw DataError("embedding spread needs at least 2 draws");
  const AssembledModel& model = cache.get_or_assemble(n);
  Activations acts(*model.graph);
  const auto pool = dataset.class_indices(split);
  if (pool.empty()) throw DataError("no classes in split " + std::string(to_string(split)));
  const std::size_t dim = dataset.dim();
  const std::size_t width = cache.spec().g.embed_dim;
  const Tensor query({dim});

  double total = 0.0;
  std::vector<std::size_t> order;
  for (std::size_t c : pool) {
    const FeatureClass& cls = dataset.classes()[c];
    if (cls.size() < n) throw DataError("class '" + cls.id + "' too small for support size " + std::to_string(n));
    std::vector<double> sum(width, 0.0), sum_sq(width, 0.0);
    for (std::size_t d = 0; d < draws; ++d) {
      order.resize(cls.size());
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t k = 0; k < n; ++k) std::swap(order[k], order[k + rng.index(cls.size() - k)]);
      Tensor support({n, dim});
      for (std::size_t r = 0; r < n; ++r) {
        const auto row = cls.examples.row(order[r]);
        std::copy(row.begin(), row.end(), support.data() + r * dim);
      }
      Feeds feeds;
      feeds.set(model.input_c, support).set(model.input_q, query);
      forward(*model.graph, feeds, acts, model.embedding);
      const Tensor& r = acts.value(model.embedding);
      for (std::size_t k = 0; k < width; ++k) {
        sum[k] += r[k];
        sum_sq[k] += r[k] * r[k];
      }
    }
    double var = 0.0;
    for (std::size_t k = 0; k < width; ++k) {
      const double mean = sum[k] / static_cast<double>(draws);
      var += std::max(0.0, sum_sq[k] / static_cast<double>(draws) - mean * mean);
    }
    total += var / static_cast<double>(width);
  }
  return total / static_cast<double>(pool.size());
}

// ---------------------------------------------------------------------------
// Evaluation grid

namespace {

double mean_of_values(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of_values(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of_values(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double overall(const std::vector<std::vector<double>>& cells) {
  if (cells.empty() || cells[0].empty()) return 0.0;
  const std::size_t seeds = cells[0].size();
  double total = 0.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    double row = 0.0;
    for (const auto& col : cells) row += col[s];
    total += row / static_cast<double>(cells.size());
  }
  return total / static_cast<double>(seeds);
}

}  // namespace

double GridRow::mean(std::size_t col) const { return mean_of_values(heldout.at(col)); }
double GridRow::sd(std::size_t col) const { return sd_of_values(heldout.at(col)); }
double GridRow::overall_mean() const { return overall(heldout); }
double GridRow::overall_train_mean() const { return overall(train); }

ResultGrid run_grid(const FeatureDataset& dataset, const ModelSpec& spec, const TrainConfig& cfg_base,
                    const GridSpec& grid) {
  cfg_base.validate();
  if (grid.seeds.empty()) throw std::invalid_argument("grid needs at least one seed");
  if (grid.eval_sizes.empty()) throw std::invalid_argument("grid needs at least one eval size");
  for (std::size_t n : grid.train_sizes) {
    if (n < 2) throw std::invalid_argument("train sizes must be >= 2");
  }
  for (std::size_t n : grid.eval_sizes) {
    if (n < 2) throw std::invalid_argument("eval sizes must be >= 2");
  }

  ResultGrid result;
  result.eval_sizes = grid.eval_sizes;
  for (std::size_t k : grid.train_sizes) {
    result.rows.push_back(GridRow{std::to_string(k) + "-shot", k, k, {}, {}, {}});
  }
  if (grid.include_dynamic) {
    result.rows.push_back(GridRow{"dynamic", cfg_base.n_min, cfg_base.n_max, {}, {}, {}});
  }
  if (result.rows.empty()) throw std::invalid_argument("grid has no models");
  for (auto& row : result.rows) {
    row.heldout.assign(grid.eval_sizes.size(), {});
    if (grid.measure_train_split) row.train.assign(grid.eval_sizes.size(), {});
  }

  for (std::uint64_t seed : grid.seeds) {
    for (auto& row : result.rows) {
      ModelSpec model_spec = spec;
      model_spec.init_seed = seed;
      ModelCache cache(model_spec);
      TrainConfig cfg = cfg_base;
      cfg.seed = seed;
      cfg.n_min = row.n_min;
      cfg.n_max = row.n_max;
      const TrainingHistory history = train(cache, dataset, cfg);
      row.steps.push_back(history.steps());

      for (std::size_t col = 0; col < grid.eval_sizes.size(); ++col) {
        const std::size_t n_eval = grid.eval_sizes[col];
        // Same episodes for every model at a given (seed, size, split).
        Rng heldout_rng(derive_seed(derive_seed(seed, "eval-heldout"), n_eval));
        row.heldout[col].push_back(
            evaluate(cache, dataset, n_eval, grid.eval_episodes, heldout_rng, Split::heldout, cfg.execution));
        if (grid.measure_train_split) {
          Rng train_rng(derive_seed(derive_seed(seed, "eval-train"), n_eval));
          row.train[col].push_back(
              evaluate(cache, dataset, n_eval, grid.eval_episodes, train_rng, Split::train, cfg.execution));
        }
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Serialisation

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_history_csv(const TrainingHistory& history, std::ostream& out) {
  out << "step,loss,n\n";
  for (const auto& row : history.rows) out << row.step << ',' << format_double(row.loss) << ',' << row.n << '\n';
}

TrainingHistory read_history_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "step,loss,n") throw DataError("history CSV: bad header");
  TrainingHistory history;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string step, loss, n;
    if (!std::getline(fields, step, ',') || !std::getline(fields, loss, ',') || !std::getline(fields, n)) {
      throw DataError("history CSV line " + std::to_string(line_no) + ": expected 3 fields");
    }
    HistoryRow row;
    row.step = std::stoull(step);
    std::from_chars(loss.data(), loss.data() + loss.size(), row.loss);
    row.n = std::stoull(n);
    history.rows.push_back(row);
  }
  return history;
}

void write_grid_csv(const ResultGrid& grid, std::ostream& out) {
  out << "train_size,eval_size,mean,sd\n";
  for (const auto& row : grid.rows) {
    const std::string train_size = row.dynamic() ? "dynamic" : std::to_string(row.n_min);
    for (std::size_t col = 0; col < grid.eval_sizes.size(); ++col) {
      out << train_size << ',' << grid.eval_sizes[col] << ',' << format_double(row.mean(col)) << ','
          << format_double(row.sd(col)) << '\n';
    }
  }
}

std::string format_grid_text(const ResultGrid& grid) {
  std::ostringstream out;
  constexpr int label_width = 18;
  constexpr int cell_width = 17;
  out << std::left << std::setw(label_width) << "Eval class size:";
  for (std::size_t n : grid.eval_sizes) out << std::right << std::setw(cell_width) << n;
  out << '\n';
  for (const auto& row : grid.rows) {
    const std::string label = row.dynamic() ? "Dynamic Input" : std::to_string(row.n_min) + "-shot Network";
    out << std::left << std::setw(label_width) << label;
    for (std::size_t col = 0; col < grid.eval_sizes.size(); ++col) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(1) << 100.0 * row.mean(col) << "% +- " << std::setprecision(1)
           << 100.0 * row.sd(col);
      out << std::right << std::setw(cell_width) << cell.str();
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace dynshot
