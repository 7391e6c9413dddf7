#include "dynshot/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "dynshot/errors.hpp"
#include "dynshot/rng.hpp"

namespace dynshot {

std::string_view to_string(Split split) { return split == Split::train ? "train" : "heldout"; }

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "heldout") return Split::heldout;
  throw DataError("unknown split '" + std::string(text) + "' (expected train or heldout)");
}

FeatureDataset::FeatureDataset(std::size_t dim, std::vector<FeatureClass> classes)
    : dim_(dim), classes_(std::move(classes)) {}

std::size_t FeatureDataset::num_examples() const {
  std::size_t total = 0;
  for (const auto& c : classes_) total += c.size();
  return total;
}

std::vector<std::size_t> FeatureDataset::class_indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].split == split) out.push_back(i);
  }
  return out;
}

void FeatureDataset::validate() const {
  if (dim_ < 1) throw DataError("feature dimension must be >= 1");
  std::set<std::string, std::less<>> ids;
  for (const auto& c : classes_) {
    if (!ids.insert(c.id).second) throw DataError("duplicate class id '" + c.id + "'");
    if (c.examples.rank() != 2 || c.examples.extent(1) != dim_) {
      throw DataError("class '" + c.id + "' has feature shape " + to_string(c.examples.shape()) +
                      ", expected [m, " + std::to_string(dim_) + "]");
    }
    if (c.size() < 2) {
      throw DataError("class '" + c.id + "' has " + std::to_string(c.size()) + " examples; at least 2 required");
    }
    if (!c.examples.all_finite()) throw DataError("class '" + c.id + "' has non-finite features");
  }
}

// ---------------------------------------------------------------------------
// Synthetic clusters

void SynthConfig::validate() const {
  if (num_classes < 1) throw DataError("synthetic data needs at least one class");
  if (examples_per_class < 2) throw DataError("synthetic classes need at least 2 examples");
  if (dim < 1) throw DataError("synthetic feature dimension must be >= 1");
  if (!(center_scale > 0.0)) throw DataError("center_scale must be > 0");
  if (!(noise_scale > 0.0)) throw DataError("noise_scale must be > 0");
}

namespace {

std::string class_name(std::size_t i) {
  std::string digits = std::to_string(i);
  return "c" + std::string(digits.size() < 3 ? 3 - digits.size() : 0, '0') + digits;
}

}  // namespace

namespace {

std::vector<Tensor> draw_centers(const SynthConfig& cfg, Rng& rng) {
  std::vector<Tensor> centers;
  centers.reserve(cfg.num_classes);
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    Tensor center({cfg.dim});
    for (double& v : center.values()) v = cfg.center_scale * rng.normal();
    centers.push_back(std::move(center));
  }
  return centers;
}

}  // namespace

std::vector<Tensor> synthetic_centers(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  return draw_centers(cfg, rng);
}

FeatureDataset gen_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::vector<Tensor> centers = draw_centers(cfg, rng);
  std::vector<FeatureClass> classes;
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    Tensor examples({cfg.examples_per_class, cfg.dim});
    for (std::size_t r = 0; r < cfg.examples_per_class; ++r) {
      for (std::size_t d = 0; d < cfg.dim; ++d) examples.at(r, d) = centers[c][d] + cfg.noise_scale * rng.normal();
    }
    classes.push_back({class_name(c), Split::train, std::move(examples)});
  }
  return FeatureDataset(cfg.dim, std::move(classes));
}

// ---------------------------------------------------------------------------
// CSV

namespace {

void append_double(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  out.append(buf, res.ptr);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

double parse_double(std::string_view text, const std::string& where) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw DataError(where + ": cannot parse '" + std::string(text) + "' as a finite number");
  }
  return v;
}

}  // namespace

void write_features(const FeatureDataset& dataset, std::ostream& out) {
  dataset.validate();
  std::string line = "class_id,split";
  for (std::size_t d = 0; d < dataset.dim(); ++d) line += ",f" + std::to_string(d);
  out << line << '\n';
  for (const auto& c : dataset.classes()) {
    for (std::size_t r = 0; r < c.size(); ++r) {
      line = c.id;
      line += ',';
      line += to_string(c.split);
      for (double v : c.examples.row(r)) {
        line += ',';
        append_double(line, v);
      }
      out << line << '\n';
    }
  }
}

void save_features(const FeatureDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write feature file " + path.string());
  write_features(dataset, out);
  if (!out) throw DataError("failed writing feature file " + path.string());
}

FeatureDataset read_features(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty feature file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line);
  if (header.size() < 3 || header[0] != "class_id" || header[1] != "split") {
    throw DataError(source + ":1: malformed header (expected class_id,split,f0,...)");
  }
  const std::size_t dim = header.size() - 2;
  for (std::size_t d = 0; d < dim; ++d) {
    if (header[d + 2] != "f" + std::to_string(d)) {
      throw DataError(source + ":1: malformed header, column " + std::to_string(d + 3) + " should be f" +
                      std::to_string(d));
    }
  }

  struct Pending {
    std::string id;
    Split split;
    std::vector<double> values;
  };
  std::vector<Pending> pending;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto fields = split_fields(line);
    if (fields.size() != dim + 2) {
      throw DataError(where + ": row has " + std::to_string(fields.size() - 2 * (fields.size() >= 2)) +
                      " features, expected " + std::to_string(dim));
    }
    if (fields[0].empty()) throw DataError(where + ": empty class id");
    const Split split = [&] {
      try {
        return parse_split(fields[1]);
      } catch (const DataError& e) {
        throw DataError(where + ": " + e.what());
      }
    }();
    auto it = std::find_if(pending.begin(), pending.end(), [&](const Pending& p) { return p.id == fields[0]; });
    if (it == pending.end()) {
      pending.push_back({std::string(fields[0]), split, {}});
      it = std::prev(pending.end());
    } else if (it->split != split) {
      throw DataError(where + ": class '" + it->id + "' tagged both train and heldout");
    }
    for (std::size_t d = 0; d < dim; ++d) it->values.push_back(parse_double(fields[d + 2], where));
  }

  std::vector<FeatureClass> classes;
  for (auto& p : pending) {
    const std::size_t rows = p.values.size() / dim;
    classes.push_back({p.id, p.split, Tensor({rows, dim}, std::move(p.values))});
  }
  FeatureDataset dataset(dim, std::move(classes));
  try {
    dataset.validate();
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  }
  return dataset;
}

FeatureDataset load_features(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature file " + path.string());
  return read_features(in, path.string());
}

// ---------------------------------------------------------------------------
// Splits and diagnostics

FeatureDataset split_classes(const FeatureDataset& dataset, double heldout_fraction, std::uint64_t seed) {
  if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0)) {
    throw DataError("heldout fraction must lie in (0, 1)");
  }
  const std::size_t total = dataset.classes().size();
  const auto heldout = static_cast<std::size_t>(std::llround(static_cast<double>(total) * heldout_fraction));
  if (heldout < 2 || total - heldout < 2) {
    throw DataError("too few classes to split: " + std::to_string(total) + " classes at fraction " +
                    std::to_string(heldout_fraction) + " leaves fewer than 2 on one side");
  }
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = total - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);

  FeatureDataset out = dataset;
  for (std::size_t k = 0; k < total; ++k) {
    out.classes()[order[k]].split = k < heldout ? Split::heldout : Split::train;
  }
  return out;
}

double nearest_center_accuracy(const FeatureDataset& dataset) {
  const std::size_t dim = dataset.dim();
  const auto& classes = dataset.classes();
  std::vector<std::vector<double>> means(classes.size(), std::vector<double>(dim, 0.0));
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (std::size_t r = 0; r < classes[c].size(); ++r) {
      for (std::size_t d = 0; d < dim; ++d) means[c][d] += classes[c].examples.at(r, d);
    }
    for (double& v : means[c]) v /= static_cast<double>(classes[c].size());
  }
  std::size_t correct = 0, total = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (std::size_t r = 0; r < classes[c].size(); ++r) {
      std::size_t best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < classes.size(); ++k) {
        double dist = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
          const double diff = classes[c].examples.at(r, d) - means[k][d];
          dist += diff * diff;
        }
        if (dist < best_dist) {
          best_dist = dist;
          best = k;
        }
      }
      correct += best == c;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace dynshot
