#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dynshot/tensor.hpp"

namespace dynshot {

enum class Split : std::uint8_t { train, heldout };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct FeatureClass {
  std::string id;
  Split split = Split::train;
  Tensor examples;  // [m, s_v]

  std::size_t size() const { return examples.rank() ? examples.extent(0) : 0; }

  friend bool operator==(const FeatureClass&, const FeatureClass&) = default;
};

// Precomputed feature vectors grouped by class. Class order is significant
// (it fixes sampling order) and is preserved by save/load.
class FeatureDataset {
 public:
  FeatureDataset() = default;
  FeatureDataset(std::size_t dim, std::vector<FeatureClass> classes);

  std::size_t dim() const { return dim_; }
  const std::vector<FeatureClass>& classes() const { return classes_; }
  std::vector<FeatureClass>& classes() { return classes_; }
  std::size_t num_examples() const;
  // Indices of the classes carrying `split`.
  std::vector<std::size_t> class_indices(Split split) const;

  // Throws DataError unless every class has >= 2 examples of width dim and ids are unique.
  void validate() const;

  friend bool operator==(const FeatureDataset&, const FeatureDataset&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<FeatureClass> classes_;
};

struct SynthConfig {
  std::size_t num_classes = 20;
  std::size_t examples_per_class = 12;
  std::size_t dim = 32;
  double center_scale = 1.0;
  double noise_scale = 0.2;
  std::uint64_t seed = 1;

  void validate() const;
};

// Isotropic Gaussian clusters. All centers are drawn first (center_scale * N(0, I)),
// then each class's examples (center + noise_scale * N(0, I)), from one Rng(seed)
// stream. Every class is tagged train.
FeatureDataset gen_synthetic(const SynthConfig& cfg);
// The centers gen_synthetic(cfg) uses, one [dim] tensor per class.
std::vector<Tensor> synthetic_centers(const SynthConfig& cfg);

// CSV: header "class_id,split,f0,...,f{dim-1}", one row per example,
// 17 significant digits per value.
void save_features(const FeatureDataset& dataset, const std::filesystem::path& path);
FeatureDataset load_features(const std::filesystem::path& path);
void write_features(const FeatureDataset& dataset, std::ostream& out);
FeatureDataset read_features(std::istream& in, const std::string& source = "<stream>");

// Tags round(classes * heldout_fraction) randomly chosen classes as heldout and
// the rest as train. Each side must keep at least 2 classes.
FeatureDataset split_classes(const FeatureDataset& dataset, double heldout_fraction, std::uint64_t seed);

// Fraction of examples whose nearest class mean (over all classes) is their own class.
double nearest_center_accuracy(const FeatureDataset& dataset);

}  // namespace dynshot
