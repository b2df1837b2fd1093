#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cite/matrix.hpp"

namespace cite {

/// One target domain relative to the source: rotation by `rotation_angle`
/// radians in disjoint random coordinate planes (chosen by rotation_seed),
/// then a translation of length `shift` along a random direction, and noise
/// scaled by `noise_scale`.
struct DomainShift {
  std::uint64_t rotation_seed = 0;
  double rotation_angle = 0.0;
  double shift = 0.0;
  double noise_scale = 1.0;
};

struct SynthSpec {
  std::size_t n_classes = 10;
  std::size_t feature_dim = 32;
  std::size_t per_class = 64;
  double class_separation = 6.0;
  double noise_sigma = 1.0;
  /// Domain 0 is the source and should be the identity transform.
  std::vector<DomainShift> domains = {{0, 0.0, 0.0, 1.0}, {11, 0.35, 1.0, 1.2}, {13, 0.7, 2.0, 1.4}};
  double base_fraction = 0.5;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SynthDataset {
  Matrix features;
  std::vector<std::size_t> class_ids;
  std::size_t domain_id = 0;
  std::size_t n_classes = 0;
  std::uint64_t seed = 0;

  std::size_t rows() const noexcept { return features.rows(); }
  std::string class_name(std::size_t c) const { return "class_" + std::to_string(c); }
};

/// Class centroids on the sphere of radius class_separation, after the given
/// domain's transform (rows = classes).
Matrix class_centroids(const SynthSpec& spec, std::size_t domain);

/// One dataset per domain; rows are grouped by class in ascending class order.
std::vector<SynthDataset> generate(const SynthSpec& spec);

/// Image/caption pairs standing in for web-scale pre-training data. Each
/// class's web images sit around its source centroid displaced by a seeded
/// random offset of length `class_offset`, and a `caption_noise` fraction of
/// captions is relabelled uniformly at random.
SynthDataset generate_pretraining_corpus(const SynthSpec& spec, std::size_t per_class, double caption_noise,
                                         double class_offset, std::uint64_t seed);

struct ClassSplit {
  std::vector<std::size_t> base;
  std::vector<std::size_t> novel;
};

/// Seeded class-level partition; round(base_fraction * n) classes are base.
ClassSplit split_base_new(std::size_t n_classes, double base_fraction, std::uint64_t seed);

/// Row indices of each class's first half (train pool) and second half
/// (held-out test rows), in canonical order.
struct RowPartition {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
RowPartition train_test_rows(const SynthDataset& ds);

/// Accuracy (in [0, 1]) of assigning each row to its nearest centroid.
double nearest_centroid_accuracy(const SynthDataset& ds, const Matrix& centroids);

void save_dataset(const SynthDataset& ds, const std::filesystem::path& path);
SynthDataset load_dataset(const std::filesystem::path& path);

}  // namespace cite
