#pragma once

// Desk-scale stand-in for multimodal city QA data. Each example's label is a
// pair (point level, image level): the point-cloud features mainly encode the
// point level and the image features the image level, each with a weak hint of
// the other, so the answer is recoverable from both modalities together but
// only partially from either.

#include <cstdint>
#include <string>
#include <vector>

#include "imfvqa/rng.hpp"
#include "imfvqa/training.hpp"

namespace imfvqa::synthetic {

struct SyntheticTaskSpec {
  std::size_t point_levels = 3;  // distinguished by point features (answer noun)
  std::size_t image_levels = 2;  // distinguished by image features (answer adjective)
  std::size_t image_dim = 8;
  std::size_t point_dim = 8;
  std::size_t train_count = 480;
  std::size_t test_count = 240;
  double noise = 0.3;
  /// Offset shared by every centroid of a modality; moves real inputs away
  /// from the zero padding.
  double offset = 1.0;
  /// Strength of the weak cue each modality carries about the other
  /// modality's level. Zero makes the two information sources disjoint.
  double cross_signal = 0.2;

  std::size_t class_count() const { return point_levels * image_levels; }
  void validate() const;
};

struct Dataset {
  std::vector<training::Example> train;
  std::vector<training::Example> test;
};

/// Centroids come from derive_seed(seed, "centroids"); example i of a split
/// uses its own generator seeded by derive_seed(split seed, i).
Dataset make_synthetic_dataset(const SyntheticTaskSpec& spec, std::uint64_t seed);

/// The class-conditional feature means, exposed for oracles.
struct Centroids {
  std::vector<std::vector<double>> point;  // point_levels x point_dim
  std::vector<std::vector<double>> image;  // image_levels x image_dim
  std::vector<std::vector<double>> point_hint;  // image_levels x point_dim, scaled by cross_signal
  std::vector<std::vector<double>> image_hint;  // point_levels x image_dim, scaled by cross_signal
};
Centroids make_centroids(const SyntheticTaskSpec& spec, std::uint64_t seed);

/// Words used for the answer noun (by point level) and adjective (by image level).
const std::vector<std::string>& point_words();
const std::vector<std::string>& image_words();
std::string answer_for(std::size_t point_level, std::size_t image_level);

}  // namespace imfvqa::synthetic
