#include "imfvqa/synthetic.hpp"

#include <cmath>

#include "imfvqa/errors.hpp"

namespace imfvqa::synthetic {

namespace {

const std::vector<std::string> kQuestions = {
    "what is shown in this scene",
    "what object can be seen here",
    "which object is observed",
};

std::vector<double> random_centroid(std::size_t dim, double offset, Rng& rng) {
  std::vector<double> c(dim);
  for (double& x : c) x = offset + rng.normal();
  return c;
}

std::vector<training::Example> make_split(const SyntheticTaskSpec& spec, const Centroids& centroids,
                                          std::size_t count, std::uint64_t split_seed) {
  std::vector<training::Example> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(split_seed, static_cast<std::uint64_t>(i)));
    // balanced classes, cycling through every (point, image) pair
    const std::size_t label = i % spec.class_count();
    const std::size_t p = label / spec.image_levels;
    const std::size_t m = label % spec.image_levels;
    training::Example ex;
    std::vector<double> image = centroids.image[m];
    for (std::size_t k = 0; k < image.size(); ++k) image[k] += centroids.image_hint[p][k] + spec.noise * rng.normal();
    std::vector<double> point = centroids.point[p];
    for (std::size_t k = 0; k < point.size(); ++k) point[k] += centroids.point_hint[m][k] + spec.noise * rng.normal();
    ex.bundle.image = std::move(image);
    ex.bundle.point = std::move(point);
    ex.question = kQuestions[rng.below(kQuestions.size())];
    ex.answer = answer_for(p, m);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

void SyntheticTaskSpec::validate() const {
  if (point_levels < 1 || image_levels < 1) throw ValidationError("synthetic task needs at least one class");
  if (point_levels > point_words().size() || image_levels > image_words().size()) {
    throw ValidationError("synthetic task supports at most " + std::to_string(point_words().size()) +
                          " point levels and " + std::to_string(image_words().size()) + " image levels");
  }
  if (image_dim < 1 || point_dim < 1) throw ValidationError("synthetic feature dims must be positive");
  if (train_count < 1) throw ValidationError("synthetic train_count must be positive");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ValidationError("synthetic noise must be finite and >= 0");
  if (!(cross_signal >= 0.0) || !std::isfinite(cross_signal)) {
    throw ValidationError("synthetic cross_signal must be finite and >= 0");
  }
  if (!std::isfinite(offset)) throw ValidationError("synthetic offset must be finite");
}

const std::vector<std::string>& point_words() {
  static const std::vector<std::string> words = {"building", "car", "tree", "road", "bridge", "tower"};
  return words;
}

const std::vector<std::string>& image_words() {
  static const std::vector<std::string> words = {"red", "blue", "green", "white", "black", "gray"};
  return words;
}

std::string answer_for(std::size_t point_level, std::size_t image_level) {
  return image_words().at(image_level) + " " + point_words().at(point_level);
}

Centroids make_centroids(const SyntheticTaskSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(derive_seed(seed, std::string_view("centroids")));
  Centroids c;
  for (std::size_t p = 0; p < spec.point_levels; ++p) c.point.push_back(random_centroid(spec.point_dim, spec.offset, rng));
  for (std::size_t m = 0; m < spec.image_levels; ++m) c.image.push_back(random_centroid(spec.image_dim, spec.offset, rng));
  auto hint = [&](std::size_t dim) {
    std::vector<double> h = random_centroid(dim, 0.0, rng);
    for (double& x : h) x *= spec.cross_signal;
    return h;
  };
  for (std::size_t m = 0; m < spec.image_levels; ++m) c.point_hint.push_back(hint(spec.point_dim));
  for (std::size_t p = 0; p < spec.point_levels; ++p) c.image_hint.push_back(hint(spec.image_dim));
  return c;
}

Dataset make_synthetic_dataset(const SyntheticTaskSpec& spec, std::uint64_t seed) {
  const Centroids centroids = make_centroids(spec, seed);
  Dataset d;
  d.train = make_split(spec, centroids, spec.train_count, derive_seed(seed, std::string_view("train")));
  d.test = make_split(spec, centroids, spec.test_count, derive_seed(seed, std::string_view("test")));
  return d;
}

}  // namespace imfvqa::synthetic
