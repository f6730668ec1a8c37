#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "imfvqa/decoder.hpp"
#include "imfvqa/imf.hpp"
#include "imfvqa/numerics.hpp"
#include "imfvqa/rng.hpp"

namespace imfvqa::training {

/// One visual-question-answer example.
struct Example {
  imf::ModalityBundle bundle;
  std::string question;
  std::string answer;
  std::string qtype = "unknown";
};

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 5e-4;
  std::size_t batch_size = 4;
  double kl_weight = 1e-3;
  double modality_dropout_p = 0.3;
  std::size_t epochs = 60;
  std::uint64_t seed = 7;
  imf::ImfConfig imf;
  decoder::DecoderConfig decoder;

  void validate() const;
};

/// Fusion module, projector/decoder and vocabulary under one roof.
struct Model {
  imf::ImfParams imf;
  decoder::DecoderParams decoder;
  decoder::Vocab vocab;

  /// Every learnable parameter with a stable dotted name, e.g.
  /// "imf.image_encoder.0.weight" or "decoder.query".
  std::vector<std::pair<std::string, num::Parameter*>> named_parameters();
  std::vector<num::Parameter*> parameters();
  void zero_grad();
};

Model make_model(const TrainConfig& cfg, decoder::Vocab vocab, Rng& rng);

/// Each present modality is dropped independently with probability p; if
/// every present modality was drawn for dropping, the last present one (point
/// before image) is kept.
imf::ModalityBundle modality_dropout(const imf::ModalityBundle& b, double p, Rng& rng);

/// Raw per-modality drop draws before the retention rule; absent modalities
/// consume no randomness and report false.
struct DropDraw {
  bool image = false;
  bool point = false;
};
DropDraw draw_modality_drops(const imf::ModalityBundle& b, double p, Rng& rng);

/// Random draws consumed by one example in one training step.
struct SampleDraw {
  imf::ModalityBundle bundle;  // after modality dropout
  std::vector<double> eps;     // reparameterization noise
};

std::vector<SampleDraw> draw_noise(std::span<const Example> batch, const Model& model, double dropout_p, Rng& rng);

struct LossBreakdown {
  double total = 0.0;
  double ce = 0.0;  // mean over batch
  double kl = 0.0;  // mean over batch
};

/// L = mean(ce) + β · mean(kl) with fixed draws.
LossBreakdown total_loss(std::span<const Example> batch, std::span<const SampleDraw> draws, const Model& model,
                         double kl_weight);

/// Same loss, and accumulates dL/dθ into every parameter of the model.
LossBreakdown total_loss_backward(std::span<const Example> batch, std::span<const SampleDraw> draws, Model& model,
                                  double kl_weight);

/// Draws dropout and noise from rng, then evaluates the loss.
LossBreakdown total_loss(std::span<const Example> batch, const Model& model, const TrainConfig& cfg, Rng& rng);

struct EpochLoss {
  std::size_t epoch = 0;
  double total = 0.0;
  double ce = 0.0;
  double kl = 0.0;

  bool operator==(const EpochLoss&) const = default;
};

struct TrainResult {
  Model model;
  TrainConfig config;
  std::vector<EpochLoss> trace;
  std::string rng_state;
};

/// Builds the vocabulary from the training split (questions and answers)
/// and runs mini-batched Adam. Throws NumericError naming the batch on a
/// non-finite loss.
TrainResult train(const TrainConfig& cfg, const std::vector<Example>& train_split);

/// Continues training an existing model for cfg.epochs more epochs.
TrainResult train(const TrainConfig& cfg, const std::vector<Example>& train_split, Model model, Rng rng);

/// Mean-path fusion followed by greedy decoding.
std::string predict(const Model& model, const imf::ModalityBundle& bundle, const std::string& question);

/// Fraction of examples whose decoded answer matches (word-normalized) under
/// a modality condition; examples lacking the condition's modality are skipped.
double accuracy(const Model& model, const std::vector<Example>& examples, imf::ModalityCondition condition);

}  // namespace imfvqa::training
