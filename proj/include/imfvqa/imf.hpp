#pragma once

// Incomplete multimodal fusion: zero-pad absent modalities, encode each with
// its own MLP, concatenate, predict a diagonal Gaussian, and either sample it
// with the reparameterization trick (training) or take its mean (inference).

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "imfvqa/numerics.hpp"
#include "imfvqa/rng.hpp"

namespace imfvqa::imf {

using Vector = std::vector<double>;

/// Visual input: an optional image-feature vector and an optional point-cloud
/// feature vector. Presence is the optional's engagement.
struct ModalityBundle {
  std::optional<Vector> image;
  std::optional<Vector> point;

  bool image_present() const { return image.has_value(); }
  bool point_present() const { return point.has_value(); }
  bool empty() const { return !image && !point; }

  bool operator==(const ModalityBundle&) const = default;
};

enum class ModalityCondition { both, image_only, point_only };

const char* to_string(ModalityCondition c);

/// Restricts a bundle to the modalities a condition allows. Returns nullopt
/// when nothing the condition asks for is present.
std::optional<ModalityBundle> restrict_to(const ModalityBundle& b, ModalityCondition c);

struct PaddedInput {
  num::Matrix image;  // 1 x image_dim
  num::Matrix point;  // 1 x point_dim
};

/// Absent slots become all-zero rows of the declared length; present slots
/// must have exactly that length.
PaddedInput pad_missing(const ModalityBundle& b, std::size_t image_dim, std::size_t point_dim);

struct EncodedFeatures {
  Vector r_i;
  Vector r_p;
  Vector r_z;  // r_i followed by r_p
};

struct GaussianEmbedding {
  Vector mu;
  Vector log_sigma;
};

enum class FuseMode { train_sampled, infer_mean };

struct FusedEmbedding {
  Vector z;
  FuseMode mode = FuseMode::infer_mean;
  double kl = 0.0;
  GaussianEmbedding gaussian;
  Vector eps;  // noise used for z; empty in infer_mean mode
};

/// The four learnable pieces of the fusion module.
struct ImfParams {
  num::Mlp image_encoder;
  num::Mlp point_encoder;
  num::Mlp mu_head;
  num::Mlp log_sigma_head;

  std::size_t image_dim() const { return image_encoder.input_dim(); }
  std::size_t point_dim() const { return point_encoder.input_dim(); }
  std::size_t latent_dim() const { return mu_head.output_dim(); }

  std::vector<num::Parameter*> parameters();
};

struct ImfConfig {
  std::size_t image_dim = 8;
  std::size_t point_dim = 8;
  std::size_t image_hidden = 16;
  std::size_t point_hidden = 16;
  std::size_t image_embed = 8;  // E_i
  std::size_t point_embed = 8;  // E_p
  std::size_t head_hidden = 16;  // 0 gives single-layer heads
  std::size_t latent_dim = 8;    // D_z
};

/// Encoders are [in -> hidden (tanh) -> embed (tanh)]; heads end in identity.
ImfParams make_imf_params(const ImfConfig& cfg, Rng& rng);

EncodedFeatures encode(const PaddedInput& x, const num::Mlp& image_encoder, const num::Mlp& point_encoder);

GaussianEmbedding gaussian_head(const Vector& r_z, const num::Mlp& mu_head, const num::Mlp& log_sigma_head);

/// z = mu + eps ⊙ exp(log_sigma).
Vector sample_z(const GaussianEmbedding& g, const Vector& eps);

/// −½ Σ_d (1 + log σ_d² − μ_d² − σ_d²), summed over dimensions.
double kl_loss(const GaussianEmbedding& g);

/// Partial derivatives of kl_loss with respect to mu and log_sigma.
GaussianEmbedding kl_loss_grad(const GaussianEmbedding& g);

/// pad → encode → gaussian_head, then sample (train) or take the mean (infer).
/// Infer mode does not touch rng.
FusedEmbedding fuse(const ModalityBundle& b, const ImfParams& params, FuseMode mode, Rng& rng);

/// Everything backward needs from one fuse call.
struct FuseTrace {
  FusedEmbedding out;
  num::MlpTape image_tape;
  num::MlpTape point_tape;
  num::MlpTape mu_tape;
  num::MlpTape log_sigma_tape;
};

/// fuse with explicit noise (empty eps selects the mean path) and a tape.
FuseTrace fuse_forward(const ModalityBundle& b, const ImfParams& params, const Vector& eps);

/// Back-propagates dL/dz plus kl_weight · dKL into every fusion parameter.
void fuse_backward(ImfParams& params, const FuseTrace& trace, const Vector& dz, double kl_weight);

}  // namespace imfvqa::imf
