#include "imfvqa/imf.hpp"

#include <cmath>

#include "imfvqa/errors.hpp"

namespace imfvqa::imf {

using num::Matrix;
using num::Mlp;

const char* to_string(ModalityCondition c) {
  switch (c) {
    case ModalityCondition::both:
      return "both";
    case ModalityCondition::image_only:
      return "image-only";
    case ModalityCondition::point_only:
      return "point-only";
  }
  return "?";
}

std::optional<ModalityBundle> restrict_to(const ModalityBundle& b, ModalityCondition c) {
  ModalityBundle out = b;
  if (c == ModalityCondition::image_only) out.point.reset();
  if (c == ModalityCondition::point_only) out.image.reset();
  if (out.empty()) return std::nullopt;
  return out;
}

namespace {

Matrix padded_slot(const std::optional<Vector>& slot, std::size_t dim, const char* name) {
  if (!slot) return Matrix(1, dim);
  if (slot->size() != dim) {
    throw ShapeError(std::string(name) + " features have length " + std::to_string(slot->size()) +
                     ", expected " + std::to_string(dim));
  }
  if (!num::all_finite(*slot)) throw NumericError(std::string(name) + " features contain non-finite values");
  return Matrix::row_vector(*slot);
}

Vector concat(const Vector& a, const Vector& b) {
  Vector out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

void check_gaussian(const GaussianEmbedding& g) {
  if (g.mu.size() != g.log_sigma.size()) {
    throw ShapeError("gaussian mu length " + std::to_string(g.mu.size()) + " != log_sigma length " +
                     std::to_string(g.log_sigma.size()));
  }
  if (!num::all_finite(g.mu) || !num::all_finite(g.log_sigma)) {
    throw NumericError("gaussian parameters contain non-finite values");
  }
}

void check_head_dims(const Vector& r_z, const Mlp& mu_head, const Mlp& log_sigma_head) {
  if (mu_head.input_dim() != r_z.size() || log_sigma_head.input_dim() != r_z.size()) {
    throw ShapeError("r_z length " + std::to_string(r_z.size()) + " does not match head input dims " +
                     std::to_string(mu_head.input_dim()) + "/" + std::to_string(log_sigma_head.input_dim()));
  }
  if (mu_head.output_dim() != log_sigma_head.output_dim()) {
    throw ShapeError("mu head outputs " + std::to_string(mu_head.output_dim()) + " but log-sigma head outputs " +
                     std::to_string(log_sigma_head.output_dim()));
  }
}

}  // namespace

PaddedInput pad_missing(const ModalityBundle& b, std::size_t image_dim, std::size_t point_dim) {
  if (b.empty()) throw ValidationError("empty bundle: at least one modality must be present");
  return PaddedInput{padded_slot(b.image, image_dim, "image"), padded_slot(b.point, point_dim, "point")};
}

std::vector<num::Parameter*> ImfParams::parameters() {
  std::vector<num::Parameter*> out;
  for (Mlp* m : {&image_encoder, &point_encoder, &mu_head, &log_sigma_head}) {
    auto p = m->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

ImfParams make_imf_params(const ImfConfig& cfg, Rng& rng) {
  using num::Activation;
  ImfParams p;
  p.image_encoder = Mlp::create({cfg.image_dim, cfg.image_hidden, cfg.image_embed},
                                {Activation::tanh, Activation::tanh}, rng);
  p.point_encoder = Mlp::create({cfg.point_dim, cfg.point_hidden, cfg.point_embed},
                                {Activation::tanh, Activation::tanh}, rng);
  const std::size_t rz = cfg.image_embed + cfg.point_embed;
  if (cfg.head_hidden == 0) {
    p.mu_head = Mlp::create({rz, cfg.latent_dim}, {Activation::identity}, rng);
    p.log_sigma_head = Mlp::create({rz, cfg.latent_dim}, {Activation::identity}, rng);
  } else {
    p.mu_head = Mlp::create({rz, cfg.head_hidden, cfg.latent_dim}, {Activation::tanh, Activation::identity}, rng);
    p.log_sigma_head =
        Mlp::create({rz, cfg.head_hidden, cfg.latent_dim}, {Activation::tanh, Activation::identity}, rng);
  }
  return p;
}

EncodedFeatures encode(const PaddedInput& x, const Mlp& image_encoder, const Mlp& point_encoder) {
  EncodedFeatures f;
  f.r_i = num::mlp_apply(image_encoder, x.image).values();
  f.r_p = num::mlp_apply(point_encoder, x.point).values();
  f.r_z = concat(f.r_i, f.r_p);
  return f;
}

GaussianEmbedding gaussian_head(const Vector& r_z, const Mlp& mu_head, const Mlp& log_sigma_head) {
  check_head_dims(r_z, mu_head, log_sigma_head);
  const Matrix x = Matrix::row_vector(r_z);
  return GaussianEmbedding{num::mlp_apply(mu_head, x).values(), num::mlp_apply(log_sigma_head, x).values()};
}

Vector sample_z(const GaussianEmbedding& g, const Vector& eps) {
  check_gaussian(g);
  if (eps.size() != g.mu.size()) {
    throw ShapeError("eps length " + std::to_string(eps.size()) + " does not match latent dim " +
                     std::to_string(g.mu.size()));
  }
  Vector z(g.mu.size());
  for (std::size_t d = 0; d < z.size(); ++d) z[d] = g.mu[d] + eps[d] * std::exp(g.log_sigma[d]);
  return z;
}

double kl_loss(const GaussianEmbedding& g) {
  check_gaussian(g);
  double total = 0.0;
  for (std::size_t d = 0; d < g.mu.size(); ++d) {
    const double log_var = 2.0 * g.log_sigma[d];
    const double mu = g.mu[d];
#ifdef IMFVQA_MUTATE_KL_SIGN
    total += 0.5 * (1.0 + log_var - mu * mu - std::exp(log_var));
#else
    total += -0.5 * (1.0 + log_var - mu * mu - std::exp(log_var));
#endif
  }
  return total;
}

GaussianEmbedding kl_loss_grad(const GaussianEmbedding& g) {
  check_gaussian(g);
  GaussianEmbedding grad{Vector(g.mu.size()), Vector(g.mu.size())};
  for (std::size_t d = 0; d < g.mu.size(); ++d) {
    grad.mu[d] = g.mu[d];
    grad.log_sigma[d] = std::exp(2.0 * g.log_sigma[d]) - 1.0;
  }
  return grad;
}

FuseTrace fuse_forward(const ModalityBundle& b, const ImfParams& params, const Vector& eps) {
  const PaddedInput x = pad_missing(b, params.image_dim(), params.point_dim());
  FuseTrace t;
  auto ri = num::mlp_forward(params.image_encoder, x.image);
  auto rp = num::mlp_forward(params.point_encoder, x.point);
  const Vector r_z = concat(ri.y.values(), rp.y.values());
  check_head_dims(r_z, params.mu_head, params.log_sigma_head);
  const Matrix rz_row = Matrix::row_vector(r_z);
  auto mu = num::mlp_forward(params.mu_head, rz_row);
  auto ls = num::mlp_forward(params.log_sigma_head, rz_row);

  t.out.gaussian = GaussianEmbedding{mu.y.values(), ls.y.values()};
  t.out.kl = kl_loss(t.out.gaussian);
  if (eps.empty()) {
    t.out.mode = FuseMode::infer_mean;
    t.out.z = t.out.gaussian.mu;
  } else {
    t.out.mode = FuseMode::train_sampled;
    t.out.z = sample_z(t.out.gaussian, eps);
    t.out.eps = eps;
  }
  t.image_tape = std::move(ri.tape);
  t.point_tape = std::move(rp.tape);
  t.mu_tape = std::move(mu.tape);
  t.log_sigma_tape = std::move(ls.tape);
  return t;
}

FusedEmbedding fuse(const ModalityBundle& b, const ImfParams& params, FuseMode mode, Rng& rng) {
  Vector eps;
  if (mode == FuseMode::train_sampled) {
    eps.resize(params.latent_dim());
    // validate before drawing so a bad bundle leaves rng untouched
    (void)pad_missing(b, params.image_dim(), params.point_dim());
    for (double& e : eps) e = rng.normal();
  }
  return fuse_forward(b, params, eps).out;
}

void fuse_backward(ImfParams& params, const FuseTrace& trace, const Vector& dz, double kl_weight) {
  const auto& g = trace.out.gaussian;
  if (dz.size() != g.mu.size()) {
    throw ShapeError("dz length " + std::to_string(dz.size()) + " does not match latent dim " +
                     std::to_string(g.mu.size()));
  }
  const std::size_t dim = g.mu.size();
  const GaussianEmbedding dkl = kl_loss_grad(g);
  Matrix d_mu(1, dim);
  Matrix d_ls(1, dim);
  for (std::size_t d = 0; d < dim; ++d) {
    d_mu[d] = dz[d] + kl_weight * dkl.mu[d];
    double d_sample = 0.0;
    if (trace.out.mode == FuseMode::train_sampled) {
      d_sample = dz[d] * trace.out.eps[d] * std::exp(g.log_sigma[d]);
    }
    d_ls[d] = d_sample + kl_weight * dkl.log_sigma[d];
  }
  Matrix d_rz = num::mlp_backward(params.mu_head, trace.mu_tape, d_mu);
  d_rz += num::mlp_backward(params.log_sigma_head, trace.log_sigma_tape, d_ls);

  const std::size_t ei = params.image_encoder.output_dim();
  const std::size_t ep = params.point_encoder.output_dim();
  Matrix d_ri(1, ei);
  Matrix d_rp(1, ep);
  for (std::size_t k = 0; k < ei; ++k) d_ri[k] = d_rz[k];
  for (std::size_t k = 0; k < ep; ++k) d_rp[k] = d_rz[ei + k];
  num::mlp_backward(params.image_encoder, trace.image_tape, d_ri);
  num::mlp_backward(params.point_encoder, trace.point_tape, d_rp);
}

}  // namespace imfvqa::imf
