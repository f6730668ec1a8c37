#include "imfvqa/training.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "imfvqa/errors.hpp"

namespace imfvqa::training {

using decoder::DecoderInput;
using num::Parameter;

void TrainConfig::validate() const {
  if (!(modality_dropout_p >= 0.0 && modality_dropout_p < 1.0)) {
    throw ConfigError("train.modality_dropout_p must lie in [0, 1)");
  }
  if (!(kl_weight >= 0.0)) throw ConfigError("train.kl_weight must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("train.lr must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  decoder.validate();
}

namespace {

void add_mlp(std::vector<std::pair<std::string, Parameter*>>& out, const std::string& prefix, num::Mlp& m) {
  for (std::size_t i = 0; i < m.depth(); ++i) {
    out.emplace_back(prefix + "." + std::to_string(i) + ".weight", &m.layers()[i].weight);
    out.emplace_back(prefix + "." + std::to_string(i) + ".bias", &m.layers()[i].bias);
  }
}

struct PreparedExample {
  decoder::TokenIds question;
  decoder::TokenIds gold;
};

PreparedExample prepare(const Example& ex, const Model& model) {
  PreparedExample p{decoder::tokenize(ex.question, model.vocab), decoder::encode_answer(ex.answer, model.vocab)};
  return p;
}

}  // namespace

std::vector<std::pair<std::string, Parameter*>> Model::named_parameters() {
  std::vector<std::pair<std::string, Parameter*>> out;
  add_mlp(out, "imf.image_encoder", imf.image_encoder);
  add_mlp(out, "imf.point_encoder", imf.point_encoder);
  add_mlp(out, "imf.mu_head", imf.mu_head);
  add_mlp(out, "imf.log_sigma_head", imf.log_sigma_head);
  add_mlp(out, "decoder.projector", decoder.projector);
  out.emplace_back("decoder.token_embedding", &decoder.token_embedding);
  out.emplace_back("decoder.position_embedding", &decoder.position_embedding);
  out.emplace_back("decoder.query", &decoder.query);
  out.emplace_back("decoder.key", &decoder.key);
  out.emplace_back("decoder.value", &decoder.value);
  out.emplace_back("decoder.attn_out", &decoder.attn_out);
  add_mlp(out, "decoder.feed_forward", decoder.feed_forward);
  add_mlp(out, "decoder.output_head", decoder.output_head);
  return out;
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  for (auto& [name, p] : named_parameters()) out.push_back(p);
  return out;
}

void Model::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

Model make_model(const TrainConfig& cfg, decoder::Vocab vocab, Rng& rng) {
  Model m;
  m.imf = imf::make_imf_params(cfg.imf, rng);
  m.decoder = decoder::make_decoder_params(cfg.decoder, cfg.imf.latent_dim, vocab.size(), rng);
  m.vocab = std::move(vocab);
  return m;
}

DropDraw draw_modality_drops(const imf::ModalityBundle& b, double p, Rng& rng) {
  DropDraw d;
  if (b.image_present()) d.image = rng.bernoulli(p);
  if (b.point_present()) d.point = rng.bernoulli(p);
  return d;
}

imf::ModalityBundle modality_dropout(const imf::ModalityBundle& b, double p, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ValidationError("modality dropout probability must lie in [0, 1)");
  const DropDraw d = draw_modality_drops(b, p, rng);
  imf::ModalityBundle out = b;
  if (d.image) out.image.reset();
  if (d.point) out.point.reset();
  if (out.empty() && !b.empty()) {
    if (b.point_present()) {
      out.point = b.point;
    } else {
      out.image = b.image;
    }
  }
  return out;
}

std::vector<SampleDraw> draw_noise(std::span<const Example> batch, const Model& model, double dropout_p,
                                   Rng& rng) {
  std::vector<SampleDraw> draws;
  draws.reserve(batch.size());
  for (const auto& ex : batch) {
    SampleDraw d;
    d.bundle = modality_dropout(ex.bundle, dropout_p, rng);
    d.eps.resize(model.imf.latent_dim());
    for (double& e : d.eps) e = rng.normal();
    draws.push_back(std::move(d));
  }
  return draws;
}

LossBreakdown total_loss(std::span<const Example> batch, std::span<const SampleDraw> draws, const Model& model,
                         double kl_weight) {
  if (batch.empty()) throw ValidationError("total_loss on an empty batch");
  if (draws.size() != batch.size()) throw ShapeError("draw count does not match batch size");
  LossBreakdown out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto trace = imf::fuse_forward(draws[i].bundle, model.imf, draws[i].eps);
    const auto prepared = prepare(batch[i], model);
    DecoderInput input{decoder::project_vision(trace.out.z, model.decoder.projector, model.decoder.config),
                       prepared.question};
    out.ce += decoder::ce_loss(input, prepared.gold, model.decoder);
    out.kl += trace.out.kl;
  }
  const double n = static_cast<double>(batch.size());
  out.ce /= n;
  out.kl /= n;
  out.total = out.ce + kl_weight * out.kl;
  return out;
}

LossBreakdown total_loss_backward(std::span<const Example> batch, std::span<const SampleDraw> draws, Model& model,
                                  double kl_weight) {
  if (batch.empty()) throw ValidationError("total_loss on an empty batch");
  if (draws.size() != batch.size()) throw ShapeError("draw count does not match batch size");
  const double n = static_cast<double>(batch.size());
  LossBreakdown out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto trace = imf::fuse_forward(draws[i].bundle, model.imf, draws[i].eps);
    const auto prepared = prepare(batch[i], model);
    auto projection = decoder::project_vision_forward(trace.out.z, model.decoder.projector, model.decoder.config);
    DecoderInput input{projection.h_v, prepared.question};
    const auto ce = decoder::ce_loss_backward(input, prepared.gold, model.decoder, 1.0 / n);
    const auto dz = decoder::project_vision_backward(model.decoder.projector, projection, ce.dh_v);
    imf::fuse_backward(model.imf, trace, dz, kl_weight / n);
    out.ce += ce.loss;
    out.kl += trace.out.kl;
  }
  out.ce /= n;
  out.kl /= n;
  out.total = out.ce + kl_weight * out.kl;
  return out;
}

LossBreakdown total_loss(std::span<const Example> batch, const Model& model, const TrainConfig& cfg, Rng& rng) {
  const auto draws = draw_noise(batch, model, cfg.modality_dropout_p, rng);
  return total_loss(batch, draws, model, cfg.kl_weight);
}

TrainResult train(const TrainConfig& cfg, const std::vector<Example>& train_split) {
  cfg.validate();
  if (train_split.empty()) throw ValidationError("training split is empty");
  std::vector<std::string> texts;
  for (const auto& ex : train_split) {
    texts.push_back(ex.question);
    texts.push_back(ex.answer);
  }
  Rng rng(cfg.seed);
  Model model = make_model(cfg, decoder::Vocab::build(texts), rng);
  return train(cfg, train_split, std::move(model), std::move(rng));
}

TrainResult train(const TrainConfig& cfg, const std::vector<Example>& train_split, Model model, Rng rng) {
  cfg.validate();
  if (train_split.empty()) throw ValidationError("training split is empty");
  TrainResult result;
  result.config = cfg;
  num::AdamState adam;
  adam.lr = cfg.lr;
  adam.weight_decay = cfg.weight_decay;
  const auto params = model.parameters();
  model.zero_grad();

  std::vector<std::size_t> order(train_split.size());
  std::vector<Example> batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    EpochLoss epoch_loss{epoch, 0.0, 0.0, 0.0};
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) {
        batch.push_back(train_split[order[i]]);
      }
      const auto where = [&] {
        std::ostringstream msg;
        msg << "epoch " << epoch << ", batch " << batches << " (examples";
        for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) msg << ' ' << order[i];
        msg << ")";
        return msg.str();
      };
      const auto draws = draw_noise(batch, model, cfg.modality_dropout_p, rng);
      LossBreakdown loss;
      try {
        loss = total_loss_backward(batch, draws, model, cfg.kl_weight);
      } catch (const NumericError& e) {
        throw NumericError("non-finite loss at " + where() + ": " + e.what());
      }
      if (!std::isfinite(loss.total)) {
        std::ostringstream msg;
        msg << "non-finite loss at " << where() << ": ce=" << loss.ce << " kl=" << loss.kl;
        throw NumericError(msg.str());
      }
      num::adam_step(adam, params);
      epoch_loss.total += loss.total;
      epoch_loss.ce += loss.ce;
      epoch_loss.kl += loss.kl;
      ++batches;
    }
    epoch_loss.total /= static_cast<double>(batches);
    epoch_loss.ce /= static_cast<double>(batches);
    epoch_loss.kl /= static_cast<double>(batches);
    result.trace.push_back(epoch_loss);
  }
  result.rng_state = rng.state();
  result.model = std::move(model);
  return result;
}

std::string predict(const Model& model, const imf::ModalityBundle& bundle, const std::string& question) {
  const auto trace = imf::fuse_forward(bundle, model.imf, {});
  DecoderInput input{decoder::project_vision(trace.out.z, model.decoder.projector, model.decoder.config),
                     decoder::tokenize(question, model.vocab)};
  return decoder::greedy_decode(input, model.decoder, model.vocab);
}

namespace {

std::string word_normalized(const std::string& s) {
  std::string out;
  for (const auto& w : decoder::split_words(s)) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

}  // namespace

double accuracy(const Model& model, const std::vector<Example>& examples, imf::ModalityCondition condition) {
  std::size_t total = 0;
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    const auto bundle = imf::restrict_to(ex.bundle, condition);
    if (!bundle) continue;
    ++total;
    if (word_normalized(predict(model, *bundle, ex.question)) == word_normalized(ex.answer)) ++correct;
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace imfvqa::training
