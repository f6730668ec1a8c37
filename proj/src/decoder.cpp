#include "imfvqa/decoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

#include "imfvqa/errors.hpp"

namespace imfvqa::decoder {

using num::Matrix;
using num::Mlp;
using num::Parameter;

namespace {

constexpr TokenId kVisionRow = std::numeric_limits<TokenId>::max();
const char* const kReservedTokens[] = {"<pad>", "<bos>", "<eos>", "<unk>"};

Parameter uniform_parameter(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (double& x : m.data()) x = rng.uniform(-bound, bound);
  return Parameter(std::move(m));
}

void log_softmax_row(std::span<const double> logits, std::span<double> out) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
}

void check_input(const DecoderParams& params, const DecoderInput& input, std::size_t answer_inputs) {
  const auto& cfg = params.config;
  if (input.h_v.rows() != cfg.vision_token_count || input.h_v.cols() != cfg.model_dim) {
    throw ShapeError("h_v " + input.h_v.shape_string() + " does not match (" +
                     std::to_string(cfg.vision_token_count) + "x" + std::to_string(cfg.model_dim) + ")");
  }
  if (input.h_q.empty()) throw ValidationError("decoder input has no question tokens");
  if (input.h_q.size() > cfg.max_question_len) {
    throw ShapeError("question has " + std::to_string(input.h_q.size()) + " tokens, limit is " +
                     std::to_string(cfg.max_question_len));
  }
  if (answer_inputs >= cfg.max_answer_len) {
    throw ShapeError("answer prefix of length " + std::to_string(answer_inputs) +
                     " reaches max_answer_len " + std::to_string(cfg.max_answer_len));
  }
  const std::size_t vocab = params.vocab_size();
  for (TokenId id : input.h_q) {
    if (id >= vocab) throw ShapeError("question token id " + std::to_string(id) + " outside vocabulary");
  }
}

/// Gold answer with trailing PAD removed; validates EOS termination.
std::size_t gold_length(std::span<const TokenId> gold, std::size_t max_answer_len) {
  if (gold.empty()) throw ValidationError("empty gold answer");
  if (gold.size() > max_answer_len) {
    throw ShapeError("gold answer of length " + std::to_string(gold.size()) + " exceeds max_answer_len " +
                     std::to_string(max_answer_len));
  }
  std::size_t n = gold.size();
  while (n > 0 && gold[n - 1] == Vocab::kPad) --n;
  if (n == 0 || gold[n - 1] != Vocab::kEos) throw ValidationError("gold answer is not EOS-terminated");
  return n;
}

}  // namespace

Vocab::Vocab() {
  for (const char* t : kReservedTokens) {
    index_.emplace(t, tokens_.size());
    tokens_.emplace_back(t);
  }
}

Vocab Vocab::build(std::span<const std::string> texts) {
  std::set<std::string> words;
  for (int d = 0; d <= 20; ++d) words.insert(std::to_string(d));
  for (const auto& t : texts)
    for (auto& w : split_words(t)) words.insert(std::move(w));
  Vocab v;
  for (const auto& w : words) {
    if (v.index_.count(w)) continue;
    v.index_.emplace(w, v.tokens_.size());
    v.tokens_.push_back(w);
  }
  return v;
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kReservedCount) throw ValidationError("vocabulary is missing reserved tokens");
  for (std::size_t i = 0; i < kReservedCount; ++i) {
    if (tokens[i] != kReservedTokens[i]) {
      throw ValidationError("vocabulary slot " + std::to_string(i) + " must be " + kReservedTokens[i]);
    }
  }
  Vocab v;
  v.tokens_.clear();
  v.index_.clear();
  for (auto& t : tokens) {
    if (!v.index_.emplace(t, v.tokens_.size()).second) {
      throw ValidationError("duplicate vocabulary token '" + t + "'");
    }
    v.tokens_.push_back(std::move(t));
  }
  return v;
}

TokenId Vocab::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view word) const { return index_.count(std::string(word)) > 0; }

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c) || std::ispunct(c)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

TokenIds tokenize(std::string_view text, const Vocab& vocab) {
  TokenIds ids;
  for (const auto& w : split_words(text)) ids.push_back(vocab.id(w));
  return ids;
}

TokenIds encode_answer(std::string_view answer, const Vocab& vocab) {
  TokenIds ids = tokenize(answer, vocab);
  ids.push_back(Vocab::kEos);
  return ids;
}

void DecoderConfig::validate() const {
  if (model_dim < 4) throw ConfigError("decoder.model_dim must be >= 4");
  if (max_answer_len < 1) throw ConfigError("decoder.max_answer_len must be >= 1");
  if (vision_token_count < 1) throw ConfigError("decoder.vision_token_count must be >= 1");
  if (max_question_len < 1) throw ConfigError("decoder.max_question_len must be >= 1");
  if (ff_dim < 1) throw ConfigError("decoder.ff_dim must be >= 1");
}

std::vector<Parameter*> DecoderParams::parameters() {
  std::vector<Parameter*> out = projector.parameters();
  for (Parameter* p : {&token_embedding, &position_embedding, &query, &key, &value, &attn_out}) out.push_back(p);
  for (Parameter* p : feed_forward.parameters()) out.push_back(p);
  for (Parameter* p : output_head.parameters()) out.push_back(p);
  return out;
}

DecoderParams make_decoder_params(const DecoderConfig& cfg, std::size_t latent_dim, std::size_t vocab_size,
                                  Rng& rng) {
  using num::Activation;
  cfg.validate();
  DecoderParams p;
  p.config = cfg;
  const std::size_t d = cfg.model_dim;
  const std::size_t proj_out = cfg.vision_token_count * d;
  if (cfg.projector_hidden == 0) {
    p.projector = Mlp::create({latent_dim, proj_out}, {Activation::identity}, rng);
  } else {
    p.projector =
        Mlp::create({latent_dim, cfg.projector_hidden, proj_out}, {Activation::tanh, Activation::identity}, rng);
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  p.token_embedding = uniform_parameter(vocab_size, d, bound, rng);
  p.position_embedding = uniform_parameter(cfg.max_sequence_len(), d, bound, rng);
  p.query = uniform_parameter(d, d, bound, rng);
  p.key = uniform_parameter(d, d, bound, rng);
  p.value = uniform_parameter(d, d, bound, rng);
  p.attn_out = uniform_parameter(d, d, bound, rng);
  p.feed_forward = Mlp::create({d, cfg.ff_dim, d}, {Activation::tanh, Activation::identity}, rng);
  p.output_head = Mlp::create({d, vocab_size}, {Activation::identity}, rng);
  return p;
}

ProjectionTrace project_vision_forward(std::span<const double> z, const Mlp& projector, const DecoderConfig& cfg) {
  const std::size_t expected = cfg.vision_token_count * cfg.model_dim;
  if (projector.output_dim() != expected) {
    throw ShapeError("projector outputs " + std::to_string(projector.output_dim()) + " values, expected " +
                     std::to_string(cfg.vision_token_count) + " x " + std::to_string(cfg.model_dim) + " = " +
                     std::to_string(expected));
  }
  auto out = num::mlp_forward(projector, Matrix::row_vector(z));
  return ProjectionTrace{Matrix(cfg.vision_token_count, cfg.model_dim, out.y.values()), std::move(out.tape)};
}

Matrix project_vision(std::span<const double> z, const Mlp& projector, const DecoderConfig& cfg) {
  return project_vision_forward(z, projector, cfg).h_v;
}

std::vector<double> project_vision_backward(Mlp& projector, const ProjectionTrace& trace, const Matrix& dh_v) {
  const Matrix flat(1, dh_v.size(), dh_v.values());
  return num::mlp_backward(projector, trace.tape, flat).values();
}

DecoderPass decoder_forward(const DecoderParams& params, const DecoderInput& input,
                            std::span<const TokenId> answer_inputs) {
  check_input(params, input, answer_inputs.size());
  const auto& cfg = params.config;
  const std::size_t d = cfg.model_dim;
  const std::size_t n_vision = cfg.vision_token_count;

  DecoderPass pass;
  DecoderTape& t = pass.tape;
  t.row_tokens.assign(n_vision, kVisionRow);
  t.row_tokens.insert(t.row_tokens.end(), input.h_q.begin(), input.h_q.end());
  t.answer_start = t.row_tokens.size();
  t.row_tokens.push_back(Vocab::kBos);
  for (TokenId id : answer_inputs) {
    if (id >= params.vocab_size()) throw ShapeError("answer token id " + std::to_string(id) + " outside vocabulary");
    t.row_tokens.push_back(id);
  }
  const std::size_t seq = t.row_tokens.size();

  t.x = Matrix(seq, d);
  for (std::size_t r = 0; r < seq; ++r) {
    auto row = t.x.row(r);
    const auto src = r < n_vision ? input.h_v.row(r) : params.token_embedding.value.row(t.row_tokens[r]);
    const auto pos = params.position_embedding.value.row(r);
    for (std::size_t c = 0; c < d; ++c) row[c] = src[c] + pos[c];
  }

  t.q = num::matmul(t.x, params.query.value);
  t.k = num::matmul(t.x, params.key.value);
  t.v = num::matmul(t.x, params.value.value);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Matrix scores = num::matmul_nt(t.q, t.k);
  t.probs = Matrix(seq, seq);
  for (std::size_t i = 0; i < seq; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j <= i; ++j) mx = std::max(mx, scores(i, j) * scale);
    double sum = 0.0;
    for (std::size_t j = 0; j <= i; ++j) {
      t.probs(i, j) = std::exp(scores(i, j) * scale - mx);
      sum += t.probs(i, j);
    }
    for (std::size_t j = 0; j <= i; ++j) t.probs(i, j) /= sum;
  }
  t.attended = num::matmul(t.probs, t.v);
  t.x1 = t.x;
  t.x1 += num::matmul(t.attended, params.attn_out.value);

  auto ff = num::mlp_forward(params.feed_forward, t.x1);
  t.x2 = t.x1;
  t.x2 += ff.y;
  t.ff_tape = std::move(ff.tape);

  const std::size_t n_answer = seq - t.answer_start;
  Matrix answer_rows(n_answer, d);
  for (std::size_t r = 0; r < n_answer; ++r) {
    auto src = t.x2.row(t.answer_start + r);
    std::copy(src.begin(), src.end(), answer_rows.row(r).begin());
  }
  auto head = num::mlp_forward(params.output_head, answer_rows);
  t.head_tape = std::move(head.tape);

  pass.log_probs = Matrix(n_answer, params.vocab_size());
  for (std::size_t r = 0; r < n_answer; ++r) log_softmax_row(head.y.row(r), pass.log_probs.row(r));
  num::require_finite(pass.log_probs, "decoder log-probabilities");
  return pass;
}

Matrix decoder_backward(DecoderParams& params, const DecoderTape& t, const Matrix& dlogits) {
  if (!t.head_tape.valid() || !t.ff_tape.valid()) throw StateError("decoder_backward called without a forward tape");
  const auto& cfg = params.config;
  const std::size_t d = cfg.model_dim;
  const std::size_t seq = t.row_tokens.size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  const Matrix d_answer = num::mlp_backward(params.output_head, t.head_tape, dlogits);
  Matrix dx2(seq, d);
  for (std::size_t r = 0; r < d_answer.rows(); ++r) {
    auto src = d_answer.row(r);
    std::copy(src.begin(), src.end(), dx2.row(t.answer_start + r).begin());
  }

  Matrix dx1 = dx2;
  dx1 += num::mlp_backward(params.feed_forward, t.ff_tape, dx2);

  params.attn_out.grad += num::matmul_tn(t.attended, dx1);
  const Matrix d_attended = num::matmul_nt(dx1, params.attn_out.value);

  const Matrix d_probs = num::matmul_nt(d_attended, t.v);
  const Matrix dv = num::matmul_tn(t.probs, d_attended);

  Matrix d_scores(seq, seq);
  for (std::size_t i = 0; i < seq; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j <= i; ++j) dot += t.probs(i, j) * d_probs(i, j);
    for (std::size_t j = 0; j <= i; ++j) d_scores(i, j) = t.probs(i, j) * (d_probs(i, j) - dot) * scale;
  }
  const Matrix dq = num::matmul(d_scores, t.k);
  const Matrix dk = num::matmul_tn(d_scores, t.q);

  params.query.grad += num::matmul_tn(t.x, dq);
  params.key.grad += num::matmul_tn(t.x, dk);
  params.value.grad += num::matmul_tn(t.x, dv);

  Matrix dx = dx1;
  dx += num::matmul_nt(dq, params.query.value);
  dx += num::matmul_nt(dk, params.key.value);
  dx += num::matmul_nt(dv, params.value.value);

  Matrix dh_v(cfg.vision_token_count, d);
  for (std::size_t r = 0; r < seq; ++r) {
    auto g = dx.row(r);
    auto pos = params.position_embedding.grad.row(r);
    for (std::size_t c = 0; c < d; ++c) pos[c] += g[c];
    auto dst = t.row_tokens[r] == kVisionRow ? dh_v.row(r) : params.token_embedding.grad.row(t.row_tokens[r]);
    for (std::size_t c = 0; c < d; ++c) dst[c] += g[c];
  }
  return dh_v;
}

std::vector<double> step_logprobs(const DecoderInput& input, std::span<const TokenId> answer_prefix,
                                  const DecoderParams& params) {
  const DecoderPass pass = decoder_forward(params, input, answer_prefix);
  const auto last = pass.log_probs.row(pass.log_probs.rows() - 1);
  return {last.begin(), last.end()};
}

double sequence_logprob(const DecoderInput& input, std::span<const TokenId> answer, const DecoderParams& params) {
  if (answer.empty()) return 0.0;
  const DecoderPass pass = decoder_forward(params, input, answer.first(answer.size() - 1));
  double total = 0.0;
  for (std::size_t j = 0; j < answer.size(); ++j) total += pass.log_probs(j, answer[j]);
  return total;
}

double ce_loss(const DecoderInput& input, std::span<const TokenId> gold, const DecoderParams& params) {
  const std::size_t n = gold_length(gold, params.config.max_answer_len);
  const DecoderPass pass = decoder_forward(params, input, gold.first(gold.size() - 1));
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) total -= pass.log_probs(j, gold[j]);
  return total / static_cast<double>(n);
}

CeBackward ce_loss_backward(const DecoderInput& input, std::span<const TokenId> gold, DecoderParams& params,
                            double scale) {
  const std::size_t n = gold_length(gold, params.config.max_answer_len);
  const DecoderPass pass = decoder_forward(params, input, gold.first(gold.size() - 1));
  CeBackward out;
  Matrix dlogits(pass.log_probs.rows(), pass.log_probs.cols());
  const double weight = scale / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    out.loss -= pass.log_probs(j, gold[j]);
    for (std::size_t c = 0; c < dlogits.cols(); ++c) dlogits(j, c) = std::exp(pass.log_probs(j, c)) * weight;
    dlogits(j, gold[j]) -= weight;
  }
  out.loss /= static_cast<double>(n);
  out.dh_v = decoder_backward(params, pass.tape, dlogits);
  return out;
}

TokenIds greedy_decode_ids(const DecoderInput& input, const DecoderParams& params) {
  TokenIds out;
  while (out.size() < params.config.max_answer_len) {
    const auto lp = step_logprobs(input, out, params);
    const TokenId best = static_cast<TokenId>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    out.push_back(best);
    if (best == Vocab::kEos) break;
  }
  return out;
}

std::string greedy_decode(const DecoderInput& input, const DecoderParams& params, const Vocab& vocab) {
  std::string text;
  for (TokenId id : greedy_decode_ids(input, params)) {
    if (id == Vocab::kEos) break;
    if (Vocab::is_reserved(id)) continue;
    if (!text.empty()) text.push_back(' ');
    text += vocab.token(id);
  }
  return text;
}

}  // namespace imfvqa::decoder
