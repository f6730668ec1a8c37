#pragma once

// Toy autoregressive answer generator. The fused latent is projected into a
// short run of vision tokens, the question tokens follow, then BOS and the
// answer prefix. One causal self-attention block plus a position-wise
// feed-forward block (both residual) feeds a linear head over the vocabulary.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "imfvqa/numerics.hpp"
#include "imfvqa/rng.hpp"

namespace imfvqa::decoder {

using TokenId = std::size_t;
using TokenIds = std::vector<TokenId>;

class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr std::size_t kReservedCount = 4;

  /// Only the reserved tokens.
  Vocab();

  /// Reserved tokens, then the digits 0..20, then every word of `texts`
  /// (after tokenizer normalization) in sorted order.
  static Vocab build(std::span<const std::string> texts);

  /// Rebuilds from an explicit token list (reserved tokens first).
  static Vocab from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(TokenId id) const { return tokens_.at(id); }

  /// Id of `word`, or kUnk.
  TokenId id(std::string_view word) const;
  bool contains(std::string_view word) const;
  static bool is_reserved(TokenId id) { return id < kReservedCount; }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Lowercase, strip punctuation, split on whitespace.
std::vector<std::string> split_words(std::string_view text);

TokenIds tokenize(std::string_view text, const Vocab& vocab);

struct DecoderConfig {
  std::size_t model_dim = 16;
  std::size_t vision_token_count = 2;
  std::size_t max_question_len = 24;
  std::size_t max_answer_len = 6;
  std::size_t ff_dim = 32;
  std::size_t projector_hidden = 0;  // 0 gives a single linear projector

  std::size_t max_sequence_len() const { return vision_token_count + max_question_len + max_answer_len; }
  void validate() const;
};

struct DecoderParams {
  DecoderConfig config;
  num::Mlp projector;               // latent -> vision_token_count * model_dim
  num::Parameter token_embedding;   // vocab x model_dim
  num::Parameter position_embedding;  // max_sequence_len x model_dim
  num::Parameter query;             // model_dim x model_dim
  num::Parameter key;
  num::Parameter value;
  num::Parameter attn_out;
  num::Mlp feed_forward;  // model_dim -> ff_dim (tanh) -> model_dim
  num::Mlp output_head;   // model_dim -> vocab

  std::size_t vocab_size() const { return token_embedding.value.rows(); }
  std::vector<num::Parameter*> parameters();
};

DecoderParams make_decoder_params(const DecoderConfig& cfg, std::size_t latent_dim, std::size_t vocab_size,
                                  Rng& rng);

struct DecoderInput {
  num::Matrix h_v;  // vision_token_count x model_dim
  TokenIds h_q;
};

/// Reshapes proj(z) into vision_token_count rows of model_dim.
num::Matrix project_vision(std::span<const double> z, const num::Mlp& projector, const DecoderConfig& cfg);

struct ProjectionTrace {
  num::Matrix h_v;
  num::MlpTape tape;
};
ProjectionTrace project_vision_forward(std::span<const double> z, const num::Mlp& projector,
                                       const DecoderConfig& cfg);
/// Returns dL/dz and accumulates projector gradients.
std::vector<double> project_vision_backward(num::Mlp& projector, const ProjectionTrace& trace,
                                            const num::Matrix& dh_v);

/// Activations of one decoder pass, kept for backward.
struct DecoderTape {
  std::vector<TokenId> row_tokens;  // token id per row; npos for vision rows
  std::size_t answer_start = 0;     // row index of BOS
  num::Matrix x, q, k, v, probs, attended, x1, x2;
  num::MlpTape ff_tape;
  num::MlpTape head_tape;
};

struct DecoderPass {
  num::Matrix log_probs;  // one row per answer position (BOS + prefix)
  DecoderTape tape;
};

/// Runs the decoder on [h_v, h_q, BOS, answer_inputs...] and returns the
/// log-softmax at every answer position.
DecoderPass decoder_forward(const DecoderParams& params, const DecoderInput& input,
                            std::span<const TokenId> answer_inputs);

/// Accumulates parameter gradients given dL/dlogits at the answer positions
/// and returns dL/dh_v.
num::Matrix decoder_backward(DecoderParams& params, const DecoderTape& tape, const num::Matrix& dlogits);

/// log P(a_j | h_v, h_q, a_<j) over the whole vocabulary.
std::vector<double> step_logprobs(const DecoderInput& input, std::span<const TokenId> answer_prefix,
                                  const DecoderParams& params);

/// Σ_j log P(a_j | ...) from one teacher-forced pass.
double sequence_logprob(const DecoderInput& input, std::span<const TokenId> answer, const DecoderParams& params);

/// Mean over non-PAD answer positions of −log P(a_j | ...). gold must be
/// non-empty and EOS-terminated (trailing PAD allowed).
double ce_loss(const DecoderInput& input, std::span<const TokenId> gold, const DecoderParams& params);

struct CeBackward {
  double loss = 0.0;
  num::Matrix dh_v;
};

/// ce_loss plus gradients; every gradient is multiplied by `scale`.
CeBackward ce_loss_backward(const DecoderInput& input, std::span<const TokenId> gold, DecoderParams& params,
                            double scale);

/// Argmax decoding until EOS or max_answer_len; ties go to the lowest id.
TokenIds greedy_decode_ids(const DecoderInput& input, const DecoderParams& params);

/// greedy_decode_ids rendered as words joined by single spaces, reserved
/// tokens dropped.
std::string greedy_decode(const DecoderInput& input, const DecoderParams& params, const Vocab& vocab);

/// Answer text → ids terminated by EOS.
TokenIds encode_answer(std::string_view answer, const Vocab& vocab);

}  // namespace imfvqa::decoder
