#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "imfvqa/decoder.hpp"
#include "imfvqa/errors.hpp"

using namespace imfvqa;
using namespace imfvqa::decoder;
using num::Activation;
using num::DenseLayer;
using num::Matrix;
using num::Mlp;
using num::Parameter;

namespace {

DecoderConfig small_config() {
  DecoderConfig cfg;
  cfg.model_dim = 6;
  cfg.vision_token_count = 2;
  cfg.max_question_len = 6;
  cfg.max_answer_len = 4;
  cfg.ff_dim = 5;
  cfg.projector_hidden = 4;
  return cfg;
}

struct Fixture {
  DecoderParams params;
  DecoderInput input;
  std::vector<double> z;
};

Fixture make_fixture(std::uint64_t seed, std::size_t vocab = 12) {
  Rng rng(seed);
  Fixture f;
  f.params = make_decoder_params(small_config(), 3, vocab, rng);
  for (Parameter* p : f.params.parameters()) {
    for (auto& v : p->value.data()) v = rng.uniform(-0.9, 0.9);
  }
  f.z = {rng.normal(), rng.normal(), rng.normal()};
  f.input.h_v = project_vision(f.z, f.params.projector, f.params.config);
  const std::size_t qlen = 1 + rng.below(6);
  for (std::size_t i = 0; i < qlen; ++i) f.input.h_q.push_back(Vocab::kReservedCount + rng.below(vocab - 4));
  return f;
}

void zero_head(DecoderParams& p) {
  for (Parameter* q : p.output_head.parameters()) q->value.fill(0.0);
}

double logsumexp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

TEST(Vocab, ReservedIdsAndDenseLookup) {
  const std::vector<std::string> texts{"the red building", "Near the car."};
  const Vocab v = Vocab::build(texts);
  EXPECT_EQ(v.token(Vocab::kPad), "<pad>");
  EXPECT_EQ(v.id("red") != Vocab::kUnk, true);
  for (TokenId i = 0; i < v.size(); ++i) EXPECT_EQ(v.id(v.token(i)), i);
  EXPECT_TRUE(v.contains("20"));
  EXPECT_EQ(Vocab::from_tokens(v.tokens()), v);
}

TEST(Vocab, FromTokensRejectsMissingReserved) {
  EXPECT_THROW(Vocab::from_tokens({"a", "b", "c", "d"}), ValidationError);
}

TEST(Tokenize, LowercasesAndStripsPunctuation) {
  const std::vector<std::string> texts{"how many buildings"};
  const Vocab v = Vocab::build(texts);
  EXPECT_EQ(tokenize("How many buildings?", v), (TokenIds{v.id("how"), v.id("many"), v.id("buildings")}));
  EXPECT_TRUE(tokenize("", v).empty());
  EXPECT_EQ(tokenize("zeppelin", v), TokenIds{Vocab::kUnk});
}

TEST(ProjectVision, SingleTokenIsProjectorOutput) {
  DecoderConfig cfg;
  cfg.vision_token_count = 1;
  cfg.model_dim = 4;
  Mlp proj({DenseLayer{Parameter(Matrix::identity(4)), Parameter(Matrix(1, 4)), Activation::identity}});
  const std::vector<double> z{1, 2, 3, 4};
  EXPECT_EQ(project_vision(z, proj, cfg), Matrix::from_rows({{1, 2, 3, 4}}));
}

TEST(ProjectVision, ReshapesRowMajor) {
  DecoderConfig cfg;
  cfg.vision_token_count = 2;
  cfg.model_dim = 3;
  Mlp proj({DenseLayer{Parameter(Matrix::identity(6)), Parameter(Matrix(1, 6)), Activation::identity}});
  const std::vector<double> z{1, 2, 3, 4, 5, 6};
  EXPECT_EQ(project_vision(z, proj, cfg), Matrix::from_rows({{1, 2, 3}, {4, 5, 6}}));
}

TEST(ProjectVision, WrongOutputLength) {
  DecoderConfig cfg;
  cfg.vision_token_count = 2;
  cfg.model_dim = 4;
  Mlp proj({DenseLayer{Parameter(Matrix::identity(6)), Parameter(Matrix(1, 6)), Activation::identity}});
  const std::vector<double> z(6, 1.0);
  EXPECT_THROW(project_vision(z, proj, cfg), ShapeError);
}

TEST(StepLogprobs, NormalizedForRandomStates) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Fixture f = make_fixture(seed);
    const TokenIds prefix{5, 7};
    const auto lp = step_logprobs(f.input, prefix, f.params);
    ASSERT_EQ(lp.size(), f.params.vocab_size());
    double s = 0.0;
    for (double x : lp) s += std::exp(x);
    EXPECT_NEAR(s, 1.0, 1e-9);
    EXPECT_NEAR(logsumexp(lp), 0.0, 1e-9);
  }
}

TEST(StepLogprobs, OverlongPrefixRejected) {
  const Fixture f = make_fixture(2);
  const TokenIds prefix(f.params.config.max_answer_len, 5);
  EXPECT_THROW(step_logprobs(f.input, prefix, f.params), ShapeError);
}

TEST(StepLogprobs, FutureTokensDoNotLeakBackward) {
  const Fixture f = make_fixture(3);
  const TokenIds a{5, 6, 7}, b{5, 9, 4};
  const Matrix la = decoder_forward(f.params, f.input, a).log_probs;
  const Matrix lb = decoder_forward(f.params, f.input, b).log_probs;
  // Answer input k sits at row k + 1; rows 0..k see only earlier inputs.
  for (std::size_t c = 0; c < la.cols(); ++c) {
    EXPECT_EQ(la(0, c), lb(0, c));
    EXPECT_EQ(la(1, c), lb(1, c));
  }
  bool later_changed = false;
  for (std::size_t c = 0; c < la.cols(); ++c) later_changed |= la(2, c) != lb(2, c);
  EXPECT_TRUE(later_changed);

  const auto step = step_logprobs(f.input, TokenIds{5}, f.params);
  for (std::size_t c = 0; c < la.cols(); ++c) EXPECT_NEAR(step[c], la(1, c), 1e-12);
}

TEST(SequenceLogprob, EqualsSumOfSteps) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Fixture f = make_fixture(seed);
    const TokenIds answer{8, 4, Vocab::kEos};
    double sum = 0.0;
    for (std::size_t j = 0; j < answer.size(); ++j) {
      const TokenIds prefix(answer.begin(), answer.begin() + j);
      sum += step_logprobs(f.input, prefix, f.params)[answer[j]];
    }
    EXPECT_NEAR(sequence_logprob(f.input, answer, f.params), sum, 1e-10);
  }
}

TEST(CeLoss, UniformModelGivesLogVocab) {
  Fixture f = make_fixture(4);
  zero_head(f.params);
  const TokenIds gold{6, Vocab::kEos};
  EXPECT_NEAR(ce_loss(f.input, gold, f.params), std::log(static_cast<double>(f.params.vocab_size())), 1e-12);
}

TEST(CeLoss, PerfectModelGivesZero) {
  Fixture f = make_fixture(4);
  zero_head(f.params);
  f.params.output_head.layers().back().bias.value[Vocab::kEos] = 1000.0;
  EXPECT_NEAR(ce_loss(f.input, TokenIds{Vocab::kEos}, f.params), 0.0, 1e-12);
}

TEST(CeLoss, PadPositionsExcluded) {
  const Fixture f = make_fixture(5);
  const TokenIds gold{6, Vocab::kEos}, padded{6, Vocab::kEos, Vocab::kPad};
  EXPECT_EQ(ce_loss(f.input, gold, f.params), ce_loss(f.input, padded, f.params));
}

TEST(CeLoss, RejectsEmptyOrUnterminatedGold) {
  const Fixture f = make_fixture(5);
  EXPECT_THROW(ce_loss(f.input, TokenIds{}, f.params), ValidationError);
  EXPECT_THROW(ce_loss(f.input, TokenIds{6, 7}, f.params), ValidationError);
}

TEST(CeLoss, GradientMatchesFiniteDifferencesThroughProjector) {
  for (std::uint64_t seed : {6u, 7u}) {
    Fixture f = make_fixture(seed);
    const TokenIds gold{6, 9, Vocab::kEos};
    auto loss = [&] {
      DecoderInput in = f.input;
      in.h_v = project_vision(f.z, f.params.projector, f.params.config);
      return ce_loss(in, gold, f.params);
    };
    for (Parameter* p : f.params.parameters()) p->zero_grad();
    const auto trace = project_vision_forward(f.z, f.params.projector, f.params.config);
    DecoderInput in = f.input;
    in.h_v = trace.h_v;
    const CeBackward ce = ce_loss_backward(in, gold, f.params, 1.0);
    project_vision_backward(f.params.projector, trace, ce.dh_v);
    EXPECT_NEAR(ce.loss, loss(), 1e-12);

    auto params = f.params.parameters();
    std::vector<double> analytic, numeric;
    for (const Parameter* p : params) analytic.insert(analytic.end(), p->grad.data().begin(), p->grad.data().end());
    for (const Matrix& g : num::finite_diff_grad(loss, params)) {
      numeric.insert(numeric.end(), g.data().begin(), g.data().end());
    }
    EXPECT_LT(num::max_relative_error(analytic, numeric), 1e-5) << "seed " << seed;
  }
}

TEST(GreedyDecode, ImmediateEosGivesEmptyString) {
  Fixture f = make_fixture(8);
  zero_head(f.params);
  f.params.output_head.layers().back().bias.value[Vocab::kEos] = 50.0;
  const Vocab v = Vocab::from_tokens({"<pad>", "<bos>", "<eos>", "<unk>", "a", "b", "c", "d", "e", "f", "g", "h"});
  EXPECT_EQ(greedy_decode(f.input, f.params, v), "");
}

TEST(GreedyDecode, TiesGoToLowestId) {
  Fixture f = make_fixture(8);
  zero_head(f.params);
  auto& bias = f.params.output_head.layers().back().bias.value;
  bias[3] = 5.0;
  bias[7] = 5.0;
  const TokenIds ids = greedy_decode_ids(f.input, f.params);
  ASSERT_FALSE(ids.empty());
  EXPECT_EQ(ids.front(), 3u);
}

TEST(GreedyDecode, DeterministicAndBounded) {
  const Fixture f = make_fixture(9);
  const TokenIds a = greedy_decode_ids(f.input, f.params);
  EXPECT_EQ(a, greedy_decode_ids(f.input, f.params));
  EXPECT_LE(a.size(), f.params.config.max_answer_len);
}
