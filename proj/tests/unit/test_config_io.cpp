#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "imfvqa/errors.hpp"
#include "imfvqa/example_io.hpp"
#include "imfvqa/http_client.hpp"
#include "imfvqa/run_config.hpp"

using namespace imfvqa;

namespace {

std::string expect_config_error(const std::string& text) {
  RunConfig c;
  try {
    apply_json(json::parse(text), c);
    c.finalize();
  } catch (const ConfigError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no ConfigError for " << text;
  return "";
}

}  // namespace

TEST(RunConfig, DefaultsMatchDocumentedValues) {
  RunConfig c;
  c.finalize();
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.train.seed, 7u);
  EXPECT_EQ(c.train.lr, 1e-3);
  EXPECT_EQ(c.train.weight_decay, 5e-4);
  EXPECT_EQ(c.train.batch_size, 4u);
  EXPECT_EQ(c.train.kl_weight, 1e-3);
  EXPECT_EQ(c.train.modality_dropout_p, 0.3);
  EXPECT_EQ(c.relations.near_terrestrial, 10.0);
  EXPECT_EQ(c.relations.near_low_altitude, 50.0);
  EXPECT_EQ(c.relations.near_high_altitude, 500.0);
  EXPECT_EQ(c.relations.far_factor, 5.0);
  EXPECT_EQ(c.relations.dead_zone_deg, 15.0);
  EXPECT_EQ(c.judge.max_in_flight, 4u);
  EXPECT_EQ(c.judge.timeout_s, 60.0);
  EXPECT_EQ(c.judge.max_retries, 2);
  EXPECT_EQ(c.judge.api_key_env, "JUDGE_API_KEY");
  EXPECT_EQ(c.paraphrase.timeout_s, 30.0);
  EXPECT_EQ(c.paraphrase.max_retries, 2);
}

TEST(RunConfig, OverlayAndSeedPropagation) {
  RunConfig c;
  apply_json(json::parse(R"({"seed": 11, "train": {"epochs": 5, "imf": {"latent_dim": 4}}, "relations": {"dead_zone_deg": 20}})"), c);
  c.finalize();
  EXPECT_EQ(c.train.seed, 11u);
  EXPECT_EQ(c.train.epochs, 5u);
  EXPECT_EQ(c.train.imf.latent_dim, 4u);
  EXPECT_EQ(c.relations.dead_zone_deg, 20.0);
  EXPECT_EQ(c.train.lr, 1e-3);
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c;
  apply_json(json::parse(R"({"seed": 3, "train": {"lr": 0.01}, "judge": {"model": "judge-x"}})"), c);
  c.finalize();
  RunConfig d;
  apply_json(json::parse(to_json(c).dump()), d);
  d.finalize();
  EXPECT_EQ(to_json(c), to_json(d));
}

TEST(RunConfig, MalformedFieldsNamed) {
  EXPECT_NE(expect_config_error(R"({"train": {"lrr": 1}})").find("train.lrr"), std::string::npos);
  EXPECT_NE(expect_config_error(R"({"train": {"lr": "fast"}})").find("train.lr"), std::string::npos);
  EXPECT_NE(expect_config_error(R"({"train": {"seed": 3}})").find("train.seed"), std::string::npos);
  EXPECT_NE(expect_config_error(R"({"train": {"modality_dropout_p": 1.5}})").find("modality_dropout_p"),
            std::string::npos);
  EXPECT_NE(expect_config_error(R"({"bogus": 1})").find("bogus"), std::string::npos);
}

TEST(RunConfig, DimensionMismatchBetweenSectionsRejected) {
  expect_config_error(R"({"synthetic": {"image_dim": 5}})");
}

TEST(RunConfig, UnreadableFile) {
  RunConfig c;
  EXPECT_THROW(apply_config_file("/nonexistent/config.json", c), ConfigError);
  const auto path = (std::filesystem::temp_directory_path() / "imfvqa_bad_config.json").string();
  std::ofstream(path) << "{ not json";
  EXPECT_THROW(apply_config_file(path, c), ConfigError);
  std::filesystem::remove(path);
}

TEST(Examples, RoundTripWithMissingModalities) {
  std::vector<training::Example> ex{
      {{imf::Vector{0.1, 0.2}, imf::Vector{1.0 / 3.0}}, "what is here", "red car", "unknown"},
      {{std::nullopt, imf::Vector{-2.5}}, "what is here", "blue tree", "measurement"},
      {{imf::Vector{1e-300, 7}, std::nullopt}, "q", "a", "unknown"},
  };
  const auto back = training::decode_examples(training::encode_examples(ex));
  ASSERT_EQ(back.size(), ex.size());
  for (std::size_t i = 0; i < ex.size(); ++i) {
    EXPECT_EQ(back[i].bundle, ex[i].bundle);
    EXPECT_EQ(back[i].question, ex[i].question);
    EXPECT_EQ(back[i].answer, ex[i].answer);
    EXPECT_EQ(back[i].qtype, ex[i].qtype);
  }
}

TEST(Examples, BadLineReportsLineNumber) {
  try {
    training::decode_examples("{\"question\": \"q\", \"answer\": \"a\", \"point\": [1]}\n{\"question\": 5}\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Examples, ExampleWithoutFeaturesRejected) {
  EXPECT_ANY_THROW(training::decode_examples("{\"question\": \"q\", \"answer\": \"a\"}\n"));
}

TEST(FeatureText, OneValuePerLine) {
  EXPECT_EQ(training::parse_feature_text("# header\n0.5\n\n-1e-3\n  2  \n", "t"), (std::vector<double>{0.5, -1e-3, 2}));
  EXPECT_THROW(training::parse_feature_text("1\nabc\n", "t"), ParseError);
  EXPECT_THROW(training::parse_feature_text("1 2\n", "t"), ParseError);
  EXPECT_THROW(training::parse_feature_text("nan\n", "t"), ParseError);
  EXPECT_THROW(training::parse_feature_text("# nothing\n", "t"), ParseError);
}

TEST(ChatReply, ExtractsFirstMessageOrRawBody) {
  EXPECT_EQ(net::reply_text(R"({"choices": [{"message": {"role": "assistant", "content": "T. same"}}]})"), "T. same");
  EXPECT_EQ(net::reply_text("F because"), "F because");
}
