#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "imfvqa/checkpoint.hpp"
#include "imfvqa/errors.hpp"
#include "imfvqa/evalkit.hpp"
#include "imfvqa/example_io.hpp"
#include "imfvqa/http_client.hpp"
#include "imfvqa/run_config.hpp"
#include "imfvqa/selftest.hpp"
#include "imfvqa/svmgen.hpp"
#include "imfvqa/synthetic.hpp"
#include "imfvqa/training.hpp"

using namespace imfvqa;

namespace {

struct UsageError : Error {
  using Error::Error;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
  if (!out) throw IoError("failed writing: " + path);
}

/// Options shared by every command that reads a RunConfig.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "Seed for all randomness (overrides the config file)");
  }

  RunConfig load(const std::function<void(RunConfig&)>& flags = {}) const {
    RunConfig cfg;
    if (!config_path.empty()) apply_config_file(config_path, cfg);
    if (seed) cfg.seed = *seed;
    if (flags) flags(cfg);
    cfg.finalize();
    return cfg;
  }
};

std::vector<training::Example> data_or_synthetic(const std::string& path, const RunConfig& cfg, bool train_split) {
  if (!path.empty()) return training::load_examples(path);
  const auto ds = synthetic::make_synthetic_dataset(cfg.synthetic, cfg.seed);
  return train_split ? ds.train : ds.test;
}

ordered_json summary_json(const svmgen::CorpusSummary& s) {
  return ordered_json{{"total", s.total},
                      {"single_hop", s.single_hop},
                      {"multi_hop", s.multi_hop},
                      {"by_qtype", s.by_qtype},
                      {"by_modality", s.by_modality}};
}

int cmd_gen(const Common& common, const std::string& scenes_path, const std::string& out_path, bool use_paraphrase) {
  const RunConfig cfg = common.load();
  std::unique_ptr<net::ParaphraseClient> client;
  if (use_paraphrase) {
    if (cfg.paraphrase.endpoint.empty()) throw ConfigError("--paraphrase needs paraphrase.endpoint in the config");
    const char* key = std::getenv(cfg.paraphrase.api_key_env.c_str());
    if (key == nullptr || *key == '\0') throw ConfigError("--paraphrase needs " + cfg.paraphrase.api_key_env);
    client = std::make_unique<net::ParaphraseClient>(cfg.paraphrase.endpoint, cfg.paraphrase.model, key,
                                                     cfg.paraphrase.timeout_s, cfg.paraphrase.max_retries);
  }
  const auto scenes = svmgen::load_scenes(scenes_path);
  auto pairs = svmgen::generate_corpus(scenes, cfg.relations, cfg.seed);
  if (client) {
    for (auto& q : pairs) {
      q = svmgen::paraphrase(q, client.get(), [](const std::string& w) { std::cerr << "warning: " << w << "\n"; });
    }
  }
  svmgen::emit_corpus(pairs, out_path);
  const auto summary = svmgen::summarize(pairs);
  const ordered_json meta{{"command", "gen"},
                          {"scenes", scenes_path},
                          {"corpus", out_path},
                          {"paraphrase", use_paraphrase},
                          {"config", to_json(cfg)},
                          {"summary", summary_json(summary)}};
  write_text(out_path + ".meta.json", meta.dump(2) + "\n");

  std::printf("wrote %zu pairs from %zu scenes to %s\n", summary.total, scenes.size(), out_path.c_str());
  std::printf("%-16s %6s\n", "qtype", "pairs");
  for (const auto& [k, v] : summary.by_qtype) std::printf("%-16s %6zu\n", k.c_str(), v);
  std::printf("%-16s %6s\n", "modality", "pairs");
  for (const auto& [k, v] : summary.by_modality) std::printf("%-16s %6zu\n", k.c_str(), v);
  std::printf("single-hop %zu, multi-hop %zu\n", summary.single_hop, summary.multi_hop);
  return 0;
}

int cmd_synth(const Common& common, const std::string& out_dir) {
  const RunConfig cfg = common.load();
  const auto ds = synthetic::make_synthetic_dataset(cfg.synthetic, cfg.seed);
  const std::string train_path = out_dir + "/train.jsonl";
  const std::string test_path = out_dir + "/test.jsonl";
  training::save_examples(ds.train, train_path);
  training::save_examples(ds.test, test_path);
  const ordered_json meta{{"command", "synth"},
                          {"train", train_path},
                          {"test", test_path},
                          {"config", to_json(cfg)}};
  write_text(out_dir + "/synth.meta.json", meta.dump(2) + "\n");
  std::printf("wrote %zu train and %zu test examples to %s\n", ds.train.size(), ds.test.size(), out_dir.c_str());
  return 0;
}

struct TrainFlags {
  std::string data;
  std::string out;
  std::string trace;
  std::string resume;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<double> dropout;
  std::optional<std::size_t> batch_size;
  std::optional<double> kl_weight;
};

int cmd_train(const Common& common, const TrainFlags& f) {
  const RunConfig cfg = common.load([&](RunConfig& c) {
    if (f.epochs) c.train.epochs = *f.epochs;
    if (f.lr) c.train.lr = *f.lr;
    if (f.dropout) c.train.modality_dropout_p = *f.dropout;
    if (f.batch_size) c.train.batch_size = *f.batch_size;
    if (f.kl_weight) c.train.kl_weight = *f.kl_weight;
  });
  const auto split = data_or_synthetic(f.data, cfg, true);
  training::TrainResult result;
  if (f.resume.empty()) {
    result = training::train(cfg.train, split);
  } else {
    auto previous = training::load_checkpoint(f.resume);
    Rng rng(0);
    rng.restore(previous.rng_state);
    result = training::train(cfg.train, split, std::move(previous.model), std::move(rng));
  }
  training::Checkpoint ckpt{std::move(result.model), result.config, result.rng_state};
  training::save_checkpoint(ckpt, f.out);

  ordered_json epochs = ordered_json::array();
  for (const auto& e : result.trace) {
    epochs.push_back(ordered_json{{"epoch", e.epoch}, {"total", e.total}, {"ce", e.ce}, {"kl", e.kl}});
  }
  const ordered_json trace{{"command", "train"},
                           {"data", f.data.empty() ? std::string("synthetic") : f.data},
                           {"resume", f.resume},
                           {"checkpoint", f.out},
                           {"config", to_json(cfg)},
                           {"trace", std::move(epochs)}};
  const std::string trace_path = f.trace.empty() ? f.out + ".trace.json" : f.trace;
  write_text(trace_path, trace.dump(2) + "\n");
  const auto& last = result.trace.back();
  std::printf("trained %zu epochs on %zu examples: total %.6f ce %.6f kl %.6f\n", result.trace.size(), split.size(),
              last.total, last.ce, last.kl);
  std::printf("checkpoint %s, trace %s\n", f.out.c_str(), trace_path.c_str());
  return 0;
}

struct EvalFlags {
  std::string ckpt;
  std::string data;
  std::string judge = "exact";
  std::string out = "eval";
  std::vector<std::string> conditions = {"both", "image-only", "point-only"};
};

imf::ModalityCondition condition_from_string(const std::string& s) {
  for (auto c : {imf::ModalityCondition::both, imf::ModalityCondition::image_only,
                 imf::ModalityCondition::point_only}) {
    if (s == imf::to_string(c)) return c;
  }
  throw ConfigError("unknown condition '" + s + "' (allowed: both, image-only, point-only)");
}

int cmd_eval(const Common& common, const EvalFlags& f) {
  const RunConfig cfg = common.load();
  const auto mode = evalkit::judge_mode_from_string(f.judge);
  std::vector<imf::ModalityCondition> conditions;
  for (const auto& c : f.conditions) conditions.push_back(condition_from_string(c));
  std::unique_ptr<net::ChatEndpoint> endpoint;
  if (mode == evalkit::JudgeMode::remote) {
    const std::string key = evalkit::require_credential(cfg.judge);
    cfg.judge.validate();
    endpoint = std::make_unique<net::ChatEndpoint>(cfg.judge.endpoint, cfg.judge.model, key);
  }

  const auto ckpt = training::load_checkpoint(f.ckpt);
  const auto data = data_or_synthetic(f.data, cfg, false);
  if (data.empty()) throw ValidationError("empty report: the data file has no examples");
  const std::string corpus = f.data.empty() ? "synthetic-test" : f.data;

  for (auto condition : conditions) {
    std::vector<evalkit::Triplet> triplets;
    for (const auto& e : data) {
      const auto bundle = imf::restrict_to(e.bundle, condition);
      if (!bundle) continue;
      triplets.push_back({e.question, e.answer, training::predict(ckpt.model, *bundle, e.question), e.qtype});
    }
    if (triplets.empty()) {
      throw ValidationError(std::string("empty report: no examples carry the modalities for ") +
                            imf::to_string(condition));
    }
    std::vector<std::optional<evalkit::Verdict>> verdicts;
    if (mode == evalkit::JudgeMode::exact) {
      for (const auto& t : triplets) verdicts.emplace_back(evalkit::exact_judge(t));
    } else {
      auto res = evalkit::remote_judge(triplets, *endpoint, cfg.judge);
      for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
      verdicts = std::move(res.verdicts);
    }
    auto report = evalkit::aggregate(triplets, verdicts, mode, corpus);
    report.condition = imf::to_string(condition);
    ordered_json j = evalkit::report_json(report);
    j["checkpoint"] = f.ckpt;
    j["config"] = to_json(cfg);
    const std::string base = f.out + "." + report.condition;
    write_text(base + ".json", j.dump(2) + "\n");
    write_text(base + ".txt", evalkit::format_report(report));
    std::cout << evalkit::format_report(report) << "\n";
  }
  return 0;
}

int cmd_infer(const std::string& ckpt_path, const std::string& question, const std::string& image_path,
              const std::string& point_path) {
  if (image_path.empty() && point_path.empty()) {
    throw UsageError("infer needs --image-features, --point-features or both");
  }
  const auto ckpt = training::load_checkpoint(ckpt_path);
  imf::ModalityBundle bundle;
  if (!image_path.empty()) bundle.image = training::load_feature_file(image_path);
  if (!point_path.empty()) bundle.point = training::load_feature_file(point_path);
  std::cout << training::predict(ckpt.model, bundle, question) << "\n";
  return 0;
}

int cmd_selftest(std::uint64_t seed) {
  std::optional<std::string> first_failure;
  selftest::run_all(seed, [&](const selftest::CheckResult& r) {
    std::printf("%-20s %s  %6.2fs  %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL", r.seconds, r.detail.c_str());
    std::fflush(stdout);
    if (!r.passed && !first_failure) first_failure = r.name;
  });
  if (first_failure) {
    std::printf("selftest failed: %s\n", first_failure->c_str());
    return 1;
  }
  std::printf("selftest passed\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incomplete multimodal fusion VQA toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every command");

  Common gen_common;
  std::string scenes_path;
  std::string corpus_out;
  bool paraphrase = false;
  auto* gen = app.add_subcommand("gen", "Generate a QA corpus from scene annotations");
  gen->add_option("--scenes", scenes_path, "Scene annotation file")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", corpus_out, "Corpus output path (JSON lines)")->required();
  gen->add_flag("--paraphrase", paraphrase, "Rewrite questions through the configured remote model");
  gen_common.add_to(gen);

  Common synth_common;
  std::string synth_dir;
  auto* synth = app.add_subcommand("synth", "Write the synthetic feature task as train/test data files");
  synth->add_option("--out-dir", synth_dir, "Output directory")->required()->check(CLI::ExistingDirectory);
  synth_common.add_to(synth);

  Common train_common;
  TrainFlags tf;
  auto* train = app.add_subcommand("train", "Train a model and save a checkpoint");
  train->add_option("--data", tf.data, "Training data file; defaults to the synthetic task")
      ->check(CLI::ExistingFile);
  train->add_option("--out", tf.out, "Checkpoint output path")->required();
  train->add_option("--trace", tf.trace, "Loss trace path (default: <out>.trace.json)");
  train->add_option("--resume", tf.resume, "Continue from this checkpoint")->check(CLI::ExistingFile);
  train->add_option("--epochs", tf.epochs, "Training epochs");
  train->add_option("--lr", tf.lr, "Adam learning rate");
  train->add_option("--dropout", tf.dropout, "Modality dropout probability");
  train->add_option("--batch-size", tf.batch_size, "Mini-batch size");
  train->add_option("--kl-weight", tf.kl_weight, "KL weight");
  train_common.add_to(train);

  Common eval_common;
  EvalFlags ef;
  auto* eval = app.add_subcommand("eval", "Decode and judge a data file under each modality condition");
  eval->add_option("--ckpt", ef.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", ef.data, "Evaluation data file; defaults to the synthetic test split")
      ->check(CLI::ExistingFile);
  eval->add_option("--judge", ef.judge, "exact or remote")->check(CLI::IsMember({"exact", "remote"}));
  eval->add_option("--out", ef.out, "Report path prefix; writes <out>.<condition>.json and .txt");
  eval->add_option("--conditions", ef.conditions, "Subset of both, image-only, point-only")
      ->check(CLI::IsMember({"both", "image-only", "point-only"}));
  eval_common.add_to(eval);

  std::string infer_ckpt;
  std::string question;
  std::string image_path;
  std::string point_path;
  auto* infer = app.add_subcommand("infer", "Answer one question from feature files");
  infer->add_option("--ckpt", infer_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  infer->add_option("--question", question, "Question text")->required();
  infer->add_option("--image-features", image_path, "Image feature file, one value per line")
      ->check(CLI::ExistingFile);
  infer->add_option("--point-features", point_path, "Point-cloud feature file, one value per line")
      ->check(CLI::ExistingFile);

  std::uint64_t selftest_seed = 7;
  auto* self = app.add_subcommand("selftest", "Run the built-in property checks");
  self->add_option("--seed", selftest_seed, "Seed for the checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return cmd_gen(gen_common, scenes_path, corpus_out, paraphrase);
    if (*synth) return cmd_synth(synth_common, synth_dir);
    if (*train) return cmd_train(train_common, tf);
    if (*eval) return cmd_eval(eval_common, ef);
    if (*infer) return cmd_infer(infer_ckpt, question, image_path, point_path);
    if (*self) return cmd_selftest(selftest_seed);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
