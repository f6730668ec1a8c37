#pragma once

// Everything a command-line run can be configured with, read from a JSON
// file and then overridden by flags. Unknown keys are rejected.
//
//   {
//     "seed": 7,
//     "train": {"lr", "weight_decay", "batch_size", "kl_weight", "modality_dropout_p", "epochs",
//               "imf": {...}, "decoder": {...}},
//     "synthetic": {"point_levels", "image_levels", ..., "cross_signal"},
//     "relations": {"near_terrestrial", "near_low_altitude", "near_high_altitude", "far_factor",
//                   "dead_zone_deg", "tie_margin"},
//     "judge": {"endpoint", "model", "api_key_env", "max_in_flight", "timeout_s", "max_retries", "backoff_s"},
//     "paraphrase": {"endpoint", "model", "api_key_env", "timeout_s", "max_retries"}
//   }
//
// The top-level seed is the only seed; "train.seed" is not accepted here.

#include <cstdint>
#include <string>

#include "imfvqa/evalkit.hpp"
#include "imfvqa/json_fields.hpp"
#include "imfvqa/svmgen.hpp"
#include "imfvqa/synthetic.hpp"
#include "imfvqa/training.hpp"

namespace imfvqa {

struct ParaphraseConfig {
  std::string endpoint;
  std::string model = "gpt-3.5-turbo";
  std::string api_key_env = "PARAPHRASE_API_KEY";
  double timeout_s = 30.0;
  int max_retries = 2;
};

struct RunConfig {
  std::uint64_t seed = 7;
  training::TrainConfig train;
  synthetic::SyntheticTaskSpec synthetic;
  svmgen::RelationThresholds relations;
  evalkit::RemoteJudgeConfig judge;
  ParaphraseConfig paraphrase;

  /// Copies the run seed into the sections that carry one and validates.
  void finalize();
};

ordered_json to_json(const RunConfig& c);
void apply_json(const json& j, RunConfig& c);

/// Reads and overlays a config file; ConfigError on unreadable or invalid input.
void apply_config_file(const std::string& path, RunConfig& c);

}  // namespace imfvqa
