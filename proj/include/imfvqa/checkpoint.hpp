#pragma once

#include <cstdint>
#include <string>

#include "imfvqa/json_fields.hpp"
#include "imfvqa/synthetic.hpp"
#include "imfvqa/training.hpp"

namespace imfvqa::training {

ordered_json to_json(const imf::ImfConfig& cfg);
ordered_json to_json(const decoder::DecoderConfig& cfg);
ordered_json to_json(const TrainConfig& cfg);
ordered_json to_json(const synthetic::SyntheticTaskSpec& spec);

/// Overlay the fields present in `j` onto `cfg`; unknown or mistyped fields
/// raise ConfigError naming the dotted path.
void apply_json(const json& j, imf::ImfConfig& cfg, const std::string& path = "imf");
void apply_json(const json& j, decoder::DecoderConfig& cfg, const std::string& path = "decoder");
void apply_json(const json& j, TrainConfig& cfg, const std::string& path = "train");
void apply_json(const json& j, synthetic::SyntheticTaskSpec& spec, const std::string& path = "synthetic");

/// Trained model plus everything needed to resume or audit it.
///
/// On-disk layout (all integers and floats little-endian):
///
///   offset 0   8 bytes   magic "IMFVQACK"
///   offset 8   u32       format version
///   offset 12  u64       header length H
///   offset 20  H bytes   UTF-8 JSON header:
///                          {"config": <train config echo>,
///                           "vocab": [token, ...],
///                           "rng_state": "<engine state text>",
///                           "params": [{"name", "rows", "cols"}, ...]}
///   then       f64[]     each parameter's values, row-major, in header order
///   then       u64       FNV-1a 64 checksum of every preceding byte
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  Model model;
  TrainConfig config;
  std::string rng_state;
};

void save_checkpoint(Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// In-memory encode/decode used by the file functions.
std::string encode_checkpoint(Checkpoint& c);
Checkpoint decode_checkpoint(const std::string& bytes);

}  // namespace imfvqa::training
