#include "imfvqa/run_config.hpp"

#include <fstream>
#include <iterator>

#include "imfvqa/checkpoint.hpp"
#include "imfvqa/errors.hpp"

namespace imfvqa {

namespace {

ordered_json relations_json(const svmgen::RelationThresholds& r) {
  return ordered_json{{"near_terrestrial", r.near_terrestrial},     {"near_low_altitude", r.near_low_altitude},
                      {"near_high_altitude", r.near_high_altitude}, {"far_factor", r.far_factor},
                      {"dead_zone_deg", r.dead_zone_deg},           {"tie_margin", r.tie_margin}};
}

void validate_relations(const svmgen::RelationThresholds& r) {
  for (double v : {r.near_terrestrial, r.near_low_altitude, r.near_high_altitude}) {
    if (!(v > 0.0)) throw ConfigError("relations.near_* must be > 0");
  }
  if (!(r.far_factor >= 1.0)) throw ConfigError("relations.far_factor must be >= 1");
  if (!(r.dead_zone_deg >= 0.0 && r.dead_zone_deg < 45.0)) {
    throw ConfigError("relations.dead_zone_deg must be in [0, 45)");
  }
  if (!(r.tie_margin >= 0.0)) throw ConfigError("relations.tie_margin must be >= 0");
}

}  // namespace

void RunConfig::finalize() {
  train.seed = seed;
  train.validate();
  try {
    synthetic.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  validate_relations(relations);
  if (train.imf.image_dim != synthetic.image_dim || train.imf.point_dim != synthetic.point_dim) {
    throw ConfigError("train.imf.image_dim/point_dim must match synthetic.image_dim/point_dim");
  }
  if (judge.max_in_flight == 0) throw ConfigError("judge.max_in_flight must be >= 1");
  if (!(judge.timeout_s > 0.0)) throw ConfigError("judge.timeout_s must be > 0");
  if (judge.max_retries < 0) throw ConfigError("judge.max_retries must be >= 0");
  if (!(paraphrase.timeout_s > 0.0)) throw ConfigError("paraphrase.timeout_s must be > 0");
  if (paraphrase.max_retries < 0) throw ConfigError("paraphrase.max_retries must be >= 0");
}

ordered_json to_json(const RunConfig& c) {
  ordered_json train = training::to_json(c.train);
  train.erase("seed");
  return ordered_json{{"seed", c.seed},
                      {"train", std::move(train)},
                      {"synthetic", training::to_json(c.synthetic)},
                      {"relations", relations_json(c.relations)},
                      {"judge",
                       {{"endpoint", c.judge.endpoint},
                        {"model", c.judge.model},
                        {"api_key_env", c.judge.api_key_env},
                        {"max_in_flight", c.judge.max_in_flight},
                        {"timeout_s", c.judge.timeout_s},
                        {"max_retries", c.judge.max_retries},
                        {"backoff_s", c.judge.backoff_s}}},
                      {"paraphrase",
                       {{"endpoint", c.paraphrase.endpoint},
                        {"model", c.paraphrase.model},
                        {"api_key_env", c.paraphrase.api_key_env},
                        {"timeout_s", c.paraphrase.timeout_s},
                        {"max_retries", c.paraphrase.max_retries}}}};
}

void apply_json(const json& j, RunConfig& c) {
  FieldReader r(j, "");
  r.read("seed", c.seed);
  if (const json* t = r.object("train")) {
    if (t->contains("seed")) throw ConfigError("train.seed is not accepted; use the top-level seed");
    training::apply_json(*t, c.train, "train");
  }
  if (const json* s = r.object("synthetic")) training::apply_json(*s, c.synthetic, "synthetic");
  if (const json* rel = r.object("relations")) {
    FieldReader rr(*rel, "relations");
    rr.read("near_terrestrial", c.relations.near_terrestrial);
    rr.read("near_low_altitude", c.relations.near_low_altitude);
    rr.read("near_high_altitude", c.relations.near_high_altitude);
    rr.read("far_factor", c.relations.far_factor);
    rr.read("dead_zone_deg", c.relations.dead_zone_deg);
    rr.read("tie_margin", c.relations.tie_margin);
    rr.finish();
  }
  if (const json* jd = r.object("judge")) {
    FieldReader jr(*jd, "judge");
    jr.read("endpoint", c.judge.endpoint);
    jr.read("model", c.judge.model);
    jr.read("api_key_env", c.judge.api_key_env);
    jr.read("max_in_flight", c.judge.max_in_flight);
    jr.read("timeout_s", c.judge.timeout_s);
    jr.read("max_retries", c.judge.max_retries);
    jr.read("backoff_s", c.judge.backoff_s);
    jr.finish();
  }
  if (const json* p = r.object("paraphrase")) {
    FieldReader pr(*p, "paraphrase");
    pr.read("endpoint", c.paraphrase.endpoint);
    pr.read("model", c.paraphrase.model);
    pr.read("api_key_env", c.paraphrase.api_key_env);
    pr.read("timeout_s", c.paraphrase.timeout_s);
    pr.read("max_retries", c.paraphrase.max_retries);
    pr.finish();
  }
  r.finish();
}

void apply_config_file(const std::string& path, RunConfig& c) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  apply_json(j, c);
}

}  // namespace imfvqa
