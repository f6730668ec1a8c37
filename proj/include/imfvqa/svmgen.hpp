#pragma once

// Scene-graph driven QA data factory: object annotations in, spatial scene
// graphs built from geometry and observer pose, four template families
// instantiated into single- and two-hop QA pairs with provenance.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "imfvqa/rng.hpp"

namespace imfvqa::svmgen {

enum class ScaleTier { terrestrial, low_altitude, high_altitude };

const char* to_string(ScaleTier t);
ScaleTier tier_from_string(std::string_view s);

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  bool operator==(const Vec3&) const = default;
};

struct ObjectAnno {
  std::string id;
  std::string label;  // object class, from the tier's class vocabulary
  Vec3 centroid;      // meters
  Vec3 extents;       // meters, each >= 0
  std::optional<std::string> color;
  std::optional<std::string> pose;
  std::optional<std::string> functionality;

  bool operator==(const ObjectAnno&) const = default;
};

struct ObserverPose {
  Vec3 position;
  double facing_x = 0.0;  // facing direction in the ground plane, any non-zero length
  double facing_y = 1.0;
  bool operator==(const ObserverPose&) const = default;
};

struct SceneAnnotation {
  std::string scene_id;
  std::string city;
  ScaleTier tier = ScaleTier::terrestrial;
  bool has_image = false;
  bool has_point = false;
  ObserverPose observer;
  std::vector<ObjectAnno> objects;

  bool operator==(const SceneAnnotation&) const = default;
};

/// Closed vocabularies.
const std::vector<std::string>& tier_classes(ScaleTier tier);
const std::vector<std::string>& color_tokens();
const std::vector<std::string>& pose_tokens();
const std::vector<std::string>& functionality_tokens();
std::string plural(std::string_view label);

/// Validates a scene in memory (unique ids, finite geometry, closed tokens).
void validate_scene(const SceneAnnotation& s);

std::vector<SceneAnnotation> parse_scenes(std::string_view text);
std::vector<SceneAnnotation> load_scenes(const std::string& path);
std::string dump_scenes(const std::vector<SceneAnnotation>& scenes);

struct RelationThresholds {
  double near_terrestrial = 10.0;
  double near_low_altitude = 50.0;
  double near_high_altitude = 500.0;
  double far_factor = 5.0;
  double dead_zone_deg = 15.0;
  double tie_margin = 1e-6;

  double near(ScaleTier tier) const;
  double far(ScaleTier tier) const { return far_factor * near(tier); }
};

enum class Relation { left_of, right_of, in_front_of, behind, near, far_from };

const char* to_string(Relation r);
Relation relation_from_string(std::string_view s);
bool is_symmetric(Relation r);

struct Edge {
  std::size_t subject;
  Relation relation;
  std::size_t object;
  bool operator==(const Edge&) const = default;
};

/// Nodes are the scene's objects (by index). Directional edges are stored in
/// both directions; near and far-from are stored once (subject < object) and
/// answered both ways by holds().
class SceneGraph {
 public:
  SceneGraph(SceneAnnotation scene, std::vector<Edge> edges);

  const SceneAnnotation& scene() const { return scene_; }
  const std::vector<ObjectAnno>& nodes() const { return scene_.objects; }
  const std::vector<Edge>& edges() const { return edges_; }

  bool holds(std::size_t subject, Relation r, std::size_t object) const;

 private:
  SceneAnnotation scene_;
  std::vector<Edge> edges_;
  std::vector<std::array<std::uint8_t, 6>> matrix_;  // [subject * n + object][relation]
};

SceneGraph build_scene_graph(const SceneAnnotation& s, const RelationThresholds& cfg);

enum class QType { localization, measurement, functionality, logicality };

const char* to_string(QType q);
QType qtype_from_string(std::string_view s);

/// One graph or attribute fact used to answer a question.
struct Fact {
  std::string subject;
  std::string relation;
  std::string object;
  std::optional<double> value;
  bool operator==(const Fact&) const = default;
};

struct QAPair {
  std::string id;
  std::string scene_id;
  std::string question;
  std::string answer;
  QType qtype = QType::localization;
  int hops = 1;
  std::string modality;  // "point", "image" or "point-image"
  std::vector<Fact> provenance;
  bool operator==(const QAPair&) const = default;
};

std::string modality_tag(const SceneAnnotation& s);

/// Generation context for one scene: graph, thresholds and the scene's rng
/// (used only to pick among equivalent question phrasings).
struct GenContext {
  const SceneGraph& graph;
  const RelationThresholds& cfg;
  Rng& rng;
};

std::vector<QAPair> gen_localization(const GenContext& ctx);
std::vector<QAPair> gen_measurement(const GenContext& ctx);
std::vector<QAPair> gen_functionality(const GenContext& ctx);
std::vector<QAPair> gen_logicality(const GenContext& ctx);

/// Runs all four families on every scene with per-scene generators seeded by
/// derive_seed(seed, scene_id), assigns ids "<scene_id>-q0001"... and returns
/// pairs sorted by (scene_id, id).
std::vector<QAPair> generate_corpus(const std::vector<SceneAnnotation>& scenes, const RelationThresholds& cfg,
                                    std::uint64_t seed);

/// Best-effort question rewriter backed by a remote text model.
class RemoteLLMClient {
 public:
  virtual ~RemoteLLMClient() = default;
  virtual bool enabled() const = 0;
  /// Returns the model's reply; throws TransportError on failure.
  virtual std::string complete(const std::string& prompt) = 0;
};

std::string paraphrase_prompt(const QAPair& q);

/// Rewrites the question surface only. Any failure returns q unchanged and
/// logs a warning through `warn`.
QAPair paraphrase(const QAPair& q, RemoteLLMClient* client,
                  const std::function<void(const std::string&)>& warn = {});

std::string corpus_record(const QAPair& q);
/// Sorted by (scene_id, id), one JSON record per line.
std::string encode_corpus(std::vector<QAPair> pairs);
std::vector<QAPair> decode_corpus(std::string_view text);
void emit_corpus(const std::vector<QAPair>& pairs, const std::string& path);
std::vector<QAPair> load_corpus(const std::string& path);

/// Counts keyed by qtype and by modality tag.
struct CorpusSummary {
  std::map<std::string, std::size_t> by_qtype;
  std::map<std::string, std::size_t> by_modality;
  std::size_t single_hop = 0;
  std::size_t multi_hop = 0;
  std::size_t total = 0;
};
CorpusSummary summarize(const std::vector<QAPair>& pairs);

/// Random but valid scene for tests and demos.
SceneAnnotation random_scene(Rng& rng, const std::string& scene_id, const RelationThresholds& cfg);

/// Observer-frame displacement of a point: longitudinal (along facing) and
/// lateral (positive to the observer's right) components.
struct GroundOffset {
  double longitudinal = 0.0;
  double lateral = 0.0;
};
GroundOffset ground_offset(const ObserverPose& observer, const Vec3& from, const Vec3& to);

double distance(const Vec3& a, const Vec3& b);

}  // namespace imfvqa::svmgen
