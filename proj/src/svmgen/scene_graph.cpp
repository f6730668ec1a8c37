#include <cmath>
#include <numbers>

#include "imfvqa/errors.hpp"
#include "imfvqa/svmgen.hpp"

namespace imfvqa::svmgen {

double RelationThresholds::near(ScaleTier tier) const {
  switch (tier) {
    case ScaleTier::terrestrial:
      return near_terrestrial;
    case ScaleTier::low_altitude:
      return near_low_altitude;
    case ScaleTier::high_altitude:
      return near_high_altitude;
  }
  return near_terrestrial;
}

const char* to_string(Relation r) {
  switch (r) {
    case Relation::left_of:
      return "left-of";
    case Relation::right_of:
      return "right-of";
    case Relation::in_front_of:
      return "in-front-of";
    case Relation::behind:
      return "behind";
    case Relation::near:
      return "near";
    case Relation::far_from:
      return "far-from";
  }
  return "?";
}

Relation relation_from_string(std::string_view s) {
  for (Relation r : {Relation::left_of, Relation::right_of, Relation::in_front_of, Relation::behind, Relation::near,
                     Relation::far_from}) {
    if (s == to_string(r)) return r;
  }
  throw ValidationError("unknown relation '" + std::string(s) + "'");
}

bool is_symmetric(Relation r) { return r == Relation::near || r == Relation::far_from; }

const char* to_string(QType q) {
  switch (q) {
    case QType::localization:
      return "localization";
    case QType::measurement:
      return "measurement";
    case QType::functionality:
      return "functionality";
    case QType::logicality:
      return "logicality";
  }
  return "?";
}

QType qtype_from_string(std::string_view s) {
  for (QType q : {QType::localization, QType::measurement, QType::functionality, QType::logicality}) {
    if (s == to_string(q)) return q;
  }
  throw ValidationError("unknown qtype '" + std::string(s) +
                        "' (allowed: localization, measurement, functionality, logicality)");
}

double distance(const Vec3& a, const Vec3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

GroundOffset ground_offset(const ObserverPose& observer, const Vec3& from, const Vec3& to) {
  const double dx = to.x - from.x;
  const double dy = to.y - from.y;
  const double norm = std::hypot(observer.facing_x, observer.facing_y);
  const double fx = observer.facing_x / norm;
  const double fy = observer.facing_y / norm;
  return GroundOffset{dx * fx + dy * fy, dx * fy - dy * fx};
}

SceneGraph::SceneGraph(SceneAnnotation scene, std::vector<Edge> edges)
    : scene_(std::move(scene)), edges_(std::move(edges)) {
  const std::size_t n = scene_.objects.size();
  matrix_.assign(n * n, {});
  for (const auto& e : edges_) {
    if (e.subject >= n || e.object >= n) throw ValidationError("scene graph edge refers to a missing node");
    matrix_[e.subject * n + e.object][static_cast<std::size_t>(e.relation)] = 1;
    if (is_symmetric(e.relation)) matrix_[e.object * n + e.subject][static_cast<std::size_t>(e.relation)] = 1;
  }
}

bool SceneGraph::holds(std::size_t subject, Relation r, std::size_t object) const {
  const std::size_t n = scene_.objects.size();
  if (subject >= n || object >= n) return false;
  return matrix_[subject * n + object][static_cast<std::size_t>(r)] != 0;
}

SceneGraph build_scene_graph(const SceneAnnotation& s, const RelationThresholds& cfg) {
  validate_scene(s);
  const auto& objs = s.objects;
  const double near_t = cfg.near(s.tier);
  const double far_t = cfg.far(s.tier);
  const double dead = std::sin(cfg.dead_zone_deg * std::numbers::pi / 180.0);
  std::vector<Edge> edges;
  for (std::size_t a = 0; a < objs.size(); ++a) {
    for (std::size_t b = 0; b < objs.size(); ++b) {
      if (a == b) continue;
      const GroundOffset g = ground_offset(s.observer, objs[b].centroid, objs[a].centroid);
      const double h = std::hypot(g.longitudinal, g.lateral);
      if (h > 0.0) {
        if (g.lateral > dead * h) edges.push_back({a, Relation::right_of, b});
        if (g.lateral < -dead * h) edges.push_back({a, Relation::left_of, b});
        if (g.longitudinal > dead * h) edges.push_back({a, Relation::in_front_of, b});
        if (g.longitudinal < -dead * h) edges.push_back({a, Relation::behind, b});
      }
      if (a < b) {
        const double d = distance(objs[a].centroid, objs[b].centroid);
        if (d < near_t) edges.push_back({a, Relation::near, b});
        if (d > far_t) edges.push_back({a, Relation::far_from, b});
      }
    }
  }
  return SceneGraph(s, std::move(edges));
}

SceneAnnotation random_scene(Rng& rng, const std::string& scene_id, const RelationThresholds& cfg) {
  static const char* cities[] = {"Hamburg", "Osaka", "Lyon", "Denver", "Porto", "Seoul"};
  SceneAnnotation s;
  s.scene_id = scene_id;
  s.city = cities[rng.below(std::size(cities))];
  s.tier = static_cast<ScaleTier>(rng.below(3));
  const std::size_t mods = rng.below(3);
  s.has_point = mods != 1;
  s.has_image = mods != 0;
  const double scale = cfg.near(s.tier);
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  s.observer.position = Vec3{rng.uniform(-scale, scale), rng.uniform(-scale, scale), 0.0};
  s.observer.facing_x = std::cos(angle);
  s.observer.facing_y = std::sin(angle);

  const auto& classes = tier_classes(s.tier);
  const auto& colors = color_tokens();
  const auto& poses = pose_tokens();
  const auto& functions = functionality_tokens();
  const std::size_t count = 4 + rng.below(7);
  for (std::size_t i = 0; i < count; ++i) {
    ObjectAnno o;
    o.id = "o" + std::to_string(i + 1);
    o.label = classes[rng.below(std::min<std::size_t>(classes.size(), 4))];
    o.centroid = Vec3{rng.uniform(-4 * scale, 4 * scale), rng.uniform(-4 * scale, 4 * scale),
                      rng.uniform(0.0, 0.5 * scale)};
    o.extents = Vec3{rng.uniform(0.1, 1.0) * scale, rng.uniform(0.1, 1.0) * scale, rng.uniform(0.1, 1.0) * scale};
    if (rng.bernoulli(0.8)) o.color = colors[rng.below(5)];
    if (rng.bernoulli(0.3)) o.pose = poses[rng.below(poses.size())];
    if (rng.bernoulli(0.4)) o.functionality = functions[rng.below(functions.size())];
    s.objects.push_back(std::move(o));
  }
  return s;
}

}  // namespace imfvqa::svmgen
