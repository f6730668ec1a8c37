#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "imfvqa/errors.hpp"
#include "imfvqa/svmgen.hpp"

namespace imfvqa::svmgen {

namespace {

constexpr Relation kLandmarkPriority[] = {Relation::near, Relation::left_of, Relation::right_of,
                                          Relation::in_front_of, Relation::behind};

const char* relation_phrase(Relation r) {
  switch (r) {
    case Relation::near:
      return "near";
    case Relation::left_of:
      return "to the left of";
    case Relation::right_of:
      return "to the right of";
    case Relation::in_front_of:
      return "in front of";
    case Relation::behind:
      return "behind";
    case Relation::far_from:
      return "far from";
  }
  return "?";
}

std::size_t class_count(const SceneAnnotation& s, const std::string& label) {
  return static_cast<std::size_t>(
      std::count_if(s.objects.begin(), s.objects.end(), [&](const ObjectAnno& o) { return o.label == label; }));
}

bool color_unique_in_class(const SceneAnnotation& s, std::size_t i) {
  const ObjectAnno& o = s.objects[i];
  if (!o.color) return false;
  for (std::size_t j = 0; j < s.objects.size(); ++j) {
    if (j != i && s.objects[j].label == o.label && s.objects[j].color == o.color) return false;
  }
  return true;
}

/// "the car" when the class is unique, "the red car" when the color singles
/// it out within its class, otherwise nothing.
std::optional<std::string> refer(const SceneAnnotation& s, std::size_t i) {
  const ObjectAnno& o = s.objects[i];
  if (class_count(s, o.label) == 1) return "the " + o.label;
  if (color_unique_in_class(s, i)) return "the " + *o.color + " " + o.label;
  return std::nullopt;
}

/// Same-class pairs where both members are named by color.
std::vector<std::pair<std::size_t, std::size_t>> color_pairs(const SceneAnnotation& s) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    for (std::size_t j = i + 1; j < s.objects.size(); ++j) {
      if (s.objects[i].label != s.objects[j].label) continue;
      if (color_unique_in_class(s, i) && color_unique_in_class(s, j)) out.emplace_back(i, j);
    }
  }
  return out;
}

QAPair make_pair(const SceneAnnotation& s, QType qtype, int hops, std::string question, std::string answer,
                 std::vector<Fact> facts) {
  QAPair q;
  q.scene_id = s.scene_id;
  q.question = std::move(question);
  q.answer = std::move(answer);
  q.qtype = qtype;
  q.hops = hops;
  q.modality = modality_tag(s);
  q.provenance = std::move(facts);
  return q;
}

/// Index of the unique minimum, or nullopt when empty or tied within margin.
std::optional<std::size_t> unique_argmin(const std::vector<std::pair<double, std::size_t>>& scored, double margin) {
  if (scored.empty()) return std::nullopt;
  auto sorted = scored;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.size() > 1 && sorted[1].first - sorted[0].first < margin) return std::nullopt;
  return sorted[0].second;
}

std::optional<Relation> first_relation(const SceneGraph& g, std::size_t a, std::size_t b) {
  for (Relation r : kLandmarkPriority) {
    if (g.holds(a, r, b)) return r;
  }
  return std::nullopt;
}

}  // namespace

std::vector<QAPair> gen_localization(const GenContext& ctx) {
  const SceneAnnotation& s = ctx.graph.scene();
  const auto& objs = s.objects;
  std::vector<QAPair> out;
  for (std::size_t t = 0; t < objs.size(); ++t) {
    const auto target = refer(s, t);
    if (!target) continue;
    std::vector<std::pair<double, std::size_t>> candidates;
    for (std::size_t l = 0; l < objs.size(); ++l) {
      if (l == t || objs[l].label == objs[t].label || !refer(s, l)) continue;
      if (first_relation(ctx.graph, t, l)) candidates.emplace_back(distance(objs[t].centroid, objs[l].centroid), l);
    }
    const auto landmark = unique_argmin(candidates, ctx.cfg.tie_margin);
    if (!landmark) continue;
    const Relation rel = *first_relation(ctx.graph, t, *landmark);
    const std::string question =
        ctx.rng.below(2) == 0 ? "Where is " + *target + "?" : "Where can " + *target + " be found?";
    out.push_back(make_pair(s, QType::localization, 1, question,
                            std::string(relation_phrase(rel)) + " " + *refer(s, *landmark),
                            {Fact{objs[t].id, to_string(rel), objs[*landmark].id, std::nullopt}}));
  }
  return out;
}

std::vector<QAPair> gen_measurement(const GenContext& ctx) {
  const SceneAnnotation& s = ctx.graph.scene();
  const auto& objs = s.objects;
  std::vector<QAPair> out;
  for (const auto& label : tier_classes(s.tier)) {
    const std::size_t n = class_count(s, label);
    const std::string question = ctx.rng.below(2) == 0 ? "How many " + plural(label) + " are in this city?"
                                                       : "What is the number of " + plural(label) + " in this city?";
    out.push_back(make_pair(s, QType::measurement, 1, question, std::to_string(n),
                            {Fact{s.scene_id, "count", label, static_cast<double>(n)}}));
  }
  for (const auto& [i, j] : color_pairs(s)) {
    const double dz = objs[i].extents.z - objs[j].extents.z;
    if (std::abs(dz) < ctx.cfg.tie_margin) continue;
    const std::size_t taller = dz > 0 ? i : j;
    const std::size_t shorter = dz > 0 ? j : i;
    out.push_back(make_pair(s, QType::measurement, 1,
                            "Which " + objs[i].label + " is taller, the " + *objs[i].color + " one or the " +
                                *objs[j].color + " one?",
                            "the " + *objs[taller].color + " one",
                            {Fact{objs[taller].id, "taller-than", objs[shorter].id, std::abs(dz)}}));
  }
  return out;
}

std::vector<QAPair> gen_functionality(const GenContext& ctx) {
  const SceneAnnotation& s = ctx.graph.scene();
  const auto& objs = s.objects;
  std::vector<QAPair> out;
  std::map<std::string, std::size_t> uses;
  for (const auto& o : objs) {
    if (o.functionality) ++uses[*o.functionality];
  }
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const ObjectAnno& o = objs[i];
    if (!o.functionality) continue;
    std::string question;
    if (class_count(s, o.label) == 1) {
      question = "What is this " + o.label + " used for?";
    } else if (color_unique_in_class(s, i)) {
      question = "What is the " + *o.color + " " + o.label + " used for?";
    }
    if (!question.empty()) {
      out.push_back(make_pair(s, QType::functionality, 1, question, *o.functionality,
                              {Fact{o.id, "has-functionality", *o.functionality, std::nullopt}}));
    }
  }
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const ObjectAnno& o = objs[i];
    if (!o.functionality || uses[*o.functionality] != 1) continue;
    const GroundOffset g = ground_offset(s.observer, s.observer.position, o.centroid);
    const double lon = std::abs(g.longitudinal);
    const double lat = std::abs(g.lateral);
    std::string answer;
    if (lat > lon + ctx.cfg.tie_margin) {
      answer = g.lateral > 0 ? "right" : "left";
    } else if (lon > lat + ctx.cfg.tie_margin) {
      answer = g.longitudinal > 0 ? "straight ahead" : "behind";
    } else {
      continue;
    }
    out.push_back(make_pair(s, QType::functionality, 1,
                            "Which direction should I take to reach the " + *o.functionality + "?", answer,
                            {Fact{o.id, "direction-from-observer", answer, std::nullopt}}));
  }
  return out;
}

std::vector<QAPair> gen_logicality(const GenContext& ctx) {
  const SceneAnnotation& s = ctx.graph.scene();
  const auto& objs = s.objects;
  const Vec3& eye = s.observer.position;
  std::vector<QAPair> out;
  for (const auto& [i, j] : color_pairs(s)) {
    const double di = distance(eye, objs[i].centroid);
    const double dj = distance(eye, objs[j].centroid);
    if (std::abs(di - dj) < ctx.cfg.tie_margin) continue;
    const std::size_t closer = di < dj ? i : j;
    out.push_back(make_pair(s, QType::logicality, 2,
                            "Which " + objs[i].label + " is closer to me, the " + *objs[i].color + " one or the " +
                                *objs[j].color + " one?",
                            "the " + *objs[closer].color + " one",
                            {Fact{"observer", "distance", objs[i].id, di}, Fact{"observer", "distance", objs[j].id, dj}}));
  }

  std::set<std::string> crowded;
  for (const auto& label : tier_classes(s.tier)) {
    if (class_count(s, label) >= 2) crowded.insert(label);
  }
  for (std::size_t y = 0; y < objs.size(); ++y) {
    if (class_count(s, objs[y].label) != 1) continue;
    std::optional<std::size_t> anchor;
    std::optional<Relation> rel;
    for (std::size_t z = 0; z < objs.size() && !anchor; ++z) {
      if (z == y || objs[z].label == objs[y].label || !refer(s, z)) continue;
      if (auto r = first_relation(ctx.graph, y, z)) {
        anchor = z;
        rel = r;
      }
    }
    if (!anchor) continue;
    for (const auto& label : crowded) {
      if (label == objs[y].label || label == objs[*anchor].label) continue;
      std::vector<std::pair<double, std::size_t>> scored;
      for (std::size_t x = 0; x < objs.size(); ++x) {
        if (objs[x].label == label) scored.emplace_back(distance(objs[x].centroid, objs[y].centroid), x);
      }
      const auto best = unique_argmin(scored, ctx.cfg.tie_margin);
      if (!best) continue;
      const auto answer = refer(s, *best);
      if (!answer) continue;
      out.push_back(make_pair(
          s, QType::logicality, 2,
          "Which " + label + " is nearest to the " + objs[y].label + " that is " + relation_phrase(*rel) + " " +
              *refer(s, *anchor) + "?",
          *answer,
          {Fact{objs[y].id, to_string(*rel), objs[*anchor].id, std::nullopt},
           Fact{objs[*best].id, "nearest-to", objs[y].id, distance(objs[*best].centroid, objs[y].centroid)}}));
    }
  }
  return out;
}

std::vector<QAPair> generate_corpus(const std::vector<SceneAnnotation>& scenes, const RelationThresholds& cfg,
                                    std::uint64_t seed) {
  std::set<std::string> seen;
  std::vector<QAPair> all;
  for (const auto& scene : scenes) {
    if (!seen.insert(scene.scene_id).second) {
      throw ValidationError("duplicate scene_id '" + scene.scene_id + "'");
    }
    const SceneGraph graph = build_scene_graph(scene, cfg);
    Rng rng(derive_seed(seed, scene.scene_id));
    const GenContext ctx{graph, cfg, rng};
    std::vector<QAPair> pairs;
    for (auto* family : {&gen_localization, &gen_measurement, &gen_functionality, &gen_logicality}) {
      auto part = family(ctx);
      pairs.insert(pairs.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      char suffix[32];
      std::snprintf(suffix, sizeof suffix, "-q%04zu", k + 1);
      pairs[k].id = scene.scene_id + suffix;
      all.push_back(std::move(pairs[k]));
    }
  }
  std::sort(all.begin(), all.end(), [](const QAPair& a, const QAPair& b) {
    return std::tie(a.scene_id, a.id) < std::tie(b.scene_id, b.id);
  });
  return all;
}

}  // namespace imfvqa::svmgen
