#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "imfvqa/errors.hpp"
#include "imfvqa/json_fields.hpp"
#include "imfvqa/svmgen.hpp"

namespace imfvqa::svmgen {

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

void require_token(const std::string& value, const std::vector<std::string>& allowed, const std::string& field) {
  if (std::find(allowed.begin(), allowed.end(), value) == allowed.end()) {
    throw ValidationError(field + ": unknown token '" + value + "' (allowed: " + join(allowed) + ")");
  }
}

bool finite(const Vec3& v) { return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z); }

/// Line and column of a byte offset, both 1-based.
std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t offset) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < std::min(offset, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

Vec3 read_vec3(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw ParseError(field + ": expected an array of 3 numbers");
  for (const auto& v : j) {
    if (!v.is_number()) throw ParseError(field + ": expected an array of 3 numbers");
  }
  return Vec3{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

const json& required(const json& obj, const std::string& key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + ": missing required field '" + key + "'");
  return *it;
}

std::string read_string(const json& obj, const std::string& key, const std::string& path) {
  const json& v = required(obj, key, path);
  if (!v.is_string()) throw ParseError(path + "." + key + ": expected a string");
  return v.get<std::string>();
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return it.key() == k; })) {
      throw ParseError(path + ": unknown field '" + it.key() + "'");
    }
  }
}

ObjectAnno parse_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError(path + ": expected an object");
  reject_unknown(j, {"id", "class", "centroid", "extents", "attributes"}, path);
  ObjectAnno o;
  o.id = read_string(j, "id", path);
  o.label = read_string(j, "class", path);
  o.centroid = read_vec3(required(j, "centroid", path), path + ".centroid");
  o.extents = read_vec3(required(j, "extents", path), path + ".extents");
  if (auto it = j.find("attributes"); it != j.end()) {
    const std::string apath = path + ".attributes";
    if (!it->is_object()) throw ParseError(apath + ": expected an object");
    for (auto a = it->begin(); a != it->end(); ++a) {
      if (!a->is_string()) throw ParseError(apath + "." + a.key() + ": expected a string");
      const auto value = a->get<std::string>();
      if (a.key() == "color") {
        o.color = value;
      } else if (a.key() == "pose") {
        o.pose = value;
      } else if (a.key() == "functionality") {
        o.functionality = value;
      } else {
        throw ValidationError(apath + ": unknown attribute '" + a.key() +
                              "' (allowed: color, pose, functionality)");
      }
    }
  }
  return o;
}

SceneAnnotation parse_scene(const json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError(path + ": expected an object");
  reject_unknown(j, {"scene_id", "city", "tier", "modalities", "observer", "objects"}, path);
  SceneAnnotation s;
  s.scene_id = read_string(j, "scene_id", path);
  s.city = read_string(j, "city", path);
  const auto tier = read_string(j, "tier", path);
  try {
    s.tier = tier_from_string(tier);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ".tier: " + e.what());
  }
  const json& mods = required(j, "modalities", path);
  if (!mods.is_array()) throw ParseError(path + ".modalities: expected an array");
  for (const auto& m : mods) {
    if (!m.is_string()) throw ParseError(path + ".modalities: expected strings");
    const auto token = m.get<std::string>();
    require_token(token, {"image", "point"}, path + ".modalities");
    (token == "image" ? s.has_image : s.has_point) = true;
  }
  const json& obs = required(j, "observer", path);
  if (!obs.is_object()) throw ParseError(path + ".observer: expected an object");
  reject_unknown(obs, {"position", "facing"}, path + ".observer");
  s.observer.position = read_vec3(required(obs, "position", path + ".observer"), path + ".observer.position");
  const json& facing = required(obs, "facing", path + ".observer");
  if (!facing.is_array() || facing.size() != 2 || !facing[0].is_number() || !facing[1].is_number()) {
    throw ParseError(path + ".observer.facing: expected an array of 2 numbers");
  }
  s.observer.facing_x = facing[0].get<double>();
  s.observer.facing_y = facing[1].get<double>();
  const double norm = std::hypot(s.observer.facing_x, s.observer.facing_y);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw ValidationError(path + ".observer.facing: must be a finite non-zero direction");
  }

  const json& objects = required(j, "objects", path);
  if (!objects.is_array()) throw ParseError(path + ".objects: expected an array");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    s.objects.push_back(parse_object(objects[i], path + ".objects[" + std::to_string(i) + "]"));
  }
  return s;
}

json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

}  // namespace

const char* to_string(ScaleTier t) {
  switch (t) {
    case ScaleTier::terrestrial:
      return "terrestrial";
    case ScaleTier::low_altitude:
      return "low-altitude";
    case ScaleTier::high_altitude:
      return "high-altitude";
  }
  return "?";
}

ScaleTier tier_from_string(std::string_view s) {
  if (s == "terrestrial") return ScaleTier::terrestrial;
  if (s == "low-altitude") return ScaleTier::low_altitude;
  if (s == "high-altitude") return ScaleTier::high_altitude;
  throw ValidationError("unknown tier '" + std::string(s) +
                        "' (allowed: terrestrial, low-altitude, high-altitude)");
}

const std::vector<std::string>& tier_classes(ScaleTier tier) {
  static const std::vector<std::string> terrestrial = {"building", "car",     "truck", "bus",
                                                       "pedestrian", "bicycle", "tree",  "road"};
  static const std::vector<std::string> low = {"building", "road", "tree", "car", "bridge", "playground", "pond"};
  static const std::vector<std::string> high = {"building", "road", "river", "forest", "farmland", "lake", "park"};
  switch (tier) {
    case ScaleTier::terrestrial:
      return terrestrial;
    case ScaleTier::low_altitude:
      return low;
    case ScaleTier::high_altitude:
      return high;
  }
  return terrestrial;
}

const std::vector<std::string>& color_tokens() {
  static const std::vector<std::string> v = {"red",    "blue",  "black", "white", "gray",
                                             "green",  "yellow", "brown", "silver", "orange"};
  return v;
}

const std::vector<std::string>& pose_tokens() {
  static const std::vector<std::string> v = {"parked", "moving", "stopped", "standing", "walking"};
  return v;
}

const std::vector<std::string>& functionality_tokens() {
  static const std::vector<std::string> v = {"residential area", "shopping mall",   "office",      "school",
                                             "hospital",         "art exhibition",  "municipal service",
                                             "transit station",  "restaurant",      "recreation area"};
  return v;
}

std::string plural(std::string_view label) {
  std::string s(label);
  if (s.ends_with("s") || s.ends_with("sh") || s.ends_with("ch") || s.ends_with("x")) return s + "es";
  return s + "s";
}

void validate_scene(const SceneAnnotation& s) {
  const std::string path = "scene '" + s.scene_id + "'";
  if (s.scene_id.empty()) throw ValidationError("scene_id must be non-empty");
  if (!s.has_image && !s.has_point) throw ValidationError(path + ": modalities must be non-empty");
  if (s.objects.empty()) throw ValidationError(path + ": needs at least one object");
  if (!finite(s.observer.position)) throw ValidationError(path + ": observer position must be finite");
  const double facing = std::hypot(s.observer.facing_x, s.observer.facing_y);
  if (!(facing > 0.0) || !std::isfinite(facing)) {
    throw ValidationError(path + ": observer facing must be a finite non-zero direction");
  }
  std::set<std::string> ids;
  const auto& classes = tier_classes(s.tier);
  for (const auto& o : s.objects) {
    const std::string opath = path + " object '" + o.id + "'";
    if (o.id.empty()) throw ValidationError(path + ": object id must be non-empty");
    if (!ids.insert(o.id).second) throw ValidationError(path + ": duplicate object id '" + o.id + "'");
    require_token(o.label, classes, opath + " class");
    if (!finite(o.centroid)) throw ValidationError(opath + ": centroid must be finite");
    if (!finite(o.extents) || o.extents.x < 0 || o.extents.y < 0 || o.extents.z < 0) {
      throw ValidationError(opath + ": extents must be finite and >= 0");
    }
    if (o.color) require_token(*o.color, color_tokens(), opath + " color");
    if (o.pose) require_token(*o.pose, pose_tokens(), opath + " pose");
    if (o.functionality) require_token(*o.functionality, functionality_tokens(), opath + " functionality");
  }
}

std::vector<SceneAnnotation> parse_scenes(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError("scene file line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                     e.what());
  }
  if (!doc.is_object()) throw ParseError("scene file: top level must be an object");
  reject_unknown(doc, {"format", "version", "scenes"}, "scene file");
  if (auto it = doc.find("format"); it != doc.end() && *it != "imfvqa-scenes") {
    throw ParseError("scene file: format must be \"imfvqa-scenes\"");
  }
  if (auto it = doc.find("version"); it != doc.end() && *it != 1) {
    throw ParseError("scene file: unsupported version " + it->dump() + " (expected 1)");
  }
  const json& scenes = required(doc, "scenes", "scene file");
  if (!scenes.is_array()) throw ParseError("scenes: expected an array");
  std::vector<SceneAnnotation> out;
  std::set<std::string> scene_ids;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const std::string path = "scenes[" + std::to_string(i) + "]";
    SceneAnnotation s = parse_scene(scenes[i], path);
    try {
      validate_scene(s);
    } catch (const ValidationError& e) {
      throw ValidationError(path + ": " + e.what());
    }
    if (!scene_ids.insert(s.scene_id).second) {
      throw ValidationError(path + ": duplicate scene_id '" + s.scene_id + "'");
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SceneAnnotation> load_scenes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scene file: " + path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_scenes(text);
}

std::string dump_scenes(const std::vector<SceneAnnotation>& scenes) {
  ordered_json doc;
  doc["format"] = "imfvqa-scenes";
  doc["version"] = 1;
  doc["scenes"] = ordered_json::array();
  for (const auto& s : scenes) {
    ordered_json js;
    js["scene_id"] = s.scene_id;
    js["city"] = s.city;
    js["tier"] = to_string(s.tier);
    js["modalities"] = ordered_json::array();
    if (s.has_image) js["modalities"].push_back("image");
    if (s.has_point) js["modalities"].push_back("point");
    js["observer"] = ordered_json{{"position", vec3_json(s.observer.position)},
                                  {"facing", ordered_json::array({s.observer.facing_x, s.observer.facing_y})}};
    js["objects"] = ordered_json::array();
    for (const auto& o : s.objects) {
      ordered_json jo{{"id", o.id}, {"class", o.label}, {"centroid", vec3_json(o.centroid)},
                      {"extents", vec3_json(o.extents)}};
      ordered_json attrs = ordered_json::object();
      if (o.color) attrs["color"] = *o.color;
      if (o.pose) attrs["pose"] = *o.pose;
      if (o.functionality) attrs["functionality"] = *o.functionality;
      if (!attrs.empty()) jo["attributes"] = std::move(attrs);
      js["objects"].push_back(std::move(jo));
    }
    doc["scenes"].push_back(std::move(js));
  }
  return doc.dump(2) + "\n";
}

std::string modality_tag(const SceneAnnotation& s) {
  if (s.has_image && s.has_point) return "point-image";
  return s.has_point ? "point" : "image";
}

}  // namespace imfvqa::svmgen
