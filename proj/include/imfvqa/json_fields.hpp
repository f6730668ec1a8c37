#pragma once

// Strict JSON object reading: every key must be known, every value must have
// the expected type, and errors name the dotted field path.

#include <cstdint>
#include <set>
#include <string>
#include <type_traits>

#include <json.hpp>

#include "imfvqa/errors.hpp"

namespace imfvqa {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

class FieldReader {
 public:
  FieldReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + " must be an object");
  }

  std::string field_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void read(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(field_path(key) + " must be a number");
      out = v->get<double>();
    }
  }

  template <typename T>
    requires std::is_unsigned_v<T> && (!std::is_same_v<T, bool>)
  void read(const std::string& key, T& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(field_path(key) + " must be a non-negative integer");
      out = v->get<T>();
    }
  }

  void read(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(field_path(key) + " must be an integer");
      out = v->get<int>();
    }
  }

  void read(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(field_path(key) + " must be a boolean");
      out = v->get<bool>();
    }
  }

  void read(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(field_path(key) + " must be a string");
      out = v->get<std::string>();
    }
  }

  /// Sub-object, or nullptr when absent.
  const json* object(const std::string& key) {
    const json* v = find(key);
    if (v && !v->is_object()) throw ConfigError(field_path(key) + " must be an object");
    return v;
  }

  /// Throws on any key that was never asked for.
  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown field " + field_path(it.key()));
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace imfvqa
