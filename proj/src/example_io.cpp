#include "imfvqa/example_io.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "imfvqa/errors.hpp"
#include "imfvqa/json_fields.hpp"

namespace imfvqa::training {

namespace {

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(std::string("cannot open ") + what + ": " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::vector<double> read_features(const json& v, const std::string& where) {
  if (!v.is_array()) throw ParseError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ParseError(where + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

std::string encode_examples(const std::vector<Example>& examples) {
  std::string out;
  for (const auto& e : examples) {
    ordered_json j{{"question", e.question}, {"answer", e.answer}, {"qtype", e.qtype}};
    if (e.bundle.image) j["image"] = *e.bundle.image;
    if (e.bundle.point) j["point"] = *e.bundle.point;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Example> decode_examples(std::string_view text) {
  std::vector<Example> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "data line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(where + ": expected an object");
    Example e;
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& key = it.key();
      if (key == "question" || key == "answer" || key == "qtype") {
        if (!it->is_string()) throw ParseError(where + ": '" + key + "' must be a string");
        (key == "question" ? e.question : key == "answer" ? e.answer : e.qtype) = it->get<std::string>();
      } else if (key == "image") {
        e.bundle.image = read_features(*it, where + ".image");
      } else if (key == "point") {
        e.bundle.point = read_features(*it, where + ".point");
      } else {
        throw ParseError(where + ": unknown field '" + key + "'");
      }
    }
    if (!j.contains("question") || !j.contains("answer")) {
      throw ParseError(where + ": 'question' and 'answer' are required");
    }
    if (e.bundle.empty()) throw ParseError(where + ": at least one of 'image' and 'point' is required");
    out.push_back(std::move(e));
  }
  return out;
}

void save_examples(const std::vector<Example>& examples, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open data file for writing: " + path);
  out << encode_examples(examples);
  if (!out) throw IoError("failed writing data file: " + path);
}

std::vector<Example> load_examples(const std::string& path) { return decode_examples(read_file(path, "data file")); }

std::vector<double> parse_feature_text(std::string_view text, const std::string& source) {
  std::vector<double> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    const auto end = line.find_last_not_of(" \t\r");
    const std::string token = line.substr(start, end - start + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size() || !std::isfinite(v)) {
      throw ParseError(source + " line " + std::to_string(line_no) + ": expected one finite number, got '" + token +
                       "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ParseError(source + ": no feature values");
  return out;
}

std::vector<double> load_feature_file(const std::string& path) {
  return parse_feature_text(read_file(path, "feature file"), path);
}

}  // namespace imfvqa::training
