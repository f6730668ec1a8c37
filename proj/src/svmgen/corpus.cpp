#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <tuple>

#include "imfvqa/errors.hpp"
#include "imfvqa/json_fields.hpp"
#include "imfvqa/svmgen.hpp"

namespace imfvqa::svmgen {

namespace {

std::vector<std::string> lower_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      cur += static_cast<char>(std::tolower(u));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

/// Words a rewrite must keep: class names, colors, functionality words and
/// direction words carry the answer.
const std::set<std::string>& protected_words() {
  static const std::set<std::string> words = [] {
    std::set<std::string> w = {"left", "right", "front", "behind", "near", "nearest", "closer", "taller"};
    for (auto tier : {ScaleTier::terrestrial, ScaleTier::low_altitude, ScaleTier::high_altitude}) {
      for (const auto& c : tier_classes(tier)) {
        w.insert(c);
        w.insert(plural(c));
      }
    }
    for (const auto& c : color_tokens()) w.insert(c);
    for (const auto& f : functionality_tokens()) {
      for (auto& part : lower_words(f)) w.insert(part);
    }
    return w;
  }();
  return words;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n\"'");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\"'");
  return s.substr(first, last - first + 1);
}

ordered_json fact_json(const Fact& f) {
  ordered_json j{{"subject", f.subject}, {"relation", f.relation}, {"object", f.object}};
  if (f.value) j["value"] = *f.value;
  return j;
}

std::string str_field(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(where + ": missing field '" + key + "'");
  if (!it->is_string()) throw ParseError(where + ": field '" + std::string(key) + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

std::string paraphrase_prompt(const QAPair& q) {
  return "Rewrite the following question so that it asks for exactly the same information. Keep every object "
         "name, color, purpose and direction word unchanged. Reply with the rewritten question only.\n\n"
         "Question: " +
         q.question;
}

QAPair paraphrase(const QAPair& q, RemoteLLMClient* client, const std::function<void(const std::string&)>& warn) {
  if (client == nullptr || !client->enabled()) return q;
  auto fail = [&](const std::string& why) {
    if (warn) warn("paraphrase skipped for " + (q.id.empty() ? std::string("question") : q.id) + ": " + why);
    return q;
  };
  std::string reply;
  try {
    reply = client->complete(paraphrase_prompt(q));
  } catch (const std::exception& e) {
    return fail(e.what());
  }
  if (auto nl = reply.find('\n'); nl != std::string::npos) reply.resize(nl);
  reply = trim(reply);
  if (reply.empty() || reply.back() != '?') return fail("reply is not a question");
  if (reply.size() > 4 * q.question.size() + 40) return fail("reply is too long");
  const auto kept = lower_words(reply);
  const std::set<std::string> kept_set(kept.begin(), kept.end());
  for (const auto& w : lower_words(q.question)) {
    if (protected_words().count(w) && !kept_set.count(w)) return fail("rewrite dropped '" + w + "'");
  }
  QAPair out = q;
  out.question = reply;
  return out;
}

std::string corpus_record(const QAPair& q) {
  ordered_json j;
  j["id"] = q.id;
  j["scene_id"] = q.scene_id;
  j["question"] = q.question;
  j["answer"] = q.answer;
  j["qtype"] = to_string(q.qtype);
  j["hops"] = q.hops;
  j["modality"] = q.modality;
  j["provenance"] = ordered_json::array();
  for (const auto& f : q.provenance) j["provenance"].push_back(fact_json(f));
  return j.dump();
}

std::string encode_corpus(std::vector<QAPair> pairs) {
  std::stable_sort(pairs.begin(), pairs.end(), [](const QAPair& a, const QAPair& b) {
    return std::tie(a.scene_id, a.id) < std::tie(b.scene_id, b.id);
  });
  std::string out;
  for (const auto& q : pairs) {
    out += corpus_record(q);
    out += '\n';
  }
  return out;
}

std::vector<QAPair> decode_corpus(std::string_view text) {
  std::vector<QAPair> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "corpus line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(where + ": expected an object");
    QAPair q;
    q.id = str_field(j, "id", where);
    q.scene_id = str_field(j, "scene_id", where);
    q.question = str_field(j, "question", where);
    q.answer = str_field(j, "answer", where);
    try {
      q.qtype = qtype_from_string(str_field(j, "qtype", where));
    } catch (const ValidationError& e) {
      throw ParseError(where + ": " + e.what());
    }
    auto hops = j.find("hops");
    if (hops == j.end() || !hops->is_number_integer() || hops->get<int>() < 1) {
      throw ParseError(where + ": field 'hops' must be a positive integer");
    }
    q.hops = hops->get<int>();
    q.modality = str_field(j, "modality", where);
    if (q.modality != "point" && q.modality != "image" && q.modality != "point-image") {
      throw ParseError(where + ": modality must be point, image or point-image");
    }
    auto prov = j.find("provenance");
    if (prov == j.end() || !prov->is_array()) throw ParseError(where + ": field 'provenance' must be an array");
    for (const auto& f : *prov) {
      if (!f.is_object()) throw ParseError(where + ": provenance entries must be objects");
      Fact fact{str_field(f, "subject", where), str_field(f, "relation", where), str_field(f, "object", where),
                std::nullopt};
      if (auto v = f.find("value"); v != f.end()) {
        if (!v->is_number()) throw ParseError(where + ": provenance value must be a number");
        fact.value = v->get<double>();
      }
      q.provenance.push_back(std::move(fact));
    }
    out.push_back(std::move(q));
  }
  return out;
}

void emit_corpus(const std::vector<QAPair>& pairs, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open corpus for writing: " + path);
  out << encode_corpus(pairs);
  if (!out) throw IoError("failed writing corpus: " + path);
}

std::vector<QAPair> load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus: " + path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_corpus(text);
}

CorpusSummary summarize(const std::vector<QAPair>& pairs) {
  CorpusSummary s;
  for (const auto& q : pairs) {
    ++s.by_qtype[to_string(q.qtype)];
    ++s.by_modality[q.modality];
    (q.hops > 1 ? s.multi_hop : s.single_hop) += 1;
    ++s.total;
  }
  return s;
}

}  // namespace imfvqa::svmgen
