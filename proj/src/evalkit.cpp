#include "imfvqa/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <thread>

#include "imfvqa/errors.hpp"

namespace imfvqa::evalkit {

namespace {

const char* const kNumberWords[] = {"zero",    "one",     "two",       "three",    "four",     "five",    "six",
                                    "seven",   "eight",   "nine",      "ten",      "eleven",   "twelve",  "thirteen",
                                    "fourteen", "fifteen", "sixteen",  "seventeen", "eighteen", "nineteen", "twenty"};

const char* const kTaxonomy[] = {"localization", "measurement", "functionality", "logicality"};

}  // namespace

const char* const kJudgePromptTemplate =
    "Analyze two sentences and determine if they're referring to the same general object or concept, focusing on "
    "the type of object, not attributes such as color, size, or shape. Respond with `T' if they refer to the same "
    "thing and `F' if not. Also, provide a brief rationale for your judgment.\n\n"
    "Now, let's analyze the following:\n\n"
    "Input: 1. {ground_truth} 2. {model_output}\n\n"
    "Output:";

const char* to_string(JudgeMode m) { return m == JudgeMode::exact ? "exact" : "remote"; }

JudgeMode judge_mode_from_string(std::string_view s) {
  if (s == "exact") return JudgeMode::exact;
  if (s == "remote") return JudgeMode::remote;
  throw ConfigError("unknown judge '" + std::string(s) + "' (allowed: exact, remote)");
}

std::string normalize(std::string_view s) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) words.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || u >= 0x80) {
      cur += static_cast<char>(std::tolower(u));
    } else {
      flush();
    }
  }
  flush();
  std::size_t first = 0;
  while (first < words.size() && (words[first] == "a" || words[first] == "an" || words[first] == "the")) ++first;
  std::string out;
  for (std::size_t i = first; i < words.size(); ++i) {
    std::string w = words[i];
    for (std::size_t n = 0; n < std::size(kNumberWords); ++n) {
      if (w == kNumberWords[n]) w = std::to_string(n);
    }
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

Verdict exact_judge(const Triplet& t) {
  return Verdict{normalize(t.ground_truth) == normalize(t.model_output), {}, JudgeMode::exact};
}

std::string build_judge_prompt(const Triplet& t) {
  std::string prompt = kJudgePromptTemplate;
  const auto gt = prompt.find("{ground_truth}");
  prompt.replace(gt, std::string_view("{ground_truth}").size(), t.ground_truth);
  const auto out = prompt.find("{model_output}", gt + t.ground_truth.size());
  prompt.replace(out, std::string_view("{model_output}").size(), t.model_output);
  return prompt;
}

Verdict parse_verdict(std::string_view response) {
  for (std::size_t i = 0; i < response.size(); ++i) {
    const auto c = static_cast<unsigned char>(response[i]);
    if (!std::isalpha(c)) continue;
    const char v = static_cast<char>(std::toupper(c));
    if (v != 'T' && v != 'F') break;
    std::string rest(response.substr(i + 1));
    const auto start = rest.find_first_not_of(" \t\r\n");
    rest = start == std::string::npos ? std::string() : rest.substr(start);
    while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.back()))) rest.pop_back();
    return Verdict{v == 'T', rest, JudgeMode::remote};
  }
  std::string shown(response.substr(0, 60));
  throw ParseError("unparseable verdict: '" + shown + "'");
}

void RemoteJudgeConfig::validate() const {
  if (endpoint.empty()) throw ConfigError("judge.endpoint must be set for the remote judge");
  if (max_in_flight == 0) throw ConfigError("judge.max_in_flight must be >= 1");
  if (!(timeout_s > 0.0)) throw ConfigError("judge.timeout_s must be > 0");
  if (max_retries < 0) throw ConfigError("judge.max_retries must be >= 0");
  if (!(backoff_s >= 0.0)) throw ConfigError("judge.backoff_s must be >= 0");
}

std::string require_credential(const RemoteJudgeConfig& cfg) {
  const char* key = std::getenv(cfg.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw ConfigError("remote judge needs a credential: set " + cfg.api_key_env);
  }
  return key;
}

RemoteJudgeResult remote_judge(const std::vector<Triplet>& batch, TextEndpoint& endpoint,
                               const RemoteJudgeConfig& cfg) {
  require_credential(cfg);
  cfg.validate();
  RemoteJudgeResult result;
  result.verdicts.resize(batch.size());
  std::vector<std::vector<std::string>> warnings(batch.size());
  const auto timeout = std::chrono::milliseconds(static_cast<long long>(cfg.timeout_s * 1000.0));

  auto judge_one = [&](std::size_t i) {
    const std::string prompt = build_judge_prompt(batch[i]);
    double wait = cfg.backoff_s;
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
      try {
        result.verdicts[i] = parse_verdict(endpoint.complete(prompt, timeout));
        return;
      } catch (const TransportError& e) {
        warnings[i].push_back("triplet " + std::to_string(i) + " attempt " + std::to_string(attempt + 1) + ": " +
                              e.what());
      } catch (const ParseError& e) {
        warnings[i].push_back("triplet " + std::to_string(i) + " attempt " + std::to_string(attempt + 1) + ": " +
                              e.what());
      }
      if (attempt < cfg.max_retries && wait > 0.0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        wait *= 2.0;
      }
    }
    warnings[i].push_back("triplet " + std::to_string(i) + " excluded after " +
                          std::to_string(cfg.max_retries + 1) + " attempts");
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < batch.size(); i = next++) judge_one(i);
  };
  const std::size_t n_workers = std::min(cfg.max_in_flight, batch.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!result.verdicts[i]) ++result.unjudged;
    for (auto& w : warnings[i]) result.warnings.push_back(std::move(w));
  }
  return result;
}

std::string canonical_qtype(std::string_view qtype) {
  std::string lower;
  for (char c : qtype) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (const char* t : kTaxonomy) {
    if (lower == t) return lower;
  }
  return "unknown";
}

EvalReport aggregate(const std::vector<Triplet>& triplets, const std::vector<std::optional<Verdict>>& verdicts,
                     JudgeMode judge, const std::string& corpus) {
  if (triplets.empty()) throw ValidationError("empty report: no triplets to aggregate");
  if (triplets.size() != verdicts.size()) {
    throw ValidationError("aggregate: " + std::to_string(triplets.size()) + " triplets but " +
                          std::to_string(verdicts.size()) + " verdicts");
  }
  EvalReport r;
  r.judge = judge;
  r.corpus = corpus;
  std::vector<std::string> order(std::begin(kTaxonomy), std::end(kTaxonomy));
  order.push_back("unknown");
  std::vector<QTypeStats> stats(order.size());
  std::vector<bool> seen(order.size(), false);
  for (std::size_t k = 0; k < order.size(); ++k) stats[k].qtype = order[k];
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto key = canonical_qtype(triplets[i].qtype);
    const auto k = static_cast<std::size_t>(std::find(order.begin(), order.end(), key) - order.begin());
    seen[k] = true;
    if (!verdicts[i]) {
      ++r.unjudged;
      continue;
    }
    ++stats[k].count;
    ++r.count;
    if (verdicts[i]->same) {
      ++stats[k].correct;
      ++r.correct;
    }
  }
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (!seen[k]) continue;
    auto s = stats[k];
    s.accuracy = s.count == 0 ? 0.0 : static_cast<double>(s.correct) / static_cast<double>(s.count);
    r.per_qtype.push_back(s);
  }
  r.overall_accuracy = r.count == 0 ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(r.count);
  return r;
}

std::string format_report(const EvalReport& r) {
  std::ostringstream out;
  out << "judge: " << to_string(r.judge);
  if (!r.corpus.empty()) out << "  corpus: " << r.corpus;
  if (!r.condition.empty()) out << "  condition: " << r.condition;
  out << "\n";
  char line[128];
  std::snprintf(line, sizeof line, "%-14s %7s %8s %9s\n", "qtype", "count", "correct", "accuracy");
  out << line;
  for (const auto& s : r.per_qtype) {
    std::snprintf(line, sizeof line, "%-14s %7zu %8zu %9.4f\n", s.qtype.c_str(), s.count, s.correct, s.accuracy);
    out << line;
  }
  std::snprintf(line, sizeof line, "%-14s %7zu %8zu %9.4f\n", "OA", r.count, r.correct, r.overall_accuracy);
  out << line;
  out << "unjudged: " << r.unjudged << "\n";
  return out.str();
}

ordered_json report_json(const EvalReport& r) {
  ordered_json j;
  j["corpus"] = r.corpus;
  j["condition"] = r.condition;
  j["judge"] = to_string(r.judge);
  j["per_qtype"] = ordered_json::array();
  for (const auto& s : r.per_qtype) {
    j["per_qtype"].push_back(
        ordered_json{{"qtype", s.qtype}, {"count", s.count}, {"correct", s.correct}, {"accuracy", s.accuracy}});
  }
  j["count"] = r.count;
  j["correct"] = r.correct;
  j["overall_accuracy"] = r.overall_accuracy;
  j["unjudged"] = r.unjudged;
  return j;
}

}  // namespace imfvqa::evalkit
