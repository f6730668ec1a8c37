#pragma once

// Answer judging and accuracy aggregation: exact match after normalization,
// or a remote text model prompted to say whether two answers name the same
// thing.

#include <chrono>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "imfvqa/json_fields.hpp"

namespace imfvqa::evalkit {

struct Triplet {
  std::string question;
  std::string ground_truth;
  std::string model_output;
  std::string qtype = "unknown";
};

enum class JudgeMode { exact, remote };

const char* to_string(JudgeMode m);
JudgeMode judge_mode_from_string(std::string_view s);

struct Verdict {
  bool same = false;  // T
  std::string rationale;
  JudgeMode judge = JudgeMode::exact;
  bool operator==(const Verdict&) const = default;
};

/// Lowercase, punctuation to spaces, collapsed whitespace, leading articles
/// dropped, number words zero..twenty replaced by digits.
std::string normalize(std::string_view s);

Verdict exact_judge(const Triplet& t);

/// The judge prompt with ground truth and model output substituted.
std::string build_judge_prompt(const Triplet& t);
extern const char* const kJudgePromptTemplate;

/// Keys on the first alphabetic character; throws ParseError when it is
/// neither T nor F.
Verdict parse_verdict(std::string_view response);

/// Text-in, text-out remote model.
class TextEndpoint {
 public:
  virtual ~TextEndpoint() = default;
  /// Throws TransportError on network, timeout or HTTP failure.
  virtual std::string complete(const std::string& prompt, std::chrono::milliseconds timeout) = 0;
};

struct RemoteJudgeConfig {
  std::string endpoint;  // chat-completion URL
  std::string model = "gpt-4";
  std::string api_key_env = "JUDGE_API_KEY";
  std::size_t max_in_flight = 4;
  double timeout_s = 60.0;
  int max_retries = 2;
  double backoff_s = 1.0;  // doubled after each failed attempt

  void validate() const;
};

/// Reads the credential named by cfg.api_key_env; ConfigError when unset.
std::string require_credential(const RemoteJudgeConfig& cfg);

struct RemoteJudgeResult {
  std::vector<std::optional<Verdict>> verdicts;  // input order; nullopt = unjudged
  std::size_t unjudged = 0;
  std::vector<std::string> warnings;
};

/// One prompt per triplet through a bounded worker pool. A triplet whose
/// requests fail or whose replies cannot be parsed after all retries is left
/// unjudged. The credential is checked before any request is sent.
RemoteJudgeResult remote_judge(const std::vector<Triplet>& batch, TextEndpoint& endpoint,
                               const RemoteJudgeConfig& cfg);

struct QTypeStats {
  std::string qtype;
  std::size_t count = 0;  // judged
  std::size_t correct = 0;
  double accuracy = 0.0;
  bool operator==(const QTypeStats&) const = default;
};

struct EvalReport {
  std::vector<QTypeStats> per_qtype;  // taxonomy order, then "unknown"; only qtypes that occur
  std::size_t count = 0;
  std::size_t correct = 0;
  double overall_accuracy = 0.0;
  std::size_t unjudged = 0;
  JudgeMode judge = JudgeMode::exact;
  std::string corpus;
  std::string condition;  // modality condition, when evaluating a model
};

/// Canonical qtype key: one of the four taxonomy names or "unknown".
std::string canonical_qtype(std::string_view qtype);

EvalReport aggregate(const std::vector<Triplet>& triplets, const std::vector<std::optional<Verdict>>& verdicts,
                     JudgeMode judge, const std::string& corpus = {});

std::string format_report(const EvalReport& r);
ordered_json report_json(const EvalReport& r);

}  // namespace imfvqa::evalkit
