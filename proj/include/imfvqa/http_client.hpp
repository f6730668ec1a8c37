#pragma once

#include <chrono>
#include <string>

#include "imfvqa/evalkit.hpp"
#include "imfvqa/svmgen.hpp"

namespace imfvqa::net {

/// POSTs {"model", "messages": [{"role": "user", "content": prompt}]} to a
/// chat-completion URL and returns choices[0].message.content, or the raw
/// body when the reply is not JSON.
class ChatEndpoint : public evalkit::TextEndpoint {
 public:
  ChatEndpoint(std::string url, std::string model, std::string api_key);

  std::string complete(const std::string& prompt, std::chrono::milliseconds timeout) override;

 private:
  std::string origin_;  // scheme://host[:port]
  std::string path_;
  std::string model_;
  std::string api_key_;
};

/// Extracts the first message text from a chat-completion reply body.
std::string reply_text(const std::string& body);

/// Question rewriter over a ChatEndpoint with a fixed timeout and retry count.
class ParaphraseClient : public svmgen::RemoteLLMClient {
 public:
  ParaphraseClient(std::string url, std::string model, std::string api_key, double timeout_s = 30.0,
                   int max_retries = 2);

  bool enabled() const override { return !url_.empty() && !api_key_.empty(); }
  std::string complete(const std::string& prompt) override;

 private:
  std::string url_;
  std::string api_key_;
  ChatEndpoint endpoint_;
  std::chrono::milliseconds timeout_;
  int max_retries_;
};

}  // namespace imfvqa::net
