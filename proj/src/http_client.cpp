#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "imfvqa/http_client.hpp"

#include "imfvqa/errors.hpp"
#include "imfvqa/json_fields.hpp"

namespace imfvqa::net {

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL needs a scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("endpoint URL must be http or https: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

ChatEndpoint::ChatEndpoint(std::string url, std::string model, std::string api_key)
    : model_(std::move(model)), api_key_(std::move(api_key)) {
  if (!url.empty()) std::tie(origin_, path_) = split_url(url);
}

std::string reply_text(const std::string& body) {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) return body;
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    if (j.is_string()) return j.get<std::string>();
    throw TransportError("reply has no choices[0].message.content");
  }
}

std::string ChatEndpoint::complete(const std::string& prompt, std::chrono::milliseconds timeout) {
  if (origin_.empty()) throw ConfigError("no endpoint URL configured");
  httplib::Client client(origin_);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  const httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
  const ordered_json body{{"model", model_},
                          {"temperature", 0},
                          {"messages", ordered_json::array({ordered_json{{"role", "user"}, {"content", prompt}}})}};
  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw TransportError("request to " + origin_ + path_ + " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("request to " + origin_ + path_ + " returned HTTP " + std::to_string(res->status));
  }
  return reply_text(res->body);
}

ParaphraseClient::ParaphraseClient(std::string url, std::string model, std::string api_key, double timeout_s,
                                   int max_retries)
    : url_(url),
      api_key_(api_key),
      endpoint_(std::move(url), std::move(model), std::move(api_key)),
      timeout_(static_cast<long long>(timeout_s * 1000.0)),
      max_retries_(max_retries) {}

std::string ParaphraseClient::complete(const std::string& prompt) {
  for (int attempt = 0;; ++attempt) {
    try {
      return endpoint_.complete(prompt, timeout_);
    } catch (const TransportError&) {
      if (attempt >= max_retries_) throw;
    }
  }
}

}  // namespace imfvqa::net
