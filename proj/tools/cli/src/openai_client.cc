#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "emokit/cli/openai_client.h"

#include <cstdlib>

#include <json.hpp>

namespace emokit::cli {

OpenAIChatClient::OpenAIChatClient(std::string base_url, std::string path,
                                   std::string credential_env, int timeout_s)
    : base_url_(std::move(base_url)),
      path_(std::move(path)),
      credential_env_(std::move(credential_env)),
      timeout_s_(timeout_s) {}

std::string OpenAIChatClient::credential() const {
  const char* value = std::getenv(credential_env_.c_str());
  return value ? std::string(value) : std::string();
}

void OpenAIChatClient::check_configured() const {
  if (base_url_.empty()) throw ConfigError("llm endpoint is empty");
  if (credential().empty()) {
    throw ConfigError("environment variable " + credential_env_ +
                      " is not set; it must hold the API key");
  }
}

std::string OpenAIChatClient::send(const std::string& request_json) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_s_, 0);
  client.set_read_timeout(timeout_s_, 0);
  client.set_write_timeout(timeout_s_, 0);
  const httplib::Headers headers = {{"Authorization", "Bearer " + credential()}};
  auto res = client.Post(path_, headers, request_json, "application/json");
  if (!res) {
    throw llm::TransientFailure("request failed: " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw llm::TransientFailure("HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw std::runtime_error("HTTP " + std::to_string(res->status) + ": " +
                             res->body.substr(0, 500));
  }
  try {
    const auto j = nlohmann::json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("unexpected response body: ") + e.what());
  }
}

}  // namespace emokit::cli
