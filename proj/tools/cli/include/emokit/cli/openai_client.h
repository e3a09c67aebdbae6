#pragma once

#include <string>

#include "emokit/llmeval.h"

namespace emokit::cli {

// Chat-completions client over HTTPS. The bearer token is read from the
// environment variable named by credential_env on every call and is never
// written anywhere.
class OpenAIChatClient : public llm::ChatClient {
 public:
  OpenAIChatClient(std::string base_url, std::string path,
                   std::string credential_env, int timeout_s = 120);

  void check_configured() const override;
  std::string send(const std::string& request_json) override;
  std::string endpoint() const override { return base_url_ + path_; }

 private:
  std::string credential() const;

  std::string base_url_;
  std::string path_;
  std::string credential_env_;
  int timeout_s_;
};

}  // namespace emokit::cli
