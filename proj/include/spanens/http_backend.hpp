#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "spanens/backend.hpp"

namespace spanens {

struct HttpBackendConfig {
  std::string name;
  std::string base_url;  // scheme://host[:port][/path], no trailing /v1
  std::string model;
  std::string api_key_env;  // empty: no Authorization header
  int timeout_ms = 60000;
  std::size_t max_tokens_per_request = 64;
  // Bounds the continuation requests made while looking for a word boundary.
  std::size_t max_requests_per_span = 16;

  static HttpBackendConfig from_json(const nlohmann::json& j);
  void validate() const;
};

/// Split of the token scores of prefix+continuation past the longest common
/// token prefix with the scores of prefix alone. Throws BackendError when the
/// suffix does not spell `continuation` exactly.
std::vector<TokenScore> align_suffix_scores(const std::vector<std::string>& prefix_tokens,
                                            const std::vector<std::string>& full_tokens,
                                            const std::vector<std::optional<double>>& full_logprobs,
                                            std::string_view continuation);

/// Client for an OpenAI-style POST {base_url}/v1/completions endpoint.
/// Generation uses temperature 0; scoring uses echo with logprobs.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  const std::string& name() const override { return config_.name; }
  bool supports_scoring() const override { return true; }
  SpanCandidate generate_span(std::string_view prefix, std::size_t span_words) const override;
  std::vector<TokenScore> score(std::string_view prefix,
                                std::string_view continuation) const override;

  const HttpBackendConfig& config() const { return config_; }

 private:
  nlohmann::json post_completion(const nlohmann::json& body) const;

  HttpBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

}  // namespace spanens
