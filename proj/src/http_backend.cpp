#include "spanens/http_backend.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>

#include "httplib.h"
#include "spanens/segmentation.hpp"

namespace spanens {

HttpBackendConfig HttpBackendConfig::from_json(const nlohmann::json& j) {
  HttpBackendConfig c;
  c.base_url = j.at("base_url").get<std::string>();
  c.model = j.at("model").get<std::string>();
  c.name = j.value("name", c.model);
  c.api_key_env = j.value("api_key_env", std::string());
  c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
  c.max_tokens_per_request = j.value("max_tokens_per_request", c.max_tokens_per_request);
  c.max_requests_per_span = j.value("max_requests_per_span", c.max_requests_per_span);
  return c;
}

void HttpBackendConfig::validate() const {
  if (base_url.empty()) throw std::invalid_argument("http backend: base_url is empty");
  if (model.empty()) throw std::invalid_argument("http backend: model is empty");
  if (timeout_ms <= 0) throw std::invalid_argument("http backend: timeout must be positive");
  if (max_tokens_per_request == 0) throw std::invalid_argument("http backend: max_tokens_per_request must be positive");
  if (max_requests_per_span == 0) throw std::invalid_argument("http backend: max_requests_per_span must be positive");
}

std::vector<TokenScore> align_suffix_scores(const std::vector<std::string>& prefix_tokens,
                                            const std::vector<std::string>& full_tokens,
                                            const std::vector<std::optional<double>>& full_logprobs,
                                            std::string_view continuation) {
  if (full_tokens.size() != full_logprobs.size()) {
    throw BackendError("logprobs: tokens and token_logprobs differ in length");
  }
  std::size_t common = 0;
  while (common < prefix_tokens.size() && common < full_tokens.size() &&
         prefix_tokens[common] == full_tokens[common]) {
    ++common;
  }

  // Tokens past the continuation (a server that insists on generating) are ignored.
  std::vector<TokenScore> out;
  std::size_t covered = 0;
  for (std::size_t k = common; k < full_tokens.size() && covered < continuation.size(); ++k) {
    const std::string& tok = full_tokens[k];
    if (continuation.substr(covered, tok.size()) != tok) {
      throw BackendError("logprobs: token boundary does not align with the span");
    }
    if (!full_logprobs[k] || !std::isfinite(*full_logprobs[k])) {
      throw BackendError("logprobs: missing log-probability for a span token");
    }
    out.push_back({tok, *full_logprobs[k]});
    covered += tok.size();
  }
  if (covered != continuation.size()) throw BackendError("logprobs: span tokens do not cover the span");
  return out;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto scheme_end = config_.base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw std::invalid_argument("http backend: base_url needs a scheme: " + config_.base_url);
  }
  const auto path_start = config_.base_url.find('/', scheme_end + 3);
  scheme_host_port_ = config_.base_url.substr(0, path_start);
  if (path_start != std::string::npos) {
    path_prefix_ = config_.base_url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
}

nlohmann::json HttpBackend::post_completion(const nlohmann::json& body) const {
  httplib::Client cli(scheme_host_port_);
  const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);

  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (!key) throw BackendError(config_.name + ": environment variable " + config_.api_key_env + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  auto res = cli.Post(path_prefix_ + "/v1/completions", headers, body.dump(), "application/json");
  if (!res) throw BackendError(config_.name + ": request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw BackendError(config_.name + ": HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  try {
    auto j = nlohmann::json::parse(res->body);
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
      throw BackendError(config_.name + ": response has no choices");
    }
    return j["choices"][0];
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(config_.name + ": malformed response: " + e.what());
  }
}

SpanCandidate HttpBackend::generate_span(std::string_view prefix, std::size_t span_words) const {
  Segmenter seg(span_words);
  std::string generated;
  bool finished = true;
  try {
    for (std::size_t req = 0; req < config_.max_requests_per_span; ++req) {
      const nlohmann::json body = {{"model", config_.model},
                                   {"prompt", std::string(prefix) + generated},
                                   {"max_tokens", config_.max_tokens_per_request},
                                   {"temperature", 0},
                                   {"logprobs", 1},
                                   {"echo", false}};
      const auto choice = post_completion(body);
      const std::string text = choice.at("text").get<std::string>();
      const auto& reason = choice.contains("finish_reason") ? choice["finish_reason"] : nlohmann::json();
      generated += text;
      if (seg.feed(text) == FeedStatus::reached) {
        finished = false;
        break;
      }
      const bool truncated = reason.is_string() && reason.get<std::string>() == "length";
      if (!truncated || text.empty()) break;
    }
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(config_.name + ": malformed generation response: " + e.what());
  }
  if (finished) seg.finish();

  const WordSpan span = seg.span();
  return SpanCandidate{0, span.text, span.word_count, finished};
}

std::vector<TokenScore> HttpBackend::score(std::string_view prefix, std::string_view continuation) const {
  if (continuation.empty()) throw BackendError(config_.name + ": empty continuation");

  auto echo_tokens = [&](const std::string& prompt, std::vector<std::string>& tokens,
                         std::vector<std::optional<double>>& logprobs) {
    const nlohmann::json body = {{"model", config_.model}, {"prompt", prompt},  {"max_tokens", 0},
                                 {"temperature", 0},       {"logprobs", 1},     {"echo", true}};
    const auto choice = post_completion(body);
    try {
      const auto& lp = choice.at("logprobs");
      if (lp.is_null()) throw UnsupportedScoringError(config_.name + ": server returned no logprobs");
      tokens = lp.at("tokens").get<std::vector<std::string>>();
      for (const auto& v : lp.at("token_logprobs")) {
        logprobs.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
      }
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(config_.name + ": malformed logprobs response: " + e.what());
    }
  };

  std::vector<std::string> prefix_tokens;
  std::vector<std::optional<double>> prefix_logprobs;
  echo_tokens(std::string(prefix), prefix_tokens, prefix_logprobs);

  std::vector<std::string> full_tokens;
  std::vector<std::optional<double>> full_logprobs;
  echo_tokens(std::string(prefix) + std::string(continuation), full_tokens, full_logprobs);

  return align_suffix_scores(prefix_tokens, full_tokens, full_logprobs, continuation);
}

}  // namespace spanens
