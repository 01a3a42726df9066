#pragma once

// Live LLM backend: one generic HTTP completion endpoint, configured through
// environment variables. No provider-specific features; the endpoint accepts
// {"prompt","schema","purpose","model"} and returns {"value": <object>}.
//
//   DSORCH_LLM_URL    base url, e.g. http://localhost:8080
//   DSORCH_LLM_MODEL  model identifier forwarded verbatim
//   DSORCH_LLM_TOKEN  optional bearer token
//   DSORCH_LLM_TIMEOUT_S  request timeout, default 60

#include <chrono>
#include <cstdlib>
#include <random>
#include <string>
#include <thread>

#include <httplib.h>

#include "dsorch/providers.hpp"

namespace dsorch {

class HttpLLM final : public LLMProvider {
 public:
  struct Options {
    std::string base_url;
    std::string model;
    std::string token;
    int timeout_s = 60;
    int transport_retries = 2;
  };

  static Options options_from_env() {
    Options o;
    if (const char* u = std::getenv("DSORCH_LLM_URL")) o.base_url = u;
    if (const char* m = std::getenv("DSORCH_LLM_MODEL")) o.model = m;
    if (const char* t = std::getenv("DSORCH_LLM_TOKEN")) o.token = t;
    if (const char* s = std::getenv("DSORCH_LLM_TIMEOUT_S")) o.timeout_s = std::atoi(s);
    return o;
  }

  explicit HttpLLM(Options opts) : opts_(std::move(opts)) {
    if (opts_.base_url.empty()) {
      throw Error("live provider needs DSORCH_LLM_URL");
    }
  }

  LLMResponse complete(const LLMRequest& req) override {
    json body;
    body["prompt"] = req.prompt;
    body["schema"] = req.schema;
    body["purpose"] = req.purpose;
    body["model"] = opts_.model;
    const std::string payload = body.dump();

    std::string last_error;
    std::mt19937_64 jitter_rng(fnv1a64(request_fingerprint(req)));
    for (int attempt = 0; attempt <= opts_.transport_retries; ++attempt) {
      if (attempt > 0) {
        auto backoff = std::chrono::milliseconds(100 * attempt + uniform_index(jitter_rng, 100));
        std::this_thread::sleep_for(backoff);
      }
      network_access_counter().fetch_add(1);
      httplib::Client client(opts_.base_url);
      client.set_read_timeout(opts_.timeout_s, 0);
      client.set_connection_timeout(opts_.timeout_s, 0);
      httplib::Headers headers;
      if (!opts_.token.empty()) headers.emplace("Authorization", "Bearer " + opts_.token);
      auto res = client.Post("/complete", headers, payload, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "http status " + std::to_string(res->status);
        continue;
      }
      json doc = json::parse(res->body, nullptr, false);
      if (doc.is_discarded() || !doc.contains("value")) {
        last_error = "malformed endpoint response";
        continue;
      }
      LLMResponse resp;
      resp.value = doc.at("value");
      resp.prompt_tokens = doc.value("prompt_tokens", std::int64_t(payload.size() / 4));
      resp.completion_tokens = doc.value("completion_tokens", std::int64_t(res->body.size() / 4));
      if (auto err = validate_schema(req.schema, resp.value)) {
        throw SchemaViolation("endpoint output rejected (" + *err + ") for purpose " + req.purpose);
      }
      return resp;
    }
    throw ProviderError("live provider failed [prompt " + request_fingerprint(req) + "]: " +
                        last_error);
  }

 private:
  Options opts_;
};

}  // namespace dsorch
