#pragma once

// Provider ports: LLM completion, text embedding, search, and agent
// execution. All LLM exchanges are schema-declared structured values; a
// record/replay cassette makes every provider-backed path hermetic and
// deterministic, and a simulated-agent world supplies ground truth for the
// selection/execution test suites.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dsorch/common.hpp"

namespace dsorch {

// ---------------------------------------------------------------------------
// Requests, responses, schemas

struct LLMRequest {
  std::string prompt;
  json schema;          // declarative output schema, see validate_schema
  std::string purpose;  // routing tag, part of the fingerprint
};

struct LLMResponse {
  json value;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

// Schema format: {"fields": {"<name>": {"type": t, "required": bool,
// "items": t}}} with t in {string, number, integer, boolean, array, object}.
// Returns an error description, or nullopt when the value conforms.
inline std::optional<std::string> validate_schema(const json& schema, const json& value) {
  if (!value.is_object()) return "response is not an object";
  if (!schema.contains("fields")) return std::nullopt;
  auto type_ok = [](const std::string& t, const json& v) {
    if (t == "string") return v.is_string();
    if (t == "number") return v.is_number();
    if (t == "integer") return v.is_number_integer();
    if (t == "boolean") return v.is_boolean();
    if (t == "array") return v.is_array();
    if (t == "object") return v.is_object();
    return true;
  };
  for (auto& [name, fs] : schema.at("fields").items()) {
    bool required = fs.value("required", true);
    if (!value.contains(name)) {
      if (required) return "missing field " + name;
      continue;
    }
    std::string t = fs.value("type", "object");
    if (!type_ok(t, value.at(name))) return "field " + name + " is not a " + t;
    if (t == "array" && fs.contains("items")) {
      std::string it = fs.at("items").get<std::string>();
      for (const auto& el : value.at(name)) {
        if (!type_ok(it, el)) return "field " + name + " has non-" + it + " element";
      }
    }
  }
  return std::nullopt;
}

class SchemaViolation : public ProviderError {
 public:
  explicit SchemaViolation(const std::string& msg) : ProviderError(msg) {}
};

// Stable across processes: hash of prompt + canonical schema dump + purpose.
inline std::string request_fingerprint(const LLMRequest& req) {
  std::uint64_t h = fnv1a64(req.prompt);
  h = fnv1a64(req.schema.dump(), h);
  h = fnv1a64(req.purpose, h);
  return to_hex(h);
}

// ---------------------------------------------------------------------------
// Ports

class LLMProvider {
 public:
  virtual ~LLMProvider() = default;
  // Returns a schema-valid structured response or throws ProviderError /
  // SchemaViolation. Must tolerate concurrent calls.
  virtual LLMResponse complete(const LLMRequest& req) = 0;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<double> embed(const std::string& text) = 0;
  virtual std::size_t dim() const = 0;
};

class SearchProvider {
 public:
  virtual ~SearchProvider() = default;
  virtual std::string search(const std::string& query) = 0;
};

// Offline-safe default: reports nothing found.
class StubSearch final : public SearchProvider {
 public:
  std::string search(const std::string& query) override {
    (void)query;
    return "not found";
  }
};

struct AgentTask {
  std::string subtask_id;
  std::string description;
  json datasets = json::array();  // dataset descriptors visible to the agent
  std::vector<std::string> tags;  // seed skills / capability tags
  // When the harness knows the evaluation targets (simulation world), each
  // entry is {"selector": path, "expected": literal}. Real agents ignore it.
  json rule_targets = json::array();
};

struct AgentResult {
  bool ok = false;
  json value;
  std::string error;
};

class AgentProvider {
 public:
  virtual ~AgentProvider() = default;
  virtual std::string id() const = 0;
  virtual AgentResult execute(const AgentTask& task) = 0;
};

// Counts attempts to reach the network; replay-mode suites assert it stays 0.
inline std::atomic<std::uint64_t>& network_access_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

// ---------------------------------------------------------------------------
// Record/replay cassette

enum class CassetteMode { record, replay, passthrough };

inline std::string to_string(CassetteMode m) {
  switch (m) {
    case CassetteMode::record: return "record";
    case CassetteMode::replay: return "replay";
    case CassetteMode::passthrough: return "passthrough";
  }
  return "?";
}

inline CassetteMode cassette_mode_from_string(const std::string& s) {
  if (s == "record") return CassetteMode::record;
  if (s == "replay") return CassetteMode::replay;
  if (s == "passthrough") return CassetteMode::passthrough;
  throw Error("unknown cassette mode: " + s);
}

// Fingerprint -> recorded response. Replay mode never calls the inner
// provider; an unmatched fingerprint is an error naming the fingerprint.
class CassetteProvider final : public LLMProvider {
 public:
  CassetteProvider(CassetteMode mode, std::shared_ptr<LLMProvider> inner = nullptr)
      : mode_(mode), inner_(std::move(inner)) {
    if (mode_ != CassetteMode::replay && !inner_) {
      throw Error("cassette in " + to_string(mode_) + " mode requires an inner provider");
    }
  }

  // Construct from a cassette file on disk.
  CassetteProvider(const std::string& path, CassetteMode mode,
                   std::shared_ptr<LLMProvider> inner = nullptr)
      : CassetteProvider(mode, std::move(inner)) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open cassette: " + path);
    json doc = json::parse(in);
    for (auto& [fp, rec] : doc.at("records").items()) {
      records_[fp] = rec;
    }
  }

  void save(const std::string& path) const {
    std::lock_guard<std::mutex> lock(mu_);
    json doc;
    doc["records"] = json::object();
    for (const auto& [fp, rec] : records_) doc["records"][fp] = rec;
    std::ofstream out(path);
    if (!out) throw Error("cannot write cassette: " + path);
    out << doc.dump(2) << "\n";
  }

  LLMResponse complete(const LLMRequest& req) override {
    const std::string fp = request_fingerprint(req);
    if (mode_ == CassetteMode::replay || mode_ == CassetteMode::record) {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = records_.find(fp);
      if (it != records_.end()) {
        return decode(it->second, req);
      }
      if (mode_ == CassetteMode::replay) {
        throw ProviderError("replay miss: fingerprint " + fp + " (purpose " + req.purpose + ")");
      }
    }
    LLMResponse resp = inner_->complete(req);
    if (auto err = validate_schema(req.schema, resp.value)) {
      throw SchemaViolation("provider output rejected (" + *err + ") for purpose " + req.purpose);
    }
    if (mode_ == CassetteMode::record) {
      std::lock_guard<std::mutex> lock(mu_);
      json rec;
      rec["purpose"] = req.purpose;
      rec["value"] = resp.value;
      rec["prompt_tokens"] = resp.prompt_tokens;
      rec["completion_tokens"] = resp.completion_tokens;
      records_[fp] = rec;
    }
    return resp;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return records_.size();
  }

 private:
  LLMResponse decode(const json& rec, const LLMRequest& req) const {
    LLMResponse resp;
    resp.value = rec.at("value");
    resp.prompt_tokens = rec.value("prompt_tokens", std::int64_t{0});
    resp.completion_tokens = rec.value("completion_tokens", std::int64_t{0});
    if (auto err = validate_schema(req.schema, resp.value)) {
      throw SchemaViolation("recorded response rejected (" + *err + ") for purpose " + req.purpose);
    }
    return resp;
  }

  CassetteMode mode_;
  std::shared_ptr<LLMProvider> inner_;
  mutable std::mutex mu_;
  std::map<std::string, json> records_;
};

// Port-level retry policy: 2 retries on schema-invalid output, then hard
// error carrying the fingerprint (the prompt id).
inline LLMResponse complete_with_retries(LLMProvider& llm, const LLMRequest& req, int retries = 2) {
  std::string last;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    try {
      return llm.complete(req);
    } catch (const SchemaViolation& e) {
      last = e.what();
    }
  }
  throw ProviderError("provider failed after retries [prompt " + request_fingerprint(req) +
                      "]: " + last);
}

// ---------------------------------------------------------------------------
// Hash-mock embedder

// Feature-hashing bag-of-words embedder: deterministic, process-stable, and
// token overlap translates into cosine similarity. The test-suite stand-in
// for an external embedding service.
class HashEmbedder final : public EmbeddingProvider {
 public:
  explicit HashEmbedder(std::size_t dim = 64) : dim_(dim) {
    if (dim_ == 0) throw Error("embedder dimension must be positive");
  }

  std::vector<double> embed(const std::string& text) override {
    std::vector<double> v(dim_, 0.0);
    std::string token;
    auto flush = [&] {
      if (token.empty()) return;
      std::uint64_t h = fnv1a64(token);
      std::size_t bucket = static_cast<std::size_t>(h % dim_);
      double sign = ((h >> 32) & 1) ? 1.0 : -1.0;
      v[bucket] += sign;
      token.clear();
    };
    for (char c : text) {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      } else {
        flush();
      }
    }
    flush();
    double n = l2_norm(v);
    if (n == 0.0) {
      v.assign(dim_, 0.0);
      v[0] = 1.0;
      return v;
    }
    for (double& x : v) x /= n;
    return v;
  }

  std::size_t dim() const override { return dim_; }

 private:
  std::size_t dim_;
};

// ---------------------------------------------------------------------------
// Simulated agents

// Openly synthetic world model: an agent's result quality on a tagged task
// is quality * |skill_set ∩ tags| / |tags|, and when evaluation targets are
// provided, exactly the top ceil(score * rule_count) rules are satisfied.
struct SimulatedAgent {
  std::string agent_id;
  std::set<std::string> skill_set;
  double quality = 1.0;  // in [0,1]
  std::uint64_t noise_seed = 0;

  double score_on(const std::vector<std::string>& tags) const {
    if (tags.empty()) return 0.0;
    std::size_t hit = 0;
    for (const auto& t : tags) hit += skill_set.count(normalize_skill(t)) ? 1 : 0;
    return quality * static_cast<double>(hit) / static_cast<double>(tags.size());
  }
};

class SimulatedAgentProvider final : public AgentProvider {
 public:
  explicit SimulatedAgentProvider(SimulatedAgent spec) : spec_(std::move(spec)) {}

  std::string id() const override { return spec_.agent_id; }

  const SimulatedAgent& spec() const { return spec_; }

  AgentResult execute(const AgentTask& task) override {
    if (task.tags.empty()) {
      throw PreconditionError("simulated agent " + spec_.agent_id +
                              " requires skill tags on subtask " + task.subtask_id);
    }
    const double s = spec_.score_on(task.tags);
    AgentResult out;
    out.ok = true;
    json value;
    value["agent"] = spec_.agent_id;
    value["subtask"] = task.subtask_id;
    value["quality_score"] = s;
    value["trace_id"] =
        to_hex(fnv1a64(spec_.agent_id + "|" + task.subtask_id, spec_.noise_seed + 0x9E3779B97F4A7C15ULL));
    if (!task.rule_targets.empty()) {
      const std::size_t n = task.rule_targets.size();
      const std::size_t pass = static_cast<std::size_t>(
          std::min<double>(static_cast<double>(n), std::ceil(s * static_cast<double>(n))));
      for (std::size_t i = 0; i < n; ++i) {
        const json& target = task.rule_targets[i];
        json::json_pointer ptr(target.at("selector").get<std::string>());
        if (i < pass) {
          value[ptr] = target.at("expected");
        } else {
          value[ptr] = miss_value(target.at("expected"));
        }
      }
    } else if (s <= 0.0) {
      // No capability overlap: the artifact is a failure report that the
      // verifier will reject.
      value["status"] = "failed";
      value["fail_cause"] = "wrong_agent";
    } else {
      value["status"] = "ok";
      value["summary"] = "result of " + task.subtask_id + " by " + spec_.agent_id;
    }
    out.value = std::move(value);
    return out;
  }

 private:
  static json miss_value(const json& expected) {
    if (expected.is_boolean()) return !expected.get<bool>();
    if (expected.is_number()) return expected.get<double>() + 1.0e6;
    if (expected.is_string()) return expected.get<std::string>() + "_unsatisfied";
    return json("UNSATISFIED");
  }

  SimulatedAgent spec_;
};

// Test harness wrapper: injects failures for specific (subtask, attempt)
// combinations while delegating everything else.
class FaultInjectingAgent final : public AgentProvider {
 public:
  FaultInjectingAgent(std::shared_ptr<AgentProvider> inner,
                      std::map<std::string, int> fail_first_attempts)
      : inner_(std::move(inner)), fail_budget_(std::move(fail_first_attempts)) {}

  std::string id() const override { return inner_->id(); }

  AgentResult execute(const AgentTask& task) override {
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = fail_budget_.find(task.subtask_id);
      if (it != fail_budget_.end() && it->second != 0) {
        if (it->second > 0) --it->second;
        AgentResult r;
        r.ok = false;
        r.error = "injected failure on " + task.subtask_id;
        r.value = json{{"status", "failed"}, {"fail_cause", "malformed_intermediate"}};
        return r;
      }
    }
    return inner_->execute(task);
  }

 private:
  std::shared_ptr<AgentProvider> inner_;
  std::mutex mu_;
  std::map<std::string, int> fail_budget_;  // -1 = persistent
};

}  // namespace dsorch
