#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "dsorch/providers.hpp"
#include "dsorch/sim_llm.hpp"

using namespace dsorch;

namespace {

std::string temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "dsorch_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

}  // namespace

TEST_CASE("normalize_skill trims, lowercases, collapses") {
  CHECK(normalize_skill("  Filter By Column  ") == "filter by column");
  CHECK(normalize_skill("filter\t\tby   column") == "filter by column");
  CHECK(normalize_skill("\xC2\xA0linear regression\xC2\xA0") == "linear regression");
  // idempotent
  std::string once = normalize_skill("  A  B ");
  CHECK(normalize_skill(once) == once);
}

TEST_CASE("schema validation catches shape errors") {
  json schema{{"fields",
               json{{"name", json{{"type", "string"}}},
                    {"tags", json{{"type", "array"}, {"items", "string"}}},
                    {"note", json{{"type", "string"}, {"required", false}}}}}};
  CHECK(!validate_schema(schema, json{{"name", "x"}, {"tags", json::array({"a"})}}));
  CHECK(validate_schema(schema, json{{"tags", json::array()}}).value() == "missing field name");
  CHECK(validate_schema(schema, json{{"name", 3}, {"tags", json::array()}}).has_value());
  CHECK(validate_schema(schema, json{{"name", "x"}, {"tags", json::array({1})}}).has_value());
  CHECK(validate_schema(schema, json::array()).has_value());
}

TEST_CASE("fingerprints are stable and depend on all request parts") {
  LLMRequest a{"p", json{{"fields", json::object()}}, "t"};
  LLMRequest b = a;
  CHECK(request_fingerprint(a) == request_fingerprint(b));
  b.purpose = "u";
  CHECK(request_fingerprint(a) != request_fingerprint(b));
  b = a;
  b.prompt = "q";
  CHECK(request_fingerprint(a) != request_fingerprint(b));
  // frozen value guards cross-process stability of the hash
  CHECK(fnv1a64("filter by column") == 0x3ce8151ff1bbdf7cULL);
  CHECK(to_hex(0x3ce8151ff1bbdf7cULL) == "3ce8151ff1bbdf7c");
}

TEST_CASE("cassette record then replay round-trips and is hermetic") {
  auto sim = std::make_shared<SimLLM>();
  CassetteProvider rec(CassetteMode::record, sim);
  LLMRequest req{"Extract the data skills used.\nSTEPS:\nuse [skill: Filter By Column ] now\n",
                 json{{"fields", json{{"skills", json{{"type", "array"}, {"items", "string"}}}}}},
                 "extract_skills"};
  LLMResponse live = rec.complete(req);
  REQUIRE(live.value.at("skills").size() == 1);
  CHECK(live.value.at("skills")[0] == "filter by column");

  std::string path = temp_path("cassette_roundtrip.json");
  rec.save(path);

  CassetteProvider replay = CassetteProvider(path, CassetteMode::replay);
  LLMResponse replayed = replay.complete(req);
  CHECK(replayed.value == live.value);

  LLMRequest miss = req;
  miss.prompt += "different";
  try {
    replay.complete(miss);
    FAIL("expected replay miss");
  } catch (const ProviderError& e) {
    CHECK(std::string(e.what()).find(request_fingerprint(miss)) != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("replay mode consumes zero network access") {
  auto before = network_access_counter().load();
  auto sim = std::make_shared<SimLLM>();
  CassetteProvider rec(CassetteMode::record, sim);
  LLMRequest req{"RUBRIC: must contain \"ok\"\nRESULT: all ok\n",
                 json{{"fields", json{{"verdict", json{{"type", "boolean"}}}}}}, "judge_rule"};
  rec.complete(req);
  CHECK(network_access_counter().load() == before);
}

TEST_CASE("retry policy errors carry the prompt fingerprint") {
  struct AlwaysInvalid final : LLMProvider {
    LLMResponse complete(const LLMRequest& req) override {
      throw SchemaViolation("bad output for " + req.purpose);
    }
  } bad;
  LLMRequest req{"p", json::object(), "curate_example"};
  try {
    complete_with_retries(bad, req);
    FAIL("expected failure");
  } catch (const ProviderError& e) {
    CHECK(std::string(e.what()).find(request_fingerprint(req)) != std::string::npos);
  }
}

TEST_CASE("hash embedder is deterministic and overlap-sensitive") {
  HashEmbedder emb(64);
  auto a = emb.embed("filter by column on sales table");
  auto b = emb.embed("filter by column on sales table");
  CHECK(a == b);
  CHECK(l2_norm(a) == Catch::Approx(1.0).margin(1e-9));
  auto c = emb.embed("train gradient boosted trees");
  CHECK(dot(a, b) > dot(a, c));
}

TEST_CASE("simulated agent satisfies exactly the top ceil(score*n) rules") {
  SimulatedAgent spec{"agent_x", {"alpha", "beta"}, 0.9, 42};
  SimulatedAgentProvider agent(spec);

  AgentTask task;
  task.subtask_id = "case1";
  task.tags = {"alpha", "gamma"};  // overlap 1 of 2 -> 0.45 with q=0.9
  for (int i = 0; i < 4; ++i) {
    task.rule_targets.push_back(
        json{{"selector", "/checks/" + std::to_string(i)}, {"expected", true}});
  }
  AgentResult res = agent.execute(task);
  REQUIRE(res.ok);
  // ceil(0.45 * 4) = 2 rules pass
  CHECK(res.value.at("checks")[0] == json(true));
  CHECK(res.value.at("checks")[1] == json(true));
  CHECK(res.value.at("checks")[2] == json(false));
  CHECK(res.value.at("checks")[3] == json(false));

  AgentTask untagged;
  untagged.subtask_id = "case2";
  CHECK_THROWS_AS(agent.execute(untagged), PreconditionError);
}

TEST_CASE("simulated agent score is monotone in skill overlap") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> tags;
    for (int t = 0; t < 4; ++t) tags.push_back("t" + std::to_string(uniform_index(rng, 8)));
    std::set<std::string> base;
    for (int s = 0; s < 3; ++s) base.insert("t" + std::to_string(uniform_index(rng, 8)));
    SimulatedAgent small{"a", base, 0.8, 1};
    auto grown = base;
    grown.insert(tags[uniform_index(rng, tags.size())]);
    SimulatedAgent big{"a", grown, 0.8, 1};
    CHECK(big.score_on(tags) >= small.score_on(tags));
  }
}
