#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "dsorch/sim_llm.hpp"
#include "dsorch/skills.hpp"

using namespace dsorch;

namespace {

// Mock embedder with planted semantic groups: names sharing a "grpN" prefix
// land near a common center, plus small name-keyed deterministic jitter.
class PlantedEmbedder final : public EmbeddingProvider {
 public:
  explicit PlantedEmbedder(std::size_t dim = 8) : dim_(dim) {}

  std::vector<double> embed(const std::string& text) override {
    std::vector<double> v(dim_, 0.0);
    std::size_t group = text.find("grp1") != std::string::npos   ? 0
                        : text.find("grp2") != std::string::npos ? 1
                        : text.find("grp3") != std::string::npos ? 2
                                                                 : 3;
    v[group] = 1.0;
    std::mt19937_64 rng(fnv1a64(text));
    for (auto& x : v) x += 0.02 * (uniform01(rng) - 0.5);
    return normalized(v);
  }

  std::size_t dim() const override { return dim_; }

 private:
  std::size_t dim_;
};

DataScienceExample accepted_example(const std::string& id, std::vector<std::string> skills) {
  DataScienceExample ex;
  ex.id = id;
  ex.task = "task " + id;
  ex.quality = Quality::accepted;
  ex.solution_steps = {"step"};
  ex.skills = std::move(skills);
  return ex;
}

SkillHierarchy scored_three_leaf_tree() {
  // root(r) -> leaves a:0.5 b:0.3 c:0.2
  SkillHierarchy h;
  h.root = "r";
  SkillNode r{"r", "root", {}, {"a", "b", "c"}, 1.0, 0};
  SkillNode a{"a", "skill_a", {"skill a"}, {}, 0.5, 1};
  SkillNode b{"b", "skill_b", {"skill b"}, {}, 0.3, 1};
  SkillNode c{"c", "skill_c", {"skill c"}, {}, 0.2, 1};
  h.nodes = {{"r", r}, {"a", a}, {"b", b}, {"c", c}};
  h.vocabulary = {{"skill a", "a"}, {"skill b", "b"}, {"skill c", "c"}};
  return h;
}

}  // namespace

TEST_CASE("single skill becomes a single-leaf root") {
  PlantedEmbedder emb;
  SimLLM llm;
  ClusteringConfig cfg;
  cfg.leaf_threshold = 4;
  auto h = build_hierarchy({"grp1 only skill"}, emb, llm, cfg);
  CHECK(h.nodes.size() == 1);
  const SkillNode& root = h.at(h.root);
  CHECK(root.is_leaf());
  CHECK(root.member_skills == std::vector<std::string>{"grp1 only skill"});
  CHECK(h.vocabulary.size() == 1);
}

TEST_CASE("skills below the leaf threshold form one leaf cluster") {
  PlantedEmbedder emb;
  SimLLM llm;
  ClusteringConfig cfg;
  cfg.leaf_threshold = 4;
  auto h = build_hierarchy({"grp1 a", "grp1 b", "grp2 c"}, emb, llm, cfg);
  auto leaves = h.leaf_ids();
  REQUIRE(leaves.size() == 1);
  CHECK(h.at(leaves[0]).member_skills.size() == 3);
  validate_hierarchy(h);
}

TEST_CASE("two planted groups of 10 split into two leaves under threshold 12") {
  PlantedEmbedder emb;
  SimLLM llm;
  ClusteringConfig cfg;
  cfg.leaf_threshold = 12;
  cfg.reduced_dim = 4;
  cfg.k_range = {2, 3};
  cfg.seed = 3;
  std::vector<std::string> skills;
  for (int i = 0; i < 10; ++i) skills.push_back("grp1 skill " + std::to_string(i));
  for (int i = 0; i < 10; ++i) skills.push_back("grp2 skill " + std::to_string(i));
  auto h = build_hierarchy(skills, emb, llm, cfg);
  validate_hierarchy(h);
  const SkillNode& root = h.at(h.root);
  REQUIRE(root.children.size() == 2);
  for (const auto& cid : root.children) {
    const SkillNode& leaf = h.at(cid);
    REQUIRE(leaf.is_leaf());
    CHECK(leaf.member_skills.size() == 10);
    // members all from one planted group
    std::string prefix = leaf.member_skills[0].substr(0, 4);
    for (const auto& s : leaf.member_skills) CHECK(s.substr(0, 4) == prefix);
  }
  // internal label came from the summary provider
  CHECK(!root.label.empty());
}

TEST_CASE("assign_scores computes leaf fractions and child sums") {
  auto h = scored_three_leaf_tree();
  Corpus corpus = {accepted_example("e1", {"skill a", "skill b"}),
                   accepted_example("e2", {"skill a"}),
                   accepted_example("e3", {"skill b"}),
                   accepted_example("e4", {"skill c"})};
  auto scored = assign_scores(h, corpus);
  CHECK(scored.at("a").score == Catch::Approx(0.5));
  CHECK(scored.at("b").score == Catch::Approx(0.5));
  CHECK(scored.at("c").score == Catch::Approx(0.25));
  CHECK(scored.at("r").score == Catch::Approx(1.25));
  validate_hierarchy(scored);

  SECTION("leaf touched by every example scores 1") {
    Corpus all = {accepted_example("e1", {"skill a"}), accepted_example("e2", {"skill a"})};
    auto s2 = assign_scores(h, all);
    CHECK(s2.at("a").score == Catch::Approx(1.0));
  }
  SECTION("unknown corpus skill is named in the error") {
    Corpus bad = {accepted_example("e1", {"mystery skill"})};
    CHECK_THROWS_WITH(assign_scores(h, bad),
                      Catch::Matchers::ContainsSubstring("mystery skill"));
  }
  SECTION("empty corpus violates the precondition") {
    Corpus none;
    CHECK_THROWS_AS(assign_scores(h, none), PreconditionError);
  }
}

TEST_CASE("adjust_score rescales siblings proportionally") {
  auto h = scored_three_leaf_tree();
  SECTION("hand rescale: A 0.5 -> 0.7 gives B 0.18, C 0.12") {
    auto adj = adjust_score(h, "a", 0.7);
    CHECK(adj.at("a").score == Catch::Approx(0.7));
    CHECK(adj.at("b").score == Catch::Approx(0.18));
    CHECK(adj.at("c").score == Catch::Approx(0.12));
    CHECK(adj.at("a").score + adj.at("b").score + adj.at("c").score ==
          Catch::Approx(1.0).margin(1e-9));
  }
  SECTION("identity adjustment leaves the tree unchanged") {
    auto adj = adjust_score(h, "a", 0.5);
    CHECK(adj.to_json() == h.to_json());
  }
  SECTION("descendants scale by the target ratio") {
    SkillHierarchy deep = h;
    // a becomes internal with two children 0.4 / 0.1
    deep.nodes.at("a").member_skills.clear();
    deep.nodes.at("a").children = {"a1", "a2"};
    deep.nodes["a1"] = SkillNode{"a1", "a1", {"skill a"}, {}, 0.4, 2};
    deep.nodes["a2"] = SkillNode{"a2", "a2", {"skill a2"}, {}, 0.1, 2};
    deep.vocabulary = {{"skill a", "a1"}, {"skill a2", "a2"}, {"skill b", "b"}, {"skill c", "c"}};
    auto adj = adjust_score(deep, "a", 0.7);
    CHECK(adj.at("a1").score == Catch::Approx(0.56));
    CHECK(adj.at("a2").score == Catch::Approx(0.14));
    validate_hierarchy(adj);
  }
  SECTION("errors: root, overshoot, zero remainder") {
    CHECK_THROWS_AS(adjust_score(h, "r", 0.5), PreconditionError);
    CHECK_THROWS_AS(adjust_score(h, "a", 1.5), PreconditionError);
    auto zero = h;
    zero.nodes.at("b").score = 0.0;
    zero.nodes.at("c").score = 0.0;
    zero.nodes.at("r").score = 0.5;
    CHECK_THROWS_AS(adjust_score(zero, "a", 0.2), PreconditionError);
  }
}

TEST_CASE("sample_skills draws proportionally to leaf scores") {
  auto h = scored_three_leaf_tree();
  SECTION("forced draw from a single positive leaf") {
    auto single = h;
    single.nodes.at("b").score = 0.0;
    single.nodes.at("c").score = 0.0;
    single.nodes.at("r").score = 0.5;
    for (int i = 0; i < 5; ++i) {
      std::mt19937_64 rng(i);
      CHECK(sample_skills(single, 1, rng) == std::vector<std::string>{"skill a"});
    }
  }
  SECTION("first-draw frequencies track scores within 0.01") {
    std::map<std::string, int> counts;
    const int trials = 100000;
    std::mt19937_64 rng(42);
    for (int i = 0; i < trials; ++i) {
      counts[sample_skills(h, 1, rng)[0]]++;
    }
    CHECK(std::abs(counts["skill a"] / double(trials) - 0.5) < 0.01);
    CHECK(std::abs(counts["skill b"] / double(trials) - 0.3) < 0.01);
    CHECK(std::abs(counts["skill c"] / double(trials) - 0.2) < 0.01);
  }
  SECTION("k equal to leaf count exhausts the leaves") {
    std::mt19937_64 rng(7);
    auto got = sample_skills(h, 3, rng);
    std::set<std::string> set(got.begin(), got.end());
    CHECK(set == std::set<std::string>{"skill a", "skill b", "skill c"});
  }
  SECTION("fixed seed reproduces draws bit-for-bit") {
    std::mt19937_64 r1(99), r2(99);
    CHECK(sample_skills(h, 2, r1) == sample_skills(h, 2, r2));
  }
  SECTION("errors: zero mass and oversized k") {
    auto zero = h;
    for (auto& [id, node] : zero.nodes) node.score = 0.0;
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(sample_skills(zero, 1, rng), PreconditionError);
    CHECK_THROWS_AS(sample_skills(h, 4, rng), PreconditionError);
  }
}

TEST_CASE("hierarchy persists through save/load") {
  auto h = scored_three_leaf_tree();
  auto dir = std::filesystem::temp_directory_path() / "dsorch_tests";
  std::filesystem::create_directories(dir);
  std::string path = (dir / "hierarchy.json").string();
  h.save(path);
  auto back = SkillHierarchy::load(path);
  CHECK(back.to_json() == h.to_json());
  std::remove(path.c_str());
}
