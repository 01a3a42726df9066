#pragma once

// Skill taxonomy: recursive mixture clustering of skill embeddings produces
// a tree whose leaves hold concrete skills and whose internal nodes carry
// LLM theme summaries. Importance scores live on the nodes: leaf scores come
// from corpus frequency, internal scores are child sums, and user
// adjustments rescale sibling groups proportionally.

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dsorch/common.hpp"
#include "dsorch/corpus.hpp"
#include "dsorch/gmm.hpp"
#include "dsorch/providers.hpp"

namespace dsorch {

struct SkillNode {
  std::string id;
  std::string label;
  std::vector<std::string> member_skills;  // leaves only
  std::vector<std::string> children;       // internal nodes only
  double score = 0.0;
  int depth = 0;

  bool is_leaf() const { return children.empty(); }
};

struct SkillHierarchy {
  std::string root;
  std::map<std::string, SkillNode> nodes;
  std::map<std::string, std::string> vocabulary;  // skill name -> leaf id

  const SkillNode& at(const std::string& id) const {
    auto it = nodes.find(id);
    if (it == nodes.end()) throw Error("unknown hierarchy node: " + id);
    return it->second;
  }

  std::optional<std::string> parent_of(const std::string& id) const {
    for (const auto& [nid, node] : nodes) {
      if (std::find(node.children.begin(), node.children.end(), id) != node.children.end()) {
        return nid;
      }
    }
    return std::nullopt;
  }

  std::vector<std::string> leaf_ids() const {
    std::vector<std::string> out;
    for (const auto& [id, node] : nodes) {
      if (node.is_leaf()) out.push_back(id);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  json to_json() const {
    json j;
    j["root"] = root;
    j["nodes"] = json::array();
    for (const auto& [id, node] : nodes) {
      j["nodes"].push_back(json{{"id", node.id},
                                {"label", node.label},
                                {"member_skills", node.member_skills},
                                {"children", node.children},
                                {"score", node.score},
                                {"depth", node.depth}});
    }
    j["vocabulary"] = vocabulary;
    return j;
  }

  static SkillHierarchy from_json(const json& j) {
    SkillHierarchy h;
    h.root = j.at("root").get<std::string>();
    for (const auto& nj : j.at("nodes")) {
      SkillNode n;
      n.id = nj.at("id").get<std::string>();
      n.label = nj.at("label").get<std::string>();
      n.member_skills = nj.at("member_skills").get<std::vector<std::string>>();
      n.children = nj.at("children").get<std::vector<std::string>>();
      n.score = nj.at("score").get<double>();
      n.depth = nj.at("depth").get<int>();
      h.nodes[n.id] = std::move(n);
    }
    h.vocabulary = j.at("vocabulary").get<std::map<std::string, std::string>>();
    return h;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write hierarchy file: " + path);
    out << to_json().dump(2) << "\n";
  }

  static SkillHierarchy load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open hierarchy file: " + path);
    return from_json(json::parse(in));
  }
};

// Structural invariants: single root, acyclic parent links, leaf iff
// member_skills non-empty, internal scores equal child sums within tol,
// every vocabulary skill in exactly one leaf.
inline void validate_hierarchy(const SkillHierarchy& h, double tol = 1e-9) {
  if (!h.nodes.count(h.root)) throw Error("hierarchy: root missing");
  std::map<std::string, int> indeg;
  for (const auto& [id, node] : h.nodes) {
    if (node.is_leaf() != !node.member_skills.empty()) {
      throw Error("hierarchy: node " + id + " violates leaf/member invariant");
    }
    if (node.score < 0) throw Error("hierarchy: negative score on " + id);
    for (const auto& c : node.children) {
      if (!h.nodes.count(c)) throw Error("hierarchy: dangling child " + c);
      indeg[c]++;
    }
  }
  for (const auto& [id, node] : h.nodes) {
    const int deg = indeg.count(id) ? indeg.at(id) : 0;
    if (id == h.root && deg != 0) throw Error("hierarchy: root has a parent");
    if (id != h.root && deg != 1) throw Error("hierarchy: node " + id + " has " +
                                              std::to_string(deg) + " parents");
  }
  // reachability + child-sum check
  std::set<std::string> seen;
  std::vector<std::string> stack{h.root};
  while (!stack.empty()) {
    std::string id = stack.back();
    stack.pop_back();
    if (!seen.insert(id).second) throw Error("hierarchy: cycle at " + id);
    const SkillNode& node = h.at(id);
    if (!node.is_leaf()) {
      double sum = 0.0;
      for (const auto& c : node.children) {
        sum += h.at(c).score;
        stack.push_back(c);
      }
      if (std::abs(sum - node.score) > tol) {
        throw Error("hierarchy: score of " + id + " differs from child sum");
      }
    }
  }
  if (seen.size() != h.nodes.size()) throw Error("hierarchy: unreachable nodes");
  std::set<std::string> placed;
  for (const auto& [skill, leaf] : h.vocabulary) {
    const SkillNode& node = h.at(leaf);
    if (!node.is_leaf()) throw Error("hierarchy: vocabulary maps " + skill + " to non-leaf");
    if (std::find(node.member_skills.begin(), node.member_skills.end(), skill) ==
        node.member_skills.end()) {
      throw Error("hierarchy: vocabulary skill " + skill + " missing from its leaf");
    }
    if (!placed.insert(skill).second) throw Error("hierarchy: skill placed twice: " + skill);
  }
}

namespace prompts {

inline std::string skill_summary(const std::vector<std::string>& members) {
  std::string p = "Write a short theme label covering these skills.\nSKILLS:\n";
  for (const auto& s : members) p += "- " + s + "\n";
  return p;
}

inline json skill_summary_schema() {
  return json{{"fields", json{{"summary", json{{"type", "string"}}}}}};
}

}  // namespace prompts

namespace detail {

struct HierarchyBuilder {
  EmbeddingProvider& embedder;
  LLMProvider& llm;
  const ClusteringConfig& cfg;
  const Reducer& reducer;
  SkillHierarchy h;
  std::size_t counter = 0;

  std::string next_id() { return "n" + std::to_string(counter++); }

  std::string make_leaf(const std::vector<std::string>& members, int depth) {
    SkillNode node;
    node.id = next_id();
    node.depth = depth;
    node.member_skills = members;
    if (members.size() == 1) {
      node.label = members[0];
    } else {
      std::string label;
      for (const auto& s : members) label += (label.empty() ? "" : ", ") + s;
      node.label = label;
    }
    for (const auto& s : members) h.vocabulary[s] = node.id;
    std::string id = node.id;
    h.nodes[id] = std::move(node);
    return id;
  }

  std::string build(const std::vector<std::string>& members, const Matrix& vectors, int depth) {
    if (static_cast<std::size_t>(depth) > cfg.max_depth) {
      throw Error("build_hierarchy: recursion depth cap exceeded");
    }
    if (members.size() <= std::max<std::size_t>(cfg.leaf_threshold, 1)) {
      return make_leaf(members, depth);
    }
    ClusterOutcome outcome = cluster_embeddings(vectors, cfg, reducer);
    if (outcome.partition.size() < 2) {
      // Unsplittable cluster becomes a leaf regardless of size.
      return make_leaf(members, depth);
    }
    SkillNode node;
    node.id = next_id();
    node.depth = depth;
    for (const auto& block : outcome.partition) {
      std::vector<std::string> sub_members;
      Matrix sub_vectors;
      sub_members.reserve(block.size());
      for (std::size_t idx : block) {
        sub_members.push_back(members[idx]);
        sub_vectors.push_back(vectors[idx]);
      }
      node.children.push_back(build(sub_members, sub_vectors, depth + 1));
    }
    LLMRequest req{prompts::skill_summary(members), prompts::skill_summary_schema(),
                   "skill_summary"};
    node.label = complete_with_retries(llm, req).value.at("summary").get<std::string>();
    std::string id = node.id;
    h.nodes[id] = std::move(node);
    return id;
  }
};

}  // namespace detail

// Recursively cluster skill embeddings into a tree. Clusters at or below
// leaf_threshold become leaves; unsplittable clusters become leaves
// regardless of size.
inline SkillHierarchy build_hierarchy(const std::vector<std::string>& skills,
                                      EmbeddingProvider& embedder, LLMProvider& llm,
                                      const ClusteringConfig& cfg,
                                      const Reducer& reducer = PcaReducer{}) {
  if (skills.empty()) throw PreconditionError("build_hierarchy: no skills");
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (const auto& raw : skills) {
    std::string s = normalize_skill(raw);
    if (s.empty()) throw PreconditionError("build_hierarchy: empty skill name");
    if (seen.insert(s).second) names.push_back(s);
  }
  Matrix vectors;
  vectors.reserve(names.size());
  for (const auto& s : names) vectors.push_back(normalized(embedder.embed(s)));

  detail::HierarchyBuilder builder{embedder, llm, cfg, reducer, {}, 0};
  builder.h.root = builder.build(names, vectors, 0);
  validate_hierarchy(builder.h);
  return builder.h;
}

// Leaf score = fraction of accepted examples whose skill set intersects the
// leaf's member skills; internal score = child sum.
inline SkillHierarchy assign_scores(const SkillHierarchy& h, const Corpus& corpus) {
  std::vector<const DataScienceExample*> accepted = accepted_examples(corpus);
  if (accepted.empty()) throw PreconditionError("assign_scores: no accepted examples");
  for (const auto* ex : accepted) {
    for (const auto& s : ex->skills) {
      if (!h.vocabulary.count(s)) throw Error("assign_scores: unknown skill in corpus: " + s);
    }
  }
  SkillHierarchy out = h;
  for (auto& [id, node] : out.nodes) {
    if (!node.is_leaf()) continue;
    std::set<std::string> members(node.member_skills.begin(), node.member_skills.end());
    std::size_t touched = 0;
    for (const auto* ex : accepted) {
      bool hit = false;
      for (const auto& s : ex->skills) {
        if (members.count(s)) {
          hit = true;
          break;
        }
      }
      touched += hit ? 1 : 0;
    }
    node.score = static_cast<double>(touched) / static_cast<double>(accepted.size());
  }
  // child sums, bottom-up
  std::vector<std::string> order;
  std::vector<std::string> stack{out.root};
  while (!stack.empty()) {
    std::string id = stack.back();
    stack.pop_back();
    order.push_back(id);
    for (const auto& c : out.at(id).children) stack.push_back(c);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    SkillNode& node = out.nodes.at(*it);
    if (node.is_leaf()) continue;
    double sum = 0.0;
    for (const auto& c : node.children) sum += out.at(c).score;
    node.score = sum;
  }
  return out;
}

// Set one node's score and proportionally rescale its siblings so the
// sibling-group total is unchanged; descendants of every rescaled node keep
// their relative proportions.
inline SkillHierarchy adjust_score(const SkillHierarchy& h, const std::string& node_id,
                                   double new_score) {
  if (new_score < 0) throw PreconditionError("adjust_score: negative score");
  const SkillNode& target = h.at(node_id);
  auto parent = h.parent_of(node_id);
  if (!parent) throw PreconditionError("adjust_score: cannot adjust the root");

  const std::vector<std::string>& siblings = h.at(*parent).children;
  double total = 0.0;
  for (const auto& sid : siblings) total += h.at(sid).score;
  const double old_score = target.score;
  if (new_score > total + 1e-12) {
    throw PreconditionError("adjust_score: new score exceeds sibling-group total");
  }
  if (new_score == old_score) return h;
  const double remainder = total - old_score;
  if (remainder <= 0.0 && new_score < total) {
    throw PreconditionError("adjust_score: cannot rescale zero mass");
  }
  if (old_score == 0.0 && new_score > 0.0 && !target.is_leaf()) {
    throw PreconditionError("adjust_score: cannot rescale zero-mass subtree");
  }

  SkillHierarchy out = h;
  auto scale_subtree = [&out](const std::string& id, double factor) {
    std::vector<std::string> stack{id};
    while (!stack.empty()) {
      std::string cur = stack.back();
      stack.pop_back();
      SkillNode& node = out.nodes.at(cur);
      node.score *= factor;
      for (const auto& c : node.children) stack.push_back(c);
    }
  };

  // Target: set exactly, scale descendants by new/old.
  if (old_score > 0.0) {
    const double f = new_score / old_score;
    for (const auto& c : out.at(node_id).children) scale_subtree(c, f);
  }
  out.nodes.at(node_id).score = new_score;

  // Siblings: uniform factor keeps the group total constant.
  if (remainder > 0.0) {
    const double f = (total - new_score) / remainder;
    for (const auto& sid : siblings) {
      if (sid == node_id) continue;
      scale_subtree(sid, f);
    }
  }
  return out;
}

// Draw k distinct leaves without replacement, each draw proportional to the
// remaining leaves' scores; one member skill per drawn leaf, uniform.
inline std::vector<std::string> sample_skills(const SkillHierarchy& h, std::size_t k,
                                              std::mt19937_64& rng) {
  struct Entry {
    const SkillNode* node;
    double score;
  };
  std::vector<Entry> pool;
  for (const auto& id : h.leaf_ids()) {
    const SkillNode& node = h.at(id);
    if (node.score > 0.0) pool.push_back({&node, node.score});
  }
  if (pool.empty()) throw PreconditionError("sample_skills: all leaf scores are zero");
  if (k > pool.size()) {
    throw PreconditionError("sample_skills: k exceeds leaves with positive score");
  }
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t draw = 0; draw < k; ++draw) {
    double total = 0.0;
    for (const auto& e : pool) total += e.score;
    double u = uniform01(rng) * total;
    std::size_t pick = pool.size() - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      acc += pool[i].score;
      if (u < acc) {
        pick = i;
        break;
      }
    }
    const SkillNode* leaf = pool[pick].node;
    const std::size_t member = uniform_index(rng, leaf->member_skills.size());
    out.push_back(leaf->member_skills[member]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

}  // namespace dsorch
