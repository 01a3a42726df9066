#pragma once

// Deterministic scripted LLM backend. Every purpose used by the library is
// answered by a pure function of the prompt text, driven by explicit
// bracketed markers in fixture texts ([skill: x], [subtask: ...], [merge:
// a+b], ...). It backs the `sim` provider mode, and record-mode cassettes
// produced against it give the replay suites their content.

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dsorch/providers.hpp"

namespace dsorch {

namespace simdetail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// All occurrences of "[<key>: payload]" in order of appearance.
inline std::vector<std::string> markers(const std::string& text, const std::string& key) {
  std::vector<std::string> out;
  const std::string open = "[" + key + ":";
  std::size_t pos = 0;
  while ((pos = text.find(open, pos)) != std::string::npos) {
    std::size_t end = text.find(']', pos);
    if (end == std::string::npos) break;
    out.push_back(trim(text.substr(pos + open.size(), end - pos - open.size())));
    pos = end + 1;
  }
  return out;
}

// Section body: text between "<name>:" and the next ALL-CAPS section header
// (or end of prompt).
inline std::string section(const std::string& text, const std::string& name) {
  const std::string header = name + ":";
  std::size_t pos = text.find(header);
  if (pos == std::string::npos) return "";
  pos += header.size();
  std::size_t end = text.size();
  for (std::size_t i = pos; i + 1 < text.size(); ++i) {
    if (text[i] == '\n' && std::isupper(static_cast<unsigned char>(text[i + 1]))) {
      std::size_t colon = text.find(':', i + 1);
      std::size_t nl = text.find('\n', i + 1);
      if (colon != std::string::npos && (nl == std::string::npos || colon < nl)) {
        bool caps = true;
        for (std::size_t j = i + 1; j < colon; ++j) {
          unsigned char c = static_cast<unsigned char>(text[j]);
          if (!std::isupper(c) && c != '_' && c != ' ') {
            caps = false;
            break;
          }
        }
        if (caps) {
          end = i;
          break;
        }
      }
    }
  }
  return trim(text.substr(pos, end - pos));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline std::set<std::string> word_set(const std::string& s) {
  std::set<std::string> out;
  std::string w;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!w.empty()) {
      out.insert(w);
      w.clear();
    }
  }
  if (!w.empty()) out.insert(w);
  return out;
}

}  // namespace simdetail

class SimLLM final : public LLMProvider {
 public:
  LLMResponse complete(const LLMRequest& req) override {
    LLMResponse resp;
    resp.value = dispatch(req);
    resp.prompt_tokens = static_cast<std::int64_t>(req.prompt.size() / 4);
    resp.completion_tokens = static_cast<std::int64_t>(resp.value.dump().size() / 4);
    if (auto err = validate_schema(req.schema, resp.value)) {
      throw SchemaViolation("sim provider produced invalid output (" + *err + ") for purpose " +
                            req.purpose);
    }
    return resp;
  }

 private:
  json dispatch(const LLMRequest& req) const {
    using namespace simdetail;
    const std::string& p = req.prompt;
    const std::string& purpose = req.purpose;

    if (purpose == "curate_example") {
      std::string solution = section(p, "SOLUTION");
      json out;
      if (solution.find("TODO") != std::string::npos || trim(solution).size() < 20) {
        out["verdict"] = "reject";
        out["steps"] = json::array();
        return out;
      }
      json steps = json::array();
      for (const auto& line : split(solution, '\n')) {
        if (line.empty()) continue;
        steps.push_back(line);
        if (steps.size() == 12) break;
      }
      out["verdict"] = steps.empty() ? "reject" : "accept";
      out["steps"] = steps;
      return out;
    }

    if (purpose == "extract_skills") {
      json skills = json::array();
      std::set<std::string> seen;
      for (const auto& m : markers(p, "skill")) {
        std::string s = normalize_skill(m);
        if (!s.empty() && seen.insert(s).second) skills.push_back(s);
      }
      return json{{"skills", skills}};
    }

    if (purpose == "skill_summary") {
      std::vector<std::string> names;
      for (const auto& line : split(section(p, "SKILLS"), '\n')) {
        if (line.rfind("- ", 0) == 0) names.push_back(line.substr(2));
      }
      std::sort(names.begin(), names.end());
      std::string label = names.empty() ? "skills" : names.front();
      if (names.size() > 1) label += " / " + names.back();
      return json{{"summary", label}};
    }

    if (purpose == "synthesize_case") {
      std::vector<std::string> skills;
      for (const auto& line : split(section(p, "SKILLS"), '\n')) {
        if (line.rfind("- ", 0) == 0) skills.push_back(line.substr(2));
      }
      json ids = json::array();
      std::set<std::string> seen;
      for (const auto& m : markers(p, "dataset")) {
        if (seen.insert(m).second) ids.push_back(m);
        if (ids.size() == 2) break;
      }
      std::string task = "Apply";
      for (const auto& s : skills) task += " [skill: " + s + "]";
      task += " over the referenced data and report /checks entries.";
      json rules = json::array();
      for (std::size_t i = 0; i < skills.size(); ++i) {
        rules.push_back(json{{"kind", "predicate"},
                             {"selector", "/checks/" + std::to_string(i)},
                             {"comparator", "eq"},
                             {"expected", true}});
      }
      return json{{"task", task}, {"dataset_ids", ids}, {"rules", rules}};
    }

    if (purpose == "judge_rule") {
      std::string rubric = section(p, "RUBRIC");
      std::string result = section(p, "RESULT");
      std::size_t q1 = rubric.find('"');
      std::size_t q2 = q1 == std::string::npos ? std::string::npos : rubric.find('"', q1 + 1);
      bool verdict;
      if (q2 != std::string::npos) {
        verdict = result.find(rubric.substr(q1 + 1, q2 - q1 - 1)) != std::string::npos;
      } else {
        verdict = (fnv1a64(rubric + result) & 1) == 0;
      }
      return json{{"verdict", verdict}};
    }

    if (purpose == "score_document") {
      auto task_words = word_set(section(p, "TASK"));
      auto doc_words = word_set(section(p, "DOCUMENT"));
      std::size_t inter = 0;
      for (const auto& w : task_words) inter += doc_words.count(w);
      double denom = static_cast<double>(task_words.size() + doc_words.size() - inter);
      double score = denom > 0 ? 10.0 * (2.0 * static_cast<double>(inter)) / (denom + inter) : 0.0;
      score = std::min(10.0, std::max(0.0, score));
      return json{{"score", score}, {"rationale", "lexical overlap with document artifacts"}};
    }

    if (purpose == "judge_sample_run") {
      json scores = json::object();
      for (const auto& block : split(section(p, "RUNS"), '\n')) {
        // lines look like: "agent <id> quality <q>" or "agent <id> failed"
        std::istringstream is(block);
        std::string kw, id, field;
        is >> kw >> id >> field;
        if (kw != "agent" || id.empty()) continue;
        if (field == "quality") {
          double q = 0.0;
          is >> q;
          scores[id] = std::min(10.0, std::max(0.0, q * 10.0));
        } else {
          scores[id] = 0.0;
        }
      }
      return json{{"scores", scores}};
    }

    if (purpose == "decompose_task") {
      return parse_plan_markers(p);
    }

    if (purpose == "check_plan") {
      bool bad = p.find("[plan-incomplete]") != std::string::npos;
      return json{{"complete", !bad},
                  {"non_redundant", true},
                  {"notes", bad ? "fixture marked incomplete" : "ok"}};
    }

    if (purpose == "mock_inputs") {
      json descs = json::array();
      for (const auto& line : split(section(p, "DEPENDENCIES"), '\n')) {
        if (line.rfind("DEP ", 0) != 0) continue;
        std::size_t colon = line.find(':');
        std::string id = trim(line.substr(4, colon == std::string::npos ? std::string::npos
                                                                        : colon - 4));
        descs.push_back("mock dataset: intermediate output of " + id);
      }
      return json{{"descriptions", descs}};
    }

    if (purpose == "split_subtask") {
      std::string id = section(p, "ID");
      std::string desc = section(p, "DESCRIPTION");
      auto tags = markers(p, "tag");
      auto halves = markers(desc, "split");
      json subtasks = json::array();
      json edges = json::array();
      if (halves.size() >= 2) {
        std::string prev;
        for (std::size_t i = 0; i < halves.size(); ++i) {
          auto fields = split(halves[i], '|');
          std::string sid = fields[0];
          json st{{"id", sid},
                  {"description", fields.size() > 1 ? fields[1] : halves[i]},
                  {"dataset_refs", json::array()},
                  {"tags", json::array()}};
          for (const auto& t : markers(fields.size() > 1 ? fields[1] : halves[i], "tag")) {
            st["tags"].push_back(t);
          }
          subtasks.push_back(st);
          if (!prev.empty()) edges.push_back(json::array({prev, sid}));
          prev = sid;
        }
      } else {
        std::size_t mid = (tags.size() + 1) / 2;
        json ta = json::array(), tb = json::array();
        for (std::size_t i = 0; i < tags.size(); ++i) (i < mid ? ta : tb).push_back(tags[i]);
        subtasks.push_back(json{{"id", id + "_a"},
                                {"description", "first stage of: " + desc},
                                {"dataset_refs", json::array()},
                                {"tags", ta}});
        subtasks.push_back(json{{"id", id + "_b"},
                                {"description", "second stage of: " + desc},
                                {"dataset_refs", json::array()},
                                {"tags", tb}});
        edges.push_back(json::array({id + "_a", id + "_b"}));
      }
      return json{{"subtasks", subtasks}, {"edges", edges}};
    }

    if (purpose == "nominate_merges") {
      json groups = json::array();
      for (const auto& m : markers(p, "merge")) {
        json group = json::array();
        for (const auto& id : simdetail::split(m, '+')) {
          if (!id.empty()) group.push_back(id);
        }
        if (!group.empty()) groups.push_back(group);
      }
      return json{{"groups", groups}};
    }

    if (purpose == "consolidate_subtasks") {
      std::vector<std::string> ids;
      std::string desc = "merged:";
      std::set<std::string> tagset;
      for (const auto& line : split(section(p, "NODES"), '\n')) {
        if (line.rfind("NODE ", 0) != 0) continue;
        std::size_t colon = line.find(':');
        ids.push_back(trim(line.substr(5, colon - 5)));
        desc += " " + trim(line.substr(colon + 1));
        for (const auto& t : markers(line, "tag")) tagset.insert(t);
      }
      std::string id;
      for (const auto& i : ids) id += (id.empty() ? "" : "+") + i;
      json tags = json::array();
      for (const auto& t : tagset) tags.push_back(t);
      return json{{"id", id}, {"description", desc}, {"tags", tags},
                  {"dataset_refs", json::array()}};
    }

    if (purpose == "verify_subtask") {
      std::string result = section(p, "RESULT");
      if (result.find("fail_cause") != std::string::npos) {
        std::string cause = "unknown";
        for (const char* c : {"ambiguous_description", "missing_input", "malformed_intermediate",
                              "wrong_agent"}) {
          if (result.find(c) != std::string::npos) {
            cause = c;
            break;
          }
        }
        return json{{"pass", false}, {"cause", cause}, {"detail", "result reports failure"}};
      }
      if (result.find("INVALID") != std::string::npos) {
        return json{{"pass", false},
                    {"cause", "malformed_intermediate"},
                    {"detail", "result contains invalid payload"}};
      }
      return json{{"pass", true}, {"cause", ""}, {"detail", ""}};
    }

    if (purpose == "rephrase_subtask") {
      return json{{"description", "rephrased: " + section(p, "DESCRIPTION")}};
    }

    if (purpose == "supplement_inputs") {
      json refs = json::array();
      for (const auto& m : markers(p, "add")) refs.push_back(m);
      return json{{"dataset_refs", refs}};
    }

    if (purpose == "reformat_result") {
      return json{{"value", json{{"reformatted", true}, {"note", "normalized representation"}}}};
    }

    if (purpose == "dataset_metadata") {
      std::string id = section(p, "SUBTASK");
      std::string proc = section(p, "PROCESS");
      return json{{"description",
                   "intermediate result of " + id + (proc.empty() ? "" : " via " + proc)}};
    }

    throw ProviderError("sim provider has no handler for purpose: " + purpose);
  }

  // [subtask: id | description | deps=a,b | data=x,y] markers -> plan JSON.
  json parse_plan_markers(const std::string& p) const {
    using namespace simdetail;
    json subtasks = json::array();
    json edges = json::array();
    auto ms = markers(p, "subtask");
    if (ms.empty()) {
      std::string task = section(p, "TASK");
      json tags = json::array();
      for (const auto& t : markers(task.empty() ? p : task, "skill")) tags.push_back(t);
      json data = json::array();
      for (const auto& d : markers(p, "available")) data.push_back(d);
      subtasks.push_back(json{{"id", "s1"},
                              {"description", task.empty() ? "solve the task" : task},
                              {"dataset_refs", data},
                              {"tags", tags}});
      return json{{"subtasks", subtasks}, {"edges", edges}};
    }
    for (const auto& m : ms) {
      auto fields = split(m, '|');
      json st;
      st["id"] = fields.empty() ? "" : fields[0];
      st["description"] = fields.size() > 1 ? fields[1] : "";
      st["dataset_refs"] = json::array();
      st["tags"] = json::array();
      for (const auto& t : markers(st["description"].get<std::string>(), "tag")) {
        st["tags"].push_back(t);
      }
      for (std::size_t i = 2; i < fields.size(); ++i) {
        if (fields[i].rfind("deps=", 0) == 0) {
          for (const auto& d : split(fields[i].substr(5), ',')) {
            if (!d.empty()) edges.push_back(json::array({d, st["id"].get<std::string>()}));
          }
        } else if (fields[i].rfind("data=", 0) == 0) {
          for (const auto& d : split(fields[i].substr(5), ',')) {
            if (!d.empty()) st["dataset_refs"].push_back(d);
          }
        } else if (fields[i].rfind("tags=", 0) == 0) {
          for (const auto& t : split(fields[i].substr(5), ',')) {
            if (!t.empty()) st["tags"].push_back(t);
          }
        }
      }
      subtasks.push_back(st);
    }
    return json{{"subtasks", subtasks}, {"edges", edges}};
  }
};

}  // namespace dsorch
