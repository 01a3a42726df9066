#pragma once

// Corpus ingestion and curation: newline-delimited example records are
// loaded, summarized and quality-screened through the LLM port, and skills
// are extracted from the summarized steps. The curated corpus is the input
// to skill discovery, benchmark synthesis, and embedding training.

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dsorch/common.hpp"
#include "dsorch/providers.hpp"

namespace dsorch {

enum class Modality { table, text, image };

inline std::string to_string(Modality m) {
  switch (m) {
    case Modality::table: return "table";
    case Modality::text: return "text";
    case Modality::image: return "image";
  }
  return "?";
}

inline Modality modality_from_string(const std::string& s) {
  if (s == "table") return Modality::table;
  if (s == "text") return Modality::text;
  if (s == "image") return Modality::image;
  throw Error("unknown modality: " + s);
}

struct DatasetRef {
  std::string id;
  std::string name;
  Modality modality = Modality::table;
  std::string metadata;                  // free-text description
  std::vector<std::string> columns;      // optional column descriptions
  std::string sample;                    // bounded excerpt (rows or characters)
  std::int64_t size_hint = 0;            // row or byte count
  std::string location;                  // content path within the store

  json to_json() const {
    json j;
    j["id"] = id;
    j["name"] = name;
    j["modality"] = to_string(modality);
    j["metadata"] = metadata;
    if (!columns.empty()) j["columns"] = columns;
    if (!sample.empty()) j["sample"] = sample;
    j["size_hint"] = size_hint;
    if (!location.empty()) j["location"] = location;
    return j;
  }

  static DatasetRef from_json(const json& j) {
    DatasetRef d;
    d.id = j.at("id").get<std::string>();
    d.name = j.value("name", d.id);
    d.modality = modality_from_string(j.value("modality", "table"));
    d.metadata = j.value("metadata", "");
    if (j.contains("columns")) d.columns = j.at("columns").get<std::vector<std::string>>();
    d.sample = j.value("sample", "");
    d.size_hint = j.value("size_hint", std::int64_t{0});
    d.location = j.value("location", "");
    return d;
  }
};

enum class Quality { unscreened, accepted, rejected };

inline std::string to_string(Quality q) {
  switch (q) {
    case Quality::unscreened: return "unscreened";
    case Quality::accepted: return "accepted";
    case Quality::rejected: return "rejected";
  }
  return "?";
}

inline Quality quality_from_string(const std::string& s) {
  if (s == "unscreened") return Quality::unscreened;
  if (s == "accepted") return Quality::accepted;
  if (s == "rejected") return Quality::rejected;
  throw Error("unknown quality: " + s);
}

struct DataScienceExample {
  std::string id;
  std::string task;
  std::vector<DatasetRef> dataset_refs;
  std::vector<std::string> solution_steps;
  std::vector<std::string> skills;  // normalized
  Quality quality = Quality::unscreened;

  json to_json() const {
    json j;
    j["id"] = id;
    j["task"] = task;
    j["datasets"] = json::array();
    for (const auto& d : dataset_refs) j["datasets"].push_back(d.to_json());
    j["solution"] = solution_steps;
    if (!skills.empty()) j["skills"] = skills;
    j["quality"] = to_string(quality);
    return j;
  }

  static DataScienceExample from_json(const json& j) {
    DataScienceExample ex;
    if (!j.contains("id")) throw Error("missing field id");
    if (!j.contains("task")) throw Error("missing field task");
    ex.id = j.at("id").get<std::string>();
    ex.task = j.at("task").get<std::string>();
    for (const auto& d : j.value("datasets", json::array())) {
      ex.dataset_refs.push_back(DatasetRef::from_json(d));
    }
    if (j.contains("solution")) {
      const json& sol = j.at("solution");
      if (sol.is_string()) {
        ex.solution_steps.push_back(sol.get<std::string>());
      } else {
        ex.solution_steps = sol.get<std::vector<std::string>>();
      }
    }
    for (const auto& s : j.value("skills", std::vector<std::string>{})) {
      ex.skills.push_back(normalize_skill(s));
    }
    ex.quality = quality_from_string(j.value("quality", "unscreened"));
    return ex;
  }
};

using Corpus = std::vector<DataScienceExample>;

// ---------------------------------------------------------------------------
// Ingestion and persistence

// Raw ingestion: one example record per line; all examples enter unscreened.
inline Corpus ingest_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file: " + path);
  Corpus corpus;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error("line " + std::to_string(lineno) + ": invalid record");
    }
    DataScienceExample ex;
    try {
      ex = DataScienceExample::from_json(j);
    } catch (const std::exception& e) {
      throw Error("line " + std::to_string(lineno) + ": " + e.what());
    }
    ex.quality = Quality::unscreened;
    ex.skills.clear();
    if (!ids.insert(ex.id).second) {
      throw Error("line " + std::to_string(lineno) + ": duplicate id " + ex.id);
    }
    corpus.push_back(std::move(ex));
  }
  return corpus;
}

// Load a previously saved (possibly curated) corpus, preserving quality and
// skills. Same per-line error reporting as ingest_corpus.
inline Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file: " + path);
  Corpus corpus;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error("line " + std::to_string(lineno) + ": invalid record");
    DataScienceExample ex;
    try {
      ex = DataScienceExample::from_json(j);
    } catch (const std::exception& e) {
      throw Error("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!ids.insert(ex.id).second) {
      throw Error("line " + std::to_string(lineno) + ": duplicate id " + ex.id);
    }
    corpus.push_back(std::move(ex));
  }
  return corpus;
}

// Append-only single-writer store. Dataset samples above the inline budget
// are spilled to <content_dir>/<dataset_id> and referenced by location.
inline void save_corpus(const Corpus& corpus, const std::string& path,
                        const std::string& content_dir = "", std::size_t inline_sample_budget = 4096) {
  namespace fs = std::filesystem;
  if (!content_dir.empty()) fs::create_directories(content_dir);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write corpus file: " + path);
  for (const auto& ex : corpus) {
    DataScienceExample copy = ex;
    for (auto& d : copy.dataset_refs) {
      if (!content_dir.empty() && d.sample.size() > inline_sample_budget) {
        fs::path p = fs::path(content_dir) / d.id;
        std::ofstream blob(p);
        blob << d.sample;
        d.location = p.string();
        d.sample = d.sample.substr(0, inline_sample_budget);
      }
    }
    out << copy.to_json().dump() << "\n";
  }
}

// ---------------------------------------------------------------------------
// Curation

namespace prompts {

inline std::string curate(const DataScienceExample& ex) {
  std::string solution;
  for (const auto& s : ex.solution_steps) solution += s + "\n";
  return "Summarize the solution as a sequence of concise steps and judge whether the example "
         "is complete enough to keep.\nTASK: " + ex.task + "\nSOLUTION:\n" + solution;
}

inline json curate_schema() {
  return json{{"fields",
               json{{"verdict", json{{"type", "string"}}},
                    {"steps", json{{"type", "array"}, {"items", "string"}}}}}};
}

inline std::string extract_skills(const DataScienceExample& ex) {
  std::string steps;
  for (const auto& s : ex.solution_steps) steps += s + "\n";
  return "List the atomic data skills applied by these solution steps.\nSTEPS:\n" + steps;
}

inline json extract_skills_schema() {
  return json{{"fields", json{{"skills", json{{"type", "array"}, {"items", "string"}}}}}};
}

}  // namespace prompts

// Summarize the solution into steps and screen quality. Rejected examples
// keep empty skills.
inline DataScienceExample curate_example(const DataScienceExample& ex, LLMProvider& llm) {
  if (ex.quality != Quality::unscreened) {
    throw PreconditionError("curate_example: example " + ex.id + " is already " +
                            to_string(ex.quality));
  }
  LLMRequest req{prompts::curate(ex), prompts::curate_schema(), "curate_example"};
  LLMResponse resp = complete_with_retries(llm, req);
  const std::string verdict = resp.value.at("verdict").get<std::string>();
  DataScienceExample out = ex;
  out.solution_steps = resp.value.at("steps").get<std::vector<std::string>>();
  if (verdict == "accept") {
    if (out.solution_steps.empty()) {
      throw ProviderError("curate_example: accepted verdict without steps [prompt " +
                          request_fingerprint(req) + "]");
    }
    out.quality = Quality::accepted;
  } else if (verdict == "reject") {
    out.quality = Quality::rejected;
    out.skills.clear();
  } else {
    throw ProviderError("curate_example: unknown verdict '" + verdict + "' [prompt " +
                        request_fingerprint(req) + "]");
  }
  return out;
}

// Extract normalized skill names from the summarized steps. Throws
// "no skills extracted" when the provider returns nothing usable; callers
// demote such examples to rejected.
inline std::vector<std::string> extract_skills(const DataScienceExample& ex, LLMProvider& llm) {
  if (ex.quality != Quality::accepted) {
    throw PreconditionError("extract_skills: example " + ex.id + " is not accepted");
  }
  LLMRequest req{prompts::extract_skills(ex), prompts::extract_skills_schema(), "extract_skills"};
  LLMResponse resp = complete_with_retries(llm, req);
  std::vector<std::string> skills;
  std::set<std::string> seen;
  for (const auto& raw : resp.value.at("skills")) {
    std::string s = normalize_skill(raw.get<std::string>());
    if (!s.empty() && seen.insert(s).second) skills.push_back(s);
  }
  if (skills.empty()) throw Error("no skills extracted");
  return skills;
}

// Full curation pass: summarize, screen, extract. Examples whose extraction
// comes back empty are demoted to rejected. Pure function of (corpus,
// provider responses); with a cassette the output is byte-stable.
inline Corpus curate_corpus(const Corpus& corpus, LLMProvider& llm) {
  Corpus out;
  out.reserve(corpus.size());
  for (const auto& ex : corpus) {
    DataScienceExample cur = ex.quality == Quality::unscreened ? curate_example(ex, llm) : ex;
    if (cur.quality == Quality::accepted && cur.skills.empty()) {
      try {
        cur.skills = extract_skills(cur, llm);
      } catch (const Error&) {
        cur.quality = Quality::rejected;
        cur.skills.clear();
      }
    }
    out.push_back(std::move(cur));
  }
  return out;
}

inline std::vector<const DataScienceExample*> accepted_examples(const Corpus& corpus) {
  std::vector<const DataScienceExample*> out;
  for (const auto& ex : corpus) {
    if (ex.quality == Quality::accepted) out.push_back(&ex);
  }
  return out;
}

// Union of accepted-example skills, sorted.
inline std::vector<std::string> skill_vocabulary(const Corpus& corpus) {
  std::set<std::string> vocab;
  for (const auto& ex : corpus) {
    if (ex.quality != Quality::accepted) continue;
    for (const auto& s : ex.skills) vocab.insert(s);
  }
  return {vocab.begin(), vocab.end()};
}

}  // namespace dsorch
