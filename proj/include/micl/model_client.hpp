#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "micl/error.hpp"
#include "micl/prompt.hpp"
#include "micl/task.hpp"

namespace micl {

enum class Role { Policy, Evaluator };

inline std::string_view role_name(Role r) {
  return r == Role::Policy ? "policy" : "evaluator";
}

struct GenerationRequest {
  RenderedPrompt prompt;
  double temperature = 1.0;
  int num_samples = 1;
  int max_output_length = 1024;
  Role role = Role::Policy;

  void validate() const {
    if (num_samples < 1)
      raise(ErrorCode::ValidationError, "num_samples must be >= 1");
    if (temperature < 0.0)
      raise(ErrorCode::ValidationError, "temperature must be >= 0");
    if (max_output_length < 1)
      raise(ErrorCode::ValidationError, "max_output_length must be >= 1");
  }
};

struct GenerationResponse {
  std::vector<std::string> texts;  // exactly num_samples entries
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;
  std::string model_id;
};

class ModelClient {
 public:
  virtual ~ModelClient() = default;
  virtual GenerationResponse generate(const GenerationRequest& req) = 0;
};

// ---------------------------------------------------------------------------
// Scripted mock: entries are consumed strictly in file order, keyed by
// position rather than prompt content. A role mismatch or exhausted script
// fails hard; silent desynchronization would poison golden transcripts.
// ---------------------------------------------------------------------------

struct ScriptEntry {
  int step = 0;
  Role role = Role::Policy;
  std::vector<std::string> texts;
};

class ScriptedModel : public ModelClient {
 public:
  static ScriptedModel from_file(const std::string& path) {
    if (!std::filesystem::exists(path))
      raise(ErrorCode::FileMissing, "mock script not found: " + path);
    std::ifstream in(path);
    if (!in) raise(ErrorCode::IoError, "cannot open " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      raise(ErrorCode::ParseError, path + ": " + e.what());
    }
    return from_json(j, path);
  }

  static ScriptedModel from_json(const nlohmann::json& j, const std::string& where = "<memory>") {
    if (!j.is_array()) raise(ErrorCode::ParseError, where + ": script must be a JSON array");
    ScriptedModel m;
    for (const auto& e : j) {
      ScriptEntry entry;
      try {
        entry.step = e.at("step").get<int>();
        const std::string role = e.at("role").get<std::string>();
        if (role == "policy")
          entry.role = Role::Policy;
        else if (role == "evaluator")
          entry.role = Role::Evaluator;
        else
          raise(ErrorCode::ParseError, where + ": unknown role '" + role + "'");
        entry.texts = e.at("texts").get<std::vector<std::string>>();
      } catch (const nlohmann::json::exception& ex) {
        raise(ErrorCode::ParseError, where + ": " + ex.what());
      }
      m.entries_.push_back(std::move(entry));
    }
    return m;
  }

  GenerationResponse generate(const GenerationRequest& req) override {
    req.validate();
    if (cursor_ >= entries_.size())
      raise(ErrorCode::ScriptExhausted,
            "script exhausted after " + std::to_string(entries_.size()) + " entries");
    const ScriptEntry& e = entries_[cursor_];
    if (e.role != req.role)
      raise(ErrorCode::ScriptMismatch,
            "script entry " + std::to_string(cursor_) + " (step " +
                std::to_string(e.step) + ") has role " + std::string(role_name(e.role)) +
                ", request asked for " + std::string(role_name(req.role)));
    if (static_cast<int>(e.texts.size()) != req.num_samples)
      raise(ErrorCode::ScriptMismatch,
            "script entry " + std::to_string(cursor_) + " provides " +
                std::to_string(e.texts.size()) + " texts, request wants " +
                std::to_string(req.num_samples));
    ++cursor_;
    GenerationResponse resp;
    resp.texts = e.texts;
    resp.model_id = "mock-script";
    return resp;
  }

  std::size_t remaining() const { return entries_.size() - cursor_; }

 private:
  std::vector<ScriptEntry> entries_;
  std::size_t cursor_ = 0;
};

// ---------------------------------------------------------------------------
// Rule-based mock policies for offline evaluation.
// ---------------------------------------------------------------------------

// Votes over the exemplar labels it reads back out of the rendered prompt
// (exemplar_segment template v1 format). Plain majority with nearest-exemplar
// tie-break; switches to similarity-weighted voting when the prompt carries a
// heuristic containing the literal phrase "weight votes by exemplar
// similarity", which is how bank content can change this policy's behavior.
class MajorityExemplarPolicy : public ModelClient {
 public:
  GenerationResponse generate(const GenerationRequest& req) override {
    req.validate();
    struct Seen {
      std::string label;
      double similarity;
    };
    std::vector<Seen> exemplars;
    std::istringstream lines(req.prompt.text);
    std::string line;
    while (std::getline(lines, line)) {
      const std::size_t lab = line.find("(label: ");
      const std::size_t sim = line.find(", similarity: ");
      if (lab == std::string::npos || sim == std::string::npos || sim <= lab) continue;
      const std::size_t lab_start = lab + 8;
      std::string label = line.substr(lab_start, sim - lab_start);
      const std::size_t sim_start = sim + 14;
      const std::size_t sim_end = line.find(')', sim_start);
      if (sim_end == std::string::npos) continue;
      double similarity = 0.0;
      try {
        similarity = std::stod(line.substr(sim_start, sim_end - sim_start));
      } catch (...) {
        continue;
      }
      exemplars.push_back({std::move(label), similarity});
    }

    std::string answer;
    if (exemplars.empty()) {
      answer = "unknown";
    } else {
      const bool weighted =
          TaskSpec::lowercase(req.prompt.text)
              .find("weight votes by exemplar similarity") != std::string::npos;
      std::map<std::string, double> score;
      std::map<std::string, std::size_t> first_rank;
      for (std::size_t i = 0; i < exemplars.size(); ++i) {
        const auto& e = exemplars[i];
        score[e.label] += weighted ? e.similarity : 1.0;
        if (!first_rank.count(e.label)) first_rank[e.label] = i;
      }
      double best = -1e300;
      std::size_t best_rank = exemplars.size();
      for (const auto& [label, s] : score) {
        const std::size_t r = first_rank[label];
        if (s > best || (s == best && r < best_rank)) {
          best = s;
          best_rank = r;
          answer = label;
        }
      }
    }

    GenerationResponse resp;
    resp.model_id = "mock-majority";
    for (int i = 0; i < req.num_samples; ++i)
      resp.texts.push_back("Compared the query against " +
                           std::to_string(exemplars.size()) +
                           " exemplars.\nANSWER: " + answer);
    return resp;
  }
};

// Always answers the true class; for sanity checks of the accuracy plumbing.
// Looks the query attachment up in an image_ref -> label-word map.
class OracleLabelPolicy : public ModelClient {
 public:
  explicit OracleLabelPolicy(std::map<std::string, std::string> ref_to_label)
      : ref_to_label_(std::move(ref_to_label)) {}

  GenerationResponse generate(const GenerationRequest& req) override {
    req.validate();
    if (req.prompt.attachments.empty())
      raise(ErrorCode::AttachmentUnresolvable, "oracle policy needs the query attachment");
    const auto it = ref_to_label_.find(req.prompt.attachments.front());
    if (it == ref_to_label_.end())
      raise(ErrorCode::UnknownId,
            "oracle policy has no label for '" + req.prompt.attachments.front() + "'");
    GenerationResponse resp;
    resp.model_id = "mock-oracle";
    for (int i = 0; i < req.num_samples; ++i)
      resp.texts.push_back("ANSWER: " + it->second);
    return resp;
  }

 private:
  std::map<std::string, std::string> ref_to_label_;
};

// ---------------------------------------------------------------------------
// Answer / score / action parsers.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  lines.push_back(cur);
  return lines;
}

// Last line whose trimmed form starts with the given keyword (ASCII
// case-insensitive) followed by ':'. Returns the remainder after the colon.
inline bool find_keyword_line(const std::string& text, const std::string& keyword,
                              std::string* rest) {
  const std::vector<std::string> lines = split_lines(text);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    const std::string t = trim(*it);
    if (t.size() <= keyword.size() + 1) continue;
    if (TaskSpec::lowercase(t.substr(0, keyword.size())) != TaskSpec::lowercase(keyword))
      continue;
    if (t[keyword.size()] != ':') continue;
    *rest = trim(t.substr(keyword.size() + 1));
    return true;
  }
  return false;
}

}  // namespace detail

// Maps a model reply to a class index. Grammar (also in the README):
//   1. the last line of the form "ANSWER: <x>" wins; <x> must match a class
//      name exactly (case-insensitive) or the reply is Unparseable;
//   2. with no ANSWER line, the final non-empty line must contain exactly one
//      distinct class name as a whole word.
inline int parse_answer(const std::string& text, const TaskSpec& task) {
  if (task.num_classes() < 1)
    raise(ErrorCode::ValidationError, "task has no classes");
  std::string candidate;
  if (detail::find_keyword_line(text, "ANSWER", &candidate)) {
    const int idx = task.class_index(candidate);
    if (idx < 0)
      raise(ErrorCode::Unparseable, "'" + candidate + "' is not a class name");
    return idx;
  }
  const std::vector<std::string> lines = detail::split_lines(text);
  std::string final_line;
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    if (!detail::trim(*it).empty()) {
      final_line = *it;
      break;
    }
  }
  if (final_line.empty()) raise(ErrorCode::Unparseable, "empty reply");
  int found = -1;
  int distinct = 0;
  for (int c = 0; c < task.num_classes(); ++c) {
    if (count_label_occurrences(final_line, task.class_name(c)) > 0) {
      ++distinct;
      found = c;
    }
  }
  if (distinct != 1)
    raise(ErrorCode::Unparseable,
          "final line names " + std::to_string(distinct) + " classes: " + final_line);
  return found;
}

inline std::string format_scores_line(const std::vector<int>& scores) {
  std::string out = "SCORES: ";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(scores[i]);
  }
  return out;
}

// Parses "SCORES: c1,...,cn" into n binary verdicts, n = |criteria|.
// Decimal syntax is accepted by the grammar but any value outside {0,1} is
// OutOfRange, which keeps graded scoring available without changing parsers.
inline std::vector<int> parse_scores(const std::string& text,
                                     const std::vector<std::string>& criteria) {
  if (criteria.empty()) raise(ErrorCode::ValidationError, "criteria set is empty");
  std::string rest;
  if (!detail::find_keyword_line(text, "SCORES", &rest))
    raise(ErrorCode::Unparseable, "no SCORES line found");
  std::vector<std::string> parts;
  std::string cur;
  for (char c : rest) {
    if (c == ',') {
      parts.push_back(detail::trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(detail::trim(cur));
  if (parts.size() != criteria.size())
    raise(ErrorCode::Unparseable, "expected " + std::to_string(criteria.size()) +
                                      " scores, found " + std::to_string(parts.size()));
  std::vector<int> scores;
  scores.reserve(parts.size());
  for (const auto& p : parts) {
    if (p.empty()) raise(ErrorCode::Unparseable, "empty score value");
    char* end = nullptr;
    const double v = std::strtod(p.c_str(), &end);
    if (end != p.c_str() + p.size())
      raise(ErrorCode::Unparseable, "'" + p + "' is not a number");
    if (v != 0.0 && v != 1.0)
      raise(ErrorCode::OutOfRange, "score '" + p + "' outside {0,1}");
    scores.push_back(static_cast<int>(v));
  }
  return scores;
}

// Parses "ACTION: Add | Keep | Delete(<id>) | Modify(<id>)", optionally
// followed by "TEXT: <text>" on the same or a later line. Keywords are
// capitalized exactly as in the grammar. Targets are validated against the
// bank; Add against a full bank surfaces AddWhenFull so the engine can
// re-prompt rather than have the store guess an eviction.
inline UpdateAction parse_action(const std::string& text, const ExperienceBank& bank) {
  std::string rest;
  if (!detail::find_keyword_line(text, "ACTION", &rest))
    raise(ErrorCode::Unparseable, "no ACTION line found");

  // optional TEXT payload: same line first, then a dedicated line anywhere
  std::string payload;
  bool has_payload = false;
  const std::size_t text_pos = rest.find("TEXT:");
  std::string head = rest;
  if (text_pos != std::string::npos) {
    payload = detail::trim(rest.substr(text_pos + 5));
    has_payload = true;
    head = detail::trim(rest.substr(0, text_pos));
  } else {
    std::string from_line;
    if (detail::find_keyword_line(text, "TEXT", &from_line)) {
      payload = from_line;
      has_payload = true;
    }
  }

  auto parse_target = [&](const std::string& kw) -> std::string {
    // head is e.g. "Delete(h3)"
    if (head.size() < kw.size() + 3 || head.compare(0, kw.size(), kw) != 0 ||
        head[kw.size()] != '(' || head.back() != ')')
      raise(ErrorCode::Unparseable, "malformed action '" + head + "'");
    const std::string id =
        detail::trim(head.substr(kw.size() + 1, head.size() - kw.size() - 2));
    if (id.empty()) raise(ErrorCode::Unparseable, kw + " needs a target id");
    return id;
  };

  if (head == "Add") {
    if (!has_payload || payload.empty())
      raise(ErrorCode::Unparseable, "Add requires TEXT");
    if (bank.full())
      raise(ErrorCode::AddWhenFull, "bank is full; Add rejected");
    return UpdateAction::add(payload);
  }
  if (head == "Keep") {
    if (has_payload) raise(ErrorCode::Unparseable, "Keep carries no TEXT");
    return UpdateAction::keep();
  }
  if (head.rfind("Delete", 0) == 0) {
    const std::string id = parse_target("Delete");
    if (has_payload) raise(ErrorCode::Unparseable, "Delete carries no TEXT");
    if (!bank.contains(id))
      raise(ErrorCode::UnknownTarget, "no heuristic with id '" + id + "'");
    return UpdateAction::del(id);
  }
  if (head.rfind("Modify", 0) == 0) {
    const std::string id = parse_target("Modify");
    if (!has_payload || payload.empty())
      raise(ErrorCode::Unparseable, "Modify requires TEXT");
    if (!bank.contains(id))
      raise(ErrorCode::UnknownTarget, "no heuristic with id '" + id + "'");
    return UpdateAction::modify(id, payload);
  }
  raise(ErrorCode::Unparseable, "unknown action '" + head + "'");
}

}  // namespace micl
