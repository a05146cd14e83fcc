#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <string>
#include <variant>
#include <vector>

#include "micl/error.hpp"
#include "micl/experience_bank.hpp"
#include "micl/task.hpp"
#include "micl/templates.hpp"

namespace micl {

struct VisualQuery {
  std::string image_ref;
};
struct VisualExemplar {
  std::string image_ref;
  std::string label_name;
  int rank = 0;  // 1-based, descending similarity
  double similarity = 0.0;
};
struct HeuristicsBlock {
  std::vector<std::string> texts;
};
struct Instruction {
  std::string text;
};

using PromptSegment =
    std::variant<VisualQuery, VisualExemplar, HeuristicsBlock, Instruction>;

// Ordered prompt: visual segments first, then the heuristics block, then the
// instruction. Exactly one query segment. An empty heuristics block is
// omitted entirely rather than rendered empty.
struct MultimodalPrompt {
  std::vector<PromptSegment> segments;

  int exemplar_count() const {
    int n = 0;
    for (const auto& s : segments)
      if (std::holds_alternative<VisualExemplar>(s)) ++n;
    return n;
  }

  int heuristic_count() const {
    for (const auto& s : segments)
      if (const auto* h = std::get_if<HeuristicsBlock>(&s))
        return static_cast<int>(h->texts.size());
    return 0;
  }

  void check_structure() const {
    int queries = 0;
    int stage = 0;  // 0 = visual, 1 = heuristics, 2 = instruction
    for (const auto& s : segments) {
      if (std::holds_alternative<VisualQuery>(s) ||
          std::holds_alternative<VisualExemplar>(s)) {
        if (stage > 0)
          raise(ErrorCode::InvariantViolation,
                "visual segment after non-visual segment");
        if (std::holds_alternative<VisualQuery>(s)) ++queries;
      } else if (std::holds_alternative<HeuristicsBlock>(s)) {
        if (stage > 1)
          raise(ErrorCode::InvariantViolation, "heuristics block after instruction");
        stage = 1;
      } else {
        stage = 2;
      }
    }
    if (queries != 1)
      raise(ErrorCode::InvariantViolation,
            "prompt must contain exactly one query segment, found " +
                std::to_string(queries));
    if (segments.empty() || !std::holds_alternative<Instruction>(segments.back()))
      raise(ErrorCode::InvariantViolation, "prompt must end with an instruction");
  }
};

/// Rendered prompt text plus the ordered image attachment slots it references.
struct RenderedPrompt {
  std::string text;
  std::vector<std::string> attachments;
};

/// One retrieved exemplar resolved to its visual and label word.
struct Exemplar {
  std::string image_ref;
  int class_index = 0;
  double similarity = 0.0;
};

namespace detail {

inline std::string format_similarity(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", s);
  return buf;
}

inline bool word_char(unsigned char c) {
  return std::isalnum(c) != 0 || c == '_';
}

}  // namespace detail

// Case-insensitive word-boundary occurrences of `label` in `text`. Multi-word
// labels match as whole phrases. ASCII case folding only.
inline std::size_t count_label_occurrences(const std::string& text,
                                           const std::string& label) {
  if (label.empty()) return 0;
  const std::string hay = TaskSpec::lowercase(text);
  const std::string needle = TaskSpec::lowercase(label);
  std::size_t count = 0;
  std::size_t pos = 0;
  while ((pos = hay.find(needle, pos)) != std::string::npos) {
    const bool left_ok = pos == 0 || !detail::word_char(static_cast<unsigned char>(hay[pos - 1]));
    const std::size_t end = pos + needle.size();
    const bool right_ok =
        end >= hay.size() || !detail::word_char(static_cast<unsigned char>(hay[end]));
    if (left_ok && right_ok) ++count;
    pos += 1;
  }
  return count;
}

// Replaces every word-boundary occurrence of `label` with [MASKED],
// preserving all other bytes.
inline std::string redact_label(const std::string& text, const std::string& label) {
  if (label.empty()) return text;
  const std::string hay = TaskSpec::lowercase(text);
  const std::string needle = TaskSpec::lowercase(label);
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t hit = hay.find(needle, pos);
    if (hit == std::string::npos) {
      out.append(text, pos, std::string::npos);
      break;
    }
    const bool left_ok = hit == 0 || !detail::word_char(static_cast<unsigned char>(hay[hit - 1]));
    const std::size_t end = hit + needle.size();
    const bool right_ok =
        end >= hay.size() || !detail::word_char(static_cast<unsigned char>(hay[end]));
    out.append(text, pos, hit - pos);
    if (left_ok && right_ok) {
      out += "[MASKED]";
      pos = end;
    } else {
      out += text[hit];
      pos = hit + 1;
    }
  }
  return out;
}

/// Ground-truth masking directive for the summarization and update phases.
struct MaskSpec {
  bool enabled = true;
  std::string label;  // the query's ground-truth class name
};

inline void assert_masked(const std::string& prompt, const MaskSpec& mask,
                          const char* phase) {
  if (!mask.enabled) return;
  const std::size_t hits = count_label_occurrences(prompt, mask.label);
  if (hits != 0)
    raise(ErrorCode::MaskViolation,
          std::string(phase) + " prompt contains the ground-truth label '" +
              mask.label + "' " + std::to_string(hits) + " time(s)");
}

// The inference prompt: query visual, exemplar visuals in descending
// similarity, the whole bank verbatim, then the answer instruction.
inline MultimodalPrompt build_inference_prompt(const std::string& query_image_ref,
                                               std::vector<Exemplar> exemplars,
                                               const ExperienceBank& bank,
                                               const TaskSpec& task,
                                               const TemplateSet& templates) {
  task.validate();
  if (query_image_ref.empty())
    raise(ErrorCode::MissingImageRef, "query has no image reference");
  for (const auto& e : exemplars)
    if (e.image_ref.empty())
      raise(ErrorCode::MissingImageRef,
            "exemplar of class " + std::to_string(e.class_index) +
                " has no image reference");

  std::stable_sort(exemplars.begin(), exemplars.end(),
                   [](const Exemplar& a, const Exemplar& b) {
                     return a.similarity > b.similarity;
                   });

  MultimodalPrompt prompt;
  prompt.segments.emplace_back(VisualQuery{query_image_ref});
  int rank = 1;
  for (const auto& e : exemplars)
    prompt.segments.emplace_back(VisualExemplar{
        e.image_ref, task.class_name(e.class_index), rank++, e.similarity});

  if (bank.size() > 0) {
    HeuristicsBlock block;
    for (const auto& h : bank.entries()) block.texts.push_back(h.text);
    prompt.segments.emplace_back(std::move(block));
  }

  std::string class_list;
  for (const auto& c : task.class_names) {
    if (!class_list.empty()) class_list += ", ";
    class_list += c;
  }
  const std::string note =
      task.instruction_note.empty() ? "" : task.instruction_note + "\n";
  const std::string ml_note =
      task.multi_label
          ? "Classes are composite label combinations; answer with the single "
            "best-matching composite class.\n"
          : "";
  Instruction instr{templates.render("instruction", {{"task_name", task.name},
                                                     {"class_list", class_list},
                                                     {"task_note", note},
                                                     {"multi_label_note", ml_note}})};
  prompt.segments.emplace_back(std::move(instr));
  prompt.check_structure();
  return prompt;
}

// Deterministic text rendering; attachment slots appear in segment order.
inline RenderedPrompt render_prompt(const MultimodalPrompt& prompt,
                                    const TemplateSet& templates) {
  prompt.check_structure();
  RenderedPrompt out;
  for (const auto& seg : prompt.segments) {
    if (const auto* q = std::get_if<VisualQuery>(&seg)) {
      out.text += templates.render("query_segment", {{"image_ref", q->image_ref}});
      out.attachments.push_back(q->image_ref);
    } else if (const auto* e = std::get_if<VisualExemplar>(&seg)) {
      out.text += templates.render(
          "exemplar_segment",
          {{"rank", std::to_string(e->rank)},
           {"label", e->label_name},
           {"similarity", detail::format_similarity(e->similarity)},
           {"image_ref", e->image_ref}});
      out.attachments.push_back(e->image_ref);
    } else if (const auto* h = std::get_if<HeuristicsBlock>(&seg)) {
      std::string items;
      for (const auto& t : h->texts) items += "- " + t + "\n";
      out.text += templates.render("heuristics_block", {{"items", items}});
    } else {
      out.text += std::get<Instruction>(seg).text;
    }
  }
  return out;
}

// Score-annotated contrastive summarization prompt. Rollout texts are
// redacted before inclusion and the finished prompt is asserted clean;
// leaking the ground truth here is a hard failure, not a warning.
inline std::string build_summarization_prompt(const std::vector<std::string>& rollouts,
                                              const std::vector<int>& scores,
                                              int max_score, const MaskSpec& mask,
                                              const TemplateSet& templates) {
  if (rollouts.size() < 2)
    raise(ErrorCode::DegenerateGroup, "contrastive summarization needs >= 2 rollouts");
  if (scores.size() != rollouts.size())
    raise(ErrorCode::ValidationError, "one score per rollout required");
  if (std::all_of(scores.begin(), scores.end(),
                  [&](int s) { return s == scores.front(); }))
    raise(ErrorCode::DegenerateGroup, "all rollout scores are identical");

  std::string blocks;
  for (std::size_t g = 0; g < rollouts.size(); ++g) {
    const std::string body =
        mask.enabled ? redact_label(rollouts[g], mask.label) : rollouts[g];
    blocks += "Path " + std::to_string(g + 1) + " (score " +
              std::to_string(scores[g]) + "/" + std::to_string(max_score) +
              "):\n" + body + "\n\n";
  }
  const std::string prompt = templates.render(
      "summarization",
      {{"count", std::to_string(rollouts.size())}, {"rollouts", blocks}});
  assert_masked(prompt, mask, "summarization");
  return prompt;
}

// Bank-update decision prompt. Entry texts and the candidate are redacted;
// when the bank is full the prompt forbids Add outright.
inline std::string build_update_prompt(const ExperienceBank& bank,
                                       const std::string& h_new, const MaskSpec& mask,
                                       const TemplateSet& templates,
                                       const std::string& retry_note = "") {
  auto masked = [&](const std::string& t) {
    return mask.enabled ? redact_label(t, mask.label) : t;
  };
  std::string entries;
  if (bank.size() == 0) {
    entries = "(none)";
  } else {
    for (const auto& h : bank.entries()) {
      if (!entries.empty()) entries += "\n";
      entries += "[" + h.id + "] " + masked(h.text);
    }
  }
  const int remaining = bank.capacity() - static_cast<int>(bank.size());
  const std::string add_rule =
      bank.full()
          ? "The bank is full: Add is forbidden. Choose Delete, Modify, or Keep.\n"
          : "";
  const std::string retry = retry_note.empty() ? "" : retry_note + "\n";
  const std::string prompt = templates.render(
      "update", {{"capacity", std::to_string(bank.capacity())},
                 {"size", std::to_string(bank.size())},
                 {"remaining", std::to_string(remaining)},
                 {"entries", entries},
                 {"h_new", masked(h_new)},
                 {"add_rule", add_rule},
                 {"retry_note", retry}});
  assert_masked(prompt, mask, "update");
  return prompt;
}

// Reward-scoring prompt. This is the only phase allowed to see the ground
// truth; the task context is summarized as counts rather than echoed
// verbatim so the ground-truth occurrences stay countable.
inline std::string build_scoring_prompt(const std::string& rollout,
                                        const MultimodalPrompt& inference_prompt,
                                        const std::string& ground_truth_label,
                                        const std::vector<std::string>& criteria,
                                        const TaskSpec& task,
                                        const TemplateSet& templates) {
  if (criteria.empty())
    raise(ErrorCode::ValidationError, "criteria set must be non-empty");
  std::string crit_list;
  for (const auto& c : criteria) {
    if (!crit_list.empty()) crit_list += ", ";
    crit_list += c;
  }
  return templates.render(
      "scoring",
      {{"task_name", task.name},
       {"exemplar_count", std::to_string(inference_prompt.exemplar_count())},
       {"heuristic_count", std::to_string(inference_prompt.heuristic_count())},
       {"rollout", rollout},
       {"ground_truth", ground_truth_label},
       {"criteria_list", crit_list},
       {"criteria_count", std::to_string(criteria.size())}});
}

}  // namespace micl
