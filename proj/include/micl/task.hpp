#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "micl/error.hpp"

namespace micl {

/// Maps class indices to label words for prompting and answer parsing.
struct TaskSpec {
  std::string name;
  std::vector<std::string> class_names;  // aligned with class indices
  std::string instruction_note;          // optional task-specific sentence
  bool multi_label = false;

  void validate() const {
    if (name.empty()) raise(ErrorCode::ValidationError, "task name is empty");
    if (class_names.empty())
      raise(ErrorCode::ValidationError, "task has no class names");
    std::unordered_set<std::string> seen;
    for (const auto& c : class_names) {
      if (c.empty()) raise(ErrorCode::ValidationError, "empty class name");
      if (!seen.insert(lowercase(c)).second)
        raise(ErrorCode::ValidationError, "duplicate class name '" + c + "'");
    }
  }

  int num_classes() const { return static_cast<int>(class_names.size()); }

  const std::string& class_name(int idx) const {
    if (idx < 0 || idx >= num_classes())
      raise(ErrorCode::UnknownClass, "class index " + std::to_string(idx));
    return class_names[static_cast<std::size_t>(idx)];
  }

  // Case-insensitive exact match; -1 when no class matches.
  int class_index(const std::string& word) const {
    const std::string w = lowercase(word);
    for (int i = 0; i < num_classes(); ++i)
      if (lowercase(class_names[static_cast<std::size_t>(i)]) == w) return i;
    return -1;
  }

  static std::string lowercase(std::string s) {
    for (char& c : s)
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return s;
  }
};

// The five reward criteria summed into the scalar reward.
inline const std::vector<std::string>& default_criteria() {
  static const std::vector<std::string> omega = {
      "correctness", "validity", "comprehensiveness", "discriminability",
      "consistency"};
  return omega;
}

}  // namespace micl
