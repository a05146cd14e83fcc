#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "micl/error.hpp"

namespace micl {

/// One textual diagnostic rule. Identity is stable across Modify.
struct Heuristic {
  std::string id;
  std::string text;
  std::uint64_t created_step = 0;
  std::uint64_t modified_step = 0;
  std::vector<std::string> source_ids;
};

enum class ActionKind { Add, Delete, Keep, Modify };

inline std::string_view action_kind_name(ActionKind k) {
  switch (k) {
    case ActionKind::Add: return "Add";
    case ActionKind::Delete: return "Delete";
    case ActionKind::Keep: return "Keep";
    case ActionKind::Modify: return "Modify";
  }
  return "?";
}

/// One bank-update decision. Field presence must match the kind exactly:
/// Delete/Modify carry target_id, Add/Modify carry new_text.
struct UpdateAction {
  ActionKind kind = ActionKind::Keep;
  std::string target_id;
  std::string new_text;

  static UpdateAction add(std::string text) {
    return {ActionKind::Add, {}, std::move(text)};
  }
  static UpdateAction del(std::string target) {
    return {ActionKind::Delete, std::move(target), {}};
  }
  static UpdateAction keep() { return {ActionKind::Keep, {}, {}}; }
  static UpdateAction modify(std::string target, std::string text) {
    return {ActionKind::Modify, std::move(target), std::move(text)};
  }
};

// Capacity-bounded ordered store of heuristics. The version counter is the
// serialization witness: exactly one increment per applied action, Keep
// included. Transitions return a new value; the input is never mutated.
class ExperienceBank {
 public:
  explicit ExperienceBank(int capacity = 16) {
    if (capacity < 1) raise(ErrorCode::ConfigError, "capacity must be >= 1");
    capacity_ = capacity;
  }

  int capacity() const { return capacity_; }
  std::uint64_t version() const { return version_; }
  const std::vector<Heuristic>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool full() const { return entries_.size() >= static_cast<std::size_t>(capacity_); }

  bool contains(const std::string& id) const { return find(id) >= 0; }

  const Heuristic& at(const std::string& id) const {
    const int i = find(id);
    if (i < 0) raise(ErrorCode::UnknownTarget, "no heuristic with id '" + id + "'");
    return entries_[static_cast<std::size_t>(i)];
  }

  void check_invariants() const {
    if (entries_.size() > static_cast<std::size_t>(capacity_))
      raise(ErrorCode::InvariantViolation, "bank exceeds capacity");
    std::unordered_set<std::string> ids;
    for (const auto& h : entries_) {
      if (h.text.empty())
        raise(ErrorCode::InvariantViolation, "heuristic '" + h.id + "' has empty text");
      if (h.modified_step < h.created_step)
        raise(ErrorCode::InvariantViolation,
              "heuristic '" + h.id + "' modified before creation");
      if (!ids.insert(h.id).second)
        raise(ErrorCode::InvariantViolation, "duplicate heuristic id '" + h.id + "'");
    }
  }

  friend ExperienceBank apply_update(const ExperienceBank& bank,
                                     const Heuristic& candidate,
                                     const UpdateAction& action);
  friend ExperienceBank load_bank(const std::string& path);
  friend void save_bank(const ExperienceBank& bank, const std::string& path);

 private:
  int find(const std::string& id) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (entries_[i].id == id) return static_cast<int>(i);
    return -1;
  }

  int capacity_ = 16;
  std::uint64_t version_ = 0;
  std::vector<Heuristic> entries_;
  std::uint64_t next_id_ = 1;  // monotonic; ids are "h<counter>"
};

inline void validate_action_shape(const UpdateAction& a) {
  const bool has_target = !a.target_id.empty();
  const bool has_text = !a.new_text.empty();
  switch (a.kind) {
    case ActionKind::Add:
      if (has_target || !has_text)
        raise(ErrorCode::MalformedAction, "Add requires new_text and no target");
      break;
    case ActionKind::Delete:
      if (!has_target || has_text)
        raise(ErrorCode::MalformedAction, "Delete requires a target and no text");
      break;
    case ActionKind::Keep:
      if (has_target || has_text)
        raise(ErrorCode::MalformedAction, "Keep carries no fields");
      break;
    case ActionKind::Modify:
      if (!has_target || !has_text)
        raise(ErrorCode::MalformedAction, "Modify requires a target and new_text");
      break;
  }
}

// The Add/Delete/Keep/Modify state transition. The applied step tau is the
// version of the input bank; the returned bank has version tau + 1. On Add
// the store mints the id itself (candidate.id is ignored) so that Modify can
// later change text while preserving identity.
inline ExperienceBank apply_update(const ExperienceBank& bank,
                                   const Heuristic& candidate,
                                   const UpdateAction& action) {
  validate_action_shape(action);
  ExperienceBank next = bank;
  const std::uint64_t step = bank.version();

  switch (action.kind) {
    case ActionKind::Add: {
      if (bank.full())
        raise(ErrorCode::AddWhenFull,
              "bank already holds " + std::to_string(bank.size()) + "/" +
                  std::to_string(bank.capacity()) + " entries");
      Heuristic h;
      h.id = "h" + std::to_string(next.next_id_++);
      h.text = action.new_text;
      h.created_step = step;
      h.modified_step = step;
      h.source_ids = candidate.source_ids;
      next.entries_.push_back(std::move(h));
      break;
    }
    case ActionKind::Delete: {
      const int i = next.find(action.target_id);
      if (i < 0)
        raise(ErrorCode::UnknownTarget,
              "no heuristic with id '" + action.target_id + "'");
      next.entries_.erase(next.entries_.begin() + i);
      break;
    }
    case ActionKind::Keep:
      break;
    case ActionKind::Modify: {
      const int i = next.find(action.target_id);
      if (i < 0)
        raise(ErrorCode::UnknownTarget,
              "no heuristic with id '" + action.target_id + "'");
      Heuristic& h = next.entries_[static_cast<std::size_t>(i)];
      h.text = action.new_text;
      h.modified_step = step;
      for (const auto& s : candidate.source_ids)
        if (std::find(h.source_ids.begin(), h.source_ids.end(), s) == h.source_ids.end())
          h.source_ids.push_back(s);
      break;
    }
  }
  next.version_ = step + 1;
  return next;
}

inline void save_bank(const ExperienceBank& bank, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& h : bank.entries()) {
    entries.push_back({{"id", h.id},
                       {"text", h.text},
                       {"created_step", h.created_step},
                       {"modified_step", h.modified_step},
                       {"source_ids", h.source_ids}});
  }
  nlohmann::json j{{"capacity", bank.capacity()},
                   {"version", bank.version()},
                   {"entries", entries}};
  out << j.dump(2) << "\n";
  if (!out.good()) raise(ErrorCode::IoError, "write failed for " + path);
}

inline ExperienceBank load_bank(const std::string& path) {
  if (!std::filesystem::exists(path))
    raise(ErrorCode::FileMissing, "bank file not found: " + path);
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ParseError, path + ": " + e.what());
  }
  ExperienceBank bank;
  try {
    bank.capacity_ = j.at("capacity").get<int>();
    bank.version_ = j.at("version").get<std::uint64_t>();
    for (const auto& e : j.at("entries")) {
      Heuristic h;
      h.id = e.at("id").get<std::string>();
      h.text = e.at("text").get<std::string>();
      h.created_step = e.at("created_step").get<std::uint64_t>();
      h.modified_step = e.at("modified_step").get<std::uint64_t>();
      h.source_ids = e.at("source_ids").get<std::vector<std::string>>();
      bank.entries_.push_back(std::move(h));
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ParseError, path + ": " + e.what());
  }
  if (bank.capacity_ < 1)
    raise(ErrorCode::InvariantViolation, path + ": capacity must be >= 1");
  bank.check_invariants();
  // Resume the id counter past every persisted "h<n>" id.
  for (const auto& h : bank.entries_) {
    if (h.id.size() > 1 && h.id[0] == 'h') {
      try {
        const std::uint64_t n = std::stoull(h.id.substr(1));
        bank.next_id_ = std::max(bank.next_id_, n + 1);
      } catch (...) {
        // foreign id scheme; counter stays where it is
      }
    }
  }
  return bank;
}

}  // namespace micl
