#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "micl/coreset.hpp"
#include "micl/embedding.hpp"
#include "micl/experience_bank.hpp"
#include "micl/model_client.hpp"
#include "micl/prompt.hpp"
#include "micl/selection.hpp"
#include "micl/task.hpp"
#include "micl/templates.hpp"

namespace micl {

/// One sampled reasoning path.
struct Rollout {
  std::string text;
  int index = 0;           // 1-based position within its group
  int parsed_label = -1;   // -1 when unparseable
  bool unparseable = false;
};

/// Per-criterion binary verdicts plus their sum.
struct RewardBreakdown {
  std::vector<int> per_criterion;
  int total = 0;
  bool unscorable = false;  // evaluator reply did not parse; scored 0
};

struct SresConfig {
  int group_size = 5;        // G
  double temperature = 1.0;  // rollout sampling temperature
  int instances = 200;       // evolution subset size
  int min_spread = 1;        // smallest max-min score gap that triggers summarization
  std::uint64_t seed = 0;
  int max_output_length = 1024;

  void validate() const {
    if (group_size < 2) raise(ErrorCode::ConfigError, "group_size must be >= 2");
    if (instances < 0) raise(ErrorCode::ConfigError, "instances must be >= 0");
    if (min_spread < 0) raise(ErrorCode::ConfigError, "min_spread must be >= 0");
    if (temperature < 0.0) raise(ErrorCode::ConfigError, "temperature must be >= 0");
  }
};

// Every prompt/response exchange, recorded for golden tests and the
// ground-truth taint check.
struct TranscriptEvent {
  std::string phase;  // rollout | scoring | summarization | update
  std::string role;   // policy | evaluator
  std::uint64_t tau = 0;
  std::string instance_id;
  std::string prompt;
  std::vector<std::string> responses;
  std::vector<int> scores;  // totals (rollout group) or per-criterion (scoring)
};

using Transcript = std::vector<TranscriptEvent>;

inline void save_transcript(const Transcript& t, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  for (const auto& e : t) {
    nlohmann::json j{{"phase", e.phase},     {"role", e.role},
                     {"tau", e.tau},         {"instance_id", e.instance_id},
                     {"prompt", e.prompt},   {"responses", e.responses},
                     {"scores", e.scores}};
    out << j.dump() << "\n";
  }
  if (!out.good()) raise(ErrorCode::IoError, "write failed for " + path);
}

struct SresClients {
  ModelClient* policy = nullptr;
  ModelClient* evaluator = nullptr;
};

// One reward evaluation per rollout, in order. A reply the parser rejects
// scores 0 on every criterion and is flagged, never dropped.
inline std::vector<RewardBreakdown> score_group(
    const std::vector<std::string>& rollout_texts,
    const MultimodalPrompt& inference_prompt, const std::string& y_gt_label,
    ModelClient& evaluator, const std::vector<std::string>& criteria,
    const TaskSpec& task, const TemplateSet& templates, Transcript* transcript,
    std::uint64_t tau, const std::string& instance_id, int max_output_length) {
  std::vector<RewardBreakdown> out;
  out.reserve(rollout_texts.size());
  for (const auto& text : rollout_texts) {
    const std::string prompt = build_scoring_prompt(text, inference_prompt, y_gt_label,
                                                    criteria, task, templates);
    GenerationRequest req;
    req.prompt.text = prompt;
    req.temperature = 0.0;
    req.num_samples = 1;
    req.max_output_length = max_output_length;
    req.role = Role::Evaluator;
    const GenerationResponse resp = evaluator.generate(req);

    RewardBreakdown rb;
    try {
      rb.per_criterion = parse_scores(resp.texts.front(), criteria);
      for (int v : rb.per_criterion) rb.total += v;
    } catch (const Error&) {
      rb.per_criterion.assign(criteria.size(), 0);
      rb.total = 0;
      rb.unscorable = true;
    }
    if (transcript)
      transcript->push_back({"scoring", "evaluator", tau, instance_id, prompt,
                             resp.texts, rb.per_criterion});
    out.push_back(std::move(rb));
  }
  return out;
}

struct InstanceOutcome {
  bool has_candidate = false;
  std::string candidate_text;
  std::vector<Rollout> rollouts;
  std::vector<RewardBreakdown> rewards;
};

// One SRES step for one training instance: build the exemplar prompt with the
// current bank, sample G rollouts, score them against the ground truth, and
// contrast them into a candidate heuristic when the scores actually spread.
inline InstanceOutcome run_instance(const EmbeddingRecord& instance, const Coreset& coreset,
                                    const DatasetIndex& train_index,
                                    const ExperienceBank& bank, const TaskSpec& task,
                                    const SresClients& clients, const SresConfig& cfg,
                                    int top_k, const std::vector<std::string>& criteria,
                                    const TemplateSet& templates, Transcript* transcript) {
  cfg.validate();
  const std::string y_gt = task.class_name(instance.label);
  const std::uint64_t tau = bank.version();

  const std::vector<Exemplar> exemplars =
      select_decs(coreset, train_index, instance.vec, top_k);
  const MultimodalPrompt prompt =
      build_inference_prompt(instance.image_ref, exemplars, bank, task, templates);
  const RenderedPrompt rendered = render_prompt(prompt, templates);

  GenerationRequest req;
  req.prompt = rendered;
  req.temperature = cfg.temperature;
  req.num_samples = cfg.group_size;
  req.max_output_length = cfg.max_output_length;
  req.role = Role::Policy;
  const GenerationResponse resp = clients.policy->generate(req);
  if (transcript)
    transcript->push_back(
        {"rollout", "policy", tau, instance.id, rendered.text, resp.texts, {}});

  InstanceOutcome out;
  for (std::size_t g = 0; g < resp.texts.size(); ++g) {
    Rollout r;
    r.text = resp.texts[g];
    r.index = static_cast<int>(g) + 1;
    try {
      r.parsed_label = parse_answer(r.text, task);
    } catch (const Error&) {
      r.unparseable = true;
    }
    out.rollouts.push_back(std::move(r));
  }

  out.rewards = score_group(resp.texts, prompt, y_gt, *clients.evaluator, criteria, task,
                            templates, transcript, tau, instance.id,
                            cfg.max_output_length);

  std::vector<int> totals;
  totals.reserve(out.rewards.size());
  for (const auto& rb : out.rewards) totals.push_back(rb.total);

  const auto [min_it, max_it] = std::minmax_element(totals.begin(), totals.end());
  if (*max_it - *min_it < cfg.min_spread) return out;  // no contrast; skip

  const MaskSpec mask{true, y_gt};
  const std::string sum_prompt = build_summarization_prompt(
      resp.texts, totals, static_cast<int>(criteria.size()), mask, templates);
  GenerationRequest sreq;
  sreq.prompt.text = sum_prompt;
  sreq.temperature = cfg.temperature;
  sreq.num_samples = 1;
  sreq.max_output_length = cfg.max_output_length;
  sreq.role = Role::Policy;
  const GenerationResponse sresp = clients.policy->generate(sreq);
  if (transcript)
    transcript->push_back(
        {"summarization", "policy", tau, instance.id, sum_prompt, sresp.texts, {}});

  out.candidate_text = detail::trim(sresp.texts.front());
  if (out.candidate_text.empty()) return out;  // nothing usable; treated as skip
  out.has_candidate = true;
  return out;
}

struct EvolutionEvent {
  std::uint64_t tau = 0;
  std::string instance_id;
  std::vector<int> scores;  // rollout totals
  std::string action;       // "Add" | "Keep" | "Delete(h3)" | "Modify(h2)" | ""
  std::size_t bank_size = 0;
  bool skipped = false;
  std::string note;  // skip reason, retry marker
};

inline void save_evolution_log(const std::vector<EvolutionEvent>& events,
                               const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  for (const auto& e : events) {
    nlohmann::json j{{"tau", e.tau},           {"instance_id", e.instance_id},
                     {"scores", e.scores},     {"action", e.action},
                     {"bank_size", e.bank_size}, {"skipped", e.skipped}};
    if (!e.note.empty()) j["note"] = e.note;
    out << j.dump() << "\n";
  }
  if (!out.good()) raise(ErrorCode::IoError, "write failed for " + path);
}

struct EvolveResult {
  ExperienceBank bank{16};
  std::vector<EvolutionEvent> log;
  Transcript transcript;
};

namespace detail {

inline std::string describe_action(const UpdateAction& a) {
  switch (a.kind) {
    case ActionKind::Add: return "Add";
    case ActionKind::Keep: return "Keep";
    case ActionKind::Delete: return "Delete(" + a.target_id + ")";
    case ActionKind::Modify: return "Modify(" + a.target_id + ")";
  }
  return "?";
}

}  // namespace detail

// The bank evolution loop. Instances are a seeded without-replacement sample
// processed strictly in order: each consumes the bank state the previous step
// produced. The update decision comes from the policy model; an Add against a
// full bank is re-prompted once with Add forbidden, then falls back to Keep.
// MaskViolation and script desynchronization abort the run; any other
// per-instance failure is logged and skipped.
inline EvolveResult evolve(const Dataset& train, const Coreset& coreset,
                           const ExperienceBank& initial_bank, const TaskSpec& task,
                           const SresClients& clients, const SresConfig& cfg, int top_k,
                           const std::vector<std::string>& criteria,
                           const TemplateSet& templates) {
  cfg.validate();
  task.validate();
  const DatasetIndex train_index(train);

  std::vector<std::size_t> order(train.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(cfg.seed);
  rng.shuffle(order);
  const std::size_t take =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.instances), order.size());

  EvolveResult result;
  result.bank = initial_bank;

  for (std::size_t n = 0; n < take; ++n) {
    const EmbeddingRecord& instance = train.records[order[n]];
    const std::uint64_t tau = result.bank.version();

    InstanceOutcome outcome;
    try {
      outcome = run_instance(instance, coreset, train_index, result.bank, task, clients,
                             cfg, top_k, criteria, templates, &result.transcript);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::MaskViolation || e.code() == ErrorCode::ScriptExhausted ||
          e.code() == ErrorCode::ScriptMismatch)
        throw;
      result.log.push_back({tau, instance.id, {}, "", result.bank.size(), true,
                            std::string(error_code_name(e.code()))});
      continue;
    }

    std::vector<int> totals;
    for (const auto& rb : outcome.rewards) totals.push_back(rb.total);

    if (!outcome.has_candidate) {
      result.log.push_back(
          {tau, instance.id, totals, "", result.bank.size(), true, "no-contrast"});
      continue;
    }

    const MaskSpec mask{true, task.class_name(instance.label)};
    auto ask_update = [&](const std::string& retry_note) -> GenerationResponse {
      const std::string prompt = build_update_prompt(result.bank, outcome.candidate_text,
                                                     mask, templates, retry_note);
      GenerationRequest req;
      req.prompt.text = prompt;
      req.temperature = cfg.temperature;
      req.num_samples = 1;
      req.max_output_length = cfg.max_output_length;
      req.role = Role::Policy;
      const GenerationResponse resp = clients.policy->generate(req);
      result.transcript.push_back(
          {"update", "policy", tau, instance.id, prompt, resp.texts, {}});
      return resp;
    };

    std::optional<UpdateAction> action;
    std::string note;
    try {
      action = parse_action(ask_update("").texts.front(), result.bank);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::AddWhenFull) {
        // One retry with Add explicitly forbidden, then Keep.
        try {
          action = parse_action(
              ask_update("Your previous reply chose Add, but the bank is full; "
                         "Add is forbidden.")
                  .texts.front(),
              result.bank);
          note = "retried-after-full";
        } catch (const Error& e2) {
          if (e2.code() == ErrorCode::ScriptExhausted || e2.code() == ErrorCode::ScriptMismatch)
            throw;
          action = UpdateAction::keep();
          note = "keep-fallback-after-full";
        }
      } else if (e.code() == ErrorCode::ScriptExhausted ||
                 e.code() == ErrorCode::ScriptMismatch) {
        throw;
      } else {
        result.log.push_back({tau, instance.id, totals, "", result.bank.size(), true,
                              std::string(error_code_name(e.code()))});
        continue;
      }
    }

    Heuristic candidate;
    candidate.text = outcome.candidate_text;
    candidate.source_ids = {instance.id};
    result.bank = apply_update(result.bank, candidate, *action);
    result.log.push_back({tau, instance.id, totals, detail::describe_action(*action),
                          result.bank.size(), false, note});
  }
  return result;
}

// Post-hoc scan of a transcript: the ground-truth label of each instance must
// never reach a summarization or update prompt. Scoring prompts are the one
// place it may (and should) appear.
struct TaintReport {
  std::size_t summarization_hits = 0;
  std::size_t update_hits = 0;
  std::size_t scoring_hits = 0;
  std::size_t scoring_events = 0;
};

template <typename LabelOf>
TaintReport verify_transcript_masking(const Transcript& transcript, LabelOf&& label_of) {
  TaintReport report;
  for (const auto& e : transcript) {
    const std::string label = label_of(e.instance_id);
    const std::size_t hits = count_label_occurrences(e.prompt, label);
    if (e.phase == "summarization") report.summarization_hits += hits;
    else if (e.phase == "update") report.update_hits += hits;
    else if (e.phase == "scoring") {
      report.scoring_hits += hits;
      ++report.scoring_events;
    }
  }
  return report;
}

}  // namespace micl
