#pragma once

#include <cstdint>
#include <cstdio>
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

// The four exemplar-selection arms of the ablation, optionally paired with
// the evolved bank.
enum class Arm { None, Random, TopK, Decs };

inline Arm parse_arm(const std::string& s) {
  if (s == "none") return Arm::None;
  if (s == "random") return Arm::Random;
  if (s == "topk") return Arm::TopK;
  if (s == "decs") return Arm::Decs;
  raise(ErrorCode::ConfigError,
        "unknown arm '" + s + "' (expected none|random|topk|decs)");
}

inline std::string_view arm_name(Arm a) {
  switch (a) {
    case Arm::None: return "none";
    case Arm::Random: return "random";
    case Arm::TopK: return "topk";
    case Arm::Decs: return "decs";
  }
  return "?";
}

struct EvalConfig {
  Arm arm = Arm::Decs;
  bool use_sres = false;
  int runs = 3;
  std::uint64_t seed = 0;
  int top_k = 5;
  double temperature = 0.0;
  int max_output_length = 1024;

  void validate() const {
    if (runs < 1) raise(ErrorCode::ConfigError, "runs must be >= 1");
    if (top_k < 1) raise(ErrorCode::ConfigError, "top_k must be >= 1");
    if (temperature < 0.0) raise(ErrorCode::ConfigError, "temperature must be >= 0");
  }
};

struct RunResult {
  int run = 0;
  std::uint64_t seed = 0;
  int correct = 0;
  int total = 0;
  int unparseable = 0;
  double accuracy = 0.0;
};

struct EvalReport {
  std::string arm;
  bool sres = false;
  std::vector<RunResult> runs;
  double mean_accuracy = 0.0;
  std::vector<double> per_class_accuracy;  // aggregated over all runs
  std::vector<int> per_class_total;
  int unparseable_total = 0;
  std::string config_fingerprint;
  std::string transcript_path;
};

struct EvalTranscriptEvent {
  int run = 0;
  std::string instance_id;
  std::string prompt;
  std::string response;
  int predicted = -1;  // -1 when unparseable
  bool correct = false;
};

inline void save_eval_transcript(const std::vector<EvalTranscriptEvent>& events,
                                 const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  for (const auto& e : events) {
    nlohmann::json j{{"run", e.run},         {"instance_id", e.instance_id},
                     {"prompt", e.prompt},   {"response", e.response},
                     {"predicted", e.predicted}, {"correct", e.correct}};
    out << j.dump() << "\n";
  }
  if (!out.good()) raise(ErrorCode::IoError, "write failed for " + path);
}

// Few-shot evaluation over the test set. Per-run seeds are seed + run index;
// the random arm additionally derives one stream per (run, query) so results
// are independent of evaluation order. Unparseable answers count as wrong and
// are reported, never dropped.
inline EvalReport evaluate(const Dataset& test, const Dataset& train,
                           const Coreset* coreset, const ExperienceBank* bank,
                           const TaskSpec& task, ModelClient& policy,
                           const EvalConfig& cfg, const TemplateSet& templates,
                           std::vector<EvalTranscriptEvent>* transcript = nullptr) {
  cfg.validate();
  task.validate();
  if (task.num_classes() != test.num_classes)
    raise(ErrorCode::ConfigError,
          "task has " + std::to_string(task.num_classes()) + " classes, test set has " +
              std::to_string(test.num_classes));
  if (cfg.arm == Arm::Decs && coreset == nullptr)
    raise(ErrorCode::ConfigError, "decs arm requires a coreset");
  if (cfg.use_sres && bank == nullptr)
    raise(ErrorCode::ConfigError, "sres evaluation requires a bank");

  const DatasetIndex train_index(train);
  const ClassMembers members(train);
  const ExperienceBank empty_bank(16);
  const ExperienceBank& prompt_bank = (cfg.use_sres && bank) ? *bank : empty_bank;

  EvalReport report;
  report.arm = std::string(arm_name(cfg.arm));
  report.sres = cfg.use_sres;
  report.per_class_accuracy.assign(static_cast<std::size_t>(test.num_classes), 0.0);
  report.per_class_total.assign(static_cast<std::size_t>(test.num_classes), 0);
  std::vector<int> per_class_correct(static_cast<std::size_t>(test.num_classes), 0);

  for (int run = 0; run < cfg.runs; ++run) {
    const std::uint64_t run_seed = cfg.seed + static_cast<std::uint64_t>(run);
    RunResult rr;
    rr.run = run;
    rr.seed = run_seed;

    for (const auto& record : test.records) {
      std::vector<Exemplar> exemplars;
      switch (cfg.arm) {
        case Arm::None:
          break;
        case Arm::Random:
          exemplars = select_random_stratified(train, members, record.vec, record.id,
                                               run_seed, cfg.top_k);
          break;
        case Arm::TopK:
          exemplars = select_topk_raw(train, record.vec, cfg.top_k);
          break;
        case Arm::Decs:
          exemplars = select_decs(*coreset, train_index, record.vec, cfg.top_k);
          break;
      }

      const MultimodalPrompt prompt = build_inference_prompt(
          record.image_ref, std::move(exemplars), prompt_bank, task, templates);
      const RenderedPrompt rendered = render_prompt(prompt, templates);

      GenerationRequest req;
      req.prompt = rendered;
      req.temperature = cfg.temperature;
      req.num_samples = 1;
      req.max_output_length = cfg.max_output_length;
      req.role = Role::Policy;
      const GenerationResponse resp = policy.generate(req);

      int predicted = -1;
      try {
        predicted = parse_answer(resp.texts.front(), task);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::Unparseable) throw;
        ++rr.unparseable;
      }
      const bool correct = predicted == record.label;
      if (correct) ++rr.correct;
      ++rr.total;
      ++report.per_class_total[static_cast<std::size_t>(record.label)];
      if (correct) ++per_class_correct[static_cast<std::size_t>(record.label)];

      if (transcript)
        transcript->push_back({run, record.id, rendered.text, resp.texts.front(),
                               predicted, correct});
    }

    rr.accuracy = static_cast<double>(rr.correct) / static_cast<double>(rr.total);
    report.unparseable_total += rr.unparseable;
    report.runs.push_back(rr);
  }

  double sum = 0.0;
  for (const auto& rr : report.runs) sum += rr.accuracy;
  report.mean_accuracy = sum / static_cast<double>(report.runs.size());
  for (int c = 0; c < test.num_classes; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    report.per_class_accuracy[uc] =
        report.per_class_total[uc] == 0
            ? 0.0
            : static_cast<double>(per_class_correct[uc]) /
                  static_cast<double>(report.per_class_total[uc]);
  }
  return report;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& rr : r.runs)
    runs.push_back({{"run", rr.run},
                    {"seed", rr.seed},
                    {"correct", rr.correct},
                    {"total", rr.total},
                    {"unparseable", rr.unparseable},
                    {"accuracy", rr.accuracy}});
  return nlohmann::json{{"arm", r.arm},
                        {"sres", r.sres},
                        {"runs", runs},
                        {"mean_accuracy", r.mean_accuracy},
                        {"per_class_accuracy", r.per_class_accuracy},
                        {"per_class_total", r.per_class_total},
                        {"unparseable_total", r.unparseable_total},
                        {"config_fingerprint", r.config_fingerprint},
                        {"transcript_path", r.transcript_path}};
}

inline void save_report(const EvalReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  out << report_to_json(r).dump(2) << "\n";
  if (!out.good()) raise(ErrorCode::IoError, "write failed for " + path);
}

// Aligned-column text rendering of the report.
inline std::string report_table(const EvalReport& r) {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf), "arm=%s sres=%s\n", r.arm.c_str(),
                r.sres ? "on" : "off");
  out += buf;
  out += "run   seed                  accuracy  correct/total  unparseable\n";
  for (const auto& rr : r.runs) {
    std::snprintf(buf, sizeof(buf), "%-5d %-21llu %.4f    %d/%d          %d\n", rr.run,
                  static_cast<unsigned long long>(rr.seed), rr.accuracy, rr.correct,
                  rr.total, rr.unparseable);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "mean accuracy: %.4f\n", r.mean_accuracy);
  out += buf;
  out += "class  accuracy  n\n";
  for (std::size_t c = 0; c < r.per_class_accuracy.size(); ++c) {
    std::snprintf(buf, sizeof(buf), "%-6zu %.4f    %d\n", c, r.per_class_accuracy[c],
                  r.per_class_total[c]);
    out += buf;
  }
  return out;
}

}  // namespace micl
