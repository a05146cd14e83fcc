// micl: coreset optimization, experience-bank evolution, and few-shot
// evaluation against a chat-style model endpoint or the offline mocks.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "micl/http_client.hpp"
#include "micl/micl.hpp"

namespace {

using namespace micl;

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::Transport:
    case ErrorCode::Timeout:
    case ErrorCode::ScriptExhausted:
    case ErrorCode::ScriptMismatch:
    case ErrorCode::AttachmentUnresolvable:
      return 3;
    case ErrorCode::MaskViolation:
    case ErrorCode::InvariantViolation:
    case ErrorCode::AddWhenFull:
    case ErrorCode::DegenerateUpdate:
      return 4;
    default:
      return 2;
  }
}

struct Clients {
  std::unique_ptr<ModelClient> owned_policy;
  std::unique_ptr<ModelClient> owned_evaluator;
  ModelClient* policy = nullptr;
  ModelClient* evaluator = nullptr;
};

std::unique_ptr<ModelClient> make_http_client(const RunConfig& cfg) {
  HttpClientConfig http;
  http.endpoint = cfg.model.endpoint;
  http.model_name = cfg.model.model_name;
  http.max_retries = cfg.model.max_retries;
  http.timeout_s = cfg.model.timeout_s;
  http.allow_missing_images = cfg.model.allow_missing_images;
  if (const char* key = std::getenv(cfg.model.api_key_env.c_str())) http.api_key = key;
  return std::make_unique<HttpModelClient>(http);
}

// Policy and evaluator backed by one shared script consume entries in strict
// scenario order, which is what keeps golden transcripts meaningful.
Clients make_clients(const RunConfig& cfg, const Dataset* test_for_oracle) {
  Clients c;
  std::shared_ptr<ScriptedModel> script;
  auto scripted = [&]() -> std::unique_ptr<ModelClient> {
    if (cfg.model.script.empty())
      raise(ErrorCode::ConfigError, "model kind 'script' needs model.script");
    if (!script)
      script = std::make_shared<ScriptedModel>(ScriptedModel::from_file(cfg.model.script));
    struct Shared : ModelClient {
      std::shared_ptr<ScriptedModel> inner;
      explicit Shared(std::shared_ptr<ScriptedModel> m) : inner(std::move(m)) {}
      GenerationResponse generate(const GenerationRequest& r) override {
        return inner->generate(r);
      }
    };
    return std::make_unique<Shared>(script);
  };

  auto build = [&](const std::string& kind) -> std::unique_ptr<ModelClient> {
    if (kind == "script") return scripted();
    if (kind == "http") return make_http_client(cfg);
    if (kind == "majority") return std::make_unique<MajorityExemplarPolicy>();
    if (kind == "oracle") {
      if (!test_for_oracle)
        raise(ErrorCode::ConfigError, "oracle policy is only available for eval");
      std::map<std::string, std::string> map;
      for (const auto& r : test_for_oracle->records)
        map[r.image_ref] = cfg.task.class_name(r.label);
      return std::make_unique<OracleLabelPolicy>(std::move(map));
    }
    raise(ErrorCode::ConfigError, "unknown model kind '" + kind + "'");
  };

  c.owned_policy = build(cfg.model.policy);
  c.policy = c.owned_policy.get();
  c.owned_evaluator = build(cfg.model.evaluator);
  c.evaluator = c.owned_evaluator.get();
  return c;
}

void require_path(const std::string& p, const char* what) {
  if (p.empty())
    raise(ErrorCode::ConfigError, std::string("paths.") + what + " is not set");
}

int cmd_optimize(const RunConfig& cfg) {
  require_path(cfg.paths.train_embeddings, "train_embeddings");
  require_path(cfg.paths.coreset, "coreset");
  const Dataset train = normalize_dataset(load_dataset(cfg.paths.train_embeddings));
  OptimizeStats stats;
  const Coreset cs = optimize(train, cfg.decs, &stats);
  save_coreset(cs, cfg.paths.coreset);

  std::printf("N=%zu  sizing: S_c=%d T_opt=%d  query pool=%zu\n", train.size(),
              cs.sizing.coreset_size, cs.sizing.epochs, stats.query_pool_size);
  std::vector<int> per_class(static_cast<std::size_t>(cs.num_classes), 0);
  for (int c : cs.key_class) ++per_class[static_cast<std::size_t>(c)];
  std::printf("per-class key counts:");
  for (std::size_t c = 0; c < per_class.size(); ++c)
    std::printf(" %zu:%d", c, per_class[c]);
  std::printf("\n");
  if (stats.degenerate_updates > 0)
    std::printf("degenerate EMA updates skipped: %zu\n", stats.degenerate_updates);
  std::printf("coreset written to %s\n", cfg.paths.coreset.c_str());
  return 0;
}

int cmd_evolve(const RunConfig& cfg) {
  require_path(cfg.paths.train_embeddings, "train_embeddings");
  require_path(cfg.paths.coreset, "coreset");
  require_path(cfg.paths.bank, "bank");
  const Dataset train = normalize_dataset(load_dataset(cfg.paths.train_embeddings));
  const Coreset cs = load_coreset(cfg.paths.coreset);
  const TemplateSet templates = TemplateSet::load(cfg.paths.templates);

  ExperienceBank initial(cfg.bank_capacity);
  if (!cfg.paths.initial_bank.empty()) initial = load_bank(cfg.paths.initial_bank);

  Clients clients = make_clients(cfg, nullptr);
  const EvolveResult result =
      evolve(train, cs, initial, cfg.task, {clients.policy, clients.evaluator}, cfg.sres,
             cfg.decs.top_k, default_criteria(), templates);

  save_bank(result.bank, cfg.paths.bank);
  if (!cfg.paths.evolution_log.empty())
    save_evolution_log(result.log, cfg.paths.evolution_log);
  if (!cfg.paths.evolve_transcript.empty())
    save_transcript(result.transcript, cfg.paths.evolve_transcript);

  // Post-hoc taint scan over everything we recorded; the builders already
  // assert this, so a hit here means a masking bug, exit 4.
  const DatasetIndex index(train);
  const TaintReport taint = verify_transcript_masking(
      result.transcript,
      [&](const std::string& id) { return cfg.task.class_name(index.at(id).label); });
  if (taint.summarization_hits != 0 || taint.update_hits != 0)
    raise(ErrorCode::MaskViolation,
          "ground truth leaked into " + std::to_string(taint.summarization_hits) +
              " summarization and " + std::to_string(taint.update_hits) +
              " update prompt position(s)");

  std::size_t applied = 0, skipped = 0;
  for (const auto& e : result.log) (e.skipped ? skipped : applied)++;
  std::printf("instances: %zu applied, %zu skipped; final bank: %zu/%d entries, version %llu\n",
              applied, skipped, result.bank.size(), result.bank.capacity(),
              static_cast<unsigned long long>(result.bank.version()));
  std::printf("bank written to %s\n", cfg.paths.bank.c_str());
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  require_path(cfg.paths.train_embeddings, "train_embeddings");
  require_path(cfg.paths.test_embeddings, "test_embeddings");
  const Dataset train = normalize_dataset(load_dataset(cfg.paths.train_embeddings));
  const Dataset test = normalize_dataset(load_dataset(cfg.paths.test_embeddings));
  const TemplateSet templates = TemplateSet::load(cfg.paths.templates);

  EvalConfig ec;
  ec.arm = parse_arm(cfg.eval.arm);
  ec.use_sres = cfg.eval.sres;
  ec.runs = cfg.eval.runs;
  ec.seed = cfg.eval.seed;
  ec.top_k = cfg.decs.top_k;
  ec.temperature = cfg.eval.temperature;
  ec.max_output_length = cfg.eval.max_output_length;

  std::optional<Coreset> cs;
  if (ec.arm == Arm::Decs) {
    require_path(cfg.paths.coreset, "coreset");
    cs = load_coreset(cfg.paths.coreset);
  }
  std::optional<ExperienceBank> bank;
  if (ec.use_sres) {
    require_path(cfg.paths.bank, "bank");
    bank = load_bank(cfg.paths.bank);
  }

  Clients clients = make_clients(cfg, &test);
  std::vector<EvalTranscriptEvent> transcript;
  EvalReport report = evaluate(test, train, cs ? &*cs : nullptr,
                               bank ? &*bank : nullptr, cfg.task, *clients.policy, ec,
                               templates, &transcript);
  report.config_fingerprint = cfg.fingerprint();
  report.transcript_path = cfg.paths.eval_transcript;

  if (!cfg.paths.eval_transcript.empty())
    save_eval_transcript(transcript, cfg.paths.eval_transcript);
  if (!cfg.paths.report.empty()) save_report(report, cfg.paths.report);
  std::fputs(report_table(report).c_str(), stdout);
  return 0;
}

int cmd_retrieve(const RunConfig& cfg, const std::string& query_id, int k) {
  require_path(cfg.paths.test_embeddings, "test_embeddings");
  require_path(cfg.paths.coreset, "coreset");
  const Dataset test = normalize_dataset(load_dataset(cfg.paths.test_embeddings));
  const Coreset cs = load_coreset(cfg.paths.coreset);
  const DatasetIndex index(test);
  const EmbeddingRecord& query = index.at(query_id);

  const int top_k = k > 0 ? k : cfg.decs.top_k;
  const auto hits = retrieve_topk(cs, query.vec, top_k);
  std::printf("query %s (class %d: %s)\n", query.id.c_str(), query.label,
              cfg.task.class_names.empty() ? "?" : cfg.task.class_name(query.label).c_str());
  std::printf("rank  key   class  label            similarity      seed id\n");
  for (std::size_t r = 0; r < hits.size(); ++r) {
    const auto& h = hits[r];
    const std::string label = static_cast<int>(cfg.task.class_names.size()) > h.key_class
                                  ? cfg.task.class_name(h.key_class)
                                  : "?";
    std::printf("%-5zu %-5zu %-6d %-16s %.12f  %s\n", r + 1, h.key_index, h.key_class,
                label.c_str(), h.similarity, cs.init_member_ids[h.key_index].c_str());
  }
  return 0;
}

int cmd_synth(const RunConfig& cfg) {
  if (!cfg.has_synth)
    raise(ErrorCode::ConfigError, "config has no [synth] section");
  require_path(cfg.paths.train_embeddings, "train_embeddings");
  require_path(cfg.paths.test_embeddings, "test_embeddings");
  const auto [train, test] = generate_synthetic(cfg.synth);
  save_dataset(train, cfg.paths.train_embeddings);
  save_dataset(test, cfg.paths.test_embeddings);
  std::printf("synthetic data: %zu train, %zu test (dim %d, %d classes)\n", train.size(),
              test.size(), train.dim, train.num_classes);
  std::printf("train written to %s\ntest written to %s\n",
              cfg.paths.train_embeddings.c_str(), cfg.paths.test_embeddings.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discriminative exemplar coresets + self-refined experience bank"};
  app.require_subcommand(1);

  std::string config_path;
  std::string arm_override;
  std::string query_id;
  bool sres_flag = false;
  int runs_override = -1;
  int k_override = -1;
  long long seed_override = -1;

  auto add_config = [&](CLI::App* sub, bool spec_alias = false) {
    sub->add_option("--config", config_path, "TOML run configuration")
        ->required(!spec_alias);
    if (spec_alias)
      sub->add_option("--spec", config_path, "alias for --config");
  };

  CLI::App* optimize = app.add_subcommand("optimize", "optimize the exemplar coreset");
  add_config(optimize);
  CLI::App* evolve = app.add_subcommand("evolve", "evolve the experience bank");
  add_config(evolve);
  CLI::App* eval = app.add_subcommand("eval", "evaluate over the test set");
  add_config(eval);
  eval->add_option("--arm", arm_override, "none|random|topk|decs");
  eval->add_flag("--sres", sres_flag, "include the experience bank in prompts");
  eval->add_option("--runs", runs_override, "number of independent runs");
  eval->add_option("--seed", seed_override, "base evaluation seed");
  CLI::App* retrieve = app.add_subcommand("retrieve", "show top-K exemplars for a query");
  add_config(retrieve);
  retrieve->add_option("--id", query_id, "query record id")->required();
  retrieve->add_option("--k", k_override, "number of exemplars");
  CLI::App* synth = app.add_subcommand("synth", "generate synthetic embeddings");
  add_config(synth, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (config_path.empty())
      micl::raise(micl::ErrorCode::ConfigError, "--config (or --spec) is required");
    micl::RunConfig cfg = micl::RunConfig::load(config_path);
    if (eval->parsed()) {
      if (!arm_override.empty()) cfg.eval.arm = arm_override;
      if (sres_flag) cfg.eval.sres = true;
      if (runs_override > 0) cfg.eval.runs = runs_override;
      if (seed_override >= 0) cfg.eval.seed = static_cast<std::uint64_t>(seed_override);
    }

    if (optimize->parsed()) return cmd_optimize(cfg);
    if (evolve->parsed()) return cmd_evolve(cfg);
    if (eval->parsed()) return cmd_eval(cfg);
    if (retrieve->parsed()) return cmd_retrieve(cfg, query_id, k_override);
    if (synth->parsed()) return cmd_synth(cfg);
  } catch (const micl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
