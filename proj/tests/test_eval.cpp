#include <catch2/catch_amalgamated.hpp>

#include "micl/eval.hpp"
#include "micl/synthetic.hpp"
#include "test_util.hpp"

using namespace micl;

namespace {

const TemplateSet& templates() {
  static const TemplateSet ts = TemplateSet::load(test_util::templates_dir());
  return ts;
}

TaskSpec synth_task(int num_classes) {
  static const std::vector<std::string> words = {"alpha", "bravo", "charlie", "delta",
                                                 "echo", "foxtrot", "golf", "hotel"};
  TaskSpec t;
  t.name = "synthetic classification";
  t.class_names.assign(words.begin(), words.begin() + num_classes);
  return t;
}

struct EvalFixture {
  Dataset train;
  Dataset test;
  Coreset coreset;
  TaskSpec task;

  explicit EvalFixture(std::uint64_t seed = 31) {
    SynthSpec spec;
    spec.num_classes = 4;
    spec.dim = 32;
    spec.per_class = 40;
    spec.spread = 0.2;
    spec.noise_axes = 3;
    spec.noise_mag = 0.25;
    spec.seed = seed;
    std::tie(train, test) = generate_synthetic(spec);
    DecsConfig cfg;
    cfg.seed = 5;
    coreset = optimize(train, cfg);
    task = synth_task(4);
  }
};

std::map<std::string, std::string> oracle_map(const Dataset& test, const TaskSpec& task) {
  std::map<std::string, std::string> m;
  for (const auto& r : test.records) m[r.image_ref] = task.class_name(r.label);
  return m;
}

}  // namespace

TEST_CASE("parse_arm accepts exactly the four ablation arms") {
  CHECK(parse_arm("none") == Arm::None);
  CHECK(parse_arm("random") == Arm::Random);
  CHECK(parse_arm("topk") == Arm::TopK);
  CHECK(parse_arm("decs") == Arm::Decs);
  for (const char* bad : {"Random", "top-k", "decs+sres", ""}) {
    try {
      parse_arm(bad);
      FAIL("expected ConfigError for: " << bad);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConfigError);
    }
  }
}

TEST_CASE("an always-right policy scores accuracy 1.0") {
  const EvalFixture fx;
  OracleLabelPolicy oracle(oracle_map(fx.test, fx.task));
  EvalConfig cfg;
  cfg.arm = Arm::Decs;
  cfg.runs = 1;
  const EvalReport report = evaluate(fx.test, fx.train, &fx.coreset, nullptr, fx.task,
                                     oracle, cfg, templates());
  CHECK(report.mean_accuracy == 1.0);
  CHECK(report.unparseable_total == 0);
  for (double a : report.per_class_accuracy) CHECK(a == 1.0);
}

TEST_CASE("unparseable answers count as wrong and are reported") {
  const EvalFixture fx;
  MajorityExemplarPolicy majority;  // answers "unknown" when no exemplars exist
  EvalConfig cfg;
  cfg.arm = Arm::None;
  cfg.runs = 1;
  const EvalReport report = evaluate(fx.test, fx.train, nullptr, nullptr, fx.task,
                                     majority, cfg, templates());
  CHECK(report.mean_accuracy == 0.0);
  CHECK(report.unparseable_total == static_cast<int>(fx.test.size()));
}

TEST_CASE("report mean equals the recomputed mean of per-run accuracies") {
  const EvalFixture fx;
  MajorityExemplarPolicy majority;
  EvalConfig cfg;
  cfg.arm = Arm::Random;  // per-run seeds differ, so per-run accuracies differ
  cfg.runs = 3;
  cfg.seed = 100;
  const EvalReport report = evaluate(fx.test, fx.train, nullptr, nullptr, fx.task,
                                     majority, cfg, templates());
  REQUIRE(report.runs.size() == 3);
  double sum = 0.0;
  for (const auto& rr : report.runs) {
    sum += rr.accuracy;
    CHECK(rr.seed == cfg.seed + static_cast<std::uint64_t>(rr.run));
    CHECK(rr.accuracy == static_cast<double>(rr.correct) / rr.total);
  }
  CHECK(report.mean_accuracy == sum / 3.0);

  int per_class_sum = 0;
  for (int n : report.per_class_total) per_class_sum += n;
  CHECK(per_class_sum == static_cast<int>(fx.test.size()) * 3);
}

TEST_CASE("evaluation is deterministic for a fixed seed") {
  const EvalFixture fx;
  EvalConfig cfg;
  cfg.arm = Arm::Random;
  cfg.runs = 2;
  cfg.seed = 9;
  MajorityExemplarPolicy majority;
  std::vector<EvalTranscriptEvent> t1, t2;
  const EvalReport a = evaluate(fx.test, fx.train, nullptr, nullptr, fx.task, majority,
                                cfg, templates(), &t1);
  const EvalReport b = evaluate(fx.test, fx.train, nullptr, nullptr, fx.task, majority,
                                cfg, templates(), &t2);
  CHECK(report_to_json(a) == report_to_json(b));
  REQUIRE(t1.size() == t2.size());
  for (std::size_t i = 0; i < t1.size(); ++i) {
    CHECK(t1[i].prompt == t2[i].prompt);
    CHECK(t1[i].response == t2[i].response);
    CHECK(t1[i].predicted == t2[i].predicted);
  }
}

TEST_CASE("arm ordering matches the ablation structure at desk scale") {
  // High-noise regime: nuisance magnitude above the cluster spread.
  SynthSpec spec;
  spec.num_classes = 8;
  spec.dim = 64;
  spec.per_class = 50;
  spec.spread = 0.2;
  spec.noise_axes = 6;
  spec.noise_mag = 0.3;
  spec.seed = 404;
  const auto [train, test] = generate_synthetic(spec);
  DecsConfig dcfg;
  dcfg.seed = 11;
  const Coreset cs = optimize(train, dcfg);
  const TaskSpec task = synth_task(8);

  ExperienceBank bank(16);
  Heuristic h;
  h.text = "When exemplar votes conflict, weight votes by exemplar similarity.";
  bank = apply_update(bank, h, UpdateAction::add(h.text));

  MajorityExemplarPolicy majority;
  EvalConfig cfg;
  cfg.runs = 1;
  cfg.seed = 1;

  auto accuracy = [&](Arm arm, bool sres) {
    EvalConfig c = cfg;
    c.arm = arm;
    c.use_sres = sres;
    return evaluate(test, train, &cs, &bank, task, majority, c, templates())
        .mean_accuracy;
  };

  const double none = accuracy(Arm::None, false);
  const double random = accuracy(Arm::Random, false);
  const double topk = accuracy(Arm::TopK, false);
  const double decs = accuracy(Arm::Decs, false);
  const double decs_sres = accuracy(Arm::Decs, true);

  INFO("none=" << none << " random=" << random << " topk=" << topk << " decs=" << decs
               << " decs+sres=" << decs_sres);
  CHECK(none < random);
  CHECK(random <= topk);
  CHECK(topk <= decs);
  CHECK(decs - random >= 0.10);
  CHECK(decs_sres >= decs);
  CHECK(decs_sres >= topk);
  CHECK(decs_sres >= random);
}

TEST_CASE("evaluate validates its wiring") {
  const EvalFixture fx;
  MajorityExemplarPolicy majority;
  EvalConfig cfg;
  cfg.arm = Arm::Decs;
  SECTION("decs arm needs a coreset") {
    try {
      evaluate(fx.test, fx.train, nullptr, nullptr, fx.task, majority, cfg, templates());
      FAIL("expected ConfigError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConfigError);
    }
  }
  SECTION("sres needs a bank") {
    cfg.use_sres = true;
    try {
      evaluate(fx.test, fx.train, &fx.coreset, nullptr, fx.task, majority, cfg,
               templates());
      FAIL("expected ConfigError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConfigError);
    }
  }
  SECTION("task/class count mismatch") {
    cfg.use_sres = false;
    const TaskSpec wrong = synth_task(3);
    try {
      evaluate(fx.test, fx.train, &fx.coreset, nullptr, wrong, majority, cfg,
               templates());
      FAIL("expected ConfigError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConfigError);
    }
  }
}
