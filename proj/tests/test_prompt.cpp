#include <catch2/catch_amalgamated.hpp>

#include "micl/prompt.hpp"
#include "test_util.hpp"

using namespace micl;

namespace {

TaskSpec derm_task() {
  TaskSpec t;
  t.name = "dermoscopy triage";
  t.class_names = {"melanoma", "nevus", "basal cell carcinoma"};
  return t;
}

const TemplateSet& templates() {
  static const TemplateSet ts = TemplateSet::load(test_util::templates_dir());
  return ts;
}

ExperienceBank bank_with(const std::vector<std::string>& texts, int capacity = 16) {
  ExperienceBank b(capacity);
  for (const auto& t : texts) {
    Heuristic h;
    h.text = t;
    b = apply_update(b, h, UpdateAction::add(t));
  }
  return b;
}

}  // namespace

TEST_CASE("TemplateSet loads versioned templates") {
  const TemplateSet& ts = templates();
  for (const char* name : {"query_segment", "exemplar_segment", "heuristics_block",
                           "instruction", "summarization", "update", "scoring"}) {
    CHECK(ts.has(name));
    CHECK(ts.version(name) >= 1);
  }
  CHECK(ts.fingerprint().find("instruction:v1") != std::string::npos);

  SECTION("strict placeholder binding") {
    try {
      ts.render("query_segment", {});
      FAIL("expected TemplateError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TemplateError);
    }
  }
}

TEST_CASE("label occurrence counting respects word boundaries") {
  CHECK(count_label_occurrences("the melanoma is clear", "melanoma") == 1);
  CHECK(count_label_occurrences("Melanoma! MELANOMA?", "melanoma") == 2);
  CHECK(count_label_occurrences("melanomatous tissue", "melanoma") == 0);
  CHECK(count_label_occurrences("pre-melanoma stage", "melanoma") == 1);
  CHECK(count_label_occurrences("basal cell carcinoma found", "basal cell carcinoma") == 1);
  CHECK(count_label_occurrences("basal cell carcinomas", "basal cell carcinoma") == 0);
  CHECK(count_label_occurrences("", "melanoma") == 0);
}

TEST_CASE("redact_label masks exactly the label occurrences") {
  const std::string out =
      redact_label("Likely melanoma. ANSWER: melanoma", "melanoma");
  CHECK(out == "Likely [MASKED]. ANSWER: [MASKED]");
  CHECK(count_label_occurrences(out, "melanoma") == 0);
  CHECK(redact_label("melanomatous", "melanoma") == "melanomatous");
}

TEST_CASE("build_inference_prompt composes the segments in order") {
  const TaskSpec task = derm_task();
  const ExperienceBank bank =
      bank_with({"look at border irregularity", "check color variegation",
                 "compare against the most similar exemplar"});
  std::vector<Exemplar> exemplars = {
      {"img/e2.png", 1, 0.81}, {"img/e1.png", 0, 0.93}, {"img/e3.png", 2, 0.55}};

  const MultimodalPrompt p =
      build_inference_prompt("img/query.png", exemplars, bank, task, templates());
  REQUIRE(p.segments.size() == 6);  // query + 3 exemplars + heuristics + instruction
  CHECK(std::holds_alternative<VisualQuery>(p.segments[0]));
  CHECK(std::holds_alternative<HeuristicsBlock>(p.segments[4]));
  CHECK(std::holds_alternative<Instruction>(p.segments[5]));
  CHECK(p.exemplar_count() == 3);
  CHECK(p.heuristic_count() == 3);

  // exemplars sorted by descending similarity with 1-based ranks
  const auto& first = std::get<VisualExemplar>(p.segments[1]);
  CHECK(first.image_ref == "img/e1.png");
  CHECK(first.rank == 1);
  CHECK(first.label_name == "melanoma");
  const auto& last = std::get<VisualExemplar>(p.segments[3]);
  CHECK(last.image_ref == "img/e3.png");
  CHECK(last.similarity == 0.55);

  SECTION("rendering is deterministic and lists attachments in order") {
    const RenderedPrompt r1 = render_prompt(p, templates());
    const RenderedPrompt r2 = render_prompt(p, templates());
    CHECK(r1.text == r2.text);
    REQUIRE(r1.attachments.size() == 4);
    CHECK(r1.attachments[0] == "img/query.png");
    CHECK(r1.attachments[1] == "img/e1.png");
    CHECK(r1.text.find("Diagnostic heuristics") != std::string::npos);
    CHECK(r1.text.find("ANSWER: <class name>") != std::string::npos);
    // all class names offered
    CHECK(r1.text.find("melanoma, nevus, basal cell carcinoma") != std::string::npos);
  }
}

TEST_CASE("empty bank and zero exemplars degenerate cleanly") {
  const TaskSpec task = derm_task();
  const ExperienceBank empty(16);
  const MultimodalPrompt p =
      build_inference_prompt("img/q.png", {}, empty, task, templates());
  REQUIRE(p.segments.size() == 2);  // query + instruction, heuristics block omitted
  CHECK(std::holds_alternative<VisualQuery>(p.segments[0]));
  CHECK(std::holds_alternative<Instruction>(p.segments[1]));
  const RenderedPrompt r = render_prompt(p, templates());
  CHECK(r.text.find("Diagnostic heuristics") == std::string::npos);
}

TEST_CASE("missing image refs are rejected") {
  const TaskSpec task = derm_task();
  const ExperienceBank empty(16);
  try {
    build_inference_prompt("", {}, empty, task, templates());
    FAIL("expected MissingImageRef");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingImageRef);
  }
  try {
    build_inference_prompt("img/q.png", {{"", 0, 0.5}}, empty, task, templates());
    FAIL("expected MissingImageRef");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingImageRef);
  }
}

TEST_CASE("prompt structure invariants are enforced") {
  MultimodalPrompt bad;
  bad.segments.emplace_back(Instruction{"answer now"});
  bad.segments.emplace_back(VisualQuery{"img/q.png"});
  try {
    bad.check_structure();
    FAIL("expected InvariantViolation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvariantViolation);
  }
}

TEST_CASE("summarization prompt masks the ground truth") {
  const MaskSpec mask{true, "melanoma"};
  const std::vector<std::string> rollouts = {
      "Border looks ragged. ANSWER: melanoma",
      "Smooth borders, uniform color. ANSWER: nevus",
      "Mixed signals here. ANSWER: melanoma",
  };
  const std::vector<int> scores = {5, 1, 3};
  const std::string prompt =
      build_summarization_prompt(rollouts, scores, 5, mask, templates());

  CHECK(count_label_occurrences(prompt, "melanoma") == 0);
  CHECK(prompt.find("[MASKED]") != std::string::npos);
  CHECK(prompt.find("score 5/5") != std::string::npos);
  CHECK(prompt.find("score 1/5") != std::string::npos);
  CHECK(prompt.find("ANSWER: nevus") != std::string::npos);  // other labels stay

  SECTION("single rollout is degenerate") {
    try {
      build_summarization_prompt({rollouts[0]}, {5}, 5, mask, templates());
      FAIL("expected DegenerateGroup");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateGroup);
    }
  }
  SECTION("identical scores are degenerate") {
    try {
      build_summarization_prompt(rollouts, {3, 3, 3}, 5, mask, templates());
      FAIL("expected DegenerateGroup");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateGroup);
    }
  }
  SECTION("masking disabled leaves text verbatim") {
    const std::string raw = build_summarization_prompt(
        rollouts, scores, 5, MaskSpec{false, "melanoma"}, templates());
    CHECK(count_label_occurrences(raw, "melanoma") == 2);
  }
}

TEST_CASE("update prompt lists entries, capacity and the grammar") {
  const MaskSpec mask{true, "melanoma"};

  SECTION("entries and remaining slots") {
    const ExperienceBank bank = bank_with({"rule one", "rule two", "rule three"});
    const std::string prompt =
        build_update_prompt(bank, "candidate rule", mask, templates());
    CHECK(prompt.find("[h1] rule one") != std::string::npos);
    CHECK(prompt.find("[h2] rule two") != std::string::npos);
    CHECK(prompt.find("[h3] rule three") != std::string::npos);
    CHECK(prompt.find("Remaining slots: 13") != std::string::npos);
    CHECK(prompt.find("ACTION:") != std::string::npos);
  }
  SECTION("empty bank advertises full capacity") {
    const std::string prompt =
        build_update_prompt(ExperienceBank(16), "cand", mask, templates());
    CHECK(prompt.find("Remaining slots: 16") != std::string::npos);
    CHECK(prompt.find("(none)") != std::string::npos);
  }
  SECTION("full bank forbids Add") {
    std::vector<std::string> sixteen;
    for (int i = 0; i < 16; ++i) sixteen.push_back("rule " + std::to_string(i));
    const std::string prompt =
        build_update_prompt(bank_with(sixteen), "cand", mask, templates());
    CHECK(prompt.find("Remaining slots: 0") != std::string::npos);
    CHECK(prompt.find("Add is forbidden") != std::string::npos);
  }
  SECTION("bank entries and candidate are redacted") {
    const ExperienceBank bank = bank_with({"melanoma shows streaks"});
    const std::string prompt = build_update_prompt(
        bank, "when unsure, melanoma needs asymmetry evidence", mask, templates());
    CHECK(count_label_occurrences(prompt, "melanoma") == 0);
    CHECK(prompt.find("[MASKED] shows streaks") != std::string::npos);
  }
}

TEST_CASE("scoring prompt carries the ground truth and criteria") {
  const TaskSpec task = derm_task();
  const ExperienceBank bank = bank_with({"one rule"});
  const MultimodalPrompt inference = build_inference_prompt(
      "img/q.png", {{"img/e.png", 0, 0.9}}, bank, task, templates());

  const std::string prompt =
      build_scoring_prompt("Edges are irregular. ANSWER: melanoma", inference,
                           "melanoma", default_criteria(), task, templates());
  CHECK(prompt.find("Ground truth diagnosis: melanoma") != std::string::npos);
  CHECK(prompt.find("correctness, validity, comprehensiveness, discriminability, "
                    "consistency") != std::string::npos);
  CHECK(prompt.find("1 labeled exemplar") != std::string::npos);
  CHECK(count_label_occurrences(prompt, "melanoma") == 2);  // rollout + ground truth

  SECTION("empty criteria violate the contract") {
    try {
      build_scoring_prompt("r", inference, "melanoma", {}, task, templates());
      FAIL("expected ValidationError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ValidationError);
    }
  }
}
