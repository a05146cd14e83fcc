#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "micl/embedding.hpp"
#include "test_util.hpp"

using namespace micl;

namespace {

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  for (const auto& l : lines) out << l << "\n";
}

}  // namespace

TEST_CASE("load_dataset reads well-formed files") {
  test_util::TempDir tmp("embed");
  const std::string path = tmp.file("train.jsonl");
  write_lines(path, {
                        R"({"dim": 4, "num_classes": 2})",
                        R"({"id": "a", "label": 0, "vector": [1.0, 0.0, 0.0, 0.0]})",
                        R"({"id": "b", "label": 1, "vector": [0.0, 1.0, 0.0, 0.0], "image": "img/b.png"})",
                        R"({"id": "c", "label": 0, "vector": [0.5, 0.5, 0.5, 0.5]})",
                    });
  const Dataset ds = load_dataset(path);
  REQUIRE(ds.size() == 3);
  REQUIRE(ds.dim == 4);
  REQUIRE(ds.num_classes == 2);
  CHECK(ds.records[1].image_ref == "img/b.png");
  CHECK(ds.records[0].image_ref.empty());
}

TEST_CASE("load_dataset rejects contract violations") {
  test_util::TempDir tmp("embed");
  const std::string path = tmp.file("bad.jsonl");

  SECTION("missing file") {
    try {
      load_dataset(tmp.file("nope.jsonl"));
      FAIL("expected FileMissing");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::FileMissing);
    }
  }
  SECTION("dimension mismatch") {
    write_lines(path, {R"({"dim": 4, "num_classes": 1})",
                       R"({"id": "a", "label": 0, "vector": [1, 2, 3]})"});
    try {
      load_dataset(path);
      FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DimensionMismatch);
    }
  }
  SECTION("label out of range") {
    write_lines(path, {R"({"dim": 2, "num_classes": 2})",
                       R"({"id": "a", "label": 2, "vector": [1, 0]})"});
    try {
      load_dataset(path);
      FAIL("expected UnknownClass");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnknownClass);
    }
  }
  SECTION("declared class absent from all records") {
    write_lines(path, {R"({"dim": 2, "num_classes": 3})",
                       R"({"id": "a", "label": 0, "vector": [1, 0]})",
                       R"({"id": "b", "label": 1, "vector": [0, 1]})"});
    try {
      load_dataset(path);
      FAIL("expected UnknownClass");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnknownClass);
    }
  }
  SECTION("duplicate id") {
    write_lines(path, {R"({"dim": 2, "num_classes": 1})",
                       R"({"id": "a", "label": 0, "vector": [1, 0]})",
                       R"({"id": "a", "label": 0, "vector": [0, 1]})"});
    try {
      load_dataset(path);
      FAIL("expected DuplicateId");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DuplicateId);
    }
  }
  SECTION("garbage line") {
    write_lines(path, {R"({"dim": 2, "num_classes": 1})", "not json"});
    try {
      load_dataset(path);
      FAIL("expected ParseError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
    }
  }
}

TEST_CASE("normalize_dataset rescales to unit norm") {
  Dataset ds;
  ds.dim = 2;
  ds.num_classes = 1;
  ds.records.push_back({"a", 0, {3.0, 4.0}, ""});
  const Dataset out = normalize_dataset(ds);
  CHECK(out.records[0].vec[0] == Catch::Approx(0.6).margin(1e-15));
  CHECK(out.records[0].vec[1] == Catch::Approx(0.8).margin(1e-15));

  SECTION("unit vectors unchanged") {
    Dataset unit;
    unit.dim = 2;
    unit.num_classes = 1;
    unit.records.push_back({"u", 0, {1.0, 0.0}, ""});
    const Dataset n = normalize_dataset(unit);
    CHECK(n.records[0].vec[0] == 1.0);
    CHECK(n.records[0].vec[1] == 0.0);
  }
  SECTION("zero vector rejected") {
    Dataset zero;
    zero.dim = 2;
    zero.num_classes = 1;
    zero.records.push_back({"z", 0, {0.0, 0.0}, ""});
    try {
      normalize_dataset(zero);
      FAIL("expected ZeroVector");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ZeroVector);
    }
  }
}

TEST_CASE("normalize_dataset is idempotent within 1e-12") {
  Dataset ds = test_util::make_dataset(50, 8, 4);
  for (auto& r : ds.records)
    for (auto& x : r.vec) x *= 3.7;  // denormalize
  const Dataset once = normalize_dataset(ds);
  const Dataset twice = normalize_dataset(once);
  for (std::size_t i = 0; i < once.records.size(); ++i)
    for (std::size_t k = 0; k < once.records[i].vec.size(); ++k)
      CHECK(std::fabs(once.records[i].vec[k] - twice.records[i].vec[k]) < 1e-12);
}

TEST_CASE("save/load round-trip is bit-exact") {
  test_util::TempDir tmp("embed");
  Dataset ds = test_util::make_dataset(40, 6, 3);
  // adversarial coordinates: subnormal-ish, negative, long decimals
  ds.records[0].vec = {1.0 / 3.0, -2.0e-13, 0.1234567890123456789, 1e300, -0.0, 5.5};

  const std::string path = tmp.file("roundtrip.jsonl");
  save_dataset(ds, path);
  const Dataset back = load_dataset(path);
  REQUIRE(back.size() == ds.size());
  REQUIRE(back.dim == ds.dim);
  REQUIRE(back.num_classes == ds.num_classes);
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    CHECK(back.records[i].id == ds.records[i].id);
    CHECK(back.records[i].label == ds.records[i].label);
    CHECK(back.records[i].image_ref == ds.records[i].image_ref);
    for (std::size_t k = 0; k < ds.records[i].vec.size(); ++k)
      CHECK(back.records[i].vec[k] == ds.records[i].vec[k]);  // bitwise
  }
}

TEST_CASE("save_dataset validates before writing") {
  test_util::TempDir tmp("embed");
  SECTION("empty dataset") {
    Dataset empty;
    empty.dim = 4;
    empty.num_classes = 2;
    try {
      save_dataset(empty, tmp.file("x.jsonl"));
      FAIL("expected ValidationError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ValidationError);
    }
  }
  SECTION("unwritable destination") {
    const Dataset ds = test_util::make_dataset(4, 2, 2);
    try {
      save_dataset(ds, "/nonexistent-dir/out.jsonl");
      FAIL("expected IoError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::IoError);
    }
  }
}

TEST_CASE("DatasetIndex resolves ids") {
  const Dataset ds = test_util::make_dataset(10, 4, 2);
  const DatasetIndex idx(ds);
  CHECK(idx.at("r3").id == "r3");
  CHECK(idx.contains("r9"));
  CHECK_FALSE(idx.contains("r10"));
  try {
    idx.at("missing");
    FAIL("expected UnknownId");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownId);
  }
}
