#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "micl/error.hpp"

namespace micl {

using Json = nlohmann::json;

/// One labeled feature vector produced by an external visual encoder.
struct EmbeddingRecord {
  std::string id;
  int label = 0;
  std::vector<double> vec;
  std::string image_ref;  // empty means no image attached
};

/// An ordered collection of records with a declared dimension and class count.
struct Dataset {
  std::vector<EmbeddingRecord> records;
  int dim = 0;
  int num_classes = 0;

  std::size_t size() const { return records.size(); }
};

inline double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Full invariant check: labels in range, all classes covered, ids unique,
// vectors of declared dimension with finite coordinates.
inline void validate_dataset(const Dataset& ds) {
  if (ds.dim <= 0) raise(ErrorCode::ValidationError, "dim must be positive");
  if (ds.num_classes <= 0)
    raise(ErrorCode::ValidationError, "num_classes must be positive");
  if (ds.records.empty())
    raise(ErrorCode::ValidationError,
          "dataset has no records; every class must appear at least once");

  std::vector<int> class_seen(static_cast<std::size_t>(ds.num_classes), 0);
  std::unordered_set<std::string> ids;
  ids.reserve(ds.records.size());

  for (const auto& r : ds.records) {
    if (static_cast<int>(r.vec.size()) != ds.dim)
      raise(ErrorCode::DimensionMismatch,
            "record '" + r.id + "' has " + std::to_string(r.vec.size()) +
                " coordinates, expected " + std::to_string(ds.dim));
    for (double x : r.vec)
      if (!std::isfinite(x))
        raise(ErrorCode::ValidationError,
              "record '" + r.id + "' has a non-finite coordinate");
    if (r.label < 0 || r.label >= ds.num_classes)
      raise(ErrorCode::UnknownClass,
            "record '" + r.id + "' has label " + std::to_string(r.label) +
                ", expected [0, " + std::to_string(ds.num_classes) + ")");
    class_seen[static_cast<std::size_t>(r.label)] = 1;
    if (!ids.insert(r.id).second)
      raise(ErrorCode::DuplicateId, "record id '" + r.id + "' appears twice");
  }
  for (int c = 0; c < ds.num_classes; ++c)
    if (!class_seen[static_cast<std::size_t>(c)])
      raise(ErrorCode::UnknownClass,
            "class " + std::to_string(c) + " declared but absent from records");
}

inline bool is_normalized(const Dataset& ds, double tol = 1e-9) {
  for (const auto& r : ds.records)
    if (std::fabs(l2_norm(r.vec) - 1.0) > tol) return false;
  return true;
}

// File format: UTF-8 JSON lines. First line is the header object
// {"dim": d, "num_classes": C}; every following line is one record
// {"id": str, "label": int, "vector": [..], "image": optional str}.
inline Dataset load_dataset(const std::string& path) {
  if (!std::filesystem::exists(path))
    raise(ErrorCode::FileMissing, "embeddings file not found: " + path);
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);

  Dataset ds;
  std::string line;
  std::size_t line_no = 0;

  auto parse_line = [&](const std::string& text) -> Json {
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::exception& e) {
      raise(ErrorCode::ParseError,
            path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object())
      raise(ErrorCode::ParseError,
            path + ":" + std::to_string(line_no) + ": expected a JSON object");
    return j;
  };

  // header
  for (;;) {
    if (!std::getline(in, line))
      raise(ErrorCode::ParseError, path + ": missing header line");
    ++line_no;
    if (!line.empty()) break;
  }
  {
    Json h = parse_line(line);
    if (!h.contains("dim") || !h.contains("num_classes") ||
        !h["dim"].is_number_integer() || !h["num_classes"].is_number_integer())
      raise(ErrorCode::ParseError,
            path + ":1: header must be {\"dim\": int, \"num_classes\": int}");
    ds.dim = h["dim"].get<int>();
    ds.num_classes = h["num_classes"].get<int>();
    if (ds.dim <= 0 || ds.num_classes <= 0)
      raise(ErrorCode::ParseError, path + ":1: dim and num_classes must be positive");
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json j = parse_line(line);
    EmbeddingRecord r;
    if (!j.contains("id") || !j["id"].is_string() || !j.contains("label") ||
        !j["label"].is_number_integer() || !j.contains("vector") ||
        !j["vector"].is_array())
      raise(ErrorCode::ParseError,
            path + ":" + std::to_string(line_no) +
                ": record needs string id, integer label, array vector");
    r.id = j["id"].get<std::string>();
    r.label = j["label"].get<int>();
    if (r.label < 0 || r.label >= ds.num_classes)
      raise(ErrorCode::UnknownClass,
            path + ":" + std::to_string(line_no) + ": label " +
                std::to_string(r.label) + " outside [0, " +
                std::to_string(ds.num_classes) + ")");
    const auto& vec = j["vector"];
    if (static_cast<int>(vec.size()) != ds.dim)
      raise(ErrorCode::DimensionMismatch,
            path + ":" + std::to_string(line_no) + ": vector has " +
                std::to_string(vec.size()) + " coordinates, expected " +
                std::to_string(ds.dim));
    r.vec.reserve(vec.size());
    for (const auto& x : vec) {
      if (!x.is_number())
        raise(ErrorCode::ParseError,
              path + ":" + std::to_string(line_no) + ": non-numeric coordinate");
      r.vec.push_back(x.get<double>());
    }
    if (j.contains("image")) {
      if (!j["image"].is_string())
        raise(ErrorCode::ParseError,
              path + ":" + std::to_string(line_no) + ": image must be a string");
      r.image_ref = j["image"].get<std::string>();
    }
    ds.records.push_back(std::move(r));
  }

  validate_dataset(ds);
  return ds;
}

// Serialization is lossless: nlohmann emits the shortest decimal that
// round-trips each double exactly.
inline void save_dataset(const Dataset& ds, const std::string& path) {
  validate_dataset(ds);
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  Json header{{"dim", ds.dim}, {"num_classes", ds.num_classes}};
  out << header.dump() << "\n";
  for (const auto& r : ds.records) {
    Json j{{"id", r.id}, {"label", r.label}, {"vector", r.vec}};
    if (!r.image_ref.empty()) j["image"] = r.image_ref;
    out << j.dump() << "\n";
  }
  if (!out.good()) raise(ErrorCode::IoError, "write failed for " + path);
}

// Replaces every vector by vector / ||vector||_2. Records keep their order,
// ids and labels. Rejects zero vectors (no direction).
inline Dataset normalize_dataset(Dataset ds) {
  for (auto& r : ds.records) {
    const double n = l2_norm(r.vec);
    if (n == 0.0)
      raise(ErrorCode::ZeroVector, "record '" + r.id + "' has zero norm");
    for (double& x : r.vec) x /= n;
  }
  return ds;
}

/// Lookup from record id to its index in Dataset::records.
class DatasetIndex {
 public:
  explicit DatasetIndex(const Dataset& ds) : ds_(&ds) {
    by_id_.reserve(ds.records.size());
    for (std::size_t i = 0; i < ds.records.size(); ++i)
      by_id_.emplace(ds.records[i].id, i);
  }

  const EmbeddingRecord& at(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end())
      raise(ErrorCode::UnknownId, "no record with id '" + id + "'");
    return ds_->records[it->second];
  }

  bool contains(const std::string& id) const { return by_id_.count(id) > 0; }

 private:
  const Dataset* ds_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

}  // namespace micl
