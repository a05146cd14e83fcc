#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "micl/coreset.hpp"
#include "micl/error.hpp"
#include "micl/rng.hpp"
#include "micl/sres.hpp"
#include "micl/synthetic.hpp"
#include "micl/task.hpp"

namespace micl {

// ---------------------------------------------------------------------------
// Minimal TOML reader. No TOML library ships in this toolchain, so configs
// are restricted to the subset the pipeline needs: [sections], bare keys,
// quoted strings, integers, floats, booleans and single-line arrays of
// scalars, with # comments. Anything else is a hard ConfigError.
// ---------------------------------------------------------------------------

struct TomlValue;
using TomlArray = std::vector<TomlValue>;

struct TomlValue {
  std::variant<std::string, std::int64_t, double, bool, TomlArray> v;
};

class Toml {
 public:
  static Toml parse_file(const std::string& path) {
    if (!std::filesystem::exists(path))
      raise(ErrorCode::FileMissing, "config file not found: " + path);
    std::ifstream in(path);
    if (!in) raise(ErrorCode::IoError, "cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return parse(text, path);
  }

  static Toml parse(const std::string& text, const std::string& where = "<memory>") {
    Toml t;
    std::string section;
    std::size_t line_no = 0;
    std::istringstream stream(text);
    std::string raw;
    while (std::getline(stream, raw)) {
      ++line_no;
      const std::string line = strip_comment(raw, where, line_no);
      const std::string s = trim(line);
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          fail(where, line_no, "unterminated section header");
        section = trim(s.substr(1, s.size() - 2));
        if (section.empty()) fail(where, line_no, "empty section name");
        t.sections_[section];
        continue;
      }
      const std::size_t eq = s.find('=');
      if (eq == std::string::npos) fail(where, line_no, "expected key = value");
      const std::string key = trim(s.substr(0, eq));
      const std::string val = trim(s.substr(eq + 1));
      if (key.empty() || !bare_key(key)) fail(where, line_no, "bad key '" + key + "'");
      if (val.empty()) fail(where, line_no, "missing value for '" + key + "'");
      t.sections_[section][key] = parse_value(val, where, line_no);
    }
    return t;
  }

  bool has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
  }

  bool has_section(const std::string& section) const {
    return sections_.count(section) > 0;
  }

  std::string get_str(const std::string& sec, const std::string& key,
                      const std::string& def = "") const {
    const TomlValue* v = find(sec, key);
    if (!v) return def;
    if (const auto* s = std::get_if<std::string>(&v->v)) return *s;
    raise(ErrorCode::ConfigError, sec + "." + key + " must be a string");
  }

  std::int64_t get_int(const std::string& sec, const std::string& key,
                       std::int64_t def = 0) const {
    const TomlValue* v = find(sec, key);
    if (!v) return def;
    if (const auto* i = std::get_if<std::int64_t>(&v->v)) return *i;
    raise(ErrorCode::ConfigError, sec + "." + key + " must be an integer");
  }

  double get_double(const std::string& sec, const std::string& key, double def = 0) const {
    const TomlValue* v = find(sec, key);
    if (!v) return def;
    if (const auto* d = std::get_if<double>(&v->v)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&v->v))
      return static_cast<double>(*i);
    raise(ErrorCode::ConfigError, sec + "." + key + " must be a number");
  }

  bool get_bool(const std::string& sec, const std::string& key, bool def = false) const {
    const TomlValue* v = find(sec, key);
    if (!v) return def;
    if (const auto* b = std::get_if<bool>(&v->v)) return *b;
    raise(ErrorCode::ConfigError, sec + "." + key + " must be a boolean");
  }

  std::vector<std::string> get_str_array(const std::string& sec,
                                         const std::string& key) const {
    const TomlValue* v = find(sec, key);
    if (!v) return {};
    if (const auto* a = std::get_if<TomlArray>(&v->v)) {
      std::vector<std::string> out;
      for (const auto& e : *a) {
        if (const auto* s = std::get_if<std::string>(&e.v))
          out.push_back(*s);
        else
          raise(ErrorCode::ConfigError, sec + "." + key + " must hold strings");
      }
      return out;
    }
    raise(ErrorCode::ConfigError, sec + "." + key + " must be an array");
  }

 private:
  [[noreturn]] static void fail(const std::string& where, std::size_t line,
                                const std::string& msg) {
    raise(ErrorCode::ConfigError, where + ":" + std::to_string(line) + ": " + msg);
  }

  static std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  static bool bare_key(const std::string& k) {
    for (char c : k)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
        return false;
    return true;
  }

  static std::string strip_comment(const std::string& line, const std::string& where,
                                   std::size_t line_no) {
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (in_str) {
        if (c == '\\') {
          ++i;
        } else if (c == '"') {
          in_str = false;
        }
      } else if (c == '"') {
        in_str = true;
      } else if (c == '#') {
        return line.substr(0, i);
      }
    }
    if (in_str) fail(where, line_no, "unterminated string");
    return line;
  }

  static TomlValue parse_value(const std::string& s, const std::string& where,
                               std::size_t line_no) {
    if (s.front() == '"') {
      if (s.size() < 2 || s.back() != '"')
        fail(where, line_no, "unterminated string");
      std::string out;
      for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        char c = s[i];
        if (c == '\\') {
          if (i + 2 >= s.size()) fail(where, line_no, "dangling escape");
          const char n = s[++i];
          switch (n) {
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            case '"': out += '"'; break;
            case '\\': out += '\\'; break;
            default: fail(where, line_no, std::string("unknown escape \\") + n);
          }
        } else if (c == '"') {
          fail(where, line_no, "text after closing quote");
        } else {
          out += c;
        }
      }
      return {out};
    }
    if (s.front() == '[') {
      if (s.back() != ']') fail(where, line_no, "arrays must close on the same line");
      TomlArray arr;
      std::string inner = s.substr(1, s.size() - 2);
      std::vector<std::string> parts;
      std::string cur;
      bool in_str = false;
      for (std::size_t i = 0; i < inner.size(); ++i) {
        const char c = inner[i];
        if (in_str) {
          cur += c;
          if (c == '\\' && i + 1 < inner.size()) cur += inner[++i];
          else if (c == '"') in_str = false;
        } else if (c == '"') {
          cur += c;
          in_str = true;
        } else if (c == ',') {
          parts.push_back(cur);
          cur.clear();
        } else {
          cur += c;
        }
      }
      if (!trim(cur).empty()) parts.push_back(cur);
      for (const auto& p : parts) {
        const std::string t = trim(p);
        if (t.empty()) fail(where, line_no, "empty array element");
        arr.push_back(parse_value(t, where, line_no));
      }
      return {arr};
    }
    if (s == "true") return {true};
    if (s == "false") return {false};
    // number: integer unless it carries a fractional or exponent part
    const bool is_float = s.find_first_of(".eE") != std::string::npos;
    try {
      std::size_t used = 0;
      if (is_float) {
        const double d = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return {d};
      }
      const long long i = std::stoll(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return {static_cast<std::int64_t>(i)};
    } catch (const std::exception&) {
      fail(where, line_no, "cannot parse value '" + s + "'");
    }
  }

  const TomlValue* find(const std::string& sec, const std::string& key) const {
    auto s = sections_.find(sec);
    if (s == sections_.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    return &k->second;
  }

  std::map<std::string, std::map<std::string, TomlValue>> sections_;
};

// ---------------------------------------------------------------------------
// Pipeline run configuration.
// ---------------------------------------------------------------------------

struct PathsConfig {
  std::string train_embeddings;
  std::string test_embeddings;
  std::string coreset;
  std::string bank;
  std::string initial_bank;  // optional seed bank for evolve
  std::string templates;
  std::string evolution_log;
  std::string evolve_transcript;
  std::string eval_transcript;
  std::string report;
};

struct ModelSection {
  std::string policy = "script";     // script | http | majority | oracle
  std::string evaluator = "script";  // script | http
  std::string script;
  std::string endpoint;
  std::string model_name;
  std::string api_key_env = "MICL_API_KEY";
  int max_retries = 3;
  int timeout_s = 60;
  bool allow_missing_images = false;
};

struct EvalSection {
  int runs = 3;
  std::string arm = "decs";
  bool sres = false;
  std::uint64_t seed = 0;
  double temperature = 0.0;
  int max_output_length = 1024;
};

struct RunConfig {
  PathsConfig paths;
  DecsConfig decs;
  SresConfig sres;
  int bank_capacity = 16;
  TaskSpec task;
  EvalSection eval;
  ModelSection model;
  SynthSpec synth;
  bool has_synth = false;

  static RunConfig load(const std::string& path) {
    const Toml t = Toml::parse_file(path);
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) -> std::string {
      if (p.empty()) return p;
      std::filesystem::path fp(p);
      return fp.is_absolute() ? fp.string() : (base / fp).string();
    };

    RunConfig c;
    c.paths.train_embeddings = resolve(t.get_str("paths", "train_embeddings"));
    c.paths.test_embeddings = resolve(t.get_str("paths", "test_embeddings"));
    c.paths.coreset = resolve(t.get_str("paths", "coreset"));
    c.paths.bank = resolve(t.get_str("paths", "bank"));
    c.paths.initial_bank = resolve(t.get_str("paths", "initial_bank"));
    c.paths.templates = resolve(t.get_str("paths", "templates"));
    c.paths.evolution_log = resolve(t.get_str("paths", "evolution_log"));
    c.paths.evolve_transcript = resolve(t.get_str("paths", "evolve_transcript"));
    c.paths.eval_transcript = resolve(t.get_str("paths", "eval_transcript"));
    c.paths.report = resolve(t.get_str("paths", "report"));

    c.decs.base_size = static_cast<int>(t.get_int("decs", "base_size", 50));
    c.decs.base_epochs = static_cast<int>(t.get_int("decs", "base_epochs", 10));
    c.decs.ref_size = static_cast<int>(t.get_int("decs", "ref_size", 1000));
    c.decs.update_rate = t.get_double("decs", "update_rate", 0.2);
    c.decs.batch_size = static_cast<int>(t.get_int("decs", "batch_size", 128));
    c.decs.seed = static_cast<std::uint64_t>(t.get_int("decs", "seed", 0));
    c.decs.top_k = static_cast<int>(t.get_int("decs", "top_k", 5));

    c.sres.group_size = static_cast<int>(t.get_int("sres", "group_size", 5));
    c.sres.temperature = t.get_double("sres", "temperature", 1.0);
    c.sres.instances = static_cast<int>(t.get_int("sres", "instances", 200));
    c.sres.min_spread = static_cast<int>(t.get_int("sres", "min_spread", 1));
    c.sres.seed = static_cast<std::uint64_t>(t.get_int("sres", "seed", 0));
    c.sres.max_output_length =
        static_cast<int>(t.get_int("sres", "max_output_length", 1024));
    c.bank_capacity = static_cast<int>(t.get_int("sres", "capacity", 16));

    c.task.name = t.get_str("task", "name", "classification");
    c.task.class_names = t.get_str_array("task", "classes");
    c.task.instruction_note = t.get_str("task", "note");
    c.task.multi_label = t.get_bool("task", "multi_label", false);

    c.eval.runs = static_cast<int>(t.get_int("eval", "runs", 3));
    c.eval.arm = t.get_str("eval", "arm", "decs");
    c.eval.sres = t.get_bool("eval", "sres", false);
    c.eval.seed = static_cast<std::uint64_t>(t.get_int("eval", "seed", 0));
    c.eval.temperature = t.get_double("eval", "temperature", 0.0);
    c.eval.max_output_length =
        static_cast<int>(t.get_int("eval", "max_output_length", 1024));

    c.model.policy = t.get_str("model", "policy", "script");
    c.model.evaluator = t.get_str("model", "evaluator", "script");
    c.model.script = resolve(t.get_str("model", "script"));
    c.model.endpoint = t.get_str("model", "endpoint");
    c.model.model_name = t.get_str("model", "model_name");
    c.model.api_key_env = t.get_str("model", "api_key_env", "MICL_API_KEY");
    c.model.max_retries = static_cast<int>(t.get_int("model", "max_retries", 3));
    c.model.timeout_s = static_cast<int>(t.get_int("model", "timeout_s", 60));
    c.model.allow_missing_images = t.get_bool("model", "allow_missing_images", false);

    c.has_synth = t.has_section("synth");
    if (c.has_synth) {
      c.synth.num_classes = static_cast<int>(t.get_int("synth", "classes", 8));
      c.synth.dim = static_cast<int>(t.get_int("synth", "dim", 64));
      c.synth.per_class = static_cast<int>(t.get_int("synth", "per_class", 250));
      c.synth.spread = t.get_double("synth", "spread", 0.2);
      c.synth.noise_axes = static_cast<int>(t.get_int("synth", "noise_axes", 4));
      c.synth.noise_mag = t.get_double("synth", "noise_mag", 0.2);
      c.synth.min_separation_deg = t.get_double("synth", "min_separation_deg", 30.0);
      c.synth.seed = static_cast<std::uint64_t>(t.get_int("synth", "seed", 0));
    }
    return c;
  }

  // Canonical dump of every effective setting; hashed into the report
  // fingerprint after CLI overrides are applied.
  nlohmann::json to_json() const {
    return nlohmann::json{
        {"paths",
         {{"train_embeddings", paths.train_embeddings},
          {"test_embeddings", paths.test_embeddings},
          {"coreset", paths.coreset},
          {"bank", paths.bank},
          {"initial_bank", paths.initial_bank},
          {"templates", paths.templates},
          {"evolution_log", paths.evolution_log},
          {"evolve_transcript", paths.evolve_transcript},
          {"eval_transcript", paths.eval_transcript},
          {"report", paths.report}}},
        {"decs", decs_config_to_json(decs)},
        {"sres",
         {{"group_size", sres.group_size},
          {"temperature", sres.temperature},
          {"instances", sres.instances},
          {"min_spread", sres.min_spread},
          {"seed", sres.seed},
          {"capacity", bank_capacity}}},
        {"task",
         {{"name", task.name},
          {"classes", task.class_names},
          {"note", task.instruction_note},
          {"multi_label", task.multi_label}}},
        {"eval",
         {{"runs", eval.runs},
          {"arm", eval.arm},
          {"sres", eval.sres},
          {"seed", eval.seed},
          {"temperature", eval.temperature}}},
        {"model",
         {{"policy", model.policy},
          {"evaluator", model.evaluator},
          {"script", model.script},
          {"endpoint", model.endpoint},
          {"model_name", model.model_name}}}};
  }

  std::string fingerprint() const {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(to_json().dump())));
    return buf;
  }
};

}  // namespace micl
