#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "micl/error.hpp"

namespace micl {

// Prompt templates are text files, one per prompt kind, with {{name}}
// placeholders. The first line of each file is a header of the form
//   # micl-template <name> v<version>
// which is stripped on load; the version is recorded so transcripts and
// reports can pin the exact template generation they were produced with.
class TemplateSet {
 public:
  static TemplateSet load(const std::string& dir) {
    if (!std::filesystem::is_directory(dir))
      raise(ErrorCode::FileMissing, "template directory not found: " + dir);
    TemplateSet ts;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".tmpl")
        files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) ts.add_file(p.string());
    if (ts.templates_.empty())
      raise(ErrorCode::TemplateError, "no .tmpl files in " + dir);
    return ts;
  }

  bool has(const std::string& name) const { return templates_.count(name) > 0; }

  int version(const std::string& name) const { return entry(name).version; }

  // "name:vN,name:vN,..." for config fingerprints and transcript headers.
  std::string fingerprint() const {
    std::string out;
    for (const auto& [name, e] : templates_) {
      if (!out.empty()) out += ",";
      out += name + ":v" + std::to_string(e.version);
    }
    return out;
  }

  // Strict substitution: every {{placeholder}} in the template must be bound.
  // Unused bindings are tolerated.
  std::string render(const std::string& name,
                     const std::map<std::string, std::string>& values) const {
    const std::string& body = entry(name).body;
    std::string out;
    out.reserve(body.size());
    std::size_t pos = 0;
    while (pos < body.size()) {
      const std::size_t open = body.find("{{", pos);
      if (open == std::string::npos) {
        out.append(body, pos, std::string::npos);
        break;
      }
      out.append(body, pos, open - pos);
      const std::size_t close = body.find("}}", open + 2);
      if (close == std::string::npos)
        raise(ErrorCode::TemplateError, name + ": unterminated placeholder");
      const std::string key = body.substr(open + 2, close - open - 2);
      auto it = values.find(key);
      if (it == values.end())
        raise(ErrorCode::TemplateError, name + ": no value for placeholder {{" + key + "}}");
      out += it->second;
      pos = close + 2;
    }
    return out;
  }

 private:
  struct Entry {
    std::string body;
    int version = 0;
  };

  const Entry& entry(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end())
      raise(ErrorCode::TemplateError, "no template named '" + name + "'");
    return it->second;
  }

  void add_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::IoError, "cannot open " + path);
    std::string header;
    if (!std::getline(in, header))
      raise(ErrorCode::TemplateError, path + ": empty template file");
    std::istringstream hs(header);
    std::string hash, tag, name, ver;
    hs >> hash >> tag >> name >> ver;
    if (hash != "#" || tag != "micl-template" || name.empty() || ver.size() < 2 ||
        ver[0] != 'v')
      raise(ErrorCode::TemplateError,
            path + ": first line must be '# micl-template <name> v<version>'");
    Entry e;
    try {
      e.version = std::stoi(ver.substr(1));
    } catch (...) {
      raise(ErrorCode::TemplateError, path + ": bad version '" + ver + "'");
    }
    std::ostringstream body;
    body << in.rdbuf();
    e.body = body.str();
    templates_[name] = std::move(e);
  }

  std::map<std::string, Entry> templates_;
};

}  // namespace micl
