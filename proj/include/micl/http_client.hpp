#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "micl/error.hpp"
#include "micl/model_client.hpp"

namespace micl {

struct HttpClientConfig {
  std::string endpoint;  // scheme://host[:port]/path
  std::string api_key;
  std::string model_name;
  int max_retries = 3;     // retries after the first attempt
  int backoff_ms = 250;    // doubled per retry
  int timeout_s = 60;
  bool allow_missing_images = false;  // skip unresolvable attachments instead of failing
};

namespace detail {

struct ParsedUrl {
  bool https = false;
  std::string host;
  int port = 80;
  std::string path = "/";
};

inline ParsedUrl parse_url(const std::string& url) {
  ParsedUrl u;
  std::string rest;
  if (url.rfind("https://", 0) == 0) {
    u.https = true;
    u.port = 443;
    rest = url.substr(8);
  } else if (url.rfind("http://", 0) == 0) {
    rest = url.substr(7);
  } else {
    raise(ErrorCode::ConfigError, "endpoint must start with http:// or https://");
  }
  const std::size_t slash = rest.find('/');
  std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
  if (slash != std::string::npos) u.path = rest.substr(slash);
  const std::size_t colon = hostport.find(':');
  if (colon != std::string::npos) {
    u.host = hostport.substr(0, colon);
    try {
      u.port = std::stoi(hostport.substr(colon + 1));
    } catch (...) {
      raise(ErrorCode::ConfigError, "bad port in endpoint '" + url + "'");
    }
  } else {
    u.host = hostport;
  }
  if (u.host.empty()) raise(ErrorCode::ConfigError, "endpoint has no host");
  return u;
}

inline std::string base64_encode(const std::string& bytes) {
  static const char* alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 2 < bytes.size()) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                       static_cast<unsigned char>(bytes[i + 2]);
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += alphabet[(v >> 6) & 63];
    out += alphabet[v & 63];
    i += 3;
  }
  if (i + 1 == bytes.size()) {
    const unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == bytes.size()) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += alphabet[(v >> 6) & 63];
    out += "=";
  }
  return out;
}

inline std::string guess_mime(const std::string& path) {
  auto ends_with = [&](const char* suf) {
    const std::string s(suf);
    return path.size() >= s.size() &&
           TaskSpec::lowercase(path.substr(path.size() - s.size())) == s;
  };
  if (ends_with(".png")) return "image/png";
  if (ends_with(".jpg") || ends_with(".jpeg")) return "image/jpeg";
  if (ends_with(".webp")) return "image/webp";
  return "application/octet-stream";
}

}  // namespace detail

// Chat-completion wire client. One synchronous request per generate() call,
// with bounded exponential-backoff retries on transport failures, 429 and
// 5xx statuses. Attachments that are http(s) URLs pass through; local files
// are inlined as base64 data URLs.
class HttpModelClient : public ModelClient {
 public:
  explicit HttpModelClient(HttpClientConfig cfg) : cfg_(std::move(cfg)) {
    url_ = detail::parse_url(cfg_.endpoint);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (url_.https)
      raise(ErrorCode::ConfigError, "built without TLS support; use an http endpoint");
#endif
  }

  GenerationResponse generate(const GenerationRequest& req) override {
    req.validate();
    const std::string body = build_body(req);

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(
            std::chrono::milliseconds(cfg_.backoff_ms << (attempt - 1)));
      httplib::Result res = post(body);
      if (!res) {
        last_error = httplib::to_string(res.error());
        if (res.error() == httplib::Error::ConnectionTimeout ||
            res.error() == httplib::Error::Read || res.error() == httplib::Error::Write)
          continue;  // transient
        continue;    // connection refused etc. may also recover
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        raise(ErrorCode::Transport, "HTTP " + std::to_string(res->status) + ": " +
                                        excerpt(res->body));
      return parse_body(res->body, req);
    }
    if (last_error.find("imeout") != std::string::npos)
      raise(ErrorCode::Timeout, "request timed out after " +
                                    std::to_string(cfg_.max_retries + 1) + " attempts");
    raise(ErrorCode::Transport, "request failed after " +
                                    std::to_string(cfg_.max_retries + 1) +
                                    " attempts: " + last_error);
  }

 private:
  static std::string excerpt(const std::string& body) {
    return body.size() <= 200 ? body : body.substr(0, 200) + "...";
  }

  httplib::Result post(const std::string& body) {
    httplib::Headers headers;
    if (!cfg_.api_key.empty())
      headers.emplace("Authorization", "Bearer " + cfg_.api_key);
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
    if (url_.https) {
      httplib::SSLClient cli(url_.host, url_.port);
      cli.set_connection_timeout(cfg_.timeout_s);
      cli.set_read_timeout(cfg_.timeout_s);
      return cli.Post(url_.path, headers, body, "application/json");
    }
#endif
    httplib::Client cli(url_.host, url_.port);
    cli.set_connection_timeout(cfg_.timeout_s);
    cli.set_read_timeout(cfg_.timeout_s);
    return cli.Post(url_.path, headers, body, "application/json");
  }

  std::string resolve_attachment(const std::string& ref) const {
    if (ref.rfind("http://", 0) == 0 || ref.rfind("https://", 0) == 0) return ref;
    if (std::filesystem::is_regular_file(ref)) {
      std::ifstream in(ref, std::ios::binary);
      std::ostringstream bytes;
      bytes << in.rdbuf();
      return "data:" + detail::guess_mime(ref) +
             ";base64," + detail::base64_encode(bytes.str());
    }
    return {};  // unresolvable
  }

  std::string build_body(const GenerationRequest& req) const {
    nlohmann::json content = nlohmann::json::array();
    content.push_back({{"type", "text"}, {"text", req.prompt.text}});
    for (const auto& ref : req.prompt.attachments) {
      const std::string url = resolve_attachment(ref);
      if (url.empty()) {
        if (cfg_.allow_missing_images) continue;
        raise(ErrorCode::AttachmentUnresolvable,
              "'" + ref + "' is neither a URL nor a readable file");
      }
      content.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
    }
    nlohmann::json body{
        {"model", cfg_.model_name},
        {"messages", nlohmann::json::array({nlohmann::json{
                         {"role", "user"}, {"content", content}}})},
        {"temperature", req.temperature},
        {"n", req.num_samples},
        {"max_tokens", req.max_output_length}};
    return body.dump();
  }

  GenerationResponse parse_body(const std::string& body,
                                const GenerationRequest& req) const {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      raise(ErrorCode::Transport,
            std::string("malformed response body: ") + e.what() + " in: " + excerpt(body));
    }
    GenerationResponse resp;
    try {
      for (const auto& choice : j.at("choices"))
        resp.texts.push_back(choice.at("message").at("content").get<std::string>());
      if (j.contains("usage")) {
        resp.prompt_tokens = j["usage"].value("prompt_tokens", 0ULL);
        resp.completion_tokens = j["usage"].value("completion_tokens", 0ULL);
      }
      resp.model_id = j.value("model", cfg_.model_name);
    } catch (const nlohmann::json::exception& e) {
      raise(ErrorCode::Transport,
            std::string("unexpected response shape: ") + e.what() + " in: " + excerpt(body));
    }
    if (static_cast<int>(resp.texts.size()) != req.num_samples)
      raise(ErrorCode::Transport,
            "endpoint returned " + std::to_string(resp.texts.size()) +
                " completions, expected " + std::to_string(req.num_samples));
    return resp;
  }

  HttpClientConfig cfg_;
  detail::ParsedUrl url_;
};

}  // namespace micl
