#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "quranqa/client.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "quranqa/digest.hpp"
#include "quranqa/errors.hpp"

namespace quranqa::extraction {

MockChatClient::MockChatClient(std::string tag, const std::string& fixtures_path)
    : tag_(std::move(tag)), fixtures_path_(fixtures_path) {
  std::ifstream in(fixtures_path, std::ios::binary);
  if (!in) throw ConfigError("cannot open fixtures file: " + fixtures_path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fixtures_path + ":" + std::to_string(lineno) +
                      ": invalid JSON: " + e.what());
    }
    if (!row.is_object() || !row.contains("prompt_sha256") ||
        !row.contains("response") || !row["prompt_sha256"].is_string() ||
        !row["response"].is_string()) {
      throw DataError(fixtures_path + ":" + std::to_string(lineno) +
                      ": expected {\"prompt_sha256\",\"response\"}");
    }
    auto key = row["prompt_sha256"].get<std::string>();
    if (!responses_.emplace(key, row["response"].get<std::string>()).second) {
      throw DataError(fixtures_path + ":" + std::to_string(lineno) +
                      ": duplicate fixture for prompt " + key);
    }
  }
}

std::string MockChatClient::complete(const std::string& prompt) {
  auto key = digest::sha256Hex(prompt);
  auto it = responses_.find(key);
  if (it == responses_.end()) {
    throw ClientError("mock client '" + tag_ + "': no fixture in " +
                      fixtures_path_ + " for prompt sha256 " + key.substr(0, 12));
  }
  return it->second;
}

void HttpClientSettings::validate() const {
  if (tag.empty()) throw ConfigError("http client needs a system tag");
  if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0) {
    throw ConfigError("http client endpoint must start with http:// or https://");
  }
  if (model.empty()) throw ConfigError("http client needs a model name");
  if (timeout_seconds < 1) throw ConfigError("http client timeout must be >= 1s");
  if (max_retries < 0) throw ConfigError("http client max_retries must be >= 0");
  if (backoff_ms < 0) throw ConfigError("http client backoff_ms must be >= 0");
  if (temperature < 0.0 || temperature > 2.0) {
    throw ConfigError("http client temperature must be in [0, 2]");
  }
}

HttpChatClient::HttpChatClient(HttpClientSettings settings, AuditLog* log)
    : settings_(std::move(settings)), log_(log) {
  settings_.validate();
}

std::string HttpChatClient::complete(const std::string& prompt) {
  // Split the endpoint into host base and request path.
  std::size_t scheme_end = settings_.endpoint.find("://") + 3;
  std::size_t path_start = settings_.endpoint.find('/', scheme_end);
  std::string base = path_start == std::string::npos
                         ? settings_.endpoint
                         : settings_.endpoint.substr(0, path_start);
  std::string path = path_start == std::string::npos
                         ? std::string("/v1/chat/completions")
                         : settings_.endpoint.substr(path_start);

  nlohmann::json body{
      {"model", settings_.model},
      {"temperature", settings_.temperature},
      {"messages",
       nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};

  httplib::Headers headers;
  if (!settings_.auth_env.empty()) {
    const char* token = std::getenv(settings_.auth_env.c_str());
    if (!token || !*token) {
      throw ConfigError("environment variable '" + settings_.auth_env +
                        "' is not set for http client '" + settings_.tag + "'");
    }
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }

  std::string payload = body.dump();
  int backoff = settings_.backoff_ms;
  std::string last_failure;
  for (int attempt = 0; attempt <= settings_.max_retries; ++attempt) {
    if (attempt > 0) {
      audit(log_, "http client '" + settings_.tag + "': retrying after " +
                      last_failure);
      if (backoff > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      }
      backoff *= 2;
    }
    httplib::Client cli(base);
    cli.set_connection_timeout(settings_.timeout_seconds, 0);
    cli.set_read_timeout(settings_.timeout_seconds, 0);
    cli.set_write_timeout(settings_.timeout_seconds, 0);
    auto res = cli.Post(path, headers, payload, "application/json");
    if (!res) {
      last_failure = "network error (" + httplib::to_string(res.error()) + ")";
      continue;
    }
    if (res->status == 200) {
      try {
        auto parsed = nlohmann::json::parse(res->body);
        return parsed.at("choices").at(0).at("message").at("content")
            .get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw ClientError("http client '" + settings_.tag +
                          "': malformed completion body: " + e.what());
      }
    }
    if (res->status == 429 || res->status >= 500) {
      last_failure = "status " + std::to_string(res->status);
      continue;
    }
    throw ClientError("http client '" + settings_.tag + "': status " +
                      std::to_string(res->status));
  }
  throw ClientError("http client '" + settings_.tag + "': giving up after " +
                    std::to_string(settings_.max_retries + 1) + " attempts (" +
                    last_failure + ")");
}

}  // namespace quranqa::extraction
