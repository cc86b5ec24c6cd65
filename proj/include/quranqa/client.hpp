#pragma once

#include <map>
#include <memory>
#include <string>

#include "quranqa/audit.hpp"

namespace quranqa::extraction {

// Single-turn chat completion: prompt in, raw text out. Implementations
// throw ClientError on unrecoverable failure.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
  virtual const std::string& tag() const = 0;
};

// Replays canned responses keyed by the SHA-256 of the exact prompt, from a
// JSONL file of {"prompt_sha256","response"} rows. An unknown prompt is a
// ClientError; runs with mocks are fully deterministic and offline.
class MockChatClient : public ChatClient {
 public:
  MockChatClient(std::string tag, const std::string& fixtures_path);
  std::string complete(const std::string& prompt) override;
  const std::string& tag() const override { return tag_; }

 private:
  std::string tag_;
  std::string fixtures_path_;
  std::map<std::string, std::string> responses_;  // prompt sha256 -> response
};

struct HttpClientSettings {
  std::string tag;
  std::string endpoint;  // e.g. http://host:port/v1/chat/completions
  std::string model;
  double temperature = 0.0;
  int timeout_seconds = 30;
  int max_retries = 3;
  int backoff_ms = 250;       // doubles after each failed attempt
  std::string auth_env;       // env var holding a bearer token, optional

  void validate() const;
};

// Minimal chat-completions client: POSTs {model, temperature, messages:[
// {role:"user", content: prompt}]} and reads choices[0].message.content.
// Retries transient failures (network errors and 5xx/429) with exponential
// backoff; non-retryable statuses and malformed bodies raise ClientError.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(HttpClientSettings settings, AuditLog* log = nullptr);
  std::string complete(const std::string& prompt) override;
  const std::string& tag() const override { return settings_.tag; }

 private:
  HttpClientSettings settings_;
  AuditLog* log_ = nullptr;
};

}  // namespace quranqa::extraction
