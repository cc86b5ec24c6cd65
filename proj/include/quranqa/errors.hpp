#pragma once

#include <stdexcept>
#include <string>

namespace quranqa {

// Exit-code mapping for the CLI: ConfigError -> 1, DataError -> 2, ClientError -> 3.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

struct ClientError : std::runtime_error {
  explicit ClientError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace quranqa
