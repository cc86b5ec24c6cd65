#pragma once

#include <string>
#include <string_view>

namespace quranqa::digest {

// Lowercase hex SHA-256 of a byte string.
std::string sha256Hex(std::string_view data);

// SHA-256 of a file's contents; throws DataError if the file cannot be read.
std::string sha256HexFile(const std::string& path);

}  // namespace quranqa::digest
