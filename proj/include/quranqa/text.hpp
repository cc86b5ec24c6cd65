#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace quranqa::text {

// Decodes UTF-8 into codepoints; malformed bytes become U+FFFD.
std::vector<char32_t> decodeUtf8(std::string_view s);

void appendUtf8(std::string& out, char32_t cp);

std::string encodeUtf8(const std::vector<char32_t>& codepoints);

// Canonical text view used for substring checks and span deduplication:
// hamza/madda carrier sequences composed, tashkil and tatweel stripped,
// whitespace runs collapsed to single spaces, ends trimmed. Letter forms
// (alef variants, ta marbuta, alef maqsura) are preserved.
std::string normalizeText(std::string_view s);

// normalizeText plus retrieval-side unification: alef variants -> bare alef,
// alef maqsura -> ya, ta marbuta -> ha, ASCII lowercased.
std::string normalizeForSearch(std::string_view s);

// normalizeForSearch, then split on whitespace and punctuation. Deterministic;
// empty input yields an empty list.
std::vector<std::string> tokenize(std::string_view s);

}  // namespace quranqa::text
