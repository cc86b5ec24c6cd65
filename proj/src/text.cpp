#include "quranqa/text.hpp"

#include <cctype>

namespace quranqa::text {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

// Arabic combining marks removed by normalization: honorifics (0610-061A),
// tashkil including tanwin/shadda/sukun and the hamza/madda marks left over
// after composition (064B-065F), dagger alef (0670), and the Quranic
// annotation signs used in Uthmani script (06D6-06ED block, non-letters).
bool isStrippedMark(char32_t cp) {
  if (cp >= 0x0610 && cp <= 0x061A) return true;
  if (cp >= 0x064B && cp <= 0x065F) return true;
  if (cp == 0x0670) return true;
  if (cp >= 0x06D6 && cp <= 0x06DC) return true;
  if (cp >= 0x06DF && cp <= 0x06E4) return true;
  if (cp == 0x06E7 || cp == 0x06E8) return true;
  if (cp >= 0x06EA && cp <= 0x06ED) return true;
  return false;
}

constexpr char32_t kTatweel = 0x0640;

// Canonical compositions for hamza/madda carriers, the only combining
// sequences that matter once tashkil is stripped.
char32_t composeHamza(char32_t base, char32_t mark) {
  switch (mark) {
    case 0x0653:  // madda above
      return base == 0x0627 ? 0x0622 : 0;
    case 0x0654:  // hamza above
      if (base == 0x0627) return 0x0623;
      if (base == 0x0648) return 0x0624;
      if (base == 0x064A) return 0x0626;
      return 0;
    case 0x0655:  // hamza below
      return base == 0x0627 ? 0x0625 : 0;
    default:
      return 0;
  }
}

bool isSpace(char32_t cp) {
  return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\f' ||
         cp == U'\v' || cp == 0x00A0 || cp == 0x2000 || cp == 0x2001 || cp == 0x2002 ||
         cp == 0x2003 || cp == 0x2009 || cp == 0x200B || cp == 0x3000;
}

char32_t unifyForSearch(char32_t cp) {
  switch (cp) {
    case 0x0622:  // alef madda
    case 0x0623:  // alef hamza above
    case 0x0625:  // alef hamza below
    case 0x0671:  // alef wasla
      return 0x0627;
    case 0x0649:  // alef maqsura
      return 0x064A;
    case 0x0629:  // ta marbuta
      return 0x0647;
    default:
      if (cp < 0x80) return static_cast<char32_t>(std::tolower(static_cast<int>(cp)));
      return cp;
  }
}

bool isTokenChar(char32_t cp) {
  if (cp < 0x80) return std::isalnum(static_cast<int>(cp)) != 0;
  if (cp >= 0x0620 && cp <= 0x064A) return true;  // core Arabic letters + hamza
  if (cp >= 0x0660 && cp <= 0x0669) return true;  // Arabic-Indic digits
  if (cp >= 0x066E && cp <= 0x06D3) return true;  // extended letters
  if (cp >= 0x06F0 && cp <= 0x06F9) return true;  // extended digits
  if (cp >= 0x06FA && cp <= 0x06FF) return true;
  if (cp >= 0x0750 && cp <= 0x077F) return true;  // Arabic supplement
  return false;
}

std::vector<char32_t> normalizeCodepoints(std::string_view s, bool unify) {
  std::vector<char32_t> in = decodeUtf8(s);

  // Compose hamza/madda pairs before mark stripping so precomposed and
  // decomposed spellings normalize identically.
  std::vector<char32_t> composed;
  composed.reserve(in.size());
  for (char32_t cp : in) {
    if (!composed.empty()) {
      if (char32_t merged = composeHamza(composed.back(), cp); merged != 0) {
        composed.back() = merged;
        continue;
      }
    }
    composed.push_back(cp);
  }

  std::vector<char32_t> out;
  out.reserve(composed.size());
  bool pendingSpace = false;
  for (char32_t cp : composed) {
    if (isStrippedMark(cp) || cp == kTatweel) continue;
    if (isSpace(cp)) {
      pendingSpace = !out.empty();
      continue;
    }
    if (pendingSpace) {
      out.push_back(U' ');
      pendingSpace = false;
    }
    out.push_back(unify ? unifyForSearch(cp) : cp);
  }
  return out;
}

}  // namespace

std::vector<char32_t> decodeUtf8(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char b0 = static_cast<unsigned char>(s[i]);
    char32_t cp = kReplacement;
    std::size_t len = 1;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(kReplacement);
      break;
    }
    bool valid = true;
    for (std::size_t k = 1; k < len; ++k) {
      unsigned char bk = static_cast<unsigned char>(s[i + k]);
      if ((bk & 0xC0) != 0x80) {
        valid = false;
        break;
      }
      cp = (cp << 6) | (bk & 0x3F);
    }
    if (!valid || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

void appendUtf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string encodeUtf8(const std::vector<char32_t>& codepoints) {
  std::string out;
  out.reserve(codepoints.size() * 2);
  for (char32_t cp : codepoints) appendUtf8(out, cp);
  return out;
}

std::string normalizeText(std::string_view s) {
  return encodeUtf8(normalizeCodepoints(s, /*unify=*/false));
}

std::string normalizeForSearch(std::string_view s) {
  return encodeUtf8(normalizeCodepoints(s, /*unify=*/true));
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<char32_t> cps = normalizeCodepoints(s, /*unify=*/true);
  std::vector<std::string> tokens;
  std::string current;
  for (char32_t cp : cps) {
    if (isTokenChar(cp)) {
      appendUtf8(current, cp);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

}  // namespace quranqa::text
