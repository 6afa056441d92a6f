#include "xlkg/text.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "xlkg/error.hpp"

namespace xlkg {

namespace {

const icu::Normalizer2& nfkc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status) || n == nullptr) {
    throw Error(ErrorCode::kIo, "ICU NFKC normalizer unavailable");
  }
  return *n;
}

icu::UnicodeString nfkc_normalize(const icu::UnicodeString& in) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfkc().normalize(in, status);
  if (U_FAILURE(status)) {
    throw Error(ErrorCode::kParse, "NFKC normalization failed");
  }
  return out;
}

bool is_space(UChar32 c) { return u_isUWhiteSpace(c) != 0; }

}  // namespace

std::string normalize_phrase(std::string_view raw) {
  icu::UnicodeString s = icu::UnicodeString::fromUTF8(
      icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  s = nfkc_normalize(s);
  s.toLower(icu::Locale::getRoot());
  // Lowercasing can emit sequences that NFKC composes differently.
  s = nfkc_normalize(s);

  icu::UnicodeString collapsed;
  bool pending_space = false;
  for (int32_t i = 0; i < s.length();) {
    UChar32 c = s.char32At(i);
    i += U16_LENGTH(c);
    if (is_space(c)) {
      pending_space = !collapsed.isEmpty();
      continue;
    }
    if (pending_space) {
      collapsed.append(static_cast<UChar>(u' '));
      pending_space = false;
    }
    collapsed.append(c);
  }
  std::string out;
  collapsed.toUTF8String(out);
  return out;
}

std::u32string utf8_to_codepoints(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  const auto len = static_cast<int32_t>(text.size());
  int32_t i = 0;
  while (i < len) {
    UChar32 c;
    U8_NEXT(s, i, len, c);
    out.push_back(c < 0 ? U'�' : static_cast<char32_t>(c));
  }
  return out;
}

std::string codepoints_to_utf8(std::u32string_view cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t c : cps) {
    uint8_t buf[4];
    int32_t n = 0;
    UBool err = false;
    U8_APPEND(buf, n, 4, static_cast<UChar32>(c), err);
    if (err) {
      n = 0;
      U8_APPEND_UNSAFE(buf, n, 0xFFFD);
    }
    out.append(reinterpret_cast<const char*>(buf), static_cast<size_t>(n));
  }
  return out;
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> tokens;
  std::u32string current;
  for (char32_t c : utf8_to_codepoints(text)) {
    if (is_space(static_cast<UChar32>(c))) {
      if (!current.empty()) {
        tokens.push_back(codepoints_to_utf8(current));
        current.clear();
      }
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) tokens.push_back(codepoints_to_utf8(current));
  return tokens;
}

bool is_blank(std::string_view text) {
  for (char32_t c : utf8_to_codepoints(text)) {
    if (!is_space(static_cast<UChar32>(c))) return false;
  }
  return true;
}

bool contains_letter(std::string_view token) {
  for (char32_t c : utf8_to_codepoints(token)) {
    if (u_isalpha(static_cast<UChar32>(c))) return true;
  }
  return false;
}

}  // namespace xlkg
