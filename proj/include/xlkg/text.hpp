#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace xlkg {

/// Canonical form used for keyphrase comparison everywhere in the pipeline:
/// Unicode NFKC, lowercase, whitespace runs collapsed to one ASCII space and
/// trimmed at both ends. Idempotent. Invalid UTF-8 is replaced, not rejected.
std::string normalize_phrase(std::string_view raw);

/// Splits on Unicode whitespace, dropping empty tokens.
std::vector<std::string> split_whitespace(std::string_view text);

/// Decodes UTF-8 into code points (U+FFFD for malformed sequences).
std::u32string utf8_to_codepoints(std::string_view text);
std::string codepoints_to_utf8(std::u32string_view cps);

bool is_blank(std::string_view text);

bool contains_letter(std::string_view token);

}  // namespace xlkg
