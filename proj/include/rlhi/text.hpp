#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rlhi::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Lowercases and collapses every run of whitespace to one space, trimmed.
std::string normalize_label(std::string_view s);

/// Number of Unicode code points in a UTF-8 string.
std::size_t char_count(std::string_view utf8);

/// Keeps at most `max_chars` trailing code points.
std::string utf8_tail(std::string_view utf8, std::size_t max_chars);

bool starts_with_icase(std::string_view s, std::string_view prefix);

/// Lowercase alphanumeric word tokens (UTF-8 bytes >= 0x80 count as word chars).
std::vector<std::string> words(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Replaces each `{name}` slot. Throws Error(InvalidArgument) if a named slot is
/// absent from the template, so a template edit cannot silently drop an input.
std::string fill(std::string_view tmpl,
                 const std::vector<std::pair<std::string, std::string>>& slots);

/// All `[[...]]` tokens in order of appearance (inner text only).
std::vector<std::string> bracketed_tokens(std::string_view s);

}  // namespace rlhi::text
