#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace bizplan::text {

bool is_space(char c) noexcept;

std::string_view trim(std::string_view s) noexcept;

/// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string_view> split_lines(std::string_view s);

std::string to_lower(std::string_view s);

bool iequals(std::string_view a, std::string_view b) noexcept;
bool istarts_with(std::string_view s, std::string_view prefix) noexcept;
bool icontains(std::string_view haystack, std::string_view needle);

/// Number of UTF-8 code points (invalid bytes count as one each).
std::size_t utf8_length(std::string_view s) noexcept;

/// Byte length of the longest prefix holding at most `max_chars` code points.
std::size_t utf8_prefix_bytes(std::string_view s, std::size_t max_chars) noexcept;

/// Largest byte offset <= `max_bytes` that does not split a code point.
std::size_t utf8_floor_boundary(std::string_view s, std::size_t max_bytes) noexcept;

std::string utf8_truncate(std::string_view s, std::size_t max_chars);

/// Collapses every ASCII whitespace run to a single space and trims both ends.
std::string collapse_whitespace(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

} // namespace bizplan::text
