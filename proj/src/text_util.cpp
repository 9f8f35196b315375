#include "bizplan/text_util.hpp"

#include <algorithm>
#include <cctype>

namespace bizplan::text {

bool is_space(char c) noexcept
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) noexcept
{
    while (!s.empty() && is_space(s.front())) {
        s.remove_prefix(1);
    }
    while (!s.empty() && is_space(s.back())) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_lines(std::string_view s)
{
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto end = s.find('\n', start);
        if (end == std::string_view::npos) {
            end = s.size();
        }
        auto line = s.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        lines.push_back(line);
        if (end == s.size()) {
            break;
        }
        start = end + 1;
    }
    return lines;
}

std::string to_lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool iequals(std::string_view a, std::string_view b) noexcept
{
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

bool istarts_with(std::string_view s, std::string_view prefix) noexcept
{
    return s.size() >= prefix.size() && iequals(s.substr(0, prefix.size()), prefix);
}

bool icontains(std::string_view haystack, std::string_view needle)
{
    return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

namespace {

std::size_t sequence_length(unsigned char lead) noexcept
{
    if (lead < 0x80) return 1;
    if ((lead >> 5) == 0x6) return 2;
    if ((lead >> 4) == 0xE) return 3;
    if ((lead >> 3) == 0x1E) return 4;
    return 1;
}

std::size_t next_boundary(std::string_view s, std::size_t pos) noexcept
{
    auto len = sequence_length(static_cast<unsigned char>(s[pos]));
    if (pos + len > s.size()) {
        return pos + 1;
    }
    for (std::size_t k = 1; k < len; ++k) {
        if ((static_cast<unsigned char>(s[pos + k]) & 0xC0) != 0x80) {
            return pos + 1;
        }
    }
    return pos + len;
}

} // namespace

std::size_t utf8_length(std::string_view s) noexcept
{
    std::size_t count = 0;
    for (std::size_t pos = 0; pos < s.size(); pos = next_boundary(s, pos)) {
        ++count;
    }
    return count;
}

std::size_t utf8_prefix_bytes(std::string_view s, std::size_t max_chars) noexcept
{
    std::size_t pos = 0;
    for (std::size_t n = 0; n < max_chars && pos < s.size(); ++n) {
        pos = next_boundary(s, pos);
    }
    return pos;
}

std::size_t utf8_floor_boundary(std::string_view s, std::size_t max_bytes) noexcept
{
    std::size_t pos = 0;
    while (pos < s.size()) {
        auto next = next_boundary(s, pos);
        if (next > max_bytes) {
            break;
        }
        pos = next;
    }
    return pos;
}

std::string utf8_truncate(std::string_view s, std::size_t max_chars)
{
    return std::string(s.substr(0, utf8_prefix_bytes(s, max_chars)));
}

std::string collapse_whitespace(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep)
{
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) {
            out.append(sep);
        }
        out.append(parts[i]);
    }
    return out;
}

} // namespace bizplan::text
