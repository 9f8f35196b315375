#pragma once

#include "bizplan/rich_text.hpp"

#include <string>
#include <string_view>

namespace bizplan {

/// Parses the constrained markup subset (ATX headings 1-3, "- " bullets,
/// blank-line separated paragraphs, **bold**, *italic*, backslash escapes) into
/// normalized rich text. Total: anything else degrades to literal paragraph text.
RichText parse_section_response(std::string_view raw);

/// Inverse of parse_section_response for normalized input: blocks separated by
/// a blank line, no trailing newline. parse_section_response(render_markup(x)) == x.
std::string render_markup(const RichText& text);

std::string render_inlines_markup(const Inlines& inlines);

} // namespace bizplan
