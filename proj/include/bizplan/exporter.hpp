#pragma once

#include "bizplan/document.hpp"

#include <map>
#include <string>
#include <string_view>

namespace bizplan {

inline constexpr std::string_view kEmptySectionPlaceholder = "_(To be completed.)_";

/// The standard template: a "% <business name>" title line, a metadata comment,
/// then the nine sections in canonical order, each introduced by a
/// "<!-- section: <id> -->" marker and a level-1 heading. LF endings, one
/// trailing newline, byte-identical for the same head. When a section's content
/// already opens with its own title as a plain level-1 heading, that heading is
/// used instead of a second copy and the marker reads "<!-- section: <id>; titled -->".
std::string export_markdown(const PlanDocument& plan);

/// Standalone HTML5 page with an embedded stylesheet and the same structure:
/// one <h1> per section, content headings shifted one level down.
std::string export_html(const PlanDocument& plan);

/// Recovers each section's rich text from export_markdown output.
std::map<SectionId, RichText> import_markdown_sections(std::string_view markdown);

} // namespace bizplan
