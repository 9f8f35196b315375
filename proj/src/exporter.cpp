#include "bizplan/exporter.hpp"

#include "bizplan/error.hpp"
#include "bizplan/markup.hpp"
#include "bizplan/text_util.hpp"

namespace bizplan {

namespace {

std::string title_of(const PlanDocument& plan)
{
    auto name = text::collapse_whitespace(plan.context().business_name);
    return name.empty() ? std::string("Business Plan") : name;
}

/// True when the content opens with an unstyled level-1 heading that repeats the
/// section title; that heading then stands in for the template heading.
bool opens_with_title(const PlanSection& section)
{
    if (section.content.blocks.empty()) {
        return false;
    }
    const auto* h = std::get_if<Heading>(&section.content.blocks.front());
    if (h == nullptr || h->level != 1 || h->content.size() != 1) {
        return false;
    }
    const auto& run = h->content.front();
    return !run.bold && !run.italic && run.text == display_name(section.id);
}

constexpr std::string_view kTitledSuffix = "; titled";

std::string section_marker(const PlanSection& section)
{
    return "<!-- section: " + std::string(to_string(section.id)) +
           (opens_with_title(section) ? std::string(kTitledSuffix) : std::string()) + " -->";
}

std::string escape_html(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

std::string html_inlines(const Inlines& inlines)
{
    std::string out;
    for (const auto& run : inlines) {
        std::string piece = escape_html(run.text);
        if (run.italic) {
            piece = "<em>" + piece + "</em>";
        }
        if (run.bold) {
            piece = "<strong>" + piece + "</strong>";
        }
        out += piece;
    }
    return out;
}

std::string html_blocks(const RichText& text)
{
    std::string out;
    for (const auto& block : text.blocks) {
        if (const auto* h = std::get_if<Heading>(&block)) {
            // Section titles own <h1>; content headings sit one level below.
            const auto tag = "h" + std::to_string(h->level + 1);
            out += "<" + tag + ">" + html_inlines(h->content) + "</" + tag + ">\n";
        } else if (const auto* p = std::get_if<Paragraph>(&block)) {
            out += "<p>" + html_inlines(p->content) + "</p>\n";
        } else {
            out += "<ul>\n";
            for (const auto& item : std::get<BulletList>(block).items) {
                out += "<li>" + html_inlines(item) + "</li>\n";
            }
            out += "</ul>\n";
        }
    }
    return out;
}

constexpr std::string_view kStylesheet = R"css(body { font-family: Georgia, "Times New Roman", serif; max-width: 46rem; margin: 2rem auto; padding: 0 1rem; color: #1d1d1f; line-height: 1.55; }
header.plan-title { font-size: 2.2rem; font-weight: bold; margin-bottom: 0.25rem; }
p.plan-meta { color: #6e6e73; font-size: 0.85rem; margin-top: 0; }
section { border-top: 1px solid #d2d2d7; padding-top: 0.5rem; margin-top: 1.5rem; }
h1 { font-size: 1.6rem; }
h2 { font-size: 1.3rem; }
h3 { font-size: 1.1rem; }
h4 { font-size: 1rem; }
p.placeholder { color: #86868b; }
@media print { body { margin: 0; max-width: none; } section { page-break-inside: avoid; } }
)css";

} // namespace

std::string export_markdown(const PlanDocument& plan)
{
    std::string out;
    out += "% " + title_of(plan) + "\n";
    out += "<!-- document_id: " + plan.document_id() + "; head: " + std::to_string(plan.head()) + " -->\n";
    for (const auto& section : plan.sections()) {
        out += "\n" + section_marker(section) + "\n";
        if (!opens_with_title(section)) {
            out += "# " + std::string(display_name(section.id)) + "\n\n";
        }
        out += section.content.empty() ? std::string(kEmptySectionPlaceholder) : render_markup(section.content);
        out += "\n";
    }
    return out;
}

std::string export_html(const PlanDocument& plan)
{
    const auto title = escape_html(title_of(plan));
    std::string out;
    out += "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n";
    out += "<title>" + title + "</title>\n<style>\n" + std::string(kStylesheet) + "</style>\n</head>\n<body>\n";
    out += "<header class=\"plan-title\">" + title + "</header>\n";
    out += "<p class=\"plan-meta\">Document " + escape_html(plan.document_id()) + " &middot; revision " +
           std::to_string(plan.head()) + "</p>\n";
    for (const auto& section : plan.sections()) {
        out += "<section id=\"" + std::string(to_string(section.id)) + "\">\n";
        out += "<h1>" + std::string(display_name(section.id)) + "</h1>\n";
        if (section.content.empty()) {
            out += "<p class=\"placeholder\"><em>(To be completed.)</em></p>\n";
        } else if (opens_with_title(section)) {
            out += html_blocks(RichText{{section.content.blocks.begin() + 1, section.content.blocks.end()}});
        } else {
            out += html_blocks(section.content);
        }
        out += "</section>\n";
    }
    out += "</body>\n</html>\n";
    return out;
}

std::map<SectionId, RichText> import_markdown_sections(std::string_view markdown)
{
    std::map<SectionId, RichText> out;
    const auto lines = text::split_lines(markdown);
    std::optional<SectionId> current;
    bool skipped_heading = false;
    std::string body;
    auto flush = [&] {
        if (!current) {
            return;
        }
        const auto trimmed = text::trim(body);
        out[*current] = trimmed == kEmptySectionPlaceholder ? RichText{} : parse_section_response(trimmed);
        body.clear();
    };
    for (auto line : lines) {
        if (line.starts_with("<!-- section: ") && line.ends_with(" -->")) {
            flush();
            auto id = line.substr(14, line.size() - 14 - 4);
            // A titled section's heading belongs to its content.
            skipped_heading = id.ends_with(kTitledSuffix);
            if (skipped_heading) {
                id.remove_suffix(kTitledSuffix.size());
            }
            current = section_from_string(id);
            continue;
        }
        if (!current) {
            continue;
        }
        if (!skipped_heading) {
            if (line.starts_with("# ")) {
                skipped_heading = true;
            }
            continue;
        }
        body.append(line);
        body.push_back('\n');
    }
    flush();
    return out;
}

} // namespace bizplan
