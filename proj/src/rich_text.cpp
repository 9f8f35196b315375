#include "bizplan/rich_text.hpp"

#include "bizplan/error.hpp"
#include "bizplan/text_util.hpp"

#include <algorithm>

namespace bizplan {

using nlohmann::json;

Inlines normalize_inlines(const Inlines& inlines)
{
    // Collapse whitespace across run boundaries first; a run that starts with
    // whitespace after a run that ended with it loses its leading space.
    Inlines collapsed;
    collapsed.reserve(inlines.size());
    bool last_was_space = true; // trims the leading edge
    for (const auto& run : inlines) {
        Inline out{std::string(), run.bold, run.italic};
        for (char c : run.text) {
            if (text::is_space(c)) {
                if (!last_was_space) {
                    out.text.push_back(' ');
                    last_was_space = true;
                }
                continue;
            }
            out.text.push_back(c);
            last_was_space = false;
        }
        collapsed.push_back(std::move(out));
    }
    // Trailing edge.
    for (auto it = collapsed.rbegin(); it != collapsed.rend(); ++it) {
        if (it->text.empty()) {
            continue;
        }
        if (it->text.back() == ' ') {
            it->text.pop_back();
        }
        break;
    }

    Inlines merged;
    for (auto& run : collapsed) {
        if (run.text.empty()) {
            continue;
        }
        if (!merged.empty() && merged.back().same_marks(run)) {
            merged.back().text += run.text;
        } else {
            merged.push_back(std::move(run));
        }
    }
    return merged;
}

RichText normalize(const RichText& input)
{
    RichText out;
    for (const auto& block : input.blocks) {
        if (const auto* h = std::get_if<Heading>(&block)) {
            auto content = normalize_inlines(h->content);
            if (!content.empty()) {
                out.blocks.emplace_back(Heading{std::clamp(h->level, 1, 3), std::move(content)});
            }
        } else if (const auto* p = std::get_if<Paragraph>(&block)) {
            auto content = normalize_inlines(p->content);
            if (!content.empty()) {
                out.blocks.emplace_back(Paragraph{std::move(content)});
            }
        } else {
            const auto& list = std::get<BulletList>(block);
            BulletList normalized;
            for (const auto& item : list.items) {
                auto content = normalize_inlines(item);
                if (!content.empty()) {
                    normalized.items.push_back(std::move(content));
                }
            }
            if (!normalized.items.empty()) {
                out.blocks.emplace_back(std::move(normalized));
            }
        }
    }
    return out;
}

bool is_normalized(const RichText& text) { return normalize(text) == text; }

namespace {

void append_inlines(std::string& out, const Inlines& inlines)
{
    for (const auto& run : inlines) {
        out += run.text;
    }
}

} // namespace

std::string plain_text(const RichText& text)
{
    std::string out;
    bool first = true;
    auto separate = [&] {
        if (!first) {
            out.push_back('\n');
        }
        first = false;
    };
    for (const auto& block : text.blocks) {
        if (const auto* h = std::get_if<Heading>(&block)) {
            separate();
            append_inlines(out, h->content);
        } else if (const auto* p = std::get_if<Paragraph>(&block)) {
            separate();
            append_inlines(out, p->content);
        } else {
            for (const auto& item : std::get<BulletList>(block).items) {
                separate();
                append_inlines(out, item);
            }
        }
    }
    return out;
}

std::size_t non_whitespace_count(const RichText& text)
{
    std::size_t count = 0;
    auto visit = [&](const Inlines& inlines) {
        for (const auto& run : inlines) {
            std::string stripped;
            for (char c : run.text) {
                if (!text::is_space(c)) {
                    stripped.push_back(c);
                }
            }
            count += text::utf8_length(stripped);
        }
    };
    for (const auto& block : text.blocks) {
        if (const auto* h = std::get_if<Heading>(&block)) {
            visit(h->content);
        } else if (const auto* p = std::get_if<Paragraph>(&block)) {
            visit(p->content);
        } else {
            for (const auto& item : std::get<BulletList>(block).items) {
                visit(item);
            }
        }
    }
    return count;
}

Inlines plain(std::string text) { return Inlines{Inline{std::move(text)}}; }

RichText paragraph_text(std::string text) { return normalize(RichText{{Paragraph{plain(std::move(text))}}}); }

json to_json(const Inlines& inlines)
{
    json runs = json::array();
    for (const auto& run : inlines) {
        json marks = json::array();
        if (run.bold) {
            marks.push_back("bold");
        }
        if (run.italic) {
            marks.push_back("italic");
        }
        runs.push_back({{"text", run.text}, {"marks", std::move(marks)}});
    }
    return runs;
}

json to_json(const RichText& text)
{
    json blocks = json::array();
    for (const auto& block : text.blocks) {
        if (const auto* h = std::get_if<Heading>(&block)) {
            blocks.push_back({{"type", "heading"}, {"level", h->level}, {"inlines", to_json(h->content)}});
        } else if (const auto* p = std::get_if<Paragraph>(&block)) {
            blocks.push_back({{"type", "paragraph"}, {"inlines", to_json(p->content)}});
        } else {
            json items = json::array();
            for (const auto& item : std::get<BulletList>(block).items) {
                items.push_back(to_json(item));
            }
            blocks.push_back({{"type", "bullet_list"}, {"items", std::move(items)}});
        }
    }
    return json{{"blocks", std::move(blocks)}};
}

namespace {

[[noreturn]] void invalid(const std::string& what)
{
    throw Error(ErrorCode::InvalidArgument, "invalid rich text: " + what);
}

Inlines inlines_from_json(const json& value)
{
    if (!value.is_array()) {
        invalid("inlines must be an array");
    }
    Inlines out;
    for (const auto& run : value) {
        if (!run.is_object() || !run.contains("text") || !run["text"].is_string()) {
            invalid("inline run needs a string 'text'");
        }
        Inline parsed{run["text"].get<std::string>()};
        if (run.contains("marks")) {
            if (!run["marks"].is_array()) {
                invalid("marks must be an array");
            }
            for (const auto& mark : run["marks"]) {
                if (mark == "bold") {
                    parsed.bold = true;
                } else if (mark == "italic") {
                    parsed.italic = true;
                } else {
                    invalid("unsupported mark " + mark.dump());
                }
            }
        }
        out.push_back(std::move(parsed));
    }
    return out;
}

} // namespace

RichText rich_text_from_json(const json& value)
{
    if (!value.is_object() || !value.contains("blocks") || !value["blocks"].is_array()) {
        invalid("expected an object with a 'blocks' array");
    }
    RichText out;
    for (const auto& block : value["blocks"]) {
        if (!block.is_object() || !block.contains("type") || !block["type"].is_string()) {
            invalid("block needs a string 'type'");
        }
        const auto type = block["type"].get<std::string>();
        if (type == "heading") {
            if (!block.contains("level") || !block["level"].is_number_integer()) {
                invalid("heading needs an integer level");
            }
            const int level = block["level"].get<int>();
            if (level < 1 || level > 3) {
                invalid("heading level must be 1..3");
            }
            out.blocks.emplace_back(Heading{level, inlines_from_json(block.value("inlines", json::array()))});
        } else if (type == "paragraph") {
            out.blocks.emplace_back(Paragraph{inlines_from_json(block.value("inlines", json::array()))});
        } else if (type == "bullet_list") {
            if (!block.contains("items") || !block["items"].is_array()) {
                invalid("bullet_list needs an 'items' array");
            }
            BulletList list;
            for (const auto& item : block["items"]) {
                list.items.push_back(inlines_from_json(item));
            }
            out.blocks.emplace_back(std::move(list));
        } else {
            invalid("unknown block type '" + type + "'");
        }
    }
    return normalize(out);
}

} // namespace bizplan
