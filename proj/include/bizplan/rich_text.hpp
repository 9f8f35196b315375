#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

namespace bizplan {

struct Inline {
    std::string text;
    bool bold = false;
    bool italic = false;

    bool same_marks(const Inline& other) const noexcept { return bold == other.bold && italic == other.italic; }
    bool operator==(const Inline&) const = default;
};

using Inlines = std::vector<Inline>;

struct Heading {
    int level = 1; // 1..3
    Inlines content;
    bool operator==(const Heading&) const = default;
};

struct Paragraph {
    Inlines content;
    bool operator==(const Paragraph&) const = default;
};

struct BulletList {
    std::vector<Inlines> items;
    bool operator==(const BulletList&) const = default;
};

using Block = std::variant<Heading, Paragraph, BulletList>;

/// Constrained rich text: headings, paragraphs and bullet lists with bold/italic runs.
struct RichText {
    std::vector<Block> blocks;

    bool empty() const noexcept { return blocks.empty(); }
    bool operator==(const RichText&) const = default;
};

/// Normal form: whitespace runs collapsed to one space, block edges trimmed,
/// empty runs/items/blocks removed, adjacent runs with identical marks merged,
/// heading levels clamped to 1..3. Idempotent.
RichText normalize(const RichText& text);
Inlines normalize_inlines(const Inlines& inlines);

bool is_normalized(const RichText& text);

/// Concatenated text of all runs, blocks separated by '\n'.
std::string plain_text(const RichText& text);

/// Count of non-whitespace Unicode scalar values across every run.
std::size_t non_whitespace_count(const RichText& text);

/// Convenience builders.
Inlines plain(std::string text);
RichText paragraph_text(std::string text);

nlohmann::json to_json(const RichText& text);
nlohmann::json to_json(const Inlines& inlines);

/// Strict decoder for the interchange form; throws Error(InvalidArgument) on any
/// structural violation. The result is normalized.
RichText rich_text_from_json(const nlohmann::json& value);

} // namespace bizplan
