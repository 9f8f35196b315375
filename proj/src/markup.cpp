#include "bizplan/markup.hpp"

#include "bizplan/text_util.hpp"

#include <cctype>
#include <vector>

namespace bizplan {

namespace {

struct Token {
    enum class Kind { text, strong, emphasis };
    Kind kind = Kind::text;
    std::string text;
};

bool is_ascii_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::vector<Token> tokenize(std::string_view s)
{
    std::vector<Token> tokens;
    auto literal = [&](std::string_view chunk) {
        if (tokens.empty() || tokens.back().kind != Token::Kind::text) {
            tokens.push_back({Token::Kind::text, {}});
        }
        tokens.back().text.append(chunk);
    };
    std::size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        if (c == '\\' && i + 1 < s.size() && is_ascii_punct(s[i + 1])) {
            literal(s.substr(i + 1, 1));
            i += 2;
            continue;
        }
        if (c == '*') {
            std::size_t n = 0;
            while (i + n < s.size() && s[i + n] == '*') {
                ++n;
            }
            if (n == 1) {
                tokens.push_back({Token::Kind::emphasis, "*"});
            } else if (n == 2) {
                tokens.push_back({Token::Kind::strong, "**"});
            } else if (n == 3) {
                tokens.push_back({Token::Kind::strong, "**"});
                tokens.push_back({Token::Kind::emphasis, "*"});
            } else {
                literal(s.substr(i, n));
            }
            i += n;
            continue;
        }
        literal(s.substr(i, 1));
        ++i;
    }
    return tokens;
}

/// An unmatched trailing delimiter is literal text.
void demote_unbalanced(std::vector<Token>& tokens, Token::Kind kind)
{
    std::size_t count = 0;
    Token* last = nullptr;
    for (auto& t : tokens) {
        if (t.kind == kind) {
            ++count;
            last = &t;
        }
    }
    if (count % 2 == 1) {
        last->kind = Token::Kind::text;
    }
}

Inlines parse_inlines(std::string_view s)
{
    auto tokens = tokenize(s);
    demote_unbalanced(tokens, Token::Kind::strong);
    demote_unbalanced(tokens, Token::Kind::emphasis);
    Inlines out;
    bool bold = false;
    bool italic = false;
    for (const auto& t : tokens) {
        switch (t.kind) {
        case Token::Kind::strong: bold = !bold; break;
        case Token::Kind::emphasis: italic = !italic; break;
        case Token::Kind::text: out.push_back(Inline{t.text, bold, italic}); break;
        }
    }
    return out;
}

/// Returns the heading level for an ATX heading line (1..3), or 0.
int heading_level(std::string_view line)
{
    std::size_t n = 0;
    while (n < line.size() && line[n] == '#') {
        ++n;
    }
    if (n == 0 || n > 3) {
        return 0;
    }
    if (n < line.size() && line[n] != ' ' && line[n] != '\t') {
        return 0;
    }
    return static_cast<int>(n);
}

bool is_bullet(std::string_view line) { return line == "-" || line.starts_with("- ") || line.starts_with("-\t"); }

} // namespace

RichText parse_section_response(std::string_view raw)
{
    RichText out;
    std::vector<std::string_view> paragraph;
    BulletList list;

    auto flush_paragraph = [&] {
        if (paragraph.empty()) {
            return;
        }
        std::string joined;
        for (std::size_t i = 0; i < paragraph.size(); ++i) {
            if (i > 0) {
                joined.push_back(' ');
            }
            joined.append(paragraph[i]);
        }
        out.blocks.emplace_back(Paragraph{parse_inlines(joined)});
        paragraph.clear();
    };
    auto flush_list = [&] {
        if (!list.items.empty()) {
            out.blocks.emplace_back(std::move(list));
            list = BulletList{};
        }
    };

    for (auto line : text::split_lines(raw)) {
        const auto t = text::trim(line);
        if (t.empty()) {
            flush_paragraph();
            flush_list();
        } else if (int level = heading_level(t); level > 0) {
            flush_paragraph();
            flush_list();
            out.blocks.emplace_back(Heading{level, parse_inlines(text::trim(t.substr(level)))});
        } else if (is_bullet(t)) {
            flush_paragraph();
            list.items.push_back(parse_inlines(text::trim(t.substr(1))));
        } else {
            flush_list();
            paragraph.push_back(t);
        }
    }
    flush_paragraph();
    flush_list();
    return normalize(out);
}

std::string render_inlines_markup(const Inlines& inlines)
{
    std::string out;
    bool bold = false;
    bool italic = false;
    bool at_start = true;
    for (const auto& run : inlines) {
        if (run.bold != bold) {
            out += "**";
            bold = run.bold;
            at_start = false;
        }
        if (run.italic != italic) {
            out += "*";
            italic = run.italic;
            at_start = false;
        }
        for (char c : run.text) {
            if (c == '\\' || c == '*') {
                out.push_back('\\');
            } else if (at_start && (c == '#' || c == '-' || c == '_' || c == '<')) {
                out.push_back('\\');
            }
            out.push_back(c);
            at_start = false;
        }
    }
    if (bold) {
        out += "**";
    }
    if (italic) {
        out += "*";
    }
    return out;
}

std::string render_markup(const RichText& text)
{
    std::vector<std::string> blocks;
    for (const auto& block : text.blocks) {
        if (const auto* h = std::get_if<Heading>(&block)) {
            blocks.push_back(std::string(static_cast<std::size_t>(h->level), '#') + " " +
                             render_inlines_markup(h->content));
        } else if (const auto* p = std::get_if<Paragraph>(&block)) {
            blocks.push_back(render_inlines_markup(p->content));
        } else {
            std::vector<std::string> items;
            for (const auto& item : std::get<BulletList>(block).items) {
                items.push_back("- " + render_inlines_markup(item));
            }
            blocks.push_back(text::join(items, "\n"));
        }
    }
    return text::join(blocks, "\n\n");
}

} // namespace bizplan
