#include "bizplan/ingestion.hpp"

#include "bizplan/error.hpp"
#include "bizplan/hashing.hpp"
#include "bizplan/text_util.hpp"
#include "html_entities.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

namespace bizplan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool is_tag_start(std::string_view s, std::size_t i)
{
    return i + 1 < s.size() && s[i] == '<' && (is_alpha(s[i + 1]) || s[i + 1] == '/' || s[i + 1] == '!' || s[i + 1] == '?');
}

/// Length of an entity-looking sequence at `i` ("&amp;", "&#39;"), or 0.
std::size_t entity_length(std::string_view s, std::size_t i)
{
    if (s[i] != '&') {
        return 0;
    }
    std::size_t j = i + 1;
    while (j < s.size() && j - i <= 10 && (is_alnum(s[j]) || s[j] == '#')) {
        ++j;
    }
    if (j > i + 1 && j < s.size() && s[j] == ';') {
        return j - i + 1;
    }
    return 0;
}

void append_utf8(std::string& out, unsigned long cp)
{
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        cp = 0xFFFD;
    }
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

/// Appends the decoded entity; unknown names are kept verbatim.
void decode_entity(std::string& out, std::string_view entity)
{
    const auto name = entity.substr(1, entity.size() - 2);
    if (!name.empty() && name[0] == '#') {
        const bool hex = name.size() > 1 && (name[1] == 'x' || name[1] == 'X');
        const std::string digits(name.substr(hex ? 2 : 1));
        if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [&](char c) {
                return hex ? std::isxdigit(static_cast<unsigned char>(c)) != 0
                           : std::isdigit(static_cast<unsigned char>(c)) != 0;
            }) && digits.size() <= 7) {
            append_utf8(out, std::stoul(digits, nullptr, hex ? 16 : 10));
            return;
        }
    }
    if (name == "nbsp") {
        out.push_back(' '); // folded into ordinary whitespace
        return;
    }
    const auto* it = std::lower_bound(detail::kHtmlEntities.begin(), detail::kHtmlEntities.end(), name,
                                      [](const auto& entry, std::string_view key) { return entry.first < key; });
    if (it != detail::kHtmlEntities.end() && it->first == name) {
        append_utf8(out, it->second);
        return;
    }
    out.append(entity);
}

bool is_block_tag(std::string_view name)
{
    static constexpr std::array<std::string_view, 30> kBlocks = {
        "p",  "div", "br", "li", "ul", "ol", "h1", "h2", "h3", "h4", "h5", "h6", "tr", "td", "th",
        "section", "article", "header", "footer", "nav", "main", "aside", "blockquote", "pre", "table",
        "hr", "dd", "dt", "figcaption", "form",
    };
    return std::find(kBlocks.begin(), kBlocks.end(), name) != kBlocks.end();
}

bool is_skipped_container(std::string_view name)
{
    return name == "script" || name == "style" || name == "noscript" || name == "template" || name == "svg";
}

/// Finds the closing '>' of a tag starting at `i`, honoring quoted attributes.
std::size_t tag_end(std::string_view s, std::size_t i)
{
    char quote = 0;
    for (std::size_t j = i + 1; j < s.size(); ++j) {
        if (quote != 0) {
            if (s[j] == quote) {
                quote = 0;
            }
        } else if (s[j] == '"' || s[j] == '\'') {
            quote = s[j];
        } else if (s[j] == '>') {
            return j;
        }
    }
    return std::string_view::npos;
}

std::size_t find_ci(std::string_view haystack, std::string_view needle, std::size_t from)
{
    const auto lower = text::to_lower(haystack.substr(std::min(from, haystack.size())));
    const auto pos = lower.find(text::to_lower(needle));
    return pos == std::string::npos ? std::string_view::npos : pos + from;
}

/// Neutralizes anything a second pass would read as markup.
std::string defuse(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        out.push_back(s[i]);
        if (is_tag_start(s, i) || entity_length(s, i) > 0) {
            out.push_back(' ');
        }
    }
    return out;
}

} // namespace

StrippedHtml strip_html(std::string_view html)
{
    std::string raw_text;
    std::string raw_title;
    raw_text.reserve(html.size());
    std::size_t i = 0;
    while (i < html.size()) {
        const char c = html[i];
        if (c == '<' && html.substr(i, 4) == "<!--") {
            const auto end = html.find("-->", i + 4);
            i = end == std::string_view::npos ? html.size() : end + 3;
            raw_text.push_back(' ');
            continue;
        }
        if (is_tag_start(html, i)) {
            const auto end = tag_end(html, i);
            if (end == std::string_view::npos) {
                raw_text.push_back(c);
                ++i;
                continue;
            }
            std::size_t n = i + 1;
            if (n < end && (html[n] == '/' || html[n] == '!' || html[n] == '?')) {
                ++n;
            }
            std::size_t name_end = n;
            while (name_end < end && (is_alnum(html[name_end]) || html[name_end] == '-')) {
                ++name_end;
            }
            const auto name = text::to_lower(html.substr(n, name_end - n));
            const bool closing = html[i + 1] == '/';
            i = end + 1;
            if (!closing && (is_skipped_container(name) || name == "title")) {
                const auto close = find_ci(html, "</" + name, i);
                const auto content_end = close == std::string_view::npos ? html.size() : close;
                if (name == "title" && raw_title.empty()) {
                    raw_title = std::string(html.substr(i, content_end - i));
                }
                if (close == std::string_view::npos) {
                    i = html.size();
                } else {
                    const auto close_end = tag_end(html, close);
                    i = close_end == std::string_view::npos ? html.size() : close_end + 1;
                }
                raw_text.push_back(' ');
                continue;
            }
            if (is_block_tag(name)) {
                raw_text.push_back(' ');
            }
            continue;
        }
        if (auto len = entity_length(html, i); len > 0) {
            decode_entity(raw_text, html.substr(i, len));
            i += len;
            continue;
        }
        raw_text.push_back(c);
        ++i;
    }

    auto decode_all = [](std::string_view s) {
        std::string out;
        for (std::size_t k = 0; k < s.size();) {
            if (auto len = entity_length(s, k); len > 0) {
                decode_entity(out, s.substr(k, len));
                k += len;
            } else {
                out.push_back(s[k++]);
            }
        }
        return out;
    };
    return StrippedHtml{defuse(text::collapse_whitespace(decode_all(raw_title))),
                        defuse(text::collapse_whitespace(raw_text))};
}

ExtractedPage make_page(std::string url, std::string_view html, Timestamp fetched_at)
{
    auto stripped = strip_html(html);
    ExtractedPage page;
    page.url = std::move(url);
    page.title = std::move(stripped.title);
    page.fetched_at = fetched_at;
    if (text::utf8_length(stripped.text) > kMaxPageChars) {
        page.text = text::utf8_truncate(stripped.text, kMaxPageChars);
        page.truncated = true;
    } else {
        page.text = std::move(stripped.text);
    }
    return page;
}

// ---- fetchers ------------------------------------------------------------

FixtureFetcher::FixtureFetcher(fs::path dir)
{
    const auto index_path = dir / "sites.json";
    if (!fs::exists(index_path)) {
        return;
    }
    std::ifstream index_in(index_path);
    const auto index = json::parse(index_in);
    for (const auto& [url, file] : index.items()) {
        const auto path = dir / file.get<std::string>();
        std::ifstream in(path, std::ios::binary);
        std::stringstream buf;
        buf << in.rdbuf();
        const auto ext = path.extension().string();
        const bool html = ext == ".html" || ext == ".htm";
        pages_[url] = FetchedResource{in ? 200 : 404, html ? "text/html; charset=utf-8" : "application/octet-stream",
                                      buf.str()};
    }
}

void FixtureFetcher::add(const std::string& url, FetchedResource resource)
{
    std::lock_guard lock(mutex_);
    pages_[url] = std::move(resource);
}

FetchedResource FixtureFetcher::fetch(const std::string& url)
{
    std::lock_guard lock(mutex_);
    auto it = pages_.find(url);
    if (it == pages_.end()) {
        return FetchedResource{404, "text/plain", ""};
    }
    return it->second;
}

bool robots_allows(std::string_view robots_txt, std::string_view user_agent, std::string_view path)
{
    // Collect rules from the most specific matching group: our agent token, else "*".
    const auto agent = text::to_lower(user_agent.substr(0, user_agent.find('/')));
    struct Group {
        std::vector<std::string> agents;
        std::vector<std::pair<bool, std::string>> rules; // allow?, prefix
    };
    std::vector<Group> groups;
    bool last_was_agent = false;
    for (auto line : text::split_lines(robots_txt)) {
        if (auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = text::trim(line);
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) {
            continue;
        }
        const auto key = text::to_lower(text::trim(line.substr(0, colon)));
        const auto value = std::string(text::trim(line.substr(colon + 1)));
        if (key == "user-agent") {
            if (!last_was_agent) {
                groups.emplace_back();
            }
            groups.back().agents.push_back(text::to_lower(value));
            last_was_agent = true;
        } else if (key == "allow" || key == "disallow") {
            last_was_agent = false;
            if (!groups.empty()) {
                groups.back().rules.emplace_back(key == "allow", value);
            }
        } else {
            last_was_agent = false;
        }
    }
    const Group* chosen = nullptr;
    for (const auto& g : groups) {
        for (const auto& a : g.agents) {
            if (!agent.empty() && a != "*" && agent.find(a) != std::string::npos) {
                chosen = &g;
            }
        }
    }
    if (chosen == nullptr) {
        for (const auto& g : groups) {
            if (std::find(g.agents.begin(), g.agents.end(), "*") != g.agents.end()) {
                chosen = &g;
            }
        }
    }
    if (chosen == nullptr) {
        return true;
    }
    std::size_t best_len = 0;
    bool allowed = true;
    for (const auto& [allow, prefix] : chosen->rules) {
        if (prefix.empty()) {
            continue; // "Disallow:" with no value allows everything
        }
        if (path.substr(0, prefix.size()) == prefix &&
            (prefix.size() > best_len || (prefix.size() == best_len && allow))) {
            best_len = prefix.size();
            allowed = allow;
        }
    }
    return allowed;
}

ExtractedPage fetch_and_strip(const std::string& url, PageFetcher& fetcher, const Clock& clock)
{
    if (!url.starts_with("http://") && !url.starts_with("https://")) {
        throw Error(ErrorCode::InvalidArgument, "url must be absolute http(s): " + url);
    }
    auto resource = fetcher.fetch(url);
    if (resource.status < 200 || resource.status >= 300) {
        throw Error(ErrorCode::FetchFailed, "fetching " + url + " failed with status " + std::to_string(resource.status));
    }
    const auto type = text::to_lower(resource.content_type);
    if (type.find("text/html") == std::string::npos && type.find("application/xhtml") == std::string::npos) {
        throw Error(ErrorCode::NotHtml, url + " is not an HTML page (" + resource.content_type + ")");
    }
    return make_page(url, resource.body, clock());
}

// ---- extraction ----------------------------------------------------------

std::string_view extraction_system_prompt()
{
    return "You extract facts about a small business so that a business-plan assistant can draft its plan.\n"
           "Reply ONLY with labeled lines in this exact layout:\n"
           "NAME: <business name>\n"
           "SUMMARY: <two to four sentences describing the business>\n"
           "FACT/<category>: <one concrete fact>\n"
           "Repeat FACT lines as needed. <category> is one of: offering, customers, location, stage, team, "
           "pricing, other.\n"
           "Use only information present in the source. Do not add commentary.";
}

namespace {

constexpr std::string_view kReformatInstruction =
    "Your reply did not follow the required layout. Reformat it using only NAME:, SUMMARY: and "
    "FACT/<category>: lines.";

std::string strip_decorations(std::string_view s)
{
    s = text::trim(s);
    if (s.starts_with("- ") || s.starts_with("* ")) {
        s.remove_prefix(2);
    }
    std::string out;
    for (char c : s) {
        if (c != '*' && c != '`') {
            out.push_back(c);
        }
    }
    return std::string(text::trim(out));
}

} // namespace

std::optional<BusinessContext> parse_extraction(std::string_view reply)
{
    BusinessContext context;
    std::string summary;
    enum class Last { none, summary, other } last = Last::none;
    for (auto raw_line : text::split_lines(reply)) {
        const auto line = strip_decorations(raw_line);
        if (line.empty()) {
            last = Last::none;
            continue;
        }
        const auto colon = line.find(':');
        const auto label = colon == std::string::npos ? std::string() : text::to_lower(text::trim(line.substr(0, colon)));
        const auto value = colon == std::string::npos ? std::string() : text::collapse_whitespace(line.substr(colon + 1));
        if (label == "name" || label == "business name") {
            if (context.business_name.empty()) {
                context.business_name = text::utf8_truncate(value, kMaxBusinessNameChars);
            }
            last = Last::other;
        } else if (label == "summary") {
            summary += (summary.empty() ? "" : " ") + value;
            last = Last::summary;
        } else if (label.starts_with("fact")) {
            const auto slash = label.find('/');
            const auto category = slash == std::string::npos ? std::string("other") : label.substr(slash + 1);
            if (!value.empty() && context.facts.size() < kMaxFacts) {
                context.facts.push_back(
                    Fact{parse_fact_category(category), text::utf8_truncate(value, kMaxStatementChars)});
            }
            last = Last::other;
        } else if (last == Last::summary) {
            summary += " " + text::collapse_whitespace(line);
        }
    }
    context.summary = text::utf8_truncate(text::trim(summary), kMaxSummaryChars);
    context.summary = std::string(text::trim(context.summary));
    if (context.summary.empty() && context.facts.empty()) {
        return std::nullopt;
    }
    return context;
}

namespace {

BusinessContext extract(std::vector<Message> messages, const Gateway& gateway)
{
    auto request = Gateway::make_request(Route::website_summary, messages, 800);
    auto reply = gateway.complete(request).content;
    if (auto parsed = parse_extraction(reply)) {
        return *parsed;
    }
    messages.push_back(Message{Role::assistant, reply});
    messages.push_back(Message{Role::user, std::string(kReformatInstruction)});
    request = Gateway::make_request(Route::website_summary, messages, 800);
    reply = gateway.complete(request).content;
    if (auto parsed = parse_extraction(reply)) {
        return *parsed;
    }
    throw Error(ErrorCode::ExtractionUnparseable, "extraction reply did not match the labeled layout after retry");
}

} // namespace

BusinessContext context_from_page(const ExtractedPage& page, const Gateway& gateway)
{
    if (text::trim(page.text).empty()) {
        throw Error(ErrorCode::InvalidArgument, "page text is empty");
    }
    std::string user = "Source: website " + page.url + "\nTitle: " + page.title + "\n\n" + page.text;
    auto context = extract({Message{Role::system, std::string(extraction_system_prompt())}, Message{Role::user, user}},
                           gateway);
    if (context.business_name.empty()) {
        context.business_name = text::utf8_truncate(page.title, kMaxBusinessNameChars);
    }
    context.source = ContextSource{ContextSource::Kind::website, page.url};
    validate(context);
    return context;
}

BusinessContext context_from_chat(const std::vector<Message>& transcript, const Gateway& gateway,
                                  std::string conversation_id)
{
    const bool has_user =
        std::any_of(transcript.begin(), transcript.end(), [](const Message& m) { return m.role == Role::user; });
    if (!has_user) {
        throw Error(ErrorCode::InvalidArgument, "transcript needs at least one user message");
    }
    std::string user = "Source: onboarding chat\n";
    for (const auto& m : transcript) {
        if (m.role == Role::system) {
            continue;
        }
        user += "\n";
        user += m.role == Role::user ? "OWNER: " : "ASSISTANT: ";
        user += m.content;
    }
    if (conversation_id.empty()) {
        conversation_id = "conv-" + sha256_hex(user).substr(0, 12);
    }
    auto context = extract({Message{Role::system, std::string(extraction_system_prompt())}, Message{Role::user, user}},
                           gateway);
    context.source = ContextSource{ContextSource::Kind::chat, std::move(conversation_id)};
    validate(context);
    return context;
}

} // namespace bizplan
