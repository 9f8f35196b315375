#pragma once

#include "bizplan/clock.hpp"
#include "bizplan/document.hpp"
#include "bizplan/gateway.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace bizplan {

inline constexpr std::size_t kMaxPageChars = 24'000;

struct ExtractedPage {
    std::string url;
    std::string title;
    std::string text;
    Timestamp fetched_at{};
    bool truncated = false;
};

struct StrippedHtml {
    std::string title;
    std::string text;
};

/// Drops tags, comments, scripts and styles, decodes common entities and
/// collapses whitespace. strip_html(strip_html(x).text).text == strip_html(x).text.
StrippedHtml strip_html(std::string_view html);

/// Builds a page from raw markup, truncating the text at kMaxPageChars code points.
ExtractedPage make_page(std::string url, std::string_view html, Timestamp fetched_at);

struct FetchedResource {
    int status = 200;
    std::string content_type;
    std::string body;
};

class PageFetcher {
public:
    virtual ~PageFetcher() = default;
    virtual FetchedResource fetch(const std::string& url) = 0;
};

/// Serves local snapshots. `sites.json` under `dir` maps URLs to files.
class FixtureFetcher : public PageFetcher {
public:
    FixtureFetcher() = default;
    explicit FixtureFetcher(std::filesystem::path dir);

    void add(const std::string& url, FetchedResource resource);
    FetchedResource fetch(const std::string& url) override;

private:
    std::mutex mutex_;
    std::map<std::string, FetchedResource> pages_;
};

/// HTTP fetcher honoring robots.txt, with at most two requests in flight per host.
class LiveFetcher : public PageFetcher {
public:
    explicit LiveFetcher(std::string user_agent);
    ~LiveFetcher() override;

    FetchedResource fetch(const std::string& url) override;

private:
    struct HostSlots;
    HostSlots& slots_for(const std::string& host);

    std::string user_agent_;
    std::mutex mutex_;
    std::map<std::string, std::unique_ptr<HostSlots>> hosts_;
};

/// robots.txt evaluation (longest matching rule wins, Allow on ties).
bool robots_allows(std::string_view robots_txt, std::string_view user_agent, std::string_view path);

/// Requires an absolute http(s) URL. Throws FetchFailed / NotHtml / RobotsDisallowed.
ExtractedPage fetch_and_strip(const std::string& url, PageFetcher& fetcher, const Clock& clock);

/// Fixed system prompt for structured extraction.
std::string_view extraction_system_prompt();

/// Parses labeled NAME:/SUMMARY:/FACT/<category>: lines; nullopt when nothing usable.
std::optional<BusinessContext> parse_extraction(std::string_view reply);

BusinessContext context_from_page(const ExtractedPage& page, const Gateway& gateway);

/// `conversation_id` defaults to a hash of the transcript.
BusinessContext context_from_chat(const std::vector<Message>& transcript, const Gateway& gateway,
                                  std::string conversation_id = {});

} // namespace bizplan
