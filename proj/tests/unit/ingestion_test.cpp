#include "fixture_world.hpp"
#include "generators.hpp"

#include "bizplan/error.hpp"
#include "bizplan/ingestion.hpp"
#include "bizplan/text_util.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <algorithm>
#include <thread>

using namespace bizplan;
using namespace bizplan::testing;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::InvalidArgument;
}

bool has_fact(const BusinessContext& context, FactCategory category, std::string_view needle = {})
{
    return std::any_of(context.facts.begin(), context.facts.end(), [&](const Fact& f) {
        return f.category == category && f.statement.find(needle) != std::string::npos;
    });
}

std::vector<Message> transcript_from(const json& value)
{
    std::vector<Message> transcript;
    for (const auto& t : value) {
        transcript.push_back({t.at("role") == "user" ? Role::user : Role::assistant, t.at("text").get<std::string>()});
    }
    return transcript;
}

} // namespace

// -- stripping -----------------------------------------------------------------

TEST(StripHtml, drops_markup_scripts_and_styles)
{
    const auto out = strip_html("<html><head><title> Ridgeline &amp; Co </title><style>p{color:red}</style>"
                                "<script>var x = '<p>';</script></head><body><!-- hidden --><p>Hello,\n\n"
                                "<b>Jos&eacute;</b>&nbsp;&#9749; &lt;3</p><noscript>enable js</noscript></body></html>");
    EXPECT_EQ(out.title, "Ridgeline & Co");
    EXPECT_EQ(out.text, "Hello, José ☕ <3");
}

TEST(StripHtml, is_idempotent_on_random_markup)
{
    Gen gen(0x5eed0401);
    const std::vector<std::string> pieces = {"<p>", "</p>", "<br/>", "<script>x<y</script>", "<style>a{}</style>",
                                             "&amp;", "&lt;b&gt;", "&eacute;", "&#x41;", "&bogus;", "<!-- c -->",
                                             "<", ">", "text", " ", "\n", "café", "<a href='x'>", "&", "<title>t</title>"};
    for (int i = 0; i < 500; ++i) {
        std::string html;
        const int n = gen.range(0, 30);
        for (int j = 0; j < n; ++j) {
            html += gen.pick(pieces);
        }
        const auto once = strip_html(html).text;
        ASSERT_EQ(strip_html(once).text, once) << "input: " << html;
    }
}

TEST(FetchAndStrip, coffee_site_snapshot)
{
    FixtureWorld world;
    const auto page = fetch_and_strip("https://ridgeline-coffee.example/", world.fetcher, world.clock);
    EXPECT_NE(page.text.find("small-batch coffee roaster"), std::string::npos);
    EXPECT_FALSE(page.truncated);
    EXPECT_EQ(page.fetched_at, mock_epoch());
    EXPECT_EQ(page.text.find("<script"), std::string::npos);
}

TEST(FetchAndStrip, requires_an_http_url)
{
    FixtureWorld world;
    EXPECT_EQ(code_of([&] { fetch_and_strip("ftp://x", world.fetcher, world.clock); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { fetch_and_strip("ridgeline-coffee.example", world.fetcher, world.clock); }),
              ErrorCode::InvalidArgument);
}

TEST(FetchAndStrip, failures_and_non_html)
{
    FixtureFetcher fetcher;
    fetcher.add("https://gone.example/", {404, "text/html", "missing"});
    fetcher.add("https://pdf.example/", {200, "application/pdf", "%PDF"});
    const auto clock = frozen_clock(mock_epoch());
    EXPECT_EQ(code_of([&] { fetch_and_strip("https://gone.example/", fetcher, clock); }), ErrorCode::FetchFailed);
    EXPECT_EQ(code_of([&] { fetch_and_strip("https://pdf.example/", fetcher, clock); }), ErrorCode::NotHtml);
    EXPECT_EQ(code_of([&] { fetch_and_strip("https://unknown.example/", fetcher, clock); }), ErrorCode::FetchFailed);
}

TEST(FetchAndStrip, long_pages_are_truncated_at_the_cap)
{
    FixtureFetcher fetcher;
    fetcher.add("https://long.example/", {200, "text/html; charset=utf-8", "<p>" + std::string(100'000, 'a') + "</p>"});
    const auto page = fetch_and_strip("https://long.example/", fetcher, frozen_clock(mock_epoch()));
    EXPECT_EQ(page.text.size(), 24'000u);
    EXPECT_TRUE(page.truncated);

    const auto multibyte = make_page("https://x.example/", "<p>" + std::string(30'000, 'a') + "é</p>", mock_epoch());
    EXPECT_EQ(text::utf8_length(multibyte.text), kMaxPageChars);
}

// -- extraction ----------------------------------------------------------------

TEST(Extraction, coffee_site_has_an_offering_fact)
{
    FixtureWorld world;
    const auto context = world.coffee_context();
    EXPECT_EQ(context.business_name, "Ridgeline Coffee Roasters");
    EXPECT_TRUE(has_fact(context, FactCategory::offering));
    EXPECT_EQ(context.source.kind, ContextSource::Kind::website);
    EXPECT_EQ(context.source.ref, "https://ridgeline-coffee.example/");
}

TEST(Extraction, minimal_page_names_the_business)
{
    FixtureWorld world;
    const auto context =
        context_from_page(fetch_and_strip("https://acme.example/", world.fetcher, world.clock), world.gateway);
    EXPECT_EQ(context.business_name, "Acme Co.");
}

TEST(Extraction, unstructured_reply_fails_after_one_retry)
{
    FixtureWorld world;
    const auto page = fetch_and_strip("https://rambling.example/", world.fetcher, world.clock);
    EXPECT_EQ(code_of([&] { context_from_page(page, world.gateway); }), ErrorCode::ExtractionUnparseable);
}

TEST(Extraction, chat_with_a_city_yields_a_location_fact)
{
    FixtureWorld world;
    const auto context = context_from_chat({{Role::user, "I roast coffee in Pittsburgh"}}, world.gateway);
    EXPECT_TRUE(has_fact(context, FactCategory::location, "Pittsburgh"));
    EXPECT_EQ(context.source.kind, ContextSource::Kind::chat);
}

TEST(Extraction, transcript_needs_an_owner_message)
{
    FixtureWorld world;
    EXPECT_EQ(code_of([&] { context_from_chat({{Role::assistant, "What do you sell?"}}, world.gateway); }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { context_from_chat({}, world.gateway); }), ErrorCode::InvalidArgument);
}

TEST(Extraction, long_onboarding_chat_has_a_summary)
{
    FixtureWorld world;
    const auto chat = json::parse(read_file(source_dir() / "fixture" / "onboarding_chat_40.json"));
    const auto transcript = transcript_from(chat.at("transcript"));
    ASSERT_EQ(transcript.size(), 40u);
    const auto context = context_from_chat(transcript, world.gateway);
    EXPECT_FALSE(text::trim(context.summary).empty());
}

TEST(Extraction, labeled_layout_parsing)
{
    const auto parsed = parse_extraction("Here you go:\n- **NAME:** Hat Hut\nSUMMARY: We sell hats.\n"
                                         "They are warm.\nFACT/pricing: $20 each\nFACT/unknown: odd\nFACT: plain");
    ASSERT_TRUE(parsed.has_value());
    EXPECT_EQ(parsed->business_name, "Hat Hut");
    EXPECT_EQ(parsed->summary, "We sell hats. They are warm.");
    ASSERT_EQ(parsed->facts.size(), 3u);
    EXPECT_EQ(parsed->facts[0], (Fact{FactCategory::pricing, "$20 each"}));
    EXPECT_EQ(parsed->facts[1].category, FactCategory::other);
    EXPECT_FALSE(parse_extraction("I could not find anything useful.").has_value());
}

TEST(Extraction, adversarially_long_replies_stay_within_caps)
{
    Gen gen(0x5eed0402);
    for (int i = 0; i < 100; ++i) {
        std::string reply = "NAME: " + std::string(static_cast<std::size_t>(gen.range(0, 1000)), 'N') + "\n";
        reply += "SUMMARY: " + std::string(static_cast<std::size_t>(gen.range(0, 5000)), 's') + "\n";
        const int facts = gen.range(0, 80);
        for (int f = 0; f < facts; ++f) {
            reply += "FACT/offering: " + std::string(static_cast<std::size_t>(gen.range(1, 1200)), 'f') + "é\n";
        }
        const auto parsed = parse_extraction(reply);
        ASSERT_TRUE(parsed.has_value());
        EXPECT_LE(text::utf8_length(parsed->business_name), kMaxBusinessNameChars);
        EXPECT_LE(text::utf8_length(parsed->summary), kMaxSummaryChars);
        EXPECT_LE(parsed->facts.size(), kMaxFacts);
        for (const auto& fact : parsed->facts) {
            EXPECT_LE(text::utf8_length(fact.statement), kMaxStatementChars);
        }
        EXPECT_NO_THROW(validate(*parsed));
    }
}

// -- robots.txt ------------------------------------------------------------------

TEST(Robots, longest_match_wins_and_allow_breaks_ties)
{
    const std::string robots = "User-agent: *\nDisallow: /private\nAllow: /private/menu\n\n"
                               "User-agent: BizPlanAssistant\nDisallow: /drafts\nAllow: /drafts\n";
    EXPECT_FALSE(robots_allows(robots, "OtherBot/2.0", "/private/ledger"));
    EXPECT_TRUE(robots_allows(robots, "OtherBot/2.0", "/private/menu.html"));
    EXPECT_TRUE(robots_allows(robots, "OtherBot/2.0", "/"));
    EXPECT_TRUE(robots_allows(robots, "BizPlanAssistant/1.0", "/private/ledger"));
    EXPECT_TRUE(robots_allows(robots, "BizPlanAssistant/1.0", "/drafts/1"));
    EXPECT_TRUE(robots_allows("", "x", "/anything"));
    EXPECT_TRUE(robots_allows("User-agent: *\nDisallow:\n", "x", "/anything"));
    EXPECT_FALSE(robots_allows("User-agent: *\nDisallow: /\n", "x", "/"));
}

TEST(LiveFetcher, honors_robots_and_reports_content_type)
{
    httplib::Server server;
    server.Get("/robots.txt", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("User-agent: *\nDisallow: /private\n", "text/plain");
    });
    server.Get("/", [](const httplib::Request& req, httplib::Response& res) {
        res.set_content("<title>Home</title><p>" + req.get_header_value("User-Agent") + "</p>", "text/html");
    });
    server.Get("/private/page", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("<p>secret</p>", "text/html");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    LiveFetcher fetcher("BizPlanAssistant/1.0 (+https://localhost)");
    const auto base = "http://127.0.0.1:" + std::to_string(port);
    const auto page = fetch_and_strip(base + "/", fetcher, frozen_clock(mock_epoch()));
    EXPECT_EQ(page.title, "Home");
    EXPECT_NE(page.text.find("BizPlanAssistant/1.0"), std::string::npos);
    EXPECT_EQ(code_of([&] { fetch_and_strip(base + "/private/page", fetcher, frozen_clock(mock_epoch())); }),
              ErrorCode::RobotsDisallowed);

    server.stop();
    thread.join();
}
