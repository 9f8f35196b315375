#include "scripted_provider.hpp"

#include "bizplan/section.hpp"
#include "bizplan/text_util.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <vector>

namespace bizplan::testing {

namespace {

using std::chrono::milliseconds;

// ---- prompt inspection ---------------------------------------------------

const std::string& system_of(const ProviderRequest& r)
{
    static const std::string empty;
    for (const auto& m : r.messages) {
        if (m.role == Role::system) {
            return m.content;
        }
    }
    return empty;
}

/// The first user message: the one carrying the task.
const std::string& task_of(const ProviderRequest& r)
{
    static const std::string empty;
    for (const auto& m : r.messages) {
        if (m.role == Role::user) {
            return m.content;
        }
    }
    return empty;
}

bool is_retry(const ProviderRequest& r) { return r.messages.size() > 2; }

/// Text following `label` up to the end of its line.
std::string line_after(std::string_view haystack, std::string_view label)
{
    const auto pos = haystack.find(label);
    if (pos == std::string_view::npos) {
        return {};
    }
    const auto start = pos + label.size();
    const auto end = haystack.find('\n', start);
    return std::string(text::trim(haystack.substr(start, end == std::string_view::npos ? end : end - start)));
}

/// Text between `open` and `close`.
std::string between(std::string_view haystack, std::string_view open, std::string_view close)
{
    const auto pos = haystack.find(open);
    if (pos == std::string_view::npos) {
        return {};
    }
    const auto start = pos + open.size();
    const auto end = haystack.find(close, start);
    return std::string(haystack.substr(start, end == std::string_view::npos ? end : end - start));
}

/// Everything after `open`.
std::string after(std::string_view haystack, std::string_view open)
{
    const auto pos = haystack.find(open);
    return pos == std::string_view::npos ? std::string() : std::string(haystack.substr(pos + open.size()));
}

std::vector<std::string> goal_ids(std::string_view prompt)
{
    std::vector<std::string> ids;
    const auto block = between(prompt, "BUSINESS PLAN GOALS\n", "\n\n");
    for (auto line : text::split_lines(block)) {
        if (line.starts_with("- [")) {
            const auto close = line.find(']');
            if (close != std::string_view::npos) {
                ids.emplace_back(line.substr(3, close - 3));
            }
        }
    }
    return ids;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to)
{
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
    return s;
}

// ---- extraction ----------------------------------------------------------

constexpr std::string_view kCoffeeExtraction =
    "NAME: Ridgeline Coffee Roasters\n"
    "SUMMARY: Ridgeline Coffee Roasters is a small-batch coffee roaster in Allentown, Pennsylvania, founded by "
    "self-taught roaster José Alvarez. It roasts single-origin beans to order, sells subscriptions and market "
    "bags, and supplies local cafes and a grocery co-op.\n"
    "FACT/offering: Single-origin coffees from Guatemala, Ethiopia and Colombia roasted in 12-kilo batches.\n"
    "FACT/offering: House espresso blend \"Lehigh Dawn\" and monthly subscription bags.\n"
    "FACT/pricing: Subscriptions cost $16 for 12 oz or $38 for 2 lb.\n"
    "FACT/customers: Four local cafes, one grocery co-op and Saturday shoppers at the Allentown Farmers Market.\n"
    "FACT/location: Roasts in a shared commercial kitchen on Hamilton Street in Allentown, Pennsylvania.\n"
    "FACT/stage: Roasting since 2019; wants to grow wholesale and add a second roaster.\n"
    "FACT/team: José Alvarez with one part-time employee.\n";

constexpr std::string_view kPittsburghExtraction =
    "SUMMARY: The owner roasts coffee in Pittsburgh.\n"
    "FACT/offering: Roasted coffee.\n"
    "FACT/location: Pittsburgh, Pennsylvania.\n";

constexpr std::string_view kLongChatExtraction =
    "NAME: Steel City Pierogi Kitchen\n"
    "SUMMARY: Steel City Pierogi Kitchen is a family-run catering business that makes hand-pinched pierogi for "
    "church festivals, weddings and corporate lunches, and wants to open a small storefront with a take-out "
    "counter.\n"
    "FACT/offering: Hand-pinched pierogi in eight fillings, sold frozen by the dozen and hot for events.\n"
    "FACT/customers: Church festivals, wedding caterers and office lunch orders.\n"
    "FACT/location: Bloomfield neighborhood of Pittsburgh.\n"
    "FACT/team: The owner, her sister and two seasonal helpers.\n"
    "FACT/stage: Six years of catering from a rented church kitchen.\n"
    "FACT/pricing: $14 per frozen dozen; event trays from $90.\n";

std::string extraction_reply(const ProviderRequest& r)
{
    const auto& task = task_of(r);
    if (task.find("Ridgeline") != std::string::npos || task.find("small-batch coffee roaster") != std::string::npos) {
        return std::string(kCoffeeExtraction);
    }
    if (task.find("Acme Co. We sell hats.") != std::string::npos) {
        return "NAME: Acme Co.\nSUMMARY: Acme Co. sells hats.\nFACT/offering: Hats.\n";
    }
    if (task.find("I roast coffee in Pittsburgh") != std::string::npos) {
        return std::string(kPittsburghExtraction);
    }
    if (task.find("pierogi") != std::string::npos) {
        return std::string(kLongChatExtraction);
    }
    if (task.find("rambles") != std::string::npos) {
        return is_retry(r) ? "Sorry, I could not find anything about a business on that page, only the weather."
                           : "What a lovely page about the weather and a walk by the river. It does not say much "
                             "about any business, but it is pleasant to read.";
    }
    const auto title = line_after(task, "Title:");
    return "NAME: " + title + "\nSUMMARY: " + (title.empty() ? std::string("A small business") : title) +
           " is a small business.\nFACT/other: Details were limited in the source.\n";
}

// ---- section drafts ------------------------------------------------------

const std::map<SectionId, std::string_view>& coffee_sections()
{
    static const std::map<SectionId, std::string_view> sections = {
        {SectionId::executive_summary, R"(# Executive Summary

Ridgeline Coffee Roasters is a **small-batch coffee roaster** in Allentown, Pennsylvania. Founded in 2019 by self-taught roaster José Alvarez, the business roasts single-origin beans to order and delivers them within 48 hours.

Our mission is to bring *fresh, traceable coffee* to Lehigh Valley homes and cafes. We sell through subscriptions, the Allentown Farmers Market and wholesale accounts with four local cafes and a grocery co-op.

We are applying for the Allentown small business growth grant to buy a second roaster, which will let us grow to ten wholesale accounts within a year.)"},
        {SectionId::company_description, R"(# Company Description

Cafes and coffee lovers in the Lehigh Valley have few options for coffee that was roasted days, not months, before it reaches the cup. Ridgeline Coffee Roasters fills that gap.

José Alvarez started roasting in his garage in 2019 and moved into a shared commercial kitchen on Hamilton Street as demand grew.

## What sets us apart

- Every batch is roasted to order in 12-kilo lots
- Single-origin beans with published farm details
- Barista training and custom blends for wholesale partners)"},
        {SectionId::market_analysis, R"(# Market Analysis

Specialty coffee continues to gain share of at-home and cafe coffee sales, and local roasters benefit from customers who value freshness and traceability.

Our target customers are independent cafes within a thirty-minute drive of Allentown and households who buy premium coffee at farmers markets and online.

National brands dominate grocery shelves, but few regional roasters offer weekly delivery and training to cafes. We compete on freshness, service and local relationships rather than price.)"},
        {SectionId::organization_management, R"(# Organization and Management

Ridgeline Coffee Roasters is owned and operated by José Alvarez, who handles roasting, sourcing and wholesale relationships.

- José Alvarez, owner and head roaster
- One part-time employee for packing and market sales
- A bookkeeper engaged on a monthly basis

With grant funding we plan to hire a second part-time roaster trained in-house.)"},
        {SectionId::service_product_line, R"(# Service or Product Line

We sell single-origin coffees from Guatemala, Ethiopia and Colombia and our house espresso blend, *Lehigh Dawn*.

- Subscription bags: 12 oz for $16 or 2 lb for $38 each month
- Market bags sold every Saturday at the Allentown Farmers Market
- Wholesale roasts delivered weekly with barista training and custom blends

New single-origin offerings rotate in each season as green coffee arrives.)"},
        {SectionId::marketing_sales, R"(# Marketing and Sales

Most customers first taste Ridgeline at the farmers market or at one of our partner cafes. Market shoppers are invited to start a subscription on the spot.

Wholesale sales happen through tastings at the cafe: José brings samples, trains the staff and sets up a weekly delivery schedule.

We keep customers through **roast-to-order freshness**, seasonal releases and a monthly email about new coffees.)"},
        {SectionId::funding_request, R"(# Funding Request

We are applying for the Allentown small business growth grant to expand roasting capacity.

- A second 12-kilo roaster and installation
- Green coffee inventory for new wholesale accounts
- Packaging equipment to speed up subscription fulfillment

The added capacity will let us sign ten wholesale accounts within a year without missing delivery days.)"},
        {SectionId::financial_projections, R"(# Financial Projections

Sales have grown every year since we started roasting, led by subscriptions and wholesale.

Over the next three years we expect wholesale to become our largest revenue stream as we add accounts. Green coffee and labor remain our largest costs, and a second roaster lowers the cost per pound by running fuller batches.

We will track monthly revenue, cost per pound and the number of active wholesale accounts.)"},
        {SectionId::appendix, R"(# Appendix

Supporting documents available on request:

- Business license and food facility registration
- Shared kitchen lease on Hamilton Street
- Roaster equipment quotes
- Letters of support from partner cafes)"},
    };
    return sections;
}

std::string section_reply(const ProviderRequest& r)
{
    const auto& system = system_of(r);
    const auto& task = task_of(r);
    std::optional<SectionId> section;
    for (auto id : kCanonicalSections) {
        if (system.find("Write the " + std::string(display_name(id)) + " section") != std::string::npos) {
            section = id;
            break;
        }
    }
    if (!section) {
        return "I can help with that.";
    }
    const auto name = line_after(task, "Name:");
    if (name == "Ridgeline Coffee Roasters") {
        return std::string(coffee_sections().at(*section));
    }
    const auto summary = line_after(task, "Summary:");
    std::string reply = "# " + std::string(display_name(*section)) + "\n\n";
    reply += (name.empty() ? std::string("This business") : name) + " is preparing its " +
             std::string(display_name(*section)) + ". " + summary + "\n\n";
    const auto facts = between(task, "Facts:\n", "\n\n");
    for (auto line : text::split_lines(facts)) {
        if (line.starts_with("- ") && line != "- (none)") {
            reply += std::string(line) + "\n";
        }
    }
    return reply;
}

// ---- suggestions and proposals -------------------------------------------

std::string suggestion_reply(const ProviderRequest& r)
{
    const auto& task = task_of(r);
    const auto current = line_after(task, "CURRENT SECTION:");
    const auto next = line_after(task, "NEW SECTION:");
    return "EXPLOIT: How can I make my " + current + " more convincing for my goals?\n"
           "EXPLORE: Can you help me get started on my " + next + "?\n";
}

std::string proposal_reply(const ProviderRequest& r)
{
    const auto& task = task_of(r);
    const auto message = std::string(text::trim(after(task, "OWNER'S MESSAGE\n")));
    const auto lower = text::to_lower(message);
    const auto target_line = line_after(task, "TARGET SECTION:");
    const auto target = target_line.substr(0, target_line.find(' '));
    auto current = between(task, "TARGET SECTION: " + target_line + "\n", "\n\nRECENT CONVERSATION");
    if (current == "(empty)") {
        current.clear();
    }

    if (text::icontains(lower, "just chatting") || text::icontains(lower, "no changes")) {
        return "Happy to talk it through. Nothing in the plan needs to change for that, so I have not "
               "suggested an edit.";
    }

    std::string prose;
    std::string content;
    if (text::icontains(lower, "founding year")) {
        const bool has_year = current.find("2019") != std::string::npos;
        prose = has_year ? "Good catch. I updated the founding year from 2019 to 2022 so it matches your records."
                         : "I could not find a founding year in that section, so I added one.";
        content = has_year ? replace_all(current, "2019", "2022")
                           : current + (current.empty() ? "" : "\n\n") + "The business was founded in 2022.";
    } else if (text::icontains(lower, "competitor")) {
        prose = "Reviewers look for named competitors and a clear reason customers pick you. I added a short "
                "paragraph comparing Ridgeline with other local roasters.";
        content = current + (current.empty() ? "" : "\n\n") +
                  "## Local competition\n\n"
                  "Two other roasters sell in the Lehigh Valley, but neither offers weekly cafe delivery or "
                  "barista training. Grocery brands compete on price; we compete on **freshness** and service.";
    } else {
        prose = "Here is a revision that works your request into the section.";
        auto note = text::collapse_whitespace(message);
        for (char c : std::string_view("*_\\#<>`[]")) {
            note.erase(std::remove(note.begin(), note.end(), c), note.end());
        }
        if (!note.empty() && note.back() != '.' && note.back() != '?' && note.back() != '!') {
            note += '.';
        }
        content = current + (current.empty() ? "" : "\n\n") + "We revised this section to address: " + note;
    }

    const auto ids = goal_ids(task);
    std::string goals = ids.empty() ? std::string("none") : ids.front();
    std::string reply = prose + "\n\n<<<PROPOSAL>>>\nSECTION: " + target + "\nGOALS: " + goals +
                        "\nRATIONALE: Keeps the plan accurate and aligned with your goals.\nCONTENT:\n" + content +
                        "\n<<<END PROPOSAL>>>\n";
    return reply;
}

std::string inline_reply(const ProviderRequest& r)
{
    const auto& task = task_of(r);
    const auto criteria = text::to_lower(after(task, "CRITERIA\n"));
    if (text::icontains(criteria, "local competitors")) {
        return "Two other roasters serve the Lehigh Valley, but neither delivers weekly to cafes. We win accounts "
               "with fresher coffee and hands-on barista training.\n"
               "<<<CANDIDATE>>>\n"
               "Local competition comes from two regional roasters and grocery brands. Our edge is **roast-to-order "
               "freshness** and weekly delivery.\n";
    }
    return "This passage addresses the request: " + text::collapse_whitespace(after(task, "CRITERIA\n")) +
           "\n<<<CANDIDATE>>>\nA shorter version focused on the request.\n";
}

std::string pitch_reply(const ProviderRequest& r)
{
    const auto& task = task_of(r);
    const auto goal = text::to_lower(line_after(task, "GOAL\n"));
    std::string reply =
        "1. Which parts of my plan would make the strongest case for funding from the city grant?\n"
        "2. Is my funding request specific enough about how the second roaster will be used?\n"
        "3. What financial records should I bring to show steady growth?\n"
        "4. How do reviewers judge the local economic impact of a small roaster?\n"
        "5. Is my market analysis convincing about demand from local cafes?\n"
        "6. What are common reasons grant applications like mine are turned down?\n";
    if (task.find("Ridgeline") == std::string::npos) {
        reply = "1. What funding options fit a business at my stage?\n"
                "2. Which section of my plan is weakest?\n"
                "3. What numbers should I prepare before meeting a lender?\n"
                "4. How should I describe my customers?\n"
                "5. What would make my plan more convincing?\n";
    }
    return reply;
}

} // namespace

std::string ScriptedProvider::reply_for(const ProviderRequest& r)
{
    const auto& system = system_of(r);
    switch (r.route) {
    case Route::website_summary:
        return extraction_reply(r);
    case Route::section_generation:
        return section_reply(r);
    case Route::chat:
        return suggestion_reply(r);
    case Route::suggestions:
        if (system.starts_with("You write short passages")) {
            return inline_reply(r);
        }
        return proposal_reply(r);
    case Route::pitch_prep:
        return pitch_reply(r);
    case Route::transcription:
        break;
    }
    return {};
}

ProviderResponse ScriptedProvider::complete(const ProviderRequest& request, const std::string& model, milliseconds)
{
    ++calls_;
    ProviderResponse response;
    response.content = reply_for(request);
    response.finish_reason = FinishReason::stop;
    std::size_t prompt_chars = 0;
    for (const auto& m : request.messages) {
        prompt_chars += m.content.size();
    }
    response.usage = {static_cast<int>(prompt_chars / 4), static_cast<int>(response.content.size() / 4)};
    response.provider_model = model;
    return response;
}

ProviderResponse ScriptedProvider::stream(const ProviderRequest& request, const std::string& model,
                                          milliseconds timeout, const StreamSink& sink)
{
    auto response = complete(request, model, timeout);
    for (auto chunk : mock_chunks(response.content)) {
        sink(chunk);
    }
    return response;
}

std::string ScriptedProvider::transcribe(std::string_view audio, std::string_view, const std::string&, milliseconds)
{
    ++calls_;
    if (audio.find("jose-edit-voice-note-fixture") != std::string_view::npos) {
        return std::string(kVoiceNoteText);
    }
    return "(inaudible)";
}

} // namespace bizplan::testing
