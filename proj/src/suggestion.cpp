#include "bizplan/suggestion.hpp"

#include "bizplan/error.hpp"
#include "bizplan/hashing.hpp"
#include "bizplan/markup.hpp"
#include "bizplan/plan_generator.hpp"
#include "bizplan/text_util.hpp"

#include <algorithm>
#include <cctype>

namespace bizplan {

using nlohmann::json;

std::string_view to_string(SuggestionKind kind) noexcept
{
    return kind == SuggestionKind::exploitation ? "exploitation" : "exploration";
}

// ---- topic selection -----------------------------------------------------

namespace {

struct Keywords {
    SectionId section;
    std::vector<std::string_view> names;    // explicit references to the section
    std::vector<std::string_view> keywords; // topical hints
};

const std::vector<Keywords>& keyword_table()
{
    static const std::vector<Keywords> table = {
        {SectionId::executive_summary, {"executive summary", "exec summary"}, {"overview", "elevator pitch"}},
        {SectionId::company_description,
         {"company description", "company overview"},
         {"mission", "founding", "founded", "history", "our story", "vision"}},
        {SectionId::market_analysis,
         {"market analysis", "market research"},
         {"market", "competitor", "competition", "industry", "target customer", "demographic"}},
        {SectionId::organization_management,
         {"organization and management", "organization", "management section"},
         {"team", "staff", "employee", "hire", "hiring", "legal structure", "llc", "partner"}},
        {SectionId::service_product_line,
         {"service or product line", "product line", "products and services"},
         {"product", "service", "menu", "offering", "blend", "subscription"}},
        {SectionId::marketing_sales,
         {"marketing and sales", "marketing plan", "sales strategy"},
         {"marketing", "advertis", "promotion", "social media", "sales", "branding", "customer retention"}},
        {SectionId::funding_request,
         {"funding request"},
         {"funding", "grant", "loan", "investor", "investment", "financing", "capital"}},
        {SectionId::financial_projections,
         {"financial projections", "financial projection", "financials"},
         {"revenue", "profit", "forecast", "cash flow", "projection", "break-even", "budget"}},
        {SectionId::appendix, {"appendix"}, {"permit", "license", "resume", "supporting document"}},
    };
    return table;
}

/// Position of `needle` in `haystack` starting at a word boundary, or npos.
std::size_t find_word(std::string_view haystack, std::string_view needle)
{
    std::size_t from = 0;
    while (true) {
        const auto pos = haystack.find(needle, from);
        if (pos == std::string_view::npos) {
            return pos;
        }
        if (pos == 0 || std::isalnum(static_cast<unsigned char>(haystack[pos - 1])) == 0) {
            return pos;
        }
        from = pos + 1;
    }
}

} // namespace

std::optional<SectionId> tag_focus(std::string_view raw)
{
    const auto lower = text::to_lower(raw);
    std::optional<SectionId> explicit_match;
    std::size_t explicit_pos = std::string::npos;
    std::array<int, kSectionCount> hits{};
    for (const auto& entry : keyword_table()) {
        for (auto name : entry.names) {
            const auto pos = find_word(lower, name);
            if (pos != std::string::npos && pos < explicit_pos) {
                explicit_pos = pos;
                explicit_match = entry.section;
            }
        }
        for (auto keyword : entry.keywords) {
            if (find_word(lower, keyword) != std::string::npos) {
                ++hits[index_of(entry.section)];
            }
        }
    }
    if (explicit_match) {
        return explicit_match;
    }
    const auto best = std::max_element(hits.begin(), hits.end());
    if (*best == 0) {
        return std::nullopt;
    }
    return kCanonicalSections[static_cast<std::size_t>(best - hits.begin())];
}

SectionId current_topic(const Conversation& conversation, const PlanDocument& plan)
{
    for (auto it = conversation.rbegin(); it != conversation.rend(); ++it) {
        if (it->focus_section) {
            return *it->focus_section;
        }
    }
    const auto& last = plan.revisions().back();
    if (last.change.section) {
        return *last.change.section;
    }
    return SectionId::executive_summary;
}

std::vector<SectionId> recent_focus(const Conversation& conversation)
{
    std::vector<SectionId> out;
    const auto n = conversation.size();
    for (std::size_t i = n > kRecencyWindow ? n - kRecencyWindow : 0; i < n; ++i) {
        if (conversation[i].focus_section) {
            out.push_back(*conversation[i].focus_section);
        }
    }
    return out;
}

SectionId explore_target(const std::array<double, kSectionCount>& completeness, SectionId current,
                         const std::vector<SectionId>& recent)
{
    auto pick = [&](bool use_recency) -> std::optional<SectionId> {
        std::optional<SectionId> best;
        for (auto id : kCanonicalSections) {
            if (id == current) {
                continue;
            }
            if (use_recency && std::find(recent.begin(), recent.end(), id) != recent.end()) {
                continue;
            }
            if (!best || completeness[index_of(id)] < completeness[index_of(*best)]) {
                best = id;
            }
        }
        return best;
    };
    if (auto id = pick(true)) {
        return *id;
    }
    return *pick(false);
}

SectionId explore_target(const Conversation& conversation, const PlanDocument& plan)
{
    std::array<double, kSectionCount> completeness{};
    for (const auto& s : plan.sections()) {
        completeness[index_of(s.id)] = s.completeness;
    }
    return explore_target(completeness, current_topic(conversation, plan), recent_focus(conversation));
}

double completeness_score(const PlanSection& section) { return completeness_of(section.content); }

// ---- suggestions ---------------------------------------------------------

PromptSuggestion fallback_suggestion(SuggestionKind kind, SectionId target)
{
    const auto name = std::string(display_name(target));
    if (kind == SuggestionKind::exploitation) {
        return {kind, "Tell me more about improving my " + name + ".", target};
    }
    return {kind, "Let's work on your " + name + " next.", target};
}

namespace {

constexpr std::string_view kSuggestionSystem =
    "You help a small-business owner decide what to ask their business-plan assistant next. Write two short "
    "prompts in the owner's voice, each under 200 characters.\n"
    "EXPLOIT: a prompt that goes deeper on the current section.\n"
    "EXPLORE: a prompt that starts work on the new section.\n"
    "Both prompts should serve the owner's Business Plan Goals. Reply with exactly two lines starting with "
    "EXPLOIT: and EXPLORE:.";

std::string recent_turns_block(const Conversation& conversation, std::size_t limit)
{
    std::string out;
    const auto n = conversation.size();
    for (std::size_t i = n > limit ? n - limit : 0; i < n; ++i) {
        out += conversation[i].role == Author::user ? "OWNER: " : "ASSISTANT: ";
        out += conversation[i].text + "\n";
    }
    return out.empty() ? std::string("(no messages yet)\n") : out;
}

std::string strip_label_decorations(std::string_view line)
{
    line = text::trim(line);
    if (line.starts_with("- ") || line.starts_with("* ")) {
        line.remove_prefix(2);
    }
    std::string out;
    for (char c : line) {
        if (c != '*') {
            out.push_back(c);
        }
    }
    return out;
}

std::string unquote(std::string_view s)
{
    s = text::trim(s);
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
        s = s.substr(1, s.size() - 2);
    }
    return text::collapse_whitespace(s);
}

} // namespace

ProviderRequest suggestion_request(const Conversation& conversation, const PlanDocument& plan, SectionId exploit,
                                   SectionId explore)
{
    std::string user = goals_block(plan.goals()) + "\n";
    user += "BUSINESS: " + plan.context().business_name + "\n";
    user += "CURRENT SECTION: " + std::string(display_name(exploit)) + "\n";
    user += "NEW SECTION: " + std::string(display_name(explore)) + "\n\n";
    user += "RECENT CONVERSATION\n" + recent_turns_block(conversation, kRecencyWindow);
    return Gateway::make_request(Route::chat, {Message{Role::system, std::string(kSuggestionSystem)}, Message{Role::user, user}},
                                 200);
}

SuggestionPair suggest_prompts(const Conversation& conversation, const PlanDocument& plan, const Gateway& gateway)
{
    const auto exploit = current_topic(conversation, plan);
    const auto explore = explore_target(conversation, plan);
    SuggestionPair pair{fallback_suggestion(SuggestionKind::exploitation, exploit),
                        fallback_suggestion(SuggestionKind::exploration, explore)};
    std::string reply;
    try {
        reply = gateway.complete(suggestion_request(conversation, plan, exploit, explore)).content;
    } catch (const Error&) {
        return pair;
    }
    for (auto raw : text::split_lines(reply)) {
        const auto line = strip_label_decorations(raw);
        const auto colon = line.find(':');
        if (colon == std::string::npos) {
            continue;
        }
        const auto label = text::to_lower(text::trim(std::string_view(line).substr(0, colon)));
        const auto value = unquote(std::string_view(line).substr(colon + 1));
        if (value.empty() || text::utf8_length(value) > kMaxSuggestionChars) {
            continue;
        }
        if (label == "exploit") {
            pair.first.text = value;
        } else if (label == "explore") {
            pair.second.text = value;
        }
    }
    return pair;
}

// ---- edit proposals ------------------------------------------------------

namespace {

constexpr std::string_view kProposalOpen = "<<<PROPOSAL>>>";
constexpr std::string_view kProposalClose = "<<<END PROPOSAL>>>";
constexpr std::string_view kProposalMarker = "<<<PROPOSAL";

constexpr std::string_view kProposalSystem =
    "You are the Business Plan Assistant for a small-business owner with limited time and writing experience. "
    "Answer in plain, friendly language. When a change to the plan would help, suggest it in accordance with the "
    "owner's Business Plan Goals and attach it as a proposal block after your reply:\n"
    "<<<PROPOSAL>>>\n"
    "SECTION: <section id, one of executive_summary, company_description, market_analysis, "
    "organization_management, service_product_line, marketing_sales, funding_request, financial_projections, "
    "appendix>\n"
    "GOALS: <comma-separated goal ids this change serves, or none>\n"
    "RATIONALE: <one sentence>\n"
    "CONTENT:\n"
    "<the complete new text of the section using '#' headings, '- ' bullets, **bold** and *italic*>\n"
    "<<<END PROPOSAL>>>\n"
    "Attach at most three proposal blocks. Write nothing after the last block.";

constexpr std::string_view kProposalReformat =
    "Your previous reply had a malformed proposal block. Send the same answer again with every proposal "
    "formatted exactly as <<<PROPOSAL>>>, SECTION:, GOALS:, RATIONALE:, CONTENT:, <<<END PROPOSAL>>>.";

std::optional<EditProposal> parse_block(std::string_view block, const PlanDocument& plan)
{
    EditProposal proposal;
    bool have_section = false;
    bool have_content = false;
    std::string content;
    for (auto raw : text::split_lines(block)) {
        if (have_content) {
            content.append(raw);
            content.push_back('\n');
            continue;
        }
        const auto line = strip_label_decorations(raw);
        if (line.empty()) {
            continue;
        }
        const auto colon = line.find(':');
        if (colon == std::string::npos) {
            return std::nullopt;
        }
        const auto label = text::to_lower(text::trim(std::string_view(line).substr(0, colon)));
        const auto value = std::string(text::trim(std::string_view(line).substr(colon + 1)));
        if (label == "section") {
            auto id = parse_section_id(text::to_lower(value));
            if (!id) {
                return std::nullopt;
            }
            proposal.target_section = *id;
            have_section = true;
        } else if (label == "goals") {
            std::string_view rest = value;
            while (!rest.empty()) {
                const auto comma = rest.find(',');
                auto id = std::string(text::trim(rest.substr(0, comma)));
                if (!id.empty() && id.front() == '[' && id.back() == ']') {
                    id = id.substr(1, id.size() - 2);
                }
                if (plan.has_goal(id) &&
                    std::find(proposal.goal_ids.begin(), proposal.goal_ids.end(), id) == proposal.goal_ids.end()) {
                    proposal.goal_ids.push_back(id);
                }
                if (comma == std::string_view::npos) {
                    break;
                }
                rest.remove_prefix(comma + 1);
            }
        } else if (label == "rationale") {
            proposal.rationale = text::collapse_whitespace(value);
        } else if (label == "content") {
            have_content = true;
            if (!value.empty()) {
                content.append(value).push_back('\n');
            }
        } else {
            return std::nullopt;
        }
    }
    if (!have_section || !have_content || text::trim(content).empty()) {
        return std::nullopt;
    }
    proposal.replacement = parse_section_response(content);
    if (proposal.replacement.empty()) {
        return std::nullopt;
    }
    proposal.base_revision = plan.head();
    return proposal;
}

std::string proposal_id_for(const PlanDocument& plan, std::size_t ordinal, const EditProposal& p)
{
    const auto seed = plan.document_id() + ":" + std::to_string(p.base_revision) + ":" + std::to_string(ordinal) + ":" +
                      std::string(to_string(p.target_section)) + ":" + render_markup(p.replacement);
    return "prop-" + sha256_hex(seed).substr(0, 16);
}

/// Prose outside proposal blocks (or before a malformed one).
std::string prose_of(std::string_view reply)
{
    const auto open = reply.find(kProposalMarker);
    std::string prose(text::trim(reply.substr(0, open)));
    if (open == std::string_view::npos) {
        return prose;
    }
    const auto last_close = reply.rfind(kProposalClose);
    if (last_close != std::string_view::npos && last_close > open) {
        const auto tail = text::trim(reply.substr(last_close + kProposalClose.size()));
        if (!tail.empty() && tail.find(kProposalMarker) == std::string_view::npos) {
            prose += prose.empty() ? "" : "\n\n";
            prose += tail;
        }
    }
    return prose;
}

/// Forwards streamed text up to the first proposal marker.
class ProseFilter {
public:
    explicit ProseFilter(const StreamSink& sink) : sink_(sink) {}

    void feed(std::string_view piece)
    {
        if (done_) {
            return;
        }
        pending_.append(piece);
        if (auto pos = pending_.find(kProposalMarker); pos != std::string::npos) {
            emit(pending_.substr(0, pos));
            pending_.clear();
            done_ = true;
            return;
        }
        // Hold back the longest suffix that could still start the marker.
        std::size_t hold = 0;
        for (std::size_t len = std::min(pending_.size(), kProposalMarker.size() - 1); len > 0; --len) {
            if (std::string_view(pending_).substr(pending_.size() - len) == kProposalMarker.substr(0, len)) {
                hold = len;
                break;
            }
        }
        emit(pending_.substr(0, pending_.size() - hold));
        pending_.erase(0, pending_.size() - hold);
    }

    void finish()
    {
        if (!done_) {
            emit(pending_);
            pending_.clear();
        }
    }

private:
    void emit(const std::string& text)
    {
        if (!text.empty()) {
            sink_(text);
        }
    }

    const StreamSink& sink_;
    std::string pending_;
    bool done_ = false;
};

} // namespace

std::optional<ParsedReply> parse_proposal_reply(std::string_view reply, const PlanDocument& plan)
{
    ParsedReply parsed;
    parsed.prose = prose_of(reply);
    std::size_t pos = 0;
    while (true) {
        const auto open = reply.find(kProposalMarker, pos);
        if (open == std::string_view::npos) {
            break;
        }
        const auto header_end = reply.find('\n', open);
        if (header_end == std::string_view::npos || text::trim(reply.substr(open, header_end - open)) != kProposalOpen) {
            return std::nullopt;
        }
        const auto close = reply.find(kProposalClose, header_end);
        if (close == std::string_view::npos) {
            return std::nullopt;
        }
        auto proposal = parse_block(reply.substr(header_end + 1, close - header_end - 1), plan);
        if (!proposal) {
            return std::nullopt;
        }
        if (parsed.proposals.size() < kMaxProposals) {
            proposal->proposal_id = proposal_id_for(plan, parsed.proposals.size(), *proposal);
            parsed.proposals.push_back(std::move(*proposal));
        }
        pos = close + kProposalClose.size();
    }
    return parsed;
}

ProviderRequest proposal_request(std::string_view user_message, const Conversation& conversation,
                                 const PlanDocument& plan, SectionId target, bool stream)
{
    const auto& section = plan.section(target);
    std::string user = goals_block(plan.goals()) + "\n";
    user += "BUSINESS: " + plan.context().business_name + "\n\n";
    user += "TARGET SECTION: " + std::string(to_string(target)) + " (" + std::string(display_name(target)) + ")\n";
    user += section.content.empty() ? std::string("(empty)") : render_markup(section.content);
    user += "\n\nRECENT CONVERSATION\n" + recent_turns_block(conversation, 6);
    user += "\nOWNER'S MESSAGE\n" + std::string(user_message);
    auto request = Gateway::make_request(
        Route::suggestions, {Message{Role::system, std::string(kProposalSystem)}, Message{Role::user, user}}, 1500);
    request.stream = stream;
    return request;
}

ProposeResult propose_edit(std::string_view user_message, const Conversation& conversation, const PlanDocument& plan,
                           const Gateway& gateway, const StreamSink& on_delta)
{
    if (text::trim(user_message).empty()) {
        throw Error(ErrorCode::InvalidArgument, "message must be nonempty");
    }
    ProposeResult result;
    result.target_section = tag_focus(user_message).value_or(current_topic(conversation, plan));

    auto request = proposal_request(user_message, conversation, plan, result.target_section, bool(on_delta));
    std::string reply;
    if (on_delta) {
        ProseFilter filter(on_delta);
        reply = gateway.complete_stream(request, [&](std::string_view piece) { filter.feed(piece); }).content;
        filter.finish();
    } else {
        reply = gateway.complete(request).content;
    }

    if (auto parsed = parse_proposal_reply(reply, plan)) {
        result.assistant_reply = std::move(parsed->prose);
        result.proposals = std::move(parsed->proposals);
        return result;
    }

    auto retry = proposal_request(user_message, conversation, plan, result.target_section, false);
    retry.messages.push_back(Message{Role::assistant, reply});
    retry.messages.push_back(Message{Role::user, std::string(kProposalReformat)});
    std::string second;
    try {
        second = gateway.complete(retry).content;
    } catch (const Error&) {
        second.clear();
    }
    if (auto parsed = second.empty() ? std::nullopt : parse_proposal_reply(second, plan)) {
        result.assistant_reply = parsed->prose.empty() ? prose_of(reply) : std::move(parsed->prose);
        result.proposals = std::move(parsed->proposals);
        return result;
    }
    // Degraded: the owner still gets the assistant's prose.
    result.assistant_reply = prose_of(reply);
    result.proposals.clear();
    return result;
}

PlanDocument apply_edit(const PlanDocument& plan, const EditProposal& proposal, Timestamp at)
{
    if (proposal.base_revision != plan.head()) {
        throw Error(ErrorCode::StaleProposal, "proposal was made against revision " +
                                                  std::to_string(proposal.base_revision) + " but head is " +
                                                  std::to_string(plan.head()));
    }
    return plan.with_section(ChangeKind::section_replace, proposal.target_section, proposal.replacement,
                             Author::assistant, at);
}

// ---- inline generation ---------------------------------------------------

namespace {

constexpr std::string_view kInlineSystem =
    "You write short passages that a small-business owner can insert into a section of their business plan. "
    "Follow the owner's criteria exactly. Offer up to three alternatives separated by a line containing only "
    "<<<CANDIDATE>>>. Use only '- ' bullets, **bold** and *italic* for formatting.";

} // namespace

InlineResult inline_generate(const InlineRequest& request, const PlanDocument& plan, const Gateway& gateway,
                             const Corpus& corpus)
{
    if (text::trim(request.criteria).empty()) {
        throw Error(ErrorCode::InvalidArgument, "criteria must be nonempty");
    }
    const auto& section = plan.section(request.section);
    if (request.cursor_block > section.content.blocks.size()) {
        throw Error(ErrorCode::InvalidArgument, "cursor_block is past the end of the section");
    }
    RichText before{{section.content.blocks.begin(), section.content.blocks.begin() +
                                                         static_cast<std::ptrdiff_t>(request.cursor_block)}};
    RichText after{{section.content.blocks.begin() + static_cast<std::ptrdiff_t>(request.cursor_block),
                    section.content.blocks.end()}};
    std::string user = goals_block(plan.goals()) + "\n";
    user += "BUSINESS: " + plan.context().business_name + "\n";
    user += "SECTION: " + std::string(display_name(request.section)) + "\n\n";
    user += render_markup(before) + "\n[INSERT HERE]\n" + render_markup(after) + "\n\n";
    user += "CRITERIA\n" + text::collapse_whitespace(request.criteria);
    const auto reply = gateway
                           .complete(Gateway::make_request(
                               Route::suggestions,
                               {Message{Role::system, std::string(kInlineSystem)}, Message{Role::user, user}}, 600))
                           .content;

    InlineResult result;
    std::string current;
    auto flush = [&] {
        if (result.candidates.size() < 3 && !text::trim(current).empty()) {
            auto parsed = parse_section_response(current);
            if (!parsed.empty()) {
                result.candidates.push_back(std::move(parsed));
            }
        }
        current.clear();
    };
    for (auto line : text::split_lines(reply)) {
        if (text::trim(line) == "<<<CANDIDATE>>>") {
            flush();
        } else {
            current.append(line).push_back('\n');
        }
    }
    flush();
    if (result.candidates.empty()) {
        throw ProviderError(0, "inline generation produced no usable candidate", false);
    }
    result.exemplars = corpus.exemplars(request.section);
    return result;
}

PlanDocument insert_inline(const PlanDocument& plan, SectionId section, std::size_t cursor_block,
                           const RichText& candidate, Author author, Timestamp at)
{
    auto content = plan.section(section).content;
    if (cursor_block > content.blocks.size()) {
        throw Error(ErrorCode::InvalidArgument, "cursor_block is past the end of the section");
    }
    content.blocks.insert(content.blocks.begin() + static_cast<std::ptrdiff_t>(cursor_block), candidate.blocks.begin(),
                          candidate.blocks.end());
    return plan.with_section(ChangeKind::inline_insert, section, content, author, at);
}

const std::vector<std::string>& tooltip_questions(SectionId section, const Corpus& corpus)
{
    return corpus.tooltips(section);
}

// ---- wire format ---------------------------------------------------------

json to_json(const PromptSuggestion& suggestion)
{
    return {{"kind", to_string(suggestion.kind)},
            {"text", suggestion.text},
            {"target_section", to_string(suggestion.target_section)}};
}

json to_json(const EditProposal& proposal)
{
    return {{"proposal_id", proposal.proposal_id},
            {"base_revision", proposal.base_revision},
            {"target_section", to_string(proposal.target_section)},
            {"replacement", to_json(proposal.replacement)},
            {"rationale", proposal.rationale},
            {"goal_ids", proposal.goal_ids}};
}

json to_json(const ChatTurn& turn)
{
    return {{"turn_index", turn.turn_index},
            {"role", to_string(turn.role)},
            {"text", turn.text},
            {"focus_section", turn.focus_section ? json(to_string(*turn.focus_section)) : json(nullptr)}};
}

EditProposal proposal_from_json(const json& value)
{
    try {
        EditProposal p;
        p.proposal_id = value.at("proposal_id").get<std::string>();
        p.base_revision = value.at("base_revision").get<std::size_t>();
        p.target_section = section_from_string(value.at("target_section").get<std::string>());
        p.replacement = rich_text_from_json(value.at("replacement"));
        p.rationale = value.value("rationale", std::string());
        p.goal_ids = value.value("goal_ids", std::vector<std::string>{});
        return p;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("malformed proposal: ") + e.what());
    }
}

ChatTurn turn_from_json(const json& value)
{
    ChatTurn turn;
    turn.turn_index = value.at("turn_index").get<std::size_t>();
    turn.role = value.at("role").get<std::string>() == "user" ? Author::user : Author::assistant;
    turn.text = value.at("text").get<std::string>();
    if (value.contains("focus_section") && value["focus_section"].is_string()) {
        turn.focus_section = section_from_string(value["focus_section"].get<std::string>());
    }
    return turn;
}

} // namespace bizplan
