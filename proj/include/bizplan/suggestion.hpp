#pragma once

#include "bizplan/corpus.hpp"
#include "bizplan/document.hpp"
#include "bizplan/gateway.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bizplan {

struct ChatTurn {
    std::size_t turn_index = 0;
    Author role = Author::user;
    std::string text;
    std::optional<SectionId> focus_section;
    bool operator==(const ChatTurn&) const = default;
};

using Conversation = std::vector<ChatTurn>;

enum class SuggestionKind { exploitation, exploration };
std::string_view to_string(SuggestionKind kind) noexcept;

inline constexpr std::size_t kMaxSuggestionChars = 200;
inline constexpr std::size_t kRecencyWindow = 4;
inline constexpr std::size_t kMaxProposals = 3;

struct PromptSuggestion {
    SuggestionKind kind = SuggestionKind::exploitation;
    std::string text;
    SectionId target_section = SectionId::executive_summary;
    bool operator==(const PromptSuggestion&) const = default;
};

using SuggestionPair = std::pair<PromptSuggestion, PromptSuggestion>;

struct EditProposal {
    std::string proposal_id;
    std::size_t base_revision = 0;
    SectionId target_section = SectionId::executive_summary;
    RichText replacement;
    std::string rationale;
    std::vector<std::string> goal_ids;
    bool operator==(const EditProposal&) const = default;
};

struct InlineRequest {
    SectionId section = SectionId::executive_summary;
    std::string criteria;
    std::size_t cursor_block = 0;
};

// ---- topic selection -----------------------------------------------------

/// Keyword / section-name matcher. Explicit section names win over keywords.
std::optional<SectionId> tag_focus(std::string_view text);

SectionId current_topic(const Conversation& conversation, const PlanDocument& plan);

/// Least-complete section other than `current` and the recently focused ones;
/// ties break in canonical order. Drops the recency filter when it excludes everything.
SectionId explore_target(const std::array<double, kSectionCount>& completeness, SectionId current,
                         const std::vector<SectionId>& recent_focus);
SectionId explore_target(const Conversation& conversation, const PlanDocument& plan);

/// Focus sections of the last kRecencyWindow turns.
std::vector<SectionId> recent_focus(const Conversation& conversation);

double completeness_score(const PlanSection& section);

// ---- suggestions ---------------------------------------------------------

/// Static texts used whenever the gateway cannot produce a suggestion.
PromptSuggestion fallback_suggestion(SuggestionKind kind, SectionId target);

/// Exactly one exploitation and one exploration suggestion, always.
SuggestionPair suggest_prompts(const Conversation& conversation, const PlanDocument& plan, const Gateway& gateway);

/// The chat-route request suggest_prompts sends.
ProviderRequest suggestion_request(const Conversation& conversation, const PlanDocument& plan, SectionId exploit,
                                   SectionId explore);

// ---- edit proposals ------------------------------------------------------

struct ProposeResult {
    std::string assistant_reply;
    std::vector<EditProposal> proposals;
    SectionId target_section = SectionId::executive_summary;
};

/// Parses the proposal blocks of a reply. nullopt when a block is malformed.
struct ParsedReply {
    std::string prose;
    std::vector<EditProposal> proposals;
};
std::optional<ParsedReply> parse_proposal_reply(std::string_view reply, const PlanDocument& plan);

/// The suggestions-route request propose_edit sends first.
ProviderRequest proposal_request(std::string_view user_message, const Conversation& conversation,
                                 const PlanDocument& plan, SectionId target, bool stream);

/// When `on_delta` is set the reply is streamed; only the prose before the first
/// proposal block reaches the sink.
ProposeResult propose_edit(std::string_view user_message, const Conversation& conversation, const PlanDocument& plan,
                           const Gateway& gateway, const StreamSink& on_delta = {});

/// Replaces the proposal's section. Throws StaleProposal unless base_revision == head.
PlanDocument apply_edit(const PlanDocument& plan, const EditProposal& proposal, Timestamp at);

// ---- inline generation ---------------------------------------------------

struct InlineResult {
    std::vector<RichText> candidates;
    std::vector<Exemplar> exemplars;
};

InlineResult inline_generate(const InlineRequest& request, const PlanDocument& plan, const Gateway& gateway,
                             const Corpus& corpus);

/// Inserts `candidate` before block `cursor_block` of the section as an inline_insert revision.
PlanDocument insert_inline(const PlanDocument& plan, SectionId section, std::size_t cursor_block,
                           const RichText& candidate, Author author, Timestamp at);

const std::vector<std::string>& tooltip_questions(SectionId section, const Corpus& corpus);

// ---- wire format ---------------------------------------------------------

nlohmann::json to_json(const PromptSuggestion& suggestion);
nlohmann::json to_json(const EditProposal& proposal);
nlohmann::json to_json(const ChatTurn& turn);
EditProposal proposal_from_json(const nlohmann::json& value);
ChatTurn turn_from_json(const nlohmann::json& value);

} // namespace bizplan
