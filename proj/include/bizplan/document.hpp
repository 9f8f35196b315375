#pragma once

#include "bizplan/clock.hpp"
#include "bizplan/rich_text.hpp"
#include "bizplan/section.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace bizplan {

struct Goal {
    std::string id;
    std::string label;
    std::string detail;
    bool operator==(const Goal&) const = default;
};

enum class FactCategory { offering, customers, location, stage, team, pricing, other };

std::string_view to_string(FactCategory category) noexcept;
/// Unrecognized categories map to `other`.
FactCategory parse_fact_category(std::string_view text) noexcept;

struct Fact {
    FactCategory category = FactCategory::other;
    std::string statement;
    bool operator==(const Fact&) const = default;
};

struct ContextSource {
    enum class Kind { website, chat, manual };
    Kind kind = Kind::manual;
    std::string ref; // url for website, conversation id for chat
    bool operator==(const ContextSource&) const = default;
};

// Field caps for extracted context.
inline constexpr std::size_t kMaxBusinessNameChars = 200;
inline constexpr std::size_t kMaxSummaryChars = 2000;
inline constexpr std::size_t kMaxStatementChars = 500;
inline constexpr std::size_t kMaxFacts = 40;

struct BusinessContext {
    std::string business_name;
    std::string summary;
    std::vector<Fact> facts;
    ContextSource source;
    bool operator==(const BusinessContext&) const = default;
};

/// Throws Error(InvalidArgument) when the context breaks its invariants or caps.
void validate(const BusinessContext& context);
void validate_goals(const std::vector<Goal>& goals);

/// Heuristic fill level of a section: min(1, chars/600) x (1.0 if >= 2 blocks else 0.5).
double completeness_of(const RichText& content);

struct PlanSection {
    SectionId id = SectionId::executive_summary;
    RichText content;
    double completeness = 0.0;
    bool operator==(const PlanSection&) const = default;
};

enum class Author { user, assistant };
std::string_view to_string(Author author) noexcept;

enum class ChangeKind { full_draft, section_replace, inline_insert, style_only };
std::string_view to_string(ChangeKind kind) noexcept;

struct Change {
    ChangeKind kind = ChangeKind::full_draft;
    std::optional<SectionId> section; // set for every kind except full_draft
    bool operator==(const Change&) const = default;
};

struct Revision {
    std::size_t index = 0;
    std::optional<std::size_t> parent_index;
    Author author = Author::assistant;
    Change change;
    Timestamp timestamp{};
    bool operator==(const Revision&) const = default;
};

using SectionMap = std::map<SectionId, RichText>;

/// Payload of revision 0: everything needed to construct the document.
struct DraftPayload {
    std::string document_id;
    std::string owner;
    std::vector<Goal> goals;
    BusinessContext context;
    std::array<RichText, kSectionCount> sections;
    bool operator==(const DraftPayload&) const = default;
};

/// Payload of every later revision: the new content of the changed section.
struct SectionPayload {
    RichText content;
    bool operator==(const SectionPayload&) const = default;
};

using ChangePayload = std::variant<DraftPayload, SectionPayload>;

struct History {
    std::vector<Revision> revisions;
    std::vector<ChangePayload> payloads;
};

struct DocumentIdentity {
    std::string document_id;
    std::string owner;
    Author author = Author::assistant;
    Timestamp created_at{};
};

/// An event-sourced business plan. Values are immutable; every change returns a
/// new document one revision ahead.
class PlanDocument {
public:
    const std::string& document_id() const noexcept { return document_id_; }
    const std::string& owner() const noexcept { return owner_; }
    const std::vector<Goal>& goals() const noexcept { return goals_; }
    const BusinessContext& context() const noexcept { return context_; }
    const std::array<PlanSection, kSectionCount>& sections() const noexcept { return sections_; }
    const PlanSection& section(SectionId id) const noexcept { return sections_[index_of(id)]; }
    const std::vector<Revision>& revisions() const noexcept { return revisions_; }
    std::size_t head() const noexcept { return revisions_.back().index; }

    bool has_goal(std::string_view goal_id) const noexcept;

    /// Revision history together with the payload of each revision.
    History history() const { return {revisions_, payloads_}; }

    /// Appends a section-scoped revision. `kind` must not be full_draft.
    PlanDocument with_section(ChangeKind kind, SectionId id, RichText content, Author author,
                              Timestamp at) const;

    bool operator==(const PlanDocument& other) const = default;

private:
    friend PlanDocument new_document(const BusinessContext&, const std::vector<Goal>&, const SectionMap&,
                                     const DocumentIdentity&);
    friend PlanDocument replay(const std::vector<Revision>&, const std::vector<ChangePayload>&);

    PlanDocument() = default;

    std::string document_id_;
    std::string owner_;
    std::vector<Goal> goals_;
    BusinessContext context_;
    std::array<PlanSection, kSectionCount> sections_{};
    std::vector<Revision> revisions_;
    std::vector<ChangePayload> payloads_;
};

/// Builds revision 0 (change = full_draft). Throws MissingSection / InvalidGoal.
PlanDocument new_document(const BusinessContext& context, const std::vector<Goal>& goals,
                          const SectionMap& initial_sections, const DocumentIdentity& identity);

/// Rebuilds a document from its history. Throws GapInHistory / PayloadMismatch.
PlanDocument replay(const std::vector<Revision>& revisions, const std::vector<ChangePayload>& payloads);

inline PlanDocument replay(const History& history) { return replay(history.revisions, history.payloads); }

// ---- interchange form ----------------------------------------------------

nlohmann::json to_json(const Goal& goal);
nlohmann::json to_json(const BusinessContext& context);
nlohmann::json to_json(const Revision& revision);
nlohmann::json to_json(const ChangePayload& payload);
nlohmann::json to_json(const PlanDocument& document);

Goal goal_from_json(const nlohmann::json& value);
BusinessContext context_from_json(const nlohmann::json& value);
Revision revision_from_json(const nlohmann::json& value);
ChangePayload payload_from_json(const nlohmann::json& value);
/// {"<section_id>": <rich text>, ...}
SectionMap sections_from_json(const nlohmann::json& value);

/// Canonical bytes: key-sorted, UTF-8, no insignificant whitespace.
std::string canonical_dump(const nlohmann::json& value);
std::string serialize(const PlanDocument& document);

} // namespace bizplan
