#include "bizplan/document.hpp"

#include "bizplan/error.hpp"
#include "bizplan/text_util.hpp"

#include <algorithm>
#include <set>

namespace bizplan {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 7> kFactCategories = {
    "offering", "customers", "location", "stage", "team", "pricing", "other",
};

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); }

} // namespace

std::string_view to_string(FactCategory category) noexcept
{
    return kFactCategories[static_cast<std::size_t>(category)];
}

FactCategory parse_fact_category(std::string_view text) noexcept
{
    for (std::size_t i = 0; i < kFactCategories.size(); ++i) {
        if (text::iequals(kFactCategories[i], text::trim(text))) {
            return static_cast<FactCategory>(i);
        }
    }
    return FactCategory::other;
}

std::string_view to_string(Author author) noexcept { return author == Author::user ? "user" : "assistant"; }

std::string_view to_string(ChangeKind kind) noexcept
{
    switch (kind) {
    case ChangeKind::full_draft: return "full_draft";
    case ChangeKind::section_replace: return "section_replace";
    case ChangeKind::inline_insert: return "inline_insert";
    case ChangeKind::style_only: return "style_only";
    }
    return "full_draft";
}

void validate(const BusinessContext& context)
{
    if (text::utf8_length(context.business_name) > kMaxBusinessNameChars) {
        invalid("business_name exceeds cap");
    }
    if (text::utf8_length(context.summary) > kMaxSummaryChars) {
        invalid("summary exceeds 2000 characters");
    }
    if (context.facts.size() > kMaxFacts) {
        invalid("too many facts");
    }
    for (const auto& fact : context.facts) {
        if (text::trim(fact.statement).empty()) {
            invalid("fact statement must be nonempty");
        }
        if (text::utf8_length(fact.statement) > kMaxStatementChars) {
            invalid("fact statement exceeds cap");
        }
    }
    if (context.facts.empty() && text::trim(context.summary).empty()) {
        invalid("context needs a summary or at least one fact");
    }
}

void validate_goals(const std::vector<Goal>& goals)
{
    std::set<std::string> seen;
    for (const auto& goal : goals) {
        if (text::trim(goal.label).empty()) {
            throw Error(ErrorCode::InvalidGoal, "goal '" + goal.id + "' has an empty label");
        }
        if (goal.id.empty() || !seen.insert(goal.id).second) {
            throw Error(ErrorCode::InvalidGoal, "goal id '" + goal.id + "' is empty or duplicated");
        }
    }
}

double completeness_of(const RichText& content)
{
    const auto chars = static_cast<double>(non_whitespace_count(content));
    const double fill = std::min(1.0, chars / 600.0);
    const double structure = content.blocks.size() >= 2 ? 1.0 : 0.5;
    return fill * structure;
}

bool PlanDocument::has_goal(std::string_view goal_id) const noexcept
{
    return std::any_of(goals_.begin(), goals_.end(), [&](const Goal& g) { return g.id == goal_id; });
}

PlanDocument PlanDocument::with_section(ChangeKind kind, SectionId id, RichText content, Author author,
                                        Timestamp at) const
{
    if (kind == ChangeKind::full_draft) {
        invalid("full_draft is only valid for revision 0");
    }
    PlanDocument next = *this;
    auto normalized = normalize(content);
    auto& section = next.sections_[index_of(id)];
    section.completeness = completeness_of(normalized);
    section.content = normalized;
    Revision revision;
    revision.index = head() + 1;
    revision.parent_index = head();
    revision.author = author;
    revision.change = Change{kind, id};
    revision.timestamp = at;
    next.revisions_.push_back(revision);
    next.payloads_.emplace_back(SectionPayload{std::move(normalized)});
    return next;
}

PlanDocument new_document(const BusinessContext& context, const std::vector<Goal>& goals,
                          const SectionMap& initial_sections, const DocumentIdentity& identity)
{
    for (auto id : kCanonicalSections) {
        if (!initial_sections.contains(id)) {
            throw Error(ErrorCode::MissingSection, "initial sections lack " + std::string(to_string(id)));
        }
    }
    validate_goals(goals);

    PlanDocument doc;
    doc.document_id_ = identity.document_id;
    doc.owner_ = identity.owner;
    doc.goals_ = goals;
    doc.context_ = context;
    DraftPayload payload{identity.document_id, identity.owner, goals, context, {}};
    for (auto id : kCanonicalSections) {
        auto content = normalize(initial_sections.at(id));
        doc.sections_[index_of(id)] = PlanSection{id, content, completeness_of(content)};
        payload.sections[index_of(id)] = std::move(content);
    }
    doc.revisions_.push_back(Revision{0, std::nullopt, identity.author, Change{ChangeKind::full_draft, std::nullopt},
                                      identity.created_at});
    doc.payloads_.emplace_back(std::move(payload));
    return doc;
}

PlanDocument replay(const std::vector<Revision>& revisions, const std::vector<ChangePayload>& payloads)
{
    if (revisions.empty() || revisions.front().index != 0) {
        throw Error(ErrorCode::GapInHistory, "history has no revision 0");
    }
    if (payloads.size() != revisions.size()) {
        throw Error(ErrorCode::PayloadMismatch, "payload count does not match revision count");
    }
    const auto* draft = std::get_if<DraftPayload>(&payloads.front());
    if (revisions.front().change.kind != ChangeKind::full_draft || draft == nullptr) {
        throw Error(ErrorCode::PayloadMismatch, "revision 0 must be a full draft");
    }
    SectionMap sections;
    for (auto id : kCanonicalSections) {
        sections[id] = draft->sections[index_of(id)];
    }
    auto doc = new_document(draft->context, draft->goals, sections,
                            DocumentIdentity{draft->document_id, draft->owner, revisions.front().author,
                                             revisions.front().timestamp});
    for (std::size_t i = 1; i < revisions.size(); ++i) {
        const auto& rev = revisions[i];
        if (rev.index != i || rev.parent_index != std::optional<std::size_t>(i - 1)) {
            throw Error(ErrorCode::GapInHistory, "revision " + std::to_string(rev.index) + " found at position " +
                                                     std::to_string(i));
        }
        const auto* section = std::get_if<SectionPayload>(&payloads[i]);
        if (section == nullptr || rev.change.kind == ChangeKind::full_draft || !rev.change.section) {
            throw Error(ErrorCode::PayloadMismatch, "revision " + std::to_string(i) + " payload does not fit its change");
        }
        doc = doc.with_section(rev.change.kind, *rev.change.section, section->content, rev.author, rev.timestamp);
    }
    return doc;
}

// ---- interchange ---------------------------------------------------------

json to_json(const Goal& goal) { return {{"id", goal.id}, {"label", goal.label}, {"detail", goal.detail}}; }

json to_json(const BusinessContext& context)
{
    json facts = json::array();
    for (const auto& fact : context.facts) {
        facts.push_back({{"category", to_string(fact.category)}, {"statement", fact.statement}});
    }
    json source;
    switch (context.source.kind) {
    case ContextSource::Kind::website: source = {{"kind", "website"}, {"url", context.source.ref}}; break;
    case ContextSource::Kind::chat: source = {{"kind", "chat"}, {"conversation_id", context.source.ref}}; break;
    case ContextSource::Kind::manual: source = {{"kind", "manual"}}; break;
    }
    return {{"business_name", context.business_name},
            {"summary", context.summary},
            {"facts", std::move(facts)},
            {"source", std::move(source)}};
}

json to_json(const Revision& revision)
{
    json change = {{"kind", to_string(revision.change.kind)}};
    if (revision.change.section) {
        change["section_id"] = to_string(*revision.change.section);
    }
    return {{"index", revision.index},
            {"parent_index", revision.parent_index ? json(*revision.parent_index) : json(nullptr)},
            {"author", to_string(revision.author)},
            {"change", std::move(change)},
            {"timestamp", format_utc(revision.timestamp)}};
}

json to_json(const ChangePayload& payload)
{
    if (const auto* draft = std::get_if<DraftPayload>(&payload)) {
        json goals = json::array();
        for (const auto& g : draft->goals) {
            goals.push_back(to_json(g));
        }
        json sections = json::object();
        for (auto id : kCanonicalSections) {
            sections[std::string(to_string(id))] = to_json(draft->sections[index_of(id)]);
        }
        return {{"type", "draft"},
                {"document_id", draft->document_id},
                {"owner", draft->owner},
                {"goals", std::move(goals)},
                {"context", to_json(draft->context)},
                {"sections", std::move(sections)}};
    }
    return {{"type", "section"}, {"content", to_json(std::get<SectionPayload>(payload).content)}};
}

json to_json(const PlanDocument& document)
{
    json goals = json::array();
    for (const auto& g : document.goals()) {
        goals.push_back(to_json(g));
    }
    json sections = json::array();
    for (const auto& s : document.sections()) {
        sections.push_back(
            {{"section_id", to_string(s.id)}, {"content", to_json(s.content)}, {"completeness", s.completeness}});
    }
    json revisions = json::array();
    for (const auto& r : document.revisions()) {
        revisions.push_back(to_json(r));
    }
    return {{"document_id", document.document_id()},
            {"owner", document.owner()},
            {"goals", std::move(goals)},
            {"context", to_json(document.context())},
            {"sections", std::move(sections)},
            {"revisions", std::move(revisions)},
            {"head", document.head()}};
}

namespace {

std::string string_field(const json& obj, const char* key)
{
    if (!obj.is_object() || !obj.contains(key) || !obj[key].is_string()) {
        invalid(std::string("missing string field '") + key + "'");
    }
    return obj[key].get<std::string>();
}

} // namespace

Goal goal_from_json(const json& value)
{
    Goal goal{string_field(value, "id"), string_field(value, "label"), {}};
    if (value.contains("detail") && value["detail"].is_string()) {
        goal.detail = value["detail"].get<std::string>();
    }
    return goal;
}

BusinessContext context_from_json(const json& value)
{
    BusinessContext context;
    context.business_name = string_field(value, "business_name");
    context.summary = string_field(value, "summary");
    if (value.contains("facts")) {
        if (!value["facts"].is_array()) {
            invalid("facts must be an array");
        }
        for (const auto& fact : value["facts"]) {
            context.facts.push_back(
                Fact{parse_fact_category(string_field(fact, "category")), string_field(fact, "statement")});
        }
    }
    if (!value.contains("source") || !value["source"].is_object()) {
        invalid("missing source");
    }
    const auto& source = value["source"];
    const auto kind = string_field(source, "kind");
    if (kind == "website") {
        context.source = {ContextSource::Kind::website, string_field(source, "url")};
    } else if (kind == "chat") {
        context.source = {ContextSource::Kind::chat, string_field(source, "conversation_id")};
    } else if (kind == "manual") {
        context.source = {ContextSource::Kind::manual, {}};
    } else {
        invalid("unknown source kind '" + kind + "'");
    }
    return context;
}

Revision revision_from_json(const json& value)
{
    Revision revision;
    if (!value.is_object() || !value.contains("index") || !value["index"].is_number_unsigned()) {
        invalid("revision needs an unsigned index");
    }
    revision.index = value["index"].get<std::size_t>();
    if (value.contains("parent_index") && !value["parent_index"].is_null()) {
        revision.parent_index = value["parent_index"].get<std::size_t>();
    }
    const auto author = string_field(value, "author");
    if (author != "user" && author != "assistant") {
        invalid("unknown author '" + author + "'");
    }
    revision.author = author == "user" ? Author::user : Author::assistant;
    const auto& change = value.at("change");
    const auto kind = string_field(change, "kind");
    if (kind == "full_draft") {
        revision.change.kind = ChangeKind::full_draft;
    } else if (kind == "section_replace") {
        revision.change.kind = ChangeKind::section_replace;
    } else if (kind == "inline_insert") {
        revision.change.kind = ChangeKind::inline_insert;
    } else if (kind == "style_only") {
        revision.change.kind = ChangeKind::style_only;
    } else {
        invalid("unknown change kind '" + kind + "'");
    }
    if (change.contains("section_id")) {
        revision.change.section = section_from_string(string_field(change, "section_id"));
    }
    auto ts = parse_utc(string_field(value, "timestamp"));
    if (!ts) {
        invalid("bad timestamp");
    }
    revision.timestamp = *ts;
    return revision;
}

ChangePayload payload_from_json(const json& value)
{
    const auto type = string_field(value, "type");
    if (type == "section") {
        return SectionPayload{rich_text_from_json(value.at("content"))};
    }
    if (type != "draft") {
        invalid("unknown payload type '" + type + "'");
    }
    DraftPayload draft;
    draft.document_id = string_field(value, "document_id");
    draft.owner = string_field(value, "owner");
    for (const auto& g : value.at("goals")) {
        draft.goals.push_back(goal_from_json(g));
    }
    draft.context = context_from_json(value.at("context"));
    const auto sections = sections_from_json(value.at("sections"));
    for (auto id : kCanonicalSections) {
        auto it = sections.find(id);
        if (it == sections.end()) {
            throw Error(ErrorCode::MissingSection, "draft payload lacks " + std::string(to_string(id)));
        }
        draft.sections[index_of(id)] = it->second;
    }
    return draft;
}

SectionMap sections_from_json(const json& value)
{
    if (!value.is_object()) {
        invalid("sections must be an object keyed by section id");
    }
    SectionMap out;
    for (const auto& [key, content] : value.items()) {
        out[section_from_string(key)] = rich_text_from_json(content);
    }
    return out;
}

std::string canonical_dump(const json& value)
{
    return value.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string serialize(const PlanDocument& document) { return canonical_dump(to_json(document)); }

} // namespace bizplan
