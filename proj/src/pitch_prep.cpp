#include "bizplan/pitch_prep.hpp"

#include "bizplan/error.hpp"
#include "bizplan/exporter.hpp"
#include "bizplan/plan_generator.hpp"
#include "bizplan/text_util.hpp"

#include <algorithm>
#include <cctype>

namespace bizplan {

namespace {

constexpr std::string_view kPitchSystem =
    "You prepare a small-business owner to meet an expert such as a lender, grant officer or business advisor. "
    "Read the business plan and the owner's goal, then list questions the owner should ask the expert. Each "
    "question must be specific to this plan and goal. Reply with a numbered list of 5 to 8 questions, one per "
    "line, and nothing else.";

constexpr std::string_view kPitchReformat =
    "Reply again with only a numbered list of 5 to 8 questions, one per line, each ending with a question mark.";

/// Strips "1.", "2)", "-", "*", "Q:" markers. Returns true when one was present.
bool strip_list_marker(std::string_view& line)
{
    auto s = line;
    if (s.starts_with("- ") || s.starts_with("* ") || s.starts_with("• ")) {
        line = text::trim(s.substr(s.find(' ') + 1));
        return true;
    }
    std::size_t digits = 0;
    while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits])) != 0) {
        ++digits;
    }
    if (digits > 0 && digits < s.size() && (s[digits] == '.' || s[digits] == ')')) {
        line = text::trim(s.substr(digits + 1));
        return true;
    }
    if (text::istarts_with(s, "q:")) {
        line = text::trim(s.substr(2));
        return true;
    }
    return false;
}

} // namespace

std::vector<std::string> parse_questions(std::string_view reply)
{
    std::vector<std::string> out;
    for (auto raw : text::split_lines(reply)) {
        auto line = text::trim(raw);
        const bool listed = strip_list_marker(line);
        std::string q;
        for (char c : line) {
            if (c != '*') {
                q.push_back(c);
            }
        }
        q = text::collapse_whitespace(q);
        if (q.empty() || (!listed && q.back() != '?')) {
            continue;
        }
        while (!q.empty() && (q.back() == '.' || q.back() == '?' || q.back() == '!' || q.back() == ' ')) {
            q.pop_back();
        }
        if (q.empty()) {
            continue;
        }
        out.push_back(q + "?");
    }
    return out;
}

std::vector<std::string> clamp_questions(std::vector<std::string> questions, const PlanDocument& plan)
{
    if (questions.size() > kMaxPitchQuestions) {
        questions.resize(kMaxPitchQuestions);
    }
    if (questions.size() >= kMinPitchQuestions) {
        return questions;
    }
    std::vector<SectionId> weakest(kCanonicalSections.begin(), kCanonicalSections.end());
    std::stable_sort(weakest.begin(), weakest.end(), [&](SectionId a, SectionId b) {
        return plan.section(a).completeness < plan.section(b).completeness;
    });
    static constexpr std::array<std::string_view, 3> kTemplates = {
        "What is the weakest part of my ",
        "What would make my ",
        "Which numbers should I prepare to support my ",
    };
    static constexpr std::array<std::string_view, 3> kEndings = {"?", " more convincing?", "?"};
    for (std::size_t n = 0; questions.size() < kMinPitchQuestions; ++n) {
        const auto t = n / weakest.size() % kTemplates.size();
        const auto section = weakest[n % weakest.size()];
        auto q = std::string(kTemplates[t]) + std::string(display_name(section)) + std::string(kEndings[t]);
        if (std::find(questions.begin(), questions.end(), q) == questions.end()) {
            questions.push_back(std::move(q));
        }
    }
    return questions;
}

ProviderRequest pitch_request(const PlanDocument& plan, const Goal& goal)
{
    std::string user = "GOAL\n[" + goal.id + "] " + goal.label;
    if (!text::trim(goal.detail).empty()) {
        user += ": " + goal.detail;
    }
    user += "\n\nBUSINESS PLAN\n" + export_markdown(plan);
    return Gateway::make_request(Route::pitch_prep,
                                 {Message{Role::system, std::string(kPitchSystem)}, Message{Role::user, user}}, 600);
}

PitchPrep prepare_pitch(const PlanDocument& plan, const std::string& goal_id, const Gateway& gateway, Timestamp at)
{
    const auto& goals = plan.goals();
    const auto goal = std::find_if(goals.begin(), goals.end(), [&](const Goal& g) { return g.id == goal_id; });
    if (goal == goals.end()) {
        throw Error(ErrorCode::InvalidArgument, "unknown goal '" + goal_id + "'");
    }
    auto request = pitch_request(plan, *goal);
    const auto reply = gateway.complete(request).content;
    auto questions = parse_questions(reply);
    if (questions.empty()) {
        request.messages.push_back(Message{Role::assistant, reply});
        request.messages.push_back(Message{Role::user, std::string(kPitchReformat)});
        questions = parse_questions(gateway.complete(request).content);
        if (questions.empty()) {
            throw Error(ErrorCode::QuestionParseFailed, "no questions found in the reply after retry");
        }
    }
    return PitchPrep{plan.document_id(), goal_id, clamp_questions(std::move(questions), plan), at, plan.head()};
}

std::vector<ExpertProfile> list_experts(const Corpus& corpus, std::optional<SectionId> focus)
{
    std::vector<ExpertProfile> out;
    for (const auto& e : corpus.experts()) {
        if (!focus || std::find(e.focus_areas.begin(), e.focus_areas.end(), *focus) != e.focus_areas.end()) {
            out.push_back(e);
        }
    }
    return out;
}

nlohmann::json to_json(const PitchPrep& prep)
{
    return {{"document_id", prep.document_id},
            {"goal_id", prep.goal_id},
            {"questions", prep.questions},
            {"generated_at", format_utc(prep.generated_at)},
            {"head_at_generation", prep.head_at_generation}};
}

nlohmann::json to_json(const ExpertProfile& expert)
{
    nlohmann::json areas = nlohmann::json::array();
    for (auto id : expert.focus_areas) {
        areas.push_back(to_string(id));
    }
    return {{"expert_id", expert.expert_id},
            {"name", expert.name},
            {"focus_areas", std::move(areas)},
            {"contact_url", expert.contact_url}};
}

} // namespace bizplan
