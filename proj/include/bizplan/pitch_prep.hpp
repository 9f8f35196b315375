#pragma once

#include "bizplan/corpus.hpp"
#include "bizplan/document.hpp"
#include "bizplan/gateway.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bizplan {

inline constexpr std::size_t kMinPitchQuestions = 5;
inline constexpr std::size_t kMaxPitchQuestions = 8;

struct PitchPrep {
    std::string document_id;
    std::string goal_id;
    std::vector<std::string> questions;
    Timestamp generated_at{};
    std::size_t head_at_generation = 0;
};

/// Question lines of a reply (numbered, bulleted or ending in '?'), each
/// normalized to end with a single '?'.
std::vector<std::string> parse_questions(std::string_view reply);

/// Clamps to 5..8: truncates in order, or pads with templates naming the
/// least-complete sections.
std::vector<std::string> clamp_questions(std::vector<std::string> questions, const PlanDocument& plan);

ProviderRequest pitch_request(const PlanDocument& plan, const Goal& goal);

/// Throws InvalidArgument for an unknown goal, QuestionParseFailed after one reformat retry.
PitchPrep prepare_pitch(const PlanDocument& plan, const std::string& goal_id, const Gateway& gateway, Timestamp at);

/// Static directory filtered by focus area, in stored order.
std::vector<ExpertProfile> list_experts(const Corpus& corpus, std::optional<SectionId> focus = std::nullopt);

nlohmann::json to_json(const PitchPrep& prep);
nlohmann::json to_json(const ExpertProfile& expert);

} // namespace bizplan
