#include "bizplan/section.hpp"

#include "bizplan/error.hpp"

#include <string>

namespace bizplan {

namespace {

constexpr std::array<std::string_view, kSectionCount> kIds = {
    "executive_summary",       "company_description",  "market_analysis",
    "organization_management", "service_product_line", "marketing_sales",
    "funding_request",         "financial_projections", "appendix",
};

constexpr std::array<std::string_view, kSectionCount> kDisplayNames = {
    "Executive Summary",           "Company Description",     "Market Analysis",
    "Organization and Management", "Service or Product Line", "Marketing and Sales",
    "Funding Request",             "Financial Projections",   "Appendix",
};

} // namespace

std::string_view to_string(SectionId id) noexcept { return kIds[index_of(id)]; }

std::string_view display_name(SectionId id) noexcept { return kDisplayNames[index_of(id)]; }

std::optional<SectionId> parse_section_id(std::string_view text) noexcept
{
    for (std::size_t i = 0; i < kSectionCount; ++i) {
        if (kIds[i] == text) {
            return kCanonicalSections[i];
        }
    }
    return std::nullopt;
}

SectionId section_from_string(std::string_view text)
{
    if (auto id = parse_section_id(text)) {
        return *id;
    }
    throw Error(ErrorCode::UnknownSection, "unknown section '" + std::string(text) + "'");
}

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::MissingSection: return "missing_section";
    case ErrorCode::InvalidGoal: return "invalid_goal";
    case ErrorCode::GapInHistory: return "gap_in_history";
    case ErrorCode::PayloadMismatch: return "payload_mismatch";
    case ErrorCode::Timeout: return "timeout";
    case ErrorCode::ProviderError: return "provider_error";
    case ErrorCode::FixtureMiss: return "fixture_miss";
    case ErrorCode::UnsupportedMedia: return "unsupported_media";
    case ErrorCode::FetchFailed: return "fetch_failed";
    case ErrorCode::NotHtml: return "not_html";
    case ErrorCode::RobotsDisallowed: return "robots_disallowed";
    case ErrorCode::ExtractionUnparseable: return "extraction_unparseable";
    case ErrorCode::NoExemplar: return "no_exemplar";
    case ErrorCode::SectionGenerationFailed: return "section_generation_failed";
    case ErrorCode::PartialParse: return "partial_parse";
    case ErrorCode::StaleProposal: return "stale_proposal";
    case ErrorCode::UnknownSection: return "unknown_section";
    case ErrorCode::QuestionParseFailed: return "question_parse_failed";
    case ErrorCode::StorageCorrupt: return "storage_corrupt";
    case ErrorCode::Cancelled: return "cancelled";
    case ErrorCode::NotFound: return "not_found";
    }
    return "unknown";
}

} // namespace bizplan
