#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace bizplan {

/// The nine sections of a traditional business plan, declared in canonical order.
enum class SectionId : std::size_t {
    executive_summary,
    company_description,
    market_analysis,
    organization_management,
    service_product_line,
    marketing_sales,
    funding_request,
    financial_projections,
    appendix,
};

inline constexpr std::size_t kSectionCount = 9;

inline constexpr std::array<SectionId, kSectionCount> kCanonicalSections = {
    SectionId::executive_summary,   SectionId::company_description,  SectionId::market_analysis,
    SectionId::organization_management, SectionId::service_product_line, SectionId::marketing_sales,
    SectionId::funding_request,     SectionId::financial_projections, SectionId::appendix,
};

constexpr std::size_t index_of(SectionId id) noexcept { return static_cast<std::size_t>(id); }

std::string_view to_string(SectionId id) noexcept;
std::string_view display_name(SectionId id) noexcept;
std::optional<SectionId> parse_section_id(std::string_view text) noexcept;

/// Throws Error(UnknownSection) on anything outside the closed set.
SectionId section_from_string(std::string_view text);

} // namespace bizplan
