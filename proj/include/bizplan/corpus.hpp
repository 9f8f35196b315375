#pragma once

#include "bizplan/section.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace bizplan {

struct Exemplar {
    std::string exemplar_id;
    SectionId section = SectionId::executive_summary;
    std::string title;
    std::string body;
    std::string source_url;
    bool operator==(const Exemplar&) const = default;
};

struct ExpertProfile {
    std::string expert_id;
    std::string name;
    std::vector<SectionId> focus_areas;
    std::string contact_url;
    bool operator==(const ExpertProfile&) const = default;
};

nlohmann::json to_json(const Exemplar& exemplar);

/// Shipped reference data: section exemplars, tool-tip questions and the expert directory.
///
/// Layout under the corpus root:
///   exemplars/<section_id>/<nn>_<slug>.txt   body text
///   exemplars/<section_id>/<nn>_<slug>.meta  {"exemplar_id", "title", "source_url"}
///   tooltips/<section_id>.txt                one question per line
///   experts.json                             [{"expert_id", "name", "focus_areas", "contact_url"}]
class Corpus {
public:
    Corpus() = default;

    /// Throws Error(InvalidArgument) on malformed entries.
    static Corpus load(const std::filesystem::path& root);

    /// Corpus order (filename sort).
    const std::vector<Exemplar>& exemplars(SectionId id) const noexcept { return exemplars_[index_of(id)]; }
    const std::vector<std::string>& tooltips(SectionId id) const noexcept { return tooltips_[index_of(id)]; }
    const std::vector<ExpertProfile>& experts() const noexcept { return experts_; }

    void add_exemplar(Exemplar exemplar);
    void set_tooltips(SectionId id, std::vector<std::string> questions);
    void set_experts(std::vector<ExpertProfile> experts);

private:
    std::array<std::vector<Exemplar>, kSectionCount> exemplars_{};
    std::array<std::vector<std::string>, kSectionCount> tooltips_{};
    std::vector<ExpertProfile> experts_;
};

} // namespace bizplan
