#include "bizplan/corpus.hpp"

#include "bizplan/error.hpp"
#include "bizplan/text_util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace bizplan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::InvalidArgument, "cannot read corpus file " + path.filename().string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

Corpus Corpus::load(const fs::path& root)
{
    Corpus corpus;
    for (auto id : kCanonicalSections) {
        const auto dir = root / "exemplars" / std::string(to_string(id));
        if (fs::is_directory(dir)) {
            std::vector<fs::path> bodies;
            for (const auto& entry : fs::directory_iterator(dir)) {
                if (entry.path().extension() == ".txt") {
                    bodies.push_back(entry.path());
                }
            }
            std::sort(bodies.begin(), bodies.end());
            for (const auto& body_path : bodies) {
                auto meta_path = body_path;
                meta_path.replace_extension(".meta");
                const auto meta = json::parse(read_file(meta_path));
                corpus.add_exemplar(Exemplar{meta.at("exemplar_id").get<std::string>(), id,
                                             meta.at("title").get<std::string>(),
                                             std::string(text::trim(read_file(body_path))),
                                             meta.value("source_url", std::string())});
            }
        }
        const auto tooltip_path = root / "tooltips" / (std::string(to_string(id)) + ".txt");
        if (fs::exists(tooltip_path)) {
            std::vector<std::string> questions;
            const auto content = read_file(tooltip_path);
            for (auto line : text::split_lines(content)) {
                if (auto q = text::trim(line); !q.empty()) {
                    questions.emplace_back(q);
                }
            }
            corpus.set_tooltips(id, std::move(questions));
        }
    }
    const auto experts_path = root / "experts.json";
    if (fs::exists(experts_path)) {
        std::vector<ExpertProfile> experts;
        for (const auto& e : json::parse(read_file(experts_path))) {
            ExpertProfile profile{e.at("expert_id").get<std::string>(), e.at("name").get<std::string>(), {},
                                  e.value("contact_url", std::string())};
            for (const auto& area : e.at("focus_areas")) {
                profile.focus_areas.push_back(section_from_string(area.get<std::string>()));
            }
            if (profile.focus_areas.empty()) {
                throw Error(ErrorCode::InvalidArgument, "expert " + profile.expert_id + " has no focus areas");
            }
            experts.push_back(std::move(profile));
        }
        corpus.set_experts(std::move(experts));
    }
    return corpus;
}

void Corpus::add_exemplar(Exemplar exemplar)
{
    if (text::trim(exemplar.body).empty()) {
        throw Error(ErrorCode::InvalidArgument, "exemplar " + exemplar.exemplar_id + " has an empty body");
    }
    exemplars_[index_of(exemplar.section)].push_back(std::move(exemplar));
}

void Corpus::set_tooltips(SectionId id, std::vector<std::string> questions)
{
    tooltips_[index_of(id)] = std::move(questions);
}

void Corpus::set_experts(std::vector<ExpertProfile> experts) { experts_ = std::move(experts); }

nlohmann::json to_json(const Exemplar& exemplar)
{
    return {{"exemplar_id", exemplar.exemplar_id},
            {"section_id", std::string(to_string(exemplar.section))},
            {"title", exemplar.title},
            {"body", exemplar.body},
            {"source_url", exemplar.source_url}};
}

} // namespace bizplan
