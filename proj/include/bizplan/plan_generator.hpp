#pragma once

#include "bizplan/corpus.hpp"
#include "bizplan/document.hpp"
#include "bizplan/error.hpp"
#include "bizplan/gateway.hpp"
#include "bizplan/markup.hpp"

#include <functional>
#include <stop_token>
#include <string>
#include <vector>

namespace bizplan {

inline constexpr int kExemplarsPerPrompt = 2;

struct PromptBundle {
    SectionId section = SectionId::executive_summary;
    std::string system;
    std::string user;
    int k = 1;
    bool operator==(const PromptBundle&) const = default;
};

/// Error tied to one section of a draft (SectionGenerationFailed, PartialParse).
class SectionError : public Error {
public:
    SectionError(ErrorCode code, SectionId section, const std::string& cause)
        : Error(code, "section " + std::string(to_string(section)) + ": " + cause), section_(section)
    {
    }
    SectionId section() const noexcept { return section_; }

private:
    SectionId section_;
};

/// Textual goal and context blocks shared by every prompt the assistant sends.
std::string goals_block(const std::vector<Goal>& goals);
std::string context_block(const BusinessContext& context);

/// Deterministic few-shot bundle: goals, context, the first k (<= 2) corpus
/// exemplars for the section, then the output-format task. Throws NoExemplar.
PromptBundle assemble_section_prompt(SectionId section, const BusinessContext& context, const std::vector<Goal>& goals,
                                     const Corpus& corpus);

ProviderRequest section_request(const PromptBundle& bundle);

struct DraftOptions {
    DocumentIdentity identity;
    /// Invoked once per section as its response is parsed, in completion order.
    std::function<void(SectionId)> on_section_done;
    std::stop_token stop;
};

/// Generates all nine sections concurrently and assembles revision 0 in canonical
/// order. Any failure aborts the draft (SectionError); a stop request yields Cancelled.
PlanDocument generate_draft(const BusinessContext& context, const std::vector<Goal>& goals, const Gateway& gateway,
                            const Corpus& corpus, const DraftOptions& options);

} // namespace bizplan
