#include "bizplan/plan_generator.hpp"

#include "bizplan/text_util.hpp"

#include <algorithm>
#include <future>
#include <mutex>

namespace bizplan {

namespace {

std::string_view section_guidance(SectionId id)
{
    switch (id) {
    case SectionId::executive_summary:
        return "Summarize what the business is, why it will succeed, and what it is asking for. Mention the "
               "mission, the core offering, the leadership and where the business is located.";
    case SectionId::company_description:
        return "Describe the problem the business solves, the customers it serves and the competitive "
               "advantages that set it apart.";
    case SectionId::market_analysis:
        return "Describe the industry outlook, the target market and the competition, with concrete local detail "
               "where the context allows it.";
    case SectionId::organization_management:
        return "Describe the legal structure, ownership and the people who run the business and their experience.";
    case SectionId::service_product_line:
        return "Describe what the business sells, how it benefits customers and the product lifecycle.";
    case SectionId::marketing_sales:
        return "Describe how the business will attract and keep customers and how a sale actually happens.";
    case SectionId::funding_request:
        return "State how much funding is needed over the next few years, how it will be used and the preferred "
               "terms. Name grant programs if the goals mention them.";
    case SectionId::financial_projections:
        return "Give a narrative outlook of expected revenue, costs and milestones for the next three to five "
               "years. Do not invent precise figures that the context does not support.";
    case SectionId::appendix:
        return "List the supporting documents a reviewer may ask for, such as permits, licenses, resumes and "
               "letters of reference.";
    }
    return "";
}

constexpr std::string_view kOutputFormat =
    "Output format: use only '# ', '## ' and '### ' headings, '- ' bullet lines, blank lines between paragraphs, "
    "**bold** and *italic*. Start with a level-1 heading naming the section. No tables, links, images or HTML.";

} // namespace

std::string goals_block(const std::vector<Goal>& goals)
{
    std::string out = "BUSINESS PLAN GOALS\n";
    if (goals.empty()) {
        out += "- (none stated)\n";
    }
    for (const auto& g : goals) {
        out += "- [" + g.id + "] " + g.label;
        if (!text::trim(g.detail).empty()) {
            out += ": " + g.detail;
        }
        out += "\n";
    }
    return out;
}

std::string context_block(const BusinessContext& context)
{
    std::string out = "BUSINESS CONTEXT\n";
    out += "Name: " + context.business_name + "\n";
    out += "Summary: " + context.summary + "\n";
    out += "Facts:\n";
    if (context.facts.empty()) {
        out += "- (none)\n";
    }
    for (const auto& f : context.facts) {
        out += "- " + std::string(to_string(f.category)) + ": " + f.statement + "\n";
    }
    return out;
}

PromptBundle assemble_section_prompt(SectionId section, const BusinessContext& context, const std::vector<Goal>& goals,
                                     const Corpus& corpus)
{
    const auto& exemplars = corpus.exemplars(section);
    if (exemplars.empty()) {
        throw Error(ErrorCode::NoExemplar, "no exemplar for section " + std::string(to_string(section)));
    }
    PromptBundle bundle;
    bundle.section = section;
    bundle.k = static_cast<int>(std::min<std::size_t>(kExemplarsPerPrompt, exemplars.size()));
    bundle.system = "You are a business-plan writer helping a small-business owner with limited time and "
                    "writing experience. Write the " +
                    std::string(display_name(section)) + " section of a traditional business plan. " +
                    std::string(section_guidance(section)) + " Keep the owner's Business Plan Goals in mind.\n" +
                    std::string(kOutputFormat);

    std::string user = goals_block(goals) + "\n" + context_block(context) + "\n";
    user += "EXEMPLARS (sample plans from the U.S. Small Business Administration)\n";
    for (int i = 0; i < bundle.k; ++i) {
        const auto& ex = exemplars[static_cast<std::size_t>(i)];
        const auto n = std::to_string(i + 1);
        user += "<<<EXEMPLAR " + n + ": " + ex.title + ">>>\n" + ex.body + "\n<<<END EXEMPLAR " + n + ">>>\n";
    }
    user += "\nTASK\nWrite the " + std::string(display_name(section)) + " section for " +
            (context.business_name.empty() ? std::string("this business") : context.business_name) +
            ", tailored to the goals above. Follow the exemplars' structure, not their facts. " +
            std::string(kOutputFormat);
    bundle.user = std::move(user);
    return bundle;
}

ProviderRequest section_request(const PromptBundle& bundle)
{
    return Gateway::make_request(Route::section_generation,
                                 {Message{Role::system, bundle.system}, Message{Role::user, bundle.user}}, 1200);
}

PlanDocument generate_draft(const BusinessContext& context, const std::vector<Goal>& goals, const Gateway& gateway,
                            const Corpus& corpus, const DraftOptions& options)
{
    validate(context);
    validate_goals(goals);

    // Prompts are assembled up front so a missing exemplar fails before any call.
    std::vector<ProviderRequest> requests;
    for (auto id : kCanonicalSections) {
        requests.push_back(section_request(assemble_section_prompt(id, context, goals, corpus)));
    }

    struct Outcome {
        SectionId id;
        RichText content;
        std::exception_ptr error;
    };
    std::mutex mutex;
    std::vector<Outcome> outcomes;
    std::vector<std::future<void>> tasks;
    tasks.reserve(kSectionCount);
    for (auto id : kCanonicalSections) {
        tasks.push_back(std::async(std::launch::async, [&, id] {
            Outcome outcome{id, {}, nullptr};
            try {
                if (options.stop.stop_requested()) {
                    throw Error(ErrorCode::Cancelled, "draft generation cancelled");
                }
                const auto response = gateway.complete(requests[index_of(id)]);
                if (response.finish_reason != FinishReason::stop) {
                    throw SectionError(ErrorCode::PartialParse, id, "response was cut off");
                }
                outcome.content = parse_section_response(response.content);
                if (outcome.content.empty()) {
                    throw SectionError(ErrorCode::PartialParse, id, "response held no usable text");
                }
            } catch (...) {
                outcome.error = std::current_exception();
            }
            std::lock_guard lock(mutex);
            const bool ok = outcome.error == nullptr;
            outcomes.push_back(std::move(outcome));
            if (ok && options.on_section_done) {
                options.on_section_done(id);
            }
        }));
    }
    for (auto& t : tasks) {
        t.get();
    }
    if (options.stop.stop_requested()) {
        throw Error(ErrorCode::Cancelled, "draft generation cancelled");
    }

    std::sort(outcomes.begin(), outcomes.end(),
              [](const Outcome& a, const Outcome& b) { return index_of(a.id) < index_of(b.id); });
    for (const auto& outcome : outcomes) {
        if (!outcome.error) {
            continue;
        }
        try {
            std::rethrow_exception(outcome.error);
        } catch (const SectionError&) {
            throw;
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Cancelled) {
                throw;
            }
            throw SectionError(ErrorCode::SectionGenerationFailed, outcome.id, e.what());
        } catch (const std::exception& e) {
            throw SectionError(ErrorCode::SectionGenerationFailed, outcome.id, e.what());
        }
    }

    SectionMap sections;
    for (auto& outcome : outcomes) {
        sections[outcome.id] = std::move(outcome.content);
    }
    auto identity = options.identity;
    identity.author = Author::assistant;
    return new_document(context, goals, sections, identity);
}

} // namespace bizplan
