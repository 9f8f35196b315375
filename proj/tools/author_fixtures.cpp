// Regenerates the replay fixtures under fixture/llm and the golden files by
// running the real pipelines against the scripted stand-in model, recording
// every exchange. Review the diff of golden/ before committing a new run.

#include "coffee_session.hpp"
#include "scripted_provider.hpp"

#include "bizplan/error.hpp"
#include "bizplan/exporter.hpp"
#include "bizplan/ingestion.hpp"
#include "bizplan/pitch_prep.hpp"
#include "bizplan/plan_generator.hpp"
#include "bizplan/suggestion.hpp"

#include <fstream>
#include <iostream>

namespace {

using namespace bizplan;
using namespace bizplan::testing;
using nlohmann::json;
namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& content)
{
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    std::cout << "wrote " << fs::relative(path, source_dir()).string() << "\n";
}

void require(bool ok, const std::string& what)
{
    if (!ok) {
        throw std::runtime_error("check failed: " + what);
    }
}

std::vector<Goal> goals_of(const json& request)
{
    std::vector<Goal> goals;
    for (const auto& g : request.at("goals")) {
        goals.push_back(goal_from_json(g));
    }
    return goals;
}

} // namespace

int main(int argc, char** argv)
{
    if (argc > 1) {
        std::cerr << "usage: " << argv[0] << "\n"
                  << "Rewrites fixture/llm and golden/ in the source tree; takes no arguments.\n";
        return 2;
    }
    try {
        const auto root = source_dir();
        const auto llm_dir = root / "fixture" / "llm";
        fs::create_directories(llm_dir);
        for (const auto& entry : fs::directory_iterator(llm_dir)) {
            if (entry.path().extension() == ".json") {
                fs::remove(entry.path());
            }
        }

        auto scripted = std::make_shared<ScriptedProvider>();
        auto recorder = std::make_shared<RecordingProvider>(scripted, llm_dir);
        auto config = GatewayConfig::defaults();
        config.mode = GatewayMode::mock;
        const Gateway gateway(recorder, config);
        const auto corpus = Corpus::load(root / "corpus");
        const auto clock = frozen_clock(mock_epoch());
        FixtureFetcher fetcher(root / "fixture");

        // Onboarding the coffee roaster: extraction plus nine sections.
        const auto request = coffee_onboarding_request();
        const auto goals = goals_of(request);
        const auto page = fetch_and_strip(request.at("url").get<std::string>(), fetcher, clock);
        const auto context = context_from_page(page, gateway);
        DraftOptions options;
        options.identity = {"plan-0001", "acct-0001", Author::assistant, clock()};
        const auto draft = generate_draft(context, goals, gateway, corpus, options);

        write_text(root / "golden" / "drafts" / "coffee.json", serialize(draft) + "\n");
        write_text(root / "golden" / "export" / "coffee.md", export_markdown(draft));
        write_text(root / "golden" / "export" / "coffee.html", export_html(draft));
        json sections = json::object();
        for (const auto& s : draft.sections()) {
            sections[std::string(to_string(s.id))] = to_json(s.content);
        }
        write_text(root / "fixture" / "draft_coffee.json", sections.dump(2) + "\n");

        // Other onboarding inputs.
        context_from_page(fetch_and_strip("https://acme.example/", fetcher, clock), gateway);
        try {
            context_from_page(fetch_and_strip("https://rambling.example/", fetcher, clock), gateway);
            require(false, "rambling page should not parse");
        } catch (const Error& e) {
            require(e.code() == ErrorCode::ExtractionUnparseable, "rambling page error code");
        }
        context_from_chat({Message{Role::user, std::string(kPittsburghMessage)}}, gateway);
        {
            const auto chat = json::parse(read_file(root / "fixture" / "onboarding_chat_40.json"));
            std::vector<Message> transcript;
            for (const auto& t : chat.at("transcript")) {
                transcript.push_back({t.at("role") == "user" ? Role::user : Role::assistant,
                                      t.at("text").get<std::string>()});
            }
            context_from_chat(transcript, gateway);
        }

        // Conversation features on the fresh draft, with an empty conversation.
        suggest_prompts({}, draft, gateway);
        propose_edit(kFoundingYearMessage, {}, draft, gateway);
        propose_edit(kFoundingYearMessage, {}, draft, gateway, [](std::string_view) {});
        const auto chatting = propose_edit(kJustChattingMessage, {}, draft, gateway);
        require(chatting.proposals.empty(), "just-chatting reply has no proposal");
        inline_generate({SectionId::market_analysis, std::string(kInlineCriteria), 1}, draft, gateway, corpus);
        prepare_pitch(draft, "city-grant", gateway, clock());
        gateway.transcribe(read_file(root / "fixture" / "jose_edit.webm"), "audio/webm");

        // Three applied edits in a row.
        auto plan = draft;
        for (auto message : {kFoundingYearMessage, kCompetitorsMessage, kFundingMessage}) {
            const auto result = propose_edit(message, {}, plan, gateway);
            require(result.proposals.size() == 1, "one proposal for: " + std::string(message));
            plan = apply_edit(plan, result.proposals.front(), clock());
        }
        require(plan.head() == 3, "three edits applied");

        // The full owner session through the HTTP service.
        TempDir data("author-fixtures");
        ServiceDeps deps;
        deps.provider = recorder;
        TestServer server(mock_config(data.path()), deps);
        auto client = server.client();
        SessionState state;
        for (const auto& step : coffee_session_steps()) {
            step.run(client, state);
            std::cout << "session step ok: " << step.name << "\n";
        }
        require(state.acknowledged.at(0) == serialize(draft), "service draft equals library draft");
        require(state.transcript == kVoiceNoteText, "voice note transcript");

        std::cout << "recorded " << scripted->calls() << " exchanges\n";
    } catch (const std::exception& e) {
        std::cerr << "author-fixtures: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
