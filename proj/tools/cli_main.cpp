#include "bizplan/corpus.hpp"
#include "bizplan/error.hpp"
#include "bizplan/event_store.hpp"
#include "bizplan/exporter.hpp"
#include "bizplan/gateway.hpp"
#include "bizplan/hashing.hpp"
#include "bizplan/ingestion.hpp"
#include "bizplan/plan_generator.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::optional<std::string> getenv_lookup(const char* name)
{
    if (const char* value = std::getenv(name)) {
        return std::string(value);
    }
    return std::nullopt;
}

json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    return json::parse(in);
}

void emit(const bizplan::PlanDocument& plan, const std::string& format)
{
    if (format == "md") {
        std::cout << bizplan::export_markdown(plan);
    } else if (format == "html") {
        std::cout << bizplan::export_html(plan);
    } else {
        std::cout << bizplan::serialize(plan) << "\n";
    }
}

int run_draft(const fs::path& request_path, const fs::path& corpus_dir, const fs::path& sites_dir,
              const std::string& format)
{
    const auto request = read_json(request_path);
    std::vector<bizplan::Goal> goals;
    for (const auto& g : request.at("goals")) {
        goals.push_back(bizplan::goal_from_json(g));
    }
    auto config = bizplan::GatewayConfig::from_env(getenv_lookup);
    config.validate();
    const bizplan::Gateway gateway(bizplan::make_provider(config), config);
    const auto corpus = bizplan::Corpus::load(corpus_dir);
    const auto clock = config.mode == bizplan::GatewayMode::mock ? bizplan::frozen_clock(bizplan::mock_epoch())
                                                                  : bizplan::system_clock();
    bizplan::FixtureFetcher fetcher(sites_dir);
    const auto page = bizplan::fetch_and_strip(request.at("url").get<std::string>(), fetcher, clock);
    const auto context = bizplan::context_from_page(page, gateway);

    bizplan::DraftOptions options;
    options.identity = {request.value("document_id", "plan-0001"), request.value("owner", "acct-0001"),
                        bizplan::Author::assistant, clock()};
    options.on_section_done = [](bizplan::SectionId id) {
        std::cerr << "section_done " << bizplan::to_string(id) << "\n";
    };
    emit(bizplan::generate_draft(context, goals, gateway, corpus, options), format);
    return 0;
}

int run_replay(const fs::path& data_dir, const std::string& document, const std::string& format)
{
    bizplan::FileEventStore store(data_dir);
    if (!document.empty()) {
        emit(store.load_document(document), format);
        return 0;
    }
    int corrupt = 0;
    for (const auto& id : store.document_ids()) {
        try {
            const auto plan = store.load_document(id);
            std::cout << id << " head=" << plan.head() << " ok\n";
        } catch (const bizplan::Error& e) {
            std::cout << id << " " << bizplan::to_string(e.code()) << ": " << e.what() << "\n";
            ++corrupt;
        }
    }
    return corrupt == 0 ? 0 : 2;
}

int run_fixtures(const fs::path& dir)
{
    int bad = 0;
    int count = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") {
            continue;
        }
        const auto fixture = read_json(entry.path());
        const auto key = fixture.at("key").get<std::string>();
        const auto& request = fixture.at("request");
        ++count;
        if (request.value("route", "") == "transcription") {
            continue; // keyed by the audio bytes, which the fixture does not carry
        }
        const auto actual = bizplan::sha256_hex(bizplan::canonical_dump(request));
        if (actual != key || entry.path().stem().string() != key) {
            std::cout << "mismatch " << entry.path().filename().string() << "\n";
            ++bad;
        }
    }
    std::cout << count << " fixtures, " << bad << " mismatched\n";
    return bad == 0 ? 0 : 2;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Business plan assistant command-line tools"};
    app.require_subcommand(1);

    std::string format = "json";
    const auto formats = CLI::IsMember({"json", "md", "html"});

    auto* draft = app.add_subcommand("draft", "Onboard a fixture website offline and print the draft");
    fs::path request_path;
    fs::path corpus_dir = "corpus";
    fs::path sites_dir = "fixture";
    draft->add_option("request", request_path, "JSON file with url and goals")->required()->check(CLI::ExistingFile);
    draft->add_option("--corpus", corpus_dir, "Corpus directory")->check(CLI::ExistingDirectory);
    draft->add_option("--sites", sites_dir, "Directory holding sites.json")->check(CLI::ExistingDirectory);
    draft->add_option("--format", format, "json, md or html")->check(formats);

    auto* replay = app.add_subcommand("replay", "Verify stored event logs or print one document");
    fs::path data_dir = "data";
    std::string document;
    replay->add_option("--data-dir", data_dir, "Service data directory")->check(CLI::ExistingDirectory);
    replay->add_option("--document", document, "Document id to print");
    replay->add_option("--format", format, "json, md or html")->check(formats);

    auto* fixtures = app.add_subcommand("fixtures", "Check that every fixture file matches its request hash");
    fs::path fixture_dir = "fixture/llm";
    fixtures->add_option("dir", fixture_dir, "Fixture directory")->check(CLI::ExistingDirectory);

    auto* key = app.add_subcommand("fixture-key", "Print the fixture key of a canonical request JSON file");
    fs::path key_path;
    key->add_option("request", key_path, "Canonical request JSON")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*draft) {
            return run_draft(request_path, corpus_dir, sites_dir, format);
        }
        if (*replay) {
            return run_replay(data_dir, document, format);
        }
        if (*fixtures) {
            return run_fixtures(fixture_dir);
        }
        if (*key) {
            std::cout << bizplan::sha256_hex(bizplan::canonical_dump(read_json(key_path))) << "\n";
            return 0;
        }
    } catch (const bizplan::Error& e) {
        std::cerr << "bizplan: " << bizplan::to_string(e.code()) << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "bizplan: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
