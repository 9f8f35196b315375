#pragma once

#include "bizplan/clock.hpp"
#include "bizplan/corpus.hpp"
#include "bizplan/error.hpp"
#include "bizplan/event_store.hpp"
#include "bizplan/gateway.hpp"
#include "bizplan/ingestion.hpp"
#include "bizplan/suggestion.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

namespace httplib {
class Server;
}

namespace bizplan {

enum class IngestMode { fixture, live };

struct ServiceConfig {
    std::string bind_host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path data_dir = "data";
    std::filesystem::path corpus_dir = "corpus";
    /// Bootstrap secret for POST /auth/token; unset means token issuance is open.
    std::optional<std::string> auth_token;
    IngestMode ingest_mode = IngestMode::fixture;
    std::filesystem::path ingest_fixture_dir = "fixture";
    std::string user_agent = "BizPlanAssistant/1.0 (+https://localhost)";
    GatewayConfig gateway;

    using Lookup = std::function<std::optional<std::string>(const char*)>;

    /// Settings from a JSON object whose keys are the environment variable names
    /// (BIND_ADDR, DATA_DIR, LLM_MODE, ...), overridden by `lookup`.
    static ServiceConfig load(const nlohmann::json& file_settings, const Lookup& lookup);
};

/// Test seams; anything left empty is built from the configuration.
struct ServiceDeps {
    std::shared_ptr<Provider> provider;
    std::shared_ptr<PageFetcher> fetcher;
    std::shared_ptr<EventStore> store;
    std::optional<Clock> clock;
    Gateway::Sleeper sleeper;
};

/// Status code and machine-readable body for an error raised while handling a request.
struct ApiError {
    int status = 500;
    nlohmann::json body;
};
ApiError map_error(ErrorCode code, const std::string& message);

/// The HTTP/SSE surface: accounts, onboarding, chat, apply, edits, export and
/// reference data. Each document has one writer at a time; readers take the
/// last durable head without waiting for writers.
class Service {
public:
    explicit Service(ServiceConfig config, ServiceDeps deps = {});
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    void mount(httplib::Server& server);

    std::size_t document_count() const;
    const ServiceConfig& config() const noexcept { return config_; }

    struct Account {
        std::string account_id;
        std::string display_name;
        std::string token_hash;
    };

    struct DocumentEntry;

private:
    class Handlers;
    friend class Handlers;

    void recover();
    std::string next_id(const char* prefix, std::atomic<int>& counter);
    std::shared_ptr<DocumentEntry> find_document(const std::string& id) const;
    void register_document(std::shared_ptr<DocumentEntry> entry);

    ServiceConfig config_;
    Clock clock_;
    std::shared_ptr<EventStore> store_;
    std::shared_ptr<PageFetcher> fetcher_;
    std::unique_ptr<Gateway> gateway_;
    Corpus corpus_;

    mutable std::shared_mutex accounts_mutex_;
    std::map<std::string, Account> accounts_by_hash_;

    mutable std::shared_mutex documents_mutex_;
    std::map<std::string, std::shared_ptr<DocumentEntry>> documents_;

    std::atomic<int> account_counter_{0};
    std::atomic<int> document_counter_{0};
};

} // namespace bizplan
