#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bizplan {

enum class Route { chat, suggestions, website_summary, section_generation, pitch_prep, transcription };

inline constexpr Route kAllRoutes[] = {Route::chat,       Route::suggestions,        Route::website_summary,
                                       Route::section_generation, Route::pitch_prep, Route::transcription};

std::string_view to_string(Route route) noexcept;
std::optional<Route> parse_route(std::string_view text) noexcept;

enum class Role { system, user, assistant };
std::string_view to_string(Role role) noexcept;

struct Message {
    Role role = Role::user;
    std::string content;
    bool operator==(const Message&) const = default;
};

struct ProviderRequest {
    Route route = Route::chat;
    std::vector<Message> messages;
    double temperature = 0.7;
    int max_tokens = 1024;
    bool stream = false;
    // Transcription requests carry audio instead of messages.
    std::string audio;
    std::string media_type;
};

enum class FinishReason { stop, length, error };
std::string_view to_string(FinishReason reason) noexcept;

struct Usage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
    bool operator==(const Usage&) const = default;
};

struct ProviderResponse {
    std::string content;
    FinishReason finish_reason = FinishReason::stop;
    Usage usage;
    std::string provider_model;
    bool operator==(const ProviderResponse&) const = default;
};

/// Throws Error(InvalidArgument) when the request breaks its invariants.
void validate(const ProviderRequest& request);

/// Key-sorted canonical form; temperature is rounded to two decimals.
nlohmann::json canonical_request(const ProviderRequest& request);

/// Replay identity of a request: SHA-256 over its canonical form. Transcription
/// requests are keyed by the audio bytes alone.
std::string request_key(const ProviderRequest& request);

/// Inverse of canonical_request for message-based routes (fixture tooling).
ProviderRequest request_from_canonical(const nlohmann::json& value);
std::string audio_key(std::string_view audio);

nlohmann::json to_json(const ProviderResponse& response);
ProviderResponse response_from_json(const nlohmann::json& value);

using StreamSink = std::function<void(std::string_view)>;

inline constexpr std::size_t kMockChunkBytes = 64;

/// Splits `content` into <= 64-byte pieces without splitting a UTF-8 sequence.
std::vector<std::string_view> mock_chunks(std::string_view content);

/// A backend that serves chat completions and transcriptions.
class Provider {
public:
    virtual ~Provider() = default;

    virtual ProviderResponse complete(const ProviderRequest& request, const std::string& model,
                                      std::chrono::milliseconds timeout) = 0;
    virtual ProviderResponse stream(const ProviderRequest& request, const std::string& model,
                                    std::chrono::milliseconds timeout, const StreamSink& sink) = 0;
    virtual std::string transcribe(std::string_view audio, std::string_view media_type, const std::string& model,
                                   std::chrono::milliseconds timeout) = 0;
};

/// Replays recorded fixtures keyed by canonical request hash.
class MockProvider : public Provider {
public:
    MockProvider() = default;
    /// Loads every `<key>.json` fixture under `dir`.
    explicit MockProvider(const std::filesystem::path& dir);

    void add(const std::string& key, ProviderResponse response);
    void add(const ProviderRequest& request, ProviderResponse response) { add(request_key(request), std::move(response)); }
    std::size_t size() const;
    /// Fixture keys in sorted order.
    std::vector<std::string> keys() const;

    ProviderResponse complete(const ProviderRequest& request, const std::string& model,
                              std::chrono::milliseconds timeout) override;
    ProviderResponse stream(const ProviderRequest& request, const std::string& model,
                            std::chrono::milliseconds timeout, const StreamSink& sink) override;
    std::string transcribe(std::string_view audio, std::string_view media_type, const std::string& model,
                           std::chrono::milliseconds timeout) override;

private:
    ProviderResponse lookup(const std::string& key) const;

    mutable std::mutex mutex_;
    std::map<std::string, ProviderResponse> fixtures_;
};

/// OpenAI-compatible HTTP backend (chat/completions, audio/transcriptions).
class LiveProvider : public Provider {
public:
    LiveProvider(std::string api_base, std::string api_key);

    ProviderResponse complete(const ProviderRequest& request, const std::string& model,
                              std::chrono::milliseconds timeout) override;
    ProviderResponse stream(const ProviderRequest& request, const std::string& model,
                            std::chrono::milliseconds timeout, const StreamSink& sink) override;
    std::string transcribe(std::string_view audio, std::string_view media_type, const std::string& model,
                           std::chrono::milliseconds timeout) override;

private:
    std::string origin_;
    std::string path_prefix_;
    std::string api_key_;
};

/// Forwards to another provider and writes every successful exchange as a fixture.
class RecordingProvider : public Provider {
public:
    RecordingProvider(std::shared_ptr<Provider> inner, std::filesystem::path dir);

    ProviderResponse complete(const ProviderRequest& request, const std::string& model,
                              std::chrono::milliseconds timeout) override;
    ProviderResponse stream(const ProviderRequest& request, const std::string& model,
                            std::chrono::milliseconds timeout, const StreamSink& sink) override;
    std::string transcribe(std::string_view audio, std::string_view media_type, const std::string& model,
                           std::chrono::milliseconds timeout) override;

private:
    void write(const std::string& key, const nlohmann::json& request, const ProviderResponse& response);

    std::shared_ptr<Provider> inner_;
    std::filesystem::path dir_;
    std::mutex mutex_;
};

/// Writes one fixture file `<dir>/<key>.json`.
void write_fixture(const std::filesystem::path& dir, const std::string& key, const nlohmann::json& request,
                   const ProviderResponse& response);

enum class GatewayMode { live, mock, record };

struct RetryPolicy {
    int max_attempts = 3;
    std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(500), std::chrono::milliseconds(1000),
                                                   std::chrono::milliseconds(2000)};
};

struct GatewayConfig {
    GatewayMode mode = GatewayMode::mock;
    std::string api_base;
    std::string api_key;
    std::filesystem::path fixture_dir = "fixture/llm";
    std::map<Route, std::string> models;
    std::map<Route, std::chrono::milliseconds> timeouts;
    RetryPolicy retry;

    static GatewayConfig defaults();

    /// Reads LLM_* variables through `lookup` (getenv by default).
    static GatewayConfig from_env(const std::function<std::optional<std::string>(const char*)>& lookup);

    /// Throws Error(InvalidArgument) if live/record mode lacks an endpoint or a route model.
    void validate() const;
};

double default_temperature(Route route) noexcept;

/// Provider matching the configured mode.
std::shared_ptr<Provider> make_provider(const GatewayConfig& config);

/// Provider-agnostic entry point: routing, retries with backoff, per-route deadlines.
class Gateway {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;
    using SteadyNow = std::function<std::chrono::steady_clock::time_point()>;

    Gateway(std::shared_ptr<Provider> provider, GatewayConfig config);
    Gateway(std::shared_ptr<Provider> provider, GatewayConfig config, Sleeper sleeper, SteadyNow now);

    const std::string& model_for(Route route) const;
    std::chrono::milliseconds timeout_for(Route route) const;
    const GatewayConfig& config() const noexcept { return config_; }

    /// A request pre-filled with the route's default temperature.
    static ProviderRequest make_request(Route route, std::vector<Message> messages, int max_tokens = 1024);

    ProviderResponse complete(const ProviderRequest& request) const;
    ProviderResponse complete_stream(const ProviderRequest& request, const StreamSink& sink) const;
    std::string transcribe(std::string_view audio, std::string_view media_type) const;

private:
    template <typename Fn>
    auto with_retries(Route route, Fn&& attempt) const;

    std::shared_ptr<Provider> provider_;
    GatewayConfig config_;
    Sleeper sleeper_;
    SteadyNow now_;
};

} // namespace bizplan
