#include "bizplan/gateway.hpp"

#include "bizplan/document.hpp"
#include "bizplan/error.hpp"
#include "bizplan/hashing.hpp"
#include "bizplan/text_util.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace bizplan {

using nlohmann::json;
namespace fs = std::filesystem;
using std::chrono::milliseconds;

std::string_view to_string(Route route) noexcept
{
    switch (route) {
    case Route::chat: return "chat";
    case Route::suggestions: return "suggestions";
    case Route::website_summary: return "website_summary";
    case Route::section_generation: return "section_generation";
    case Route::pitch_prep: return "pitch_prep";
    case Route::transcription: return "transcription";
    }
    return "chat";
}

std::optional<Route> parse_route(std::string_view text) noexcept
{
    for (auto route : kAllRoutes) {
        if (to_string(route) == text) {
            return route;
        }
    }
    return std::nullopt;
}

std::string_view to_string(Role role) noexcept
{
    switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    }
    return "user";
}

std::string_view to_string(FinishReason reason) noexcept
{
    switch (reason) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::error: return "error";
    }
    return "error";
}

void validate(const ProviderRequest& request)
{
    auto invalid = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, "invalid request: " + what); };
    if (request.route == Route::transcription) {
        if (!request.messages.empty()) {
            invalid("transcription requests carry audio, not messages");
        }
        if (request.audio.empty()) {
            invalid("transcription audio is empty");
        }
        return;
    }
    if (!request.audio.empty()) {
        invalid("only transcription requests carry audio");
    }
    if (request.messages.empty()) {
        invalid("messages must be nonempty");
    }
    if (request.messages.front().role != Role::system) {
        invalid("first message must be a system message");
    }
    if (!(request.temperature >= 0.0 && request.temperature <= 2.0)) {
        invalid("temperature must be within [0, 2]");
    }
    if (request.max_tokens <= 0) {
        invalid("max_tokens must be positive");
    }
}

json canonical_request(const ProviderRequest& request)
{
    if (request.route == Route::transcription) {
        return {{"route", to_string(request.route)},
                {"audio_sha256", sha256_hex(request.audio)},
                {"media_type", request.media_type}};
    }
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    char temperature[16];
    std::snprintf(temperature, sizeof temperature, "%.2f", std::round(request.temperature * 100.0) / 100.0);
    return {{"route", to_string(request.route)},
            {"messages", std::move(messages)},
            {"temperature", temperature},
            {"max_tokens", request.max_tokens},
            {"stream", request.stream}};
}

std::string request_key(const ProviderRequest& request)
{
    if (request.route == Route::transcription) {
        return audio_key(request.audio);
    }
    return sha256_hex(canonical_dump(canonical_request(request)));
}

ProviderRequest request_from_canonical(const json& value)
{
    ProviderRequest request;
    const auto route = parse_route(value.at("route").get<std::string>());
    if (!route || *route == Route::transcription) {
        throw Error(ErrorCode::InvalidArgument, "canonical request has no message route");
    }
    request.route = *route;
    for (const auto& m : value.at("messages")) {
        const auto role = m.at("role").get<std::string>();
        Message message{Role::user, m.at("content").get<std::string>()};
        if (role == "system") {
            message.role = Role::system;
        } else if (role == "assistant") {
            message.role = Role::assistant;
        } else if (role != "user") {
            throw Error(ErrorCode::InvalidArgument, "unknown message role " + role);
        }
        request.messages.push_back(std::move(message));
    }
    request.temperature = std::stod(value.at("temperature").get<std::string>());
    request.max_tokens = value.at("max_tokens").get<int>();
    request.stream = value.at("stream").get<bool>();
    return request;
}

std::string audio_key(std::string_view audio) { return sha256_hex(audio); }

json to_json(const ProviderResponse& response)
{
    return {{"content", response.content},
            {"finish_reason", to_string(response.finish_reason)},
            {"usage", {{"prompt_tokens", response.usage.prompt_tokens},
                       {"completion_tokens", response.usage.completion_tokens}}},
            {"provider_model", response.provider_model}};
}

ProviderResponse response_from_json(const json& value)
{
    ProviderResponse response;
    response.content = value.at("content").get<std::string>();
    const auto reason = value.value("finish_reason", std::string("stop"));
    response.finish_reason = reason == "length"  ? FinishReason::length
                             : reason == "error" ? FinishReason::error
                                                 : FinishReason::stop;
    if (value.contains("usage")) {
        response.usage.prompt_tokens = value["usage"].value("prompt_tokens", 0);
        response.usage.completion_tokens = value["usage"].value("completion_tokens", 0);
    }
    response.provider_model = value.value("provider_model", std::string());
    return response;
}

std::vector<std::string_view> mock_chunks(std::string_view content)
{
    std::vector<std::string_view> chunks;
    while (!content.empty()) {
        auto n = text::utf8_floor_boundary(content, kMockChunkBytes);
        if (n == 0) {
            n = std::min(content.size(), kMockChunkBytes);
        }
        chunks.push_back(content.substr(0, n));
        content.remove_prefix(n);
    }
    return chunks;
}

// ---- mock ----------------------------------------------------------------

MockProvider::MockProvider(const fs::path& dir)
{
    if (!fs::is_directory(dir)) {
        return;
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") {
            continue;
        }
        std::ifstream in(entry.path());
        const auto fixture = json::parse(in);
        add(fixture.at("key").get<std::string>(), response_from_json(fixture.at("response")));
    }
}

void MockProvider::add(const std::string& key, ProviderResponse response)
{
    std::lock_guard lock(mutex_);
    fixtures_[key] = std::move(response);
}

std::size_t MockProvider::size() const
{
    std::lock_guard lock(mutex_);
    return fixtures_.size();
}

std::vector<std::string> MockProvider::keys() const
{
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [key, _] : fixtures_) {
        out.push_back(key);
    }
    return out;
}

ProviderResponse MockProvider::lookup(const std::string& key) const
{
    std::lock_guard lock(mutex_);
    auto it = fixtures_.find(key);
    if (it == fixtures_.end()) {
        throw FixtureMiss(key);
    }
    return it->second;
}

ProviderResponse MockProvider::complete(const ProviderRequest& request, const std::string&, milliseconds)
{
    return lookup(request_key(request));
}

ProviderResponse MockProvider::stream(const ProviderRequest& request, const std::string&, milliseconds,
                                      const StreamSink& sink)
{
    auto response = lookup(request_key(request));
    for (auto chunk : mock_chunks(response.content)) {
        sink(chunk);
    }
    return response;
}

std::string MockProvider::transcribe(std::string_view audio, std::string_view, const std::string&, milliseconds)
{
    return lookup(audio_key(audio)).content;
}

// ---- recording -----------------------------------------------------------

void write_fixture(const fs::path& dir, const std::string& key, const json& request, const ProviderResponse& response)
{
    fs::create_directories(dir);
    const json fixture = {{"key", key}, {"request", request}, {"response", to_json(response)}};
    const auto path = dir / (key + ".json");
    const auto tmp = dir / (key + ".json.tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << fixture.dump(2, ' ', false, json::error_handler_t::replace) << '\n';
    }
    fs::rename(tmp, path);
}

RecordingProvider::RecordingProvider(std::shared_ptr<Provider> inner, fs::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir))
{
}

void RecordingProvider::write(const std::string& key, const json& request, const ProviderResponse& response)
{
    std::lock_guard lock(mutex_);
    write_fixture(dir_, key, request, response);
}

ProviderResponse RecordingProvider::complete(const ProviderRequest& request, const std::string& model,
                                             milliseconds timeout)
{
    auto response = inner_->complete(request, model, timeout);
    write(request_key(request), canonical_request(request), response);
    return response;
}

ProviderResponse RecordingProvider::stream(const ProviderRequest& request, const std::string& model,
                                           milliseconds timeout, const StreamSink& sink)
{
    auto response = inner_->stream(request, model, timeout, sink);
    if (response.finish_reason != FinishReason::error) {
        write(request_key(request), canonical_request(request), response);
    }
    return response;
}

std::string RecordingProvider::transcribe(std::string_view audio, std::string_view media_type,
                                          const std::string& model, milliseconds timeout)
{
    auto text = inner_->transcribe(audio, media_type, model, timeout);
    ProviderRequest request;
    request.route = Route::transcription;
    request.audio = std::string(audio);
    request.media_type = std::string(media_type);
    write(audio_key(audio), canonical_request(request), ProviderResponse{text, FinishReason::stop, {}, model});
    return text;
}

// ---- configuration -------------------------------------------------------

double default_temperature(Route route) noexcept
{
    switch (route) {
    case Route::section_generation: return 0.3;
    case Route::website_summary: return 0.0;
    case Route::transcription: return 0.0;
    default: return 0.7;
    }
}

GatewayConfig GatewayConfig::defaults()
{
    GatewayConfig config;
    config.models = {
        {Route::chat, "gpt-3.5-turbo"},
        {Route::website_summary, "gpt-3.5-turbo"},
        {Route::suggestions, "gpt-4o-mini"},
        {Route::pitch_prep, "gpt-4o-mini"},
        {Route::section_generation, "gpt-4-turbo"},
        {Route::transcription, "whisper-1"},
    };
    config.timeouts = {
        {Route::chat, milliseconds(30'000)},
        {Route::suggestions, milliseconds(30'000)},
        {Route::website_summary, milliseconds(60'000)},
        {Route::section_generation, milliseconds(120'000)},
        {Route::pitch_prep, milliseconds(60'000)},
        {Route::transcription, milliseconds(60'000)},
    };
    return config;
}

GatewayConfig GatewayConfig::from_env(const std::function<std::optional<std::string>(const char*)>& lookup)
{
    auto config = defaults();
    if (auto mode = lookup("LLM_MODE")) {
        if (*mode == "live") {
            config.mode = GatewayMode::live;
        } else if (*mode == "mock") {
            config.mode = GatewayMode::mock;
        } else if (*mode == "record") {
            config.mode = GatewayMode::record;
        } else {
            throw Error(ErrorCode::InvalidArgument, "LLM_MODE must be live, mock or record");
        }
    }
    if (auto base = lookup("LLM_API_BASE")) {
        config.api_base = *base;
    }
    if (auto key = lookup("LLM_API_KEY")) {
        config.api_key = *key;
    }
    if (auto dir = lookup("LLM_FIXTURE_DIR")) {
        config.fixture_dir = *dir;
    }
    auto override_model = [&](const char* var, std::initializer_list<Route> routes) {
        if (auto model = lookup(var)) {
            for (auto r : routes) {
                config.models[r] = *model;
            }
        }
    };
    override_model("LLM_MODEL_CHAT", {Route::chat, Route::website_summary});
    override_model("LLM_MODEL_SECTION", {Route::section_generation});
    override_model("LLM_MODEL_SUGGEST", {Route::suggestions, Route::pitch_prep});
    override_model("LLM_MODEL_TRANSCRIBE", {Route::transcription});
    return config;
}

void GatewayConfig::validate() const
{
    if (mode == GatewayMode::mock) {
        return;
    }
    if (api_base.empty()) {
        throw Error(ErrorCode::InvalidArgument, "LLM_API_BASE is required outside mock mode");
    }
    for (auto route : kAllRoutes) {
        auto it = models.find(route);
        if (it == models.end() || it->second.empty()) {
            throw Error(ErrorCode::InvalidArgument, "no model configured for route " + std::string(to_string(route)));
        }
    }
}

std::shared_ptr<Provider> make_provider(const GatewayConfig& config)
{
    config.validate();
    switch (config.mode) {
    case GatewayMode::mock: return std::make_shared<MockProvider>(config.fixture_dir);
    case GatewayMode::live: return std::make_shared<LiveProvider>(config.api_base, config.api_key);
    case GatewayMode::record:
        return std::make_shared<RecordingProvider>(std::make_shared<LiveProvider>(config.api_base, config.api_key),
                                                   config.fixture_dir);
    }
    return nullptr;
}

// ---- gateway -------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<Provider> provider, GatewayConfig config)
    : Gateway(std::move(provider), std::move(config), [](milliseconds d) { std::this_thread::sleep_for(d); },
              [] { return std::chrono::steady_clock::now(); })
{
}

Gateway::Gateway(std::shared_ptr<Provider> provider, GatewayConfig config, Sleeper sleeper, SteadyNow now)
    : provider_(std::move(provider)), config_(std::move(config)), sleeper_(std::move(sleeper)), now_(std::move(now))
{
}

const std::string& Gateway::model_for(Route route) const
{
    auto it = config_.models.find(route);
    if (it == config_.models.end()) {
        throw Error(ErrorCode::InvalidArgument, "no model configured for route " + std::string(to_string(route)));
    }
    return it->second;
}

milliseconds Gateway::timeout_for(Route route) const
{
    auto it = config_.timeouts.find(route);
    return it == config_.timeouts.end() ? milliseconds(30'000) : it->second;
}

ProviderRequest Gateway::make_request(Route route, std::vector<Message> messages, int max_tokens)
{
    ProviderRequest request;
    request.route = route;
    request.messages = std::move(messages);
    request.temperature = default_temperature(route);
    request.max_tokens = max_tokens;
    return request;
}

namespace {

void check_response(const ProviderResponse& response)
{
    if (response.finish_reason == FinishReason::stop && response.content.empty()) {
        throw ProviderError(0, "provider returned empty content with finish_reason=stop", false);
    }
}

} // namespace

template <typename Fn>
auto Gateway::with_retries(Route route, Fn&& attempt) const
{
    const auto deadline = now_() + timeout_for(route);
    const int attempts = std::max(1, config_.retry.max_attempts);
    for (int n = 1;; ++n) {
        const auto remaining = std::chrono::duration_cast<milliseconds>(deadline - now_());
        if (remaining.count() <= 0) {
            throw Error(ErrorCode::Timeout, std::string(to_string(route)) + " request exceeded its deadline");
        }
        try {
            return attempt(remaining);
        } catch (const ProviderError& e) {
            if (!e.transient() || n >= attempts) {
                throw;
            }
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Timeout || n >= attempts) {
                throw;
            }
        }
        const auto& schedule = config_.retry.backoff;
        const auto delay = schedule.empty() ? milliseconds(0)
                                            : schedule[std::min<std::size_t>(n - 1, schedule.size() - 1)];
        if (now_() + delay >= deadline) {
            throw Error(ErrorCode::Timeout, std::string(to_string(route)) + " request exceeded its deadline");
        }
        sleeper_(delay);
    }
}

ProviderResponse Gateway::complete(const ProviderRequest& request) const
{
    validate(request);
    if (request.route == Route::transcription) {
        throw Error(ErrorCode::InvalidArgument, "use transcribe() for the transcription route");
    }
    const auto& model = model_for(request.route);
    auto response =
        with_retries(request.route, [&](milliseconds remaining) { return provider_->complete(request, model, remaining); });
    check_response(response);
    return response;
}

ProviderResponse Gateway::complete_stream(const ProviderRequest& request, const StreamSink& sink) const
{
    validate(request);
    if (!request.stream) {
        throw Error(ErrorCode::InvalidArgument, "complete_stream requires stream = true");
    }
    if (request.route == Route::transcription) {
        throw Error(ErrorCode::InvalidArgument, "transcription cannot stream");
    }
    const auto& model = model_for(request.route);
    std::string delivered;
    auto response = with_retries(request.route, [&](milliseconds remaining) {
        try {
            return provider_->stream(request, model, remaining, [&](std::string_view piece) {
                delivered.append(piece);
                sink(piece);
            });
        } catch (const Error& e) {
            if (delivered.empty()) {
                throw;
            }
            // Partial output already reached the caller: surface it, never replay it.
            return ProviderResponse{delivered, FinishReason::error, {}, model};
        }
    });
    check_response(response);
    return response;
}

std::string Gateway::transcribe(std::string_view audio, std::string_view media_type) const
{
    if (audio.empty()) {
        throw Error(ErrorCode::InvalidArgument, "audio must be nonempty");
    }
    if (media_type != "audio/webm" && media_type != "audio/wav" && media_type != "audio/mpeg") {
        throw Error(ErrorCode::UnsupportedMedia, "unsupported media type '" + std::string(media_type) + "'");
    }
    const auto& model = model_for(Route::transcription);
    auto text = with_retries(Route::transcription, [&](milliseconds remaining) {
        return provider_->transcribe(audio, media_type, model, remaining);
    });
    if (text::trim(text).empty()) {
        throw ProviderError(0, "transcription returned no text", false);
    }
    return text;
}

} // namespace bizplan
