#include "fixture_world.hpp"
#include "generators.hpp"

#include "bizplan/error.hpp"
#include "bizplan/gateway.hpp"
#include "bizplan/hashing.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

using namespace bizplan;
using namespace bizplan::testing;
using nlohmann::json;
using std::chrono::milliseconds;
namespace fs = std::filesystem;

namespace {

ProviderRequest sample_request(Route route = Route::chat)
{
    return Gateway::make_request(route, {{Role::system, "You help small businesses."}, {Role::user, "Hello"}}, 256);
}

ProviderResponse reply(std::string content)
{
    return {std::move(content), FinishReason::stop, {3, 4}, "fixture-model"};
}

/// Steady time that only moves when the gateway sleeps or a provider stalls.
struct FakeTime {
    std::chrono::steady_clock::time_point now{};
    std::vector<milliseconds> sleeps;

    Gateway gateway(std::shared_ptr<Provider> provider, GatewayConfig config = mock_gateway_config())
    {
        return Gateway(
            std::move(provider), std::move(config),
            [this](milliseconds d) {
                sleeps.push_back(d);
                now += d;
            },
            [this] { return now; });
    }
};

/// Fails the first `failures` calls with the given error, then answers.
class FlakyProvider : public Provider {
public:
    FlakyProvider(int failures, std::function<void()> fail) : failures_(failures), fail_(std::move(fail)) {}

    ProviderResponse complete(const ProviderRequest&, const std::string& model, milliseconds timeout) override
    {
        timeouts.push_back(timeout);
        if (++calls <= failures_) {
            fail_();
        }
        return {"ok", FinishReason::stop, {}, model};
    }
    ProviderResponse stream(const ProviderRequest& request, const std::string& model, milliseconds timeout,
                            const StreamSink& sink) override
    {
        auto response = complete(request, model, timeout);
        sink(response.content);
        return response;
    }
    std::string transcribe(std::string_view, std::string_view, const std::string&, milliseconds timeout) override
    {
        return complete({}, "", timeout).content;
    }

    int calls = 0;
    std::vector<milliseconds> timeouts;

private:
    int failures_;
    std::function<void()> fail_;
};

std::vector<json> fixture_records()
{
    std::vector<json> records;
    for (const auto& entry : fs::directory_iterator(source_dir() / "fixture" / "llm")) {
        if (entry.path().extension() == ".json") {
            records.push_back(json::parse(read_file(entry.path())));
        }
    }
    return records;
}

} // namespace

// -- routing -------------------------------------------------------------------

TEST(GatewayRouting, default_models_per_route)
{
    const Gateway gateway(std::make_shared<MockProvider>(), GatewayConfig::defaults());
    EXPECT_EQ(gateway.model_for(Route::section_generation), "gpt-4-turbo");
    EXPECT_EQ(gateway.model_for(Route::chat), "gpt-3.5-turbo");
    EXPECT_EQ(gateway.model_for(Route::website_summary), "gpt-3.5-turbo");
    EXPECT_EQ(gateway.model_for(Route::transcription), "whisper-1");
    EXPECT_EQ(gateway.timeout_for(Route::chat), milliseconds(30'000));
    EXPECT_EQ(gateway.timeout_for(Route::section_generation), milliseconds(120'000));
    EXPECT_EQ(gateway.timeout_for(Route::transcription), milliseconds(60'000));
    EXPECT_EQ(GatewayConfig::defaults().retry.max_attempts, 3);
    EXPECT_EQ(GatewayConfig::defaults().retry.backoff,
              (std::vector<milliseconds>{milliseconds(500), milliseconds(1000), milliseconds(2000)}));
}

TEST(GatewayRouting, environment_overrides_models_and_mode)
{
    std::map<std::string, std::string> env = {{"LLM_MODE", "live"},
                                              {"LLM_API_BASE", "http://127.0.0.1:1/v1"},
                                              {"LLM_API_KEY", "k"},
                                              {"LLM_MODEL_SECTION", "big-model"}};
    const auto config = GatewayConfig::from_env([&](const char* name) -> std::optional<std::string> {
        auto it = env.find(name);
        return it == env.end() ? std::nullopt : std::optional<std::string>(it->second);
    });
    EXPECT_EQ(config.mode, GatewayMode::live);
    EXPECT_EQ(config.models.at(Route::section_generation), "big-model");
    EXPECT_EQ(config.models.at(Route::chat), "gpt-3.5-turbo");
    EXPECT_NO_THROW(config.validate());

    auto missing = config;
    missing.api_base.clear();
    EXPECT_THROW(missing.validate(), Error);
    EXPECT_THROW(GatewayConfig::from_env([](const char* name) -> std::optional<std::string> {
                     return std::string_view(name) == "LLM_MODE" ? std::optional<std::string>("replay") : std::nullopt;
                 }),
                 Error);
}

TEST(GatewayRouting, requests_are_validated)
{
    const Gateway gateway(std::make_shared<MockProvider>(), mock_gateway_config());
    auto no_system = sample_request();
    no_system.messages.erase(no_system.messages.begin());
    EXPECT_THROW(gateway.complete(no_system), Error);
    auto hot = sample_request();
    hot.temperature = 2.5;
    EXPECT_THROW(gateway.complete(hot), Error);
    auto no_tokens = sample_request();
    no_tokens.max_tokens = 0;
    EXPECT_THROW(gateway.complete(no_tokens), Error);
    EXPECT_THROW(gateway.complete_stream(sample_request(), [](std::string_view) {}), Error);
}

// -- replay --------------------------------------------------------------------

TEST(MockReplay, known_request_returns_its_fixture_every_time)
{
    auto provider = std::make_shared<MockProvider>();
    provider->add(sample_request(), reply("Hi José"));
    const Gateway gateway(provider, mock_gateway_config());
    const auto first = gateway.complete(sample_request());
    EXPECT_EQ(first, reply("Hi José"));
    for (int i = 0; i < 10; ++i) {
        EXPECT_EQ(gateway.complete(sample_request()), first);
    }
}

TEST(MockReplay, unknown_request_is_a_fixture_miss_with_its_hash)
{
    const Gateway gateway(std::make_shared<MockProvider>(), mock_gateway_config());
    try {
        gateway.complete(sample_request());
        FAIL() << "expected a miss";
    } catch (const FixtureMiss& e) {
        EXPECT_EQ(e.code(), ErrorCode::FixtureMiss);
        EXPECT_EQ(e.key(), request_key(sample_request()));
    }
}

TEST(MockReplay, fixture_key_is_sha256_of_canonical_form)
{
    const auto request = sample_request();
    const auto canonical = canonical_request(request);
    EXPECT_EQ(canonical.at("temperature"), "0.70");
    EXPECT_EQ(request_key(request), sha256_hex(canonical_dump(canonical)));
    EXPECT_EQ(request_key(request).size(), 64u);
}

TEST(MockReplay, every_shipped_fixture_is_keyed_by_its_request)
{
    const auto records = fixture_records();
    ASSERT_GE(records.size(), 20u);
    for (const auto& record : records) {
        const auto& request = record.at("request");
        if (request.at("route") == "transcription") {
            EXPECT_EQ(record.at("key"), request.at("audio_sha256"));
            continue;
        }
        EXPECT_EQ(record.at("key"), sha256_hex(canonical_dump(request)));
        EXPECT_EQ(record.at("key"), request_key(request_from_canonical(request)));
    }
}

TEST(MockReplay, single_field_perturbations_change_the_key)
{
    Gen gen(0x5eed0301);
    for (int trial = 0; trial < 300; ++trial) {
        ProviderRequest base;
        base.route = kAllRoutes[static_cast<std::size_t>(gen.range(0, 4))];
        base.messages.push_back({Role::system, gen.text()});
        const int turns = gen.range(1, 4);
        for (int i = 0; i < turns; ++i) {
            base.messages.push_back({i % 2 ? Role::assistant : Role::user, gen.text()});
        }
        base.temperature = gen.range(0, 200) / 100.0;
        base.max_tokens = gen.range(1, 4096);
        base.stream = gen.chance(0.5);
        const auto key = request_key(base);

        auto same = base;
        ASSERT_EQ(request_key(same), key);

        std::vector<ProviderRequest> variants;
        auto v = base;
        v.route = base.route == Route::chat ? Route::pitch_prep : Route::chat;
        variants.push_back(v);
        v = base;
        v.temperature = base.temperature >= 1.0 ? base.temperature - 0.01 : base.temperature + 0.01;
        variants.push_back(v);
        v = base;
        v.max_tokens += 1;
        variants.push_back(v);
        v = base;
        v.stream = !base.stream;
        variants.push_back(v);
        v = base;
        v.messages.pop_back();
        variants.push_back(v);
        v = base;
        v.messages.push_back({Role::user, ""});
        variants.push_back(v);
        const auto at = static_cast<std::size_t>(gen.range(0, static_cast<int>(base.messages.size()) - 1));
        v = base;
        v.messages[at].content += "x";
        variants.push_back(v);
        if (at > 0) {
            v = base;
            v.messages[at].role = v.messages[at].role == Role::user ? Role::assistant : Role::user;
            variants.push_back(v);
        }
        for (std::size_t i = 0; i < variants.size(); ++i) {
            ASSERT_NE(request_key(variants[i]), key) << "variant " << i << " of trial " << trial;
        }
    }
}

TEST(MockReplay, stream_concatenation_equals_content_for_every_fixture)
{
    FixtureWorld world;
    for (const auto& record : fixture_records()) {
        const auto& request = record.at("request");
        if (request.at("route") == "transcription") {
            continue;
        }
        const auto expected = response_from_json(record.at("response"));
        const auto req = request_from_canonical(request);
        std::vector<std::string> pieces;
        const auto streamed = world.provider->stream(req, "m", milliseconds(1000), [&](std::string_view piece) {
            pieces.emplace_back(piece);
        });
        std::string joined;
        for (const auto& piece : pieces) {
            EXPECT_LE(piece.size(), kMockChunkBytes);
            joined += piece;
        }
        EXPECT_EQ(joined, expected.content) << record.at("key");
        EXPECT_EQ(streamed.content, expected.content);
        EXPECT_EQ(world.provider->complete(req, "m", milliseconds(1000)).content, expected.content);
        if (req.stream) {
            std::string through_gateway;
            world.gateway.complete_stream(req, [&](std::string_view piece) { through_gateway += piece; });
            EXPECT_EQ(through_gateway, expected.content);
        }
    }
}

TEST(MockReplay, chunks_never_split_a_code_point)
{
    const std::string content = std::string(63, 'a') + "é" + std::string(70, 'b') + "☕☕";
    std::string joined;
    for (auto piece : mock_chunks(content)) {
        EXPECT_LE(piece.size(), kMockChunkBytes);
        EXPECT_NE(static_cast<unsigned char>(piece.front()) & 0xC0, 0x80);
        joined += piece;
    }
    EXPECT_EQ(joined, content);
}

TEST(MockReplay, two_hundred_characters_stream_in_four_pieces)
{
    auto request = sample_request();
    request.stream = true;
    auto provider = std::make_shared<MockProvider>();
    provider->add(request, reply(std::string(200, 'r')));
    const Gateway gateway(provider, mock_gateway_config());
    int increments = 0;
    const auto response = gateway.complete_stream(request, [&](std::string_view) { ++increments; });
    EXPECT_EQ(increments, 4); // ceil(200 / 64)
    EXPECT_EQ(response.content.size(), 200u);
}

TEST(MockReplay, empty_content_with_stop_is_a_provider_error)
{
    auto request = sample_request();
    request.stream = true;
    auto provider = std::make_shared<MockProvider>();
    provider->add(request, reply(""));
    const Gateway gateway(provider, mock_gateway_config());
    int increments = 0;
    EXPECT_THROW(gateway.complete_stream(request, [&](std::string_view) { ++increments; }), ProviderError);
    EXPECT_EQ(increments, 0);
    request.stream = false;
    provider->add(request, reply(""));
    EXPECT_THROW(gateway.complete(request), ProviderError);
}

TEST(MockReplay, loads_fixture_directory)
{
    MockProvider provider(source_dir() / "fixture" / "llm");
    EXPECT_EQ(provider.size(), fixture_records().size());
    const auto keys = provider.keys();
    EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
}

// -- transcription -------------------------------------------------------------

TEST(Transcription, voice_note_fixture)
{
    FixtureWorld world;
    EXPECT_EQ(world.gateway.transcribe(read_file(source_dir() / "fixture" / "jose_edit.webm"), "audio/webm"),
              "change the founding year to twenty twenty-two");
}

TEST(Transcription, preconditions)
{
    FixtureWorld world;
    try {
        world.gateway.transcribe("", "audio/webm");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
    }
    try {
        world.gateway.transcribe("bytes", "video/mp4");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnsupportedMedia);
    }
    EXPECT_THROW(world.gateway.transcribe("never recorded", "audio/wav"), FixtureMiss);
}

// -- retries and deadlines -------------------------------------------------------

TEST(GatewayRetries, transient_failures_back_off_then_succeed)
{
    FakeTime time;
    auto provider = std::make_shared<FlakyProvider>(2, [] { throw ProviderError(503, "busy", true); });
    const auto gateway = time.gateway(provider);
    EXPECT_EQ(gateway.complete(sample_request()).content, "ok");
    EXPECT_EQ(provider->calls, 3);
    EXPECT_EQ(time.sleeps, (std::vector<milliseconds>{milliseconds(500), milliseconds(1000)}));
    EXPECT_EQ(provider->timeouts[0], milliseconds(30'000));
    EXPECT_EQ(provider->timeouts[2], milliseconds(28'500));
}

TEST(GatewayRetries, gives_up_after_the_attempt_limit)
{
    FakeTime time;
    auto provider = std::make_shared<FlakyProvider>(5, [] { throw ProviderError(429, "slow down", true); });
    const auto gateway = time.gateway(provider);
    EXPECT_THROW(gateway.complete(sample_request()), ProviderError);
    EXPECT_EQ(provider->calls, 3);
    EXPECT_EQ(time.sleeps.size(), 2u);
}

TEST(GatewayRetries, permanent_failures_are_not_retried)
{
    FakeTime time;
    auto provider = std::make_shared<FlakyProvider>(1, [] { throw ProviderError(400, "bad request", false); });
    const auto gateway = time.gateway(provider);
    EXPECT_THROW(gateway.complete(sample_request()), ProviderError);
    EXPECT_EQ(provider->calls, 1);
    EXPECT_TRUE(time.sleeps.empty());
}

TEST(GatewayRetries, timeouts_retry_within_the_route_deadline)
{
    FakeTime time;
    auto config = mock_gateway_config();
    config.timeouts[Route::chat] = milliseconds(1200);
    auto provider = std::make_shared<FlakyProvider>(5, [&time] {
        time.now += milliseconds(400);
        throw Error(ErrorCode::Timeout, "stalled");
    });
    const auto gateway = time.gateway(provider, config);
    try {
        gateway.complete(sample_request());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Timeout);
    }
    // 400 ms stall + 500 ms backoff leaves 300 ms for the second attempt; the
    // next backoff would cross the deadline, so there is no third attempt.
    EXPECT_EQ(provider->calls, 2);
    EXPECT_EQ(provider->timeouts, (std::vector<milliseconds>{milliseconds(1200), milliseconds(300)}));
    EXPECT_EQ(time.sleeps, (std::vector<milliseconds>{milliseconds(500)}));
}

// -- live provider against a local OpenAI-compatible server ----------------------

namespace {

class FakeOpenAi {
public:
    FakeOpenAi()
    {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            ++chat_calls;
            last_auth = req.get_header_value("Authorization");
            const auto body = json::parse(req.body);
            last_model = body.at("model").get<std::string>();
            if (fail_next > 0) {
                --fail_next;
                res.status = fail_status;
                res.set_content(R"({"error":{"message":"try later"}})", "application/json");
                return;
            }
            if (body.at("stream").get<bool>()) {
                std::string sse;
                for (const char* piece : {"Hel", "lo ", "José"}) {
                    sse += "data: " + json{{"model", "gpt-x"}, {"choices", {{{"delta", {{"content", piece}}}}}}}.dump() +
                           "\n\n";
                }
                sse += "data: " + json{{"choices", {{{"delta", json::object()}, {"finish_reason", "stop"}}}}}.dump() +
                       "\n\ndata: [DONE]\n\n";
                res.set_content(sse, "text/event-stream");
                return;
            }
            res.set_content(json{{"model", "gpt-x"},
                                 {"choices", {{{"message", {{"role", "assistant"}, {"content", "Hello José"}}},
                                               {"finish_reason", "stop"}}}},
                                 {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 2}}}}
                                .dump(),
                            "application/json");
        });
        server_.Post("/v1/audio/transcriptions", [this](const httplib::Request& req, httplib::Response& res) {
            last_model = req.get_file_value("model").content;
            const auto file = req.get_file_value("file");
            res.set_content(json{{"text", "heard " + std::to_string(file.content.size()) + " bytes as " +
                                              file.content_type}}
                                .dump(),
                            "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeOpenAi()
    {
        server_.stop();
        thread_.join();
    }

    std::string base() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/"; }

    std::atomic<int> chat_calls{0};
    std::atomic<int> fail_next{0};
    int fail_status = 503;
    std::string last_auth;
    std::string last_model;

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

GatewayConfig live_config(const std::string& base)
{
    auto config = GatewayConfig::defaults();
    config.mode = GatewayMode::live;
    config.api_base = base;
    config.api_key = "sk-test";
    return config;
}

} // namespace

TEST(LiveProvider, completion_round_trip)
{
    FakeOpenAi fake;
    const Gateway gateway(make_provider(live_config(fake.base())), live_config(fake.base()));
    const auto response = gateway.complete(sample_request());
    EXPECT_EQ(response.content, "Hello José");
    EXPECT_EQ(response.usage, (Usage{11, 2}));
    EXPECT_EQ(response.provider_model, "gpt-x");
    EXPECT_EQ(fake.last_auth, "Bearer sk-test");
    EXPECT_EQ(fake.last_model, "gpt-3.5-turbo");
}

TEST(LiveProvider, streaming_delivers_every_delta)
{
    FakeOpenAi fake;
    const Gateway gateway(make_provider(live_config(fake.base())), live_config(fake.base()));
    auto request = sample_request(Route::suggestions);
    request.stream = true;
    std::vector<std::string> pieces;
    const auto response = gateway.complete_stream(request, [&](std::string_view p) { pieces.emplace_back(p); });
    EXPECT_EQ(pieces, (std::vector<std::string>{"Hel", "lo ", "José"}));
    EXPECT_EQ(response.content, "Hello José");
    EXPECT_EQ(response.finish_reason, FinishReason::stop);
    EXPECT_EQ(fake.last_model, "gpt-4o-mini");
}

TEST(LiveProvider, server_errors_are_retried_client_errors_are_not)
{
    FakeOpenAi fake;
    std::vector<milliseconds> sleeps;
    const Gateway gateway(make_provider(live_config(fake.base())), live_config(fake.base()),
                          [&](milliseconds d) { sleeps.push_back(d); }, [] { return std::chrono::steady_clock::now(); });
    fake.fail_next = 1;
    EXPECT_EQ(gateway.complete(sample_request()).content, "Hello José");
    EXPECT_EQ(fake.chat_calls, 2);
    EXPECT_EQ(sleeps.size(), 1u);

    fake.fail_status = 400;
    fake.fail_next = 1;
    try {
        gateway.complete(sample_request());
        FAIL();
    } catch (const ProviderError& e) {
        EXPECT_EQ(e.status(), 400);
        EXPECT_FALSE(e.transient());
        EXPECT_NE(std::string(e.what()).find("try later"), std::string::npos);
    }
}

TEST(LiveProvider, transcription_uploads_multipart_audio)
{
    FakeOpenAi fake;
    const Gateway gateway(make_provider(live_config(fake.base())), live_config(fake.base()));
    EXPECT_EQ(gateway.transcribe("12345", "audio/webm"), "heard 5 bytes as audio/webm");
    EXPECT_EQ(fake.last_model, "whisper-1");
}

TEST(LiveProvider, unreachable_endpoint_is_a_transient_failure)
{
    auto config = live_config("http://127.0.0.1:1/v1");
    config.retry.backoff = {milliseconds(0)};
    const Gateway gateway(make_provider(config), config);
    try {
        gateway.complete(sample_request());
        FAIL();
    } catch (const Error& e) {
        EXPECT_TRUE(e.code() == ErrorCode::ProviderError || e.code() == ErrorCode::Timeout);
    }
}

TEST(RecordingProvider, writes_replayable_fixtures)
{
    TempDir dir;
    auto upstream = std::make_shared<MockProvider>();
    upstream->add(sample_request(), reply("recorded"));
    auto recorder = std::make_shared<RecordingProvider>(upstream, dir.path());
    const Gateway gateway(recorder, mock_gateway_config());
    gateway.complete(sample_request());

    const auto key = request_key(sample_request());
    const auto record = json::parse(read_file(dir.path() / (key + ".json")));
    EXPECT_EQ(record.at("key"), key);
    EXPECT_EQ(record.at("request"), canonical_request(sample_request()));

    MockProvider replay(dir.path());
    EXPECT_EQ(replay.complete(sample_request(), "m", milliseconds(10)).content, "recorded");
}
