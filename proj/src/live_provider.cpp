#include "bizplan/error.hpp"
#include "bizplan/gateway.hpp"
#include "bizplan/text_util.hpp"

#include <httplib.h>

namespace bizplan {

using nlohmann::json;
using std::chrono::milliseconds;

namespace {

void apply_timeouts(httplib::Client& client, milliseconds timeout)
{
    const auto sec = static_cast<time_t>(timeout.count() / 1000);
    const auto usec = static_cast<time_t>((timeout.count() % 1000) * 1000);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
}

[[noreturn]] void raise_transport(httplib::Error error)
{
    if (error == httplib::Error::ConnectionTimeout || error == httplib::Error::Read) {
        throw Error(ErrorCode::Timeout, "provider transport: " + httplib::to_string(error));
    }
    throw ProviderError(0, "provider transport: " + httplib::to_string(error), true);
}

[[noreturn]] void raise_status(int status, const std::string& body)
{
    const bool transient = status == 408 || status == 429 || status >= 500;
    std::string detail;
    try {
        detail = json::parse(body).at("error").at("message").get<std::string>();
    } catch (const std::exception&) {
        detail = text::utf8_truncate(body, 200);
    }
    throw ProviderError(status, "provider returned HTTP " + std::to_string(status) + ": " + detail, transient);
}

json chat_body(const ProviderRequest& request, const std::string& model, bool stream)
{
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    return {{"model", model},
            {"messages", std::move(messages)},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens},
            {"stream", stream}};
}

FinishReason finish_from(const json& value)
{
    if (!value.is_string()) {
        return FinishReason::stop;
    }
    const auto reason = value.get<std::string>();
    return reason == "length" ? FinishReason::length : reason == "stop" ? FinishReason::stop : FinishReason::error;
}

} // namespace

LiveProvider::LiveProvider(std::string api_base, std::string api_key) : api_key_(std::move(api_key))
{
    // Split "https://host[:port]/prefix" into origin and path prefix.
    const auto scheme_end = api_base.find("://");
    const auto path_start = api_base.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) {
        origin_ = api_base;
    } else {
        origin_ = api_base.substr(0, path_start);
        path_prefix_ = api_base.substr(path_start);
    }
    while (!path_prefix_.empty() && path_prefix_.back() == '/') {
        path_prefix_.pop_back();
    }
}

ProviderResponse LiveProvider::complete(const ProviderRequest& request, const std::string& model, milliseconds timeout)
{
    httplib::Client client(origin_);
    apply_timeouts(client, timeout);
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
    auto result = client.Post(path_prefix_ + "/chat/completions", headers, chat_body(request, model, false).dump(),
                              "application/json");
    if (!result) {
        raise_transport(result.error());
    }
    if (result->status != 200) {
        raise_status(result->status, result->body);
    }
    try {
        const auto body = json::parse(result->body);
        const auto& choice = body.at("choices").at(0);
        ProviderResponse response;
        response.content = choice.at("message").value("content", std::string());
        response.finish_reason = finish_from(choice.value("finish_reason", json()));
        if (body.contains("usage")) {
            response.usage.prompt_tokens = body["usage"].value("prompt_tokens", 0);
            response.usage.completion_tokens = body["usage"].value("completion_tokens", 0);
        }
        response.provider_model = body.value("model", model);
        return response;
    } catch (const json::exception& e) {
        throw ProviderError(result->status, std::string("malformed provider response: ") + e.what(), false);
    }
}

ProviderResponse LiveProvider::stream(const ProviderRequest& request, const std::string& model, milliseconds timeout,
                                      const StreamSink& sink)
{
    httplib::Client client(origin_);
    apply_timeouts(client, timeout);

    ProviderResponse response;
    response.provider_model = model;
    std::string buffer;
    std::string error_body;
    bool saw_finish = false;

    httplib::Request req;
    req.method = "POST";
    req.path = path_prefix_ + "/chat/completions";
    req.headers = {{"Authorization", "Bearer " + api_key_}, {"Accept", "text/event-stream"}};
    req.body = chat_body(request, model, true).dump();
    req.set_header("Content-Type", "application/json");
    req.content_receiver = [&](const char* data, size_t length, uint64_t, uint64_t) {
        buffer.append(data, length);
        error_body.append(data, std::min<size_t>(length, 4096));
        std::size_t pos;
        while ((pos = buffer.find('\n')) != std::string::npos) {
            auto line = std::string(text::trim(std::string_view(buffer).substr(0, pos)));
            buffer.erase(0, pos + 1);
            if (!line.starts_with("data:")) {
                continue;
            }
            auto payload = std::string(text::trim(std::string_view(line).substr(5)));
            if (payload == "[DONE]") {
                saw_finish = true;
                continue;
            }
            try {
                const auto event = json::parse(payload);
                const auto& choice = event.at("choices").at(0);
                if (choice.contains("delta") && choice["delta"].contains("content") &&
                    choice["delta"]["content"].is_string()) {
                    const auto piece = choice["delta"]["content"].get<std::string>();
                    if (!piece.empty()) {
                        response.content += piece;
                        sink(piece);
                    }
                }
                if (choice.contains("finish_reason") && !choice["finish_reason"].is_null()) {
                    response.finish_reason = finish_from(choice["finish_reason"]);
                    saw_finish = true;
                }
                if (event.contains("model") && event["model"].is_string()) {
                    response.provider_model = event["model"].get<std::string>();
                }
            } catch (const json::exception&) {
                // Ignore keep-alive or malformed lines.
            }
        }
        return true;
    };

    httplib::Response res;
    httplib::Error error = httplib::Error::Success;
    const bool ok = client.send(req, res, error);
    if (!ok) {
        if (response.content.empty()) {
            raise_transport(error);
        }
        response.finish_reason = FinishReason::error;
        return response;
    }
    if (res.status != 200) {
        raise_status(res.status, error_body);
    }
    if (!saw_finish) {
        response.finish_reason = FinishReason::error;
    }
    return response;
}

std::string LiveProvider::transcribe(std::string_view audio, std::string_view media_type, const std::string& model,
                                     milliseconds timeout)
{
    httplib::Client client(origin_);
    apply_timeouts(client, timeout);
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
    const std::string extension = media_type == "audio/wav" ? "wav" : media_type == "audio/mpeg" ? "mp3" : "webm";
    httplib::MultipartFormDataItems items = {
        {"file", std::string(audio), "audio." + extension, std::string(media_type)},
        {"model", model, "", ""},
        {"response_format", "json", "", ""},
    };
    auto result = client.Post(path_prefix_ + "/audio/transcriptions", headers, items);
    if (!result) {
        raise_transport(result.error());
    }
    if (result->status != 200) {
        raise_status(result->status, result->body);
    }
    try {
        return json::parse(result->body).at("text").get<std::string>();
    } catch (const json::exception& e) {
        throw ProviderError(result->status, std::string("malformed transcription response: ") + e.what(), false);
    }
}

} // namespace bizplan
