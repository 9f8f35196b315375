#pragma once

#include "bizplan/service.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace bizplan::testing {

/// Source tree root, baked in at configure time.
inline std::filesystem::path source_dir() { return BIZPLAN_SOURCE_DIR; }

/// A fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "bizplan")
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

/// Mock-mode configuration over the shipped corpus and fixtures.
inline ServiceConfig mock_config(const std::filesystem::path& data_dir)
{
    ServiceConfig config;
    config.data_dir = data_dir;
    config.corpus_dir = source_dir() / "corpus";
    config.ingest_fixture_dir = source_dir() / "fixture";
    config.gateway = GatewayConfig::defaults();
    config.gateway.mode = GatewayMode::mock;
    config.gateway.fixture_dir = source_dir() / "fixture" / "llm";
    return config;
}

/// Runs a Service on an ephemeral loopback port for the lifetime of the object.
class TestServer {
public:
    explicit TestServer(ServiceConfig config, ServiceDeps deps = {})
        : service_(std::make_unique<Service>(std::move(config), std::move(deps)))
    {
        service_->mount(server_);
        port_ = server_.bind_to_any_port("127.0.0.1");
        if (port_ <= 0) {
            throw std::runtime_error("cannot bind test server");
        }
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~TestServer()
    {
        server_.stop();
        if (thread_.joinable()) {
            thread_.join();
        }
    }
    TestServer(const TestServer&) = delete;
    TestServer& operator=(const TestServer&) = delete;

    int port() const noexcept { return port_; }
    Service& service() noexcept { return *service_; }

    httplib::Client client() const
    {
        httplib::Client c("127.0.0.1", port_);
        c.set_read_timeout(30, 0);
        return c;
    }

private:
    std::unique_ptr<Service> service_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

struct SseEvent {
    std::string event;
    nlohmann::json data;
};

/// Splits a complete text/event-stream body into events.
inline std::vector<SseEvent> parse_sse(const std::string& body)
{
    std::vector<SseEvent> events;
    SseEvent current;
    std::string data;
    std::size_t pos = 0;
    while (pos <= body.size()) {
        auto end = body.find('\n', pos);
        if (end == std::string::npos) {
            end = body.size();
        }
        const auto line = body.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) {
            if (!current.event.empty() || !data.empty()) {
                current.data = data.empty() ? nlohmann::json() : nlohmann::json::parse(data);
                events.push_back(std::move(current));
                current = {};
                data.clear();
            }
            if (end == body.size()) {
                break;
            }
            continue;
        }
        if (line.rfind("event: ", 0) == 0) {
            current.event = line.substr(7);
        } else if (line.rfind("data: ", 0) == 0) {
            data += line.substr(6);
        }
    }
    return events;
}

inline httplib::Headers bearer(const std::string& token) { return {{"Authorization", "Bearer " + token}}; }

/// Issues a token through POST /auth/token and returns it.
inline std::string issue_token(httplib::Client& client, const std::string& bootstrap = "")
{
    nlohmann::json body = {{"display_name", "José"}};
    if (!bootstrap.empty()) {
        body["bootstrap_token"] = bootstrap;
    }
    auto res = client.Post("/auth/token", body.dump(), "application/json");
    if (!res || res->status != 201) {
        throw std::runtime_error("token issuance failed");
    }
    return nlohmann::json::parse(res->body).at("token").get<std::string>();
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

} // namespace bizplan::testing
