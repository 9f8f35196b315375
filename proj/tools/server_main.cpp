#include "bizplan/error.hpp"
#include "bizplan/service.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

namespace {

std::optional<std::string> getenv_lookup(const char* name)
{
    if (const char* value = std::getenv(name)) {
        return std::string(value);
    }
    return std::nullopt;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Business plan assistant API server"};
    std::string config_path;
    bool mock = false;
    std::optional<int> port;
    app.add_option("--config", config_path, "JSON file of settings keyed by environment variable name")
        ->check(CLI::ExistingFile);
    app.add_flag("--mock", mock, "Replay recorded LLM fixtures (forces LLM_MODE=mock)");
    app.add_option("--port", port, "Listen port; 0 picks a free port")->check(CLI::Range(0, 65535));
    CLI11_PARSE(app, argc, argv);

    // Signals are handled on a dedicated thread so the server can stop cleanly.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    try {
        nlohmann::json file_settings;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            file_settings = nlohmann::json::parse(in);
        }
        auto config = bizplan::ServiceConfig::load(file_settings, getenv_lookup);
        if (mock) {
            config.gateway.mode = bizplan::GatewayMode::mock;
        }
        if (port) {
            config.port = *port;
        }

        bizplan::Service service(config);
        httplib::Server server;
        service.mount(server);

        std::thread signal_thread([&server, signals] {
            int received = 0;
            sigwait(&signals, &received);
            server.stop();
        });
        signal_thread.detach();

        int bound = config.port;
        if (bound == 0) {
            bound = server.bind_to_any_port(config.bind_host);
        } else if (!server.bind_to_port(config.bind_host, bound)) {
            bound = -1;
        }
        if (bound <= 0) {
            std::cerr << "bizplan-server: cannot bind " << config.bind_host << ":" << config.port << "\n";
            return 1;
        }
        std::cout << "listening on " << config.bind_host << ":" << bound << " (" << service.document_count()
                  << " documents)" << std::endl;
        server.listen_after_bind();
    } catch (const bizplan::Error& e) {
        std::cerr << "bizplan-server: " << bizplan::to_string(e.code()) << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "bizplan-server: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
