#include "bizplan/error.hpp"
#include "bizplan/ingestion.hpp"

#include <httplib.h>

#include <semaphore>

namespace bizplan {

struct LiveFetcher::HostSlots {
    std::counting_semaphore<2> slots{2};
    std::mutex robots_mutex;
    std::optional<std::string> robots; // empty string when the host has none
};

namespace {

struct SplitUrl {
    std::string origin;
    std::string host;
    std::string path;
};

SplitUrl split_url(const std::string& url)
{
    const auto scheme_end = url.find("://");
    const auto host_start = scheme_end + 3;
    const auto path_start = url.find('/', host_start);
    SplitUrl out;
    out.origin = path_start == std::string::npos ? url : url.substr(0, path_start);
    out.host = out.origin.substr(host_start);
    out.path = path_start == std::string::npos ? "/" : url.substr(path_start);
    return out;
}

class SlotGuard {
public:
    explicit SlotGuard(std::counting_semaphore<2>& s) : s_(s) { s_.acquire(); }
    ~SlotGuard() { s_.release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

private:
    std::counting_semaphore<2>& s_;
};

} // namespace

LiveFetcher::LiveFetcher(std::string user_agent) : user_agent_(std::move(user_agent)) {}

LiveFetcher::~LiveFetcher() = default;

LiveFetcher::HostSlots& LiveFetcher::slots_for(const std::string& host)
{
    std::lock_guard lock(mutex_);
    auto& slot = hosts_[host];
    if (!slot) {
        slot = std::make_unique<HostSlots>();
    }
    return *slot;
}

FetchedResource LiveFetcher::fetch(const std::string& url)
{
    const auto parts = split_url(url);
    auto& host = slots_for(parts.host);
    SlotGuard guard(host.slots);

    httplib::Client client(parts.origin);
    client.set_follow_location(true);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(20, 0);
    const httplib::Headers headers = {{"User-Agent", user_agent_}};

    {
        std::lock_guard lock(host.robots_mutex);
        if (!host.robots) {
            auto robots = client.Get("/robots.txt", headers);
            host.robots = robots && robots->status == 200 ? robots->body : std::string();
        }
        if (!robots_allows(*host.robots, user_agent_, parts.path)) {
            throw Error(ErrorCode::RobotsDisallowed, "robots.txt disallows " + url);
        }
    }

    auto result = client.Get(parts.path, headers);
    if (!result) {
        throw Error(ErrorCode::FetchFailed, "fetching " + url + " failed: " + httplib::to_string(result.error()));
    }
    return FetchedResource{result->status, result->get_header_value("Content-Type"), result->body};
}

} // namespace bizplan
