#include "bizplan/clock.hpp"

#include <cstdio>
#include <ctime>

namespace bizplan {

Clock system_clock()
{
    return [] { return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()); };
}

Clock frozen_clock(Timestamp at)
{
    return [at] { return at; };
}

Timestamp mock_epoch() { return Timestamp{std::chrono::seconds{1704067200}}; }

std::string format_utc(Timestamp t)
{
    const std::time_t raw = t.time_since_epoch().count();
    std::tm parts{};
    gmtime_r(&raw, &parts);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &parts);
    return buf;
}

std::optional<Timestamp> parse_utc(std::string_view text)
{
    std::tm parts{};
    int consumed = 0;
    const std::string copy(text);
    if (std::sscanf(copy.c_str(), "%4d-%2d-%2dT%2d:%2d:%2dZ%n", &parts.tm_year, &parts.tm_mon, &parts.tm_mday,
                    &parts.tm_hour, &parts.tm_min, &parts.tm_sec, &consumed) != 6 ||
        static_cast<std::size_t>(consumed) != copy.size()) {
        return std::nullopt;
    }
    parts.tm_year -= 1900;
    parts.tm_mon -= 1;
    return Timestamp{std::chrono::seconds{timegm(&parts)}};
}

} // namespace bizplan
