#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace bizplan {

using Timestamp = std::chrono::sys_seconds;
using Clock = std::function<Timestamp()>;

Clock system_clock();

/// Always returns `at`; used in mock mode so drafts are reproducible.
Clock frozen_clock(Timestamp at);

/// 2024-01-01T00:00:00Z, the mock-mode instant.
Timestamp mock_epoch();

/// ISO-8601 UTC with second precision, e.g. "2024-01-01T00:00:00Z".
std::string format_utc(Timestamp t);
std::optional<Timestamp> parse_utc(std::string_view text);

} // namespace bizplan
