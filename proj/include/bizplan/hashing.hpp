#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace bizplan {

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

std::uint32_t crc32_of(std::string_view data);

} // namespace bizplan
