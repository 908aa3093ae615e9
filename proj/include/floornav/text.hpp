#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace floornav::text {

std::string trim(std::string_view s);

/// Trimmed, ASCII-lowercased key used for every room-name comparison.
std::string name_key(std::string_view s);

bool names_equal(std::string_view a, std::string_view b);

/// Shortest decimal form with at most two fractional digits: 3.50 -> "3.5", 160.0 -> "160".
std::string format_number(double v);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t v);

}  // namespace floornav::text
