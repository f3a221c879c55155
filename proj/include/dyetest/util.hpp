#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dyetest {

/// Every non-negative base-10 integer literal in `text`, left to right.
/// Digit runs too long for 64 bits saturate to UINT64_MAX.
std::vector<std::uint64_t> scan_numbers(std::string_view text);

std::string join_decimal(std::span<const std::uint64_t> values, std::string_view sep);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view b64);  // throws ValidationError

/// ISO-8601 UTC timestamp, second resolution (e.g. "2026-08-09T12:00:00Z").
std::string utc_timestamp();

std::string read_file(const std::string& path);                     // throws StoreError
void write_file_atomic(const std::string& path, std::string_view);  // temp + rename

}  // namespace dyetest
