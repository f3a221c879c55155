#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace dyetest::md5 {

std::array<std::uint8_t, 16> digest(std::span<const std::uint8_t> data);

/// 32-digit lowercase hex encoding of the digest of `data`'s bytes.
std::string hex(std::string_view data);

}  // namespace dyetest::md5
