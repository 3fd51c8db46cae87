#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace pgn {

/// SHA-256 digest of a byte string.
std::array<std::uint8_t, 32> sha256(const void* data, std::size_t len);

/// Hex-encoded SHA-256 of a string (used as the spec/config hash).
std::string sha256_hex(const std::string& s);

}  // namespace pgn
