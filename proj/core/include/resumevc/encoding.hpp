#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace resumevc {

using Bytes = std::vector<std::uint8_t>;
using Json = nlohmann::json;

Bytes to_bytes(std::string_view text);
std::string to_string(std::span<const std::uint8_t> bytes);

/// Unpadded RFC 4648 base64url.
std::string base64url_encode(std::span<const std::uint8_t> data);
std::string base64url_encode(std::string_view text);

/// Strict decoder: rejects padding, characters outside the url-safe alphabet,
/// impossible lengths and non-zero trailing bits, so every byte string has
/// exactly one accepted encoding. Throws Error("malformed-base64url").
Bytes base64url_decode(std::string_view text);

/// Bitcoin-alphabet base58 (no checksum). Leading zero bytes map to '1'.
std::string base58_encode(std::span<const std::uint8_t> data);
/// Throws Error("malformed-base58").
Bytes base58_decode(std::string_view text);
bool is_base58(std::string_view text);

std::string hex_encode(std::span<const std::uint8_t> data);
Bytes hex_decode(std::string_view text);

/// Compact JSON with object keys in byte order. This is the canonical form
/// used for every signing input.
std::string canonical_json(const Json &value);

} // namespace resumevc
