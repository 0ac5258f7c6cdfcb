#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "resumevc/encoding.hpp"

namespace resumevc::rng {

/// Fills `out` from the process-wide randomness source. By default this is
/// the OpenSSL CSPRNG; throws Error("randomness-unavailable") if it fails.
void fill(std::span<std::uint8_t> out);
Bytes bytes(std::size_t count);

/// Switches the process to a deterministic SHA-256 counter generator.
/// Only for reproducible test runs: keys, nonces and ids become predictable.
void use_insecure_seed(std::uint64_t seed);
void use_secure_source();
bool is_seeded();

} // namespace resumevc::rng
