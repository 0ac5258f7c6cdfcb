#include "resumevc/random.hpp"

#include <atomic>
#include <cstring>
#include <mutex>

#include <openssl/rand.h>
#include <openssl/sha.h>

#include "resumevc/error.hpp"

namespace resumevc::rng {

namespace {

struct SeededState {
    std::mutex mutex;
    std::atomic<bool> enabled{false};
    std::uint64_t seed = 0;
    std::uint64_t counter = 0;
};

SeededState &state() {
    static SeededState s;
    return s;
}

} // namespace

void fill(std::span<std::uint8_t> out) {
    auto &s = state();
    if (!s.enabled.load()) {
        if (out.empty()) {
            return;
        }
        if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
            throw Error("randomness-unavailable", "RAND_bytes failed");
        }
        return;
    }
    std::lock_guard lock(s.mutex);
    std::size_t offset = 0;
    while (offset < out.size()) {
        std::uint8_t block_input[16];
        std::memcpy(block_input, &s.seed, 8);
        std::memcpy(block_input + 8, &s.counter, 8);
        ++s.counter;
        std::uint8_t digest[SHA256_DIGEST_LENGTH];
        SHA256(block_input, sizeof(block_input), digest);
        const std::size_t take = std::min(out.size() - offset, sizeof(digest));
        std::memcpy(out.data() + offset, digest, take);
        offset += take;
    }
}

Bytes bytes(std::size_t count) {
    Bytes out(count);
    fill(out);
    return out;
}

void use_insecure_seed(std::uint64_t seed) {
    auto &s = state();
    std::lock_guard lock(s.mutex);
    s.seed = seed;
    s.counter = 0;
    s.enabled.store(true);
}

void use_secure_source() { state().enabled.store(false); }

bool is_seeded() { return state().enabled.load(); }

} // namespace resumevc::rng
