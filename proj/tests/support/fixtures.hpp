#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "resumevc/clock.hpp"
#include "resumevc/credential.hpp"
#include "resumevc/crypto.hpp"
#include "resumevc/did.hpp"
#include "resumevc/issuance.hpp"
#include "resumevc/registry.hpp"
#include "resumevc/verification.hpp"
#include "resumevc/wallet.hpp"

namespace fixtures {

using namespace resumevc;

inline constexpr Timestamp kEpoch = 1'700'000'000;

class TempDir {
  public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    const std::filesystem::path &path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

credential::Position sample_position(int index = 0);
credential::Resume sample_resume(const did::Did &holder, int positions = 2);

/// Frozen reference vectors from tests/oracles.
const Json &vectors();

/// Registry, an accredited issuer and a verifier sharing one manual clock.
struct Ecosystem {
    Ecosystem();

    ManualClock clock{kEpoch};
    registry::TrustRegistry registry{clock.clock()};
    did::Did issuer_did;
    crypto::KeyPair issuer_key;
    std::unique_ptr<issuance::IssuerService> issuer;
    did::Did verifier_did;
    crypto::KeyPair verifier_key;
    std::unique_ptr<verification::VerifierService> verifier;

    /// Fresh wallet with one populated resume ("resume-1").
    wallet::Wallet make_wallet(const std::filesystem::path &path);
    /// Wallet plus an acquired credential.
    wallet::Wallet make_holder(const std::filesystem::path &path);
};

} // namespace fixtures
