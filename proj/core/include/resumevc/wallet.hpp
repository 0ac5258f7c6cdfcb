#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "resumevc/clock.hpp"
#include "resumevc/credential.hpp"
#include "resumevc/crypto.hpp"
#include "resumevc/did.hpp"
#include "resumevc/issuance.hpp"
#include "resumevc/registry.hpp"
#include "resumevc/verification.hpp"

namespace resumevc::wallet {

struct StoredResume {
    std::string id;
    credential::Resume resume;
};

/// Holder agent. Owns the did:key identity, resumes, verified credentials and
/// incoming presentation requests. Every mutation rewrites the store file
/// (plaintext JSON, mode 0600) before returning.
class Wallet {
  public:
    /// Creates a fresh identity when `storage_path` does not exist, otherwise
    /// reloads it. Throws Error("io-failure") or Error("corrupt-store").
    static Wallet init(const std::filesystem::path &storage_path, Clock clock = system_clock());

    Wallet(Wallet &&other) noexcept;
    Wallet(const Wallet &) = delete;
    Wallet &operator=(const Wallet &) = delete;

    const did::Did &holder_did() const noexcept { return holder_did_; }
    const crypto::PublicKey &holder_public_key() const noexcept { return holder_key_.public_key(); }
    /// Signing key, for callers that build proofs or presentations themselves.
    const crypto::KeyPair &holder_key() const noexcept { return holder_key_; }
    const std::filesystem::path &storage_path() const noexcept { return path_; }

    /// Returns the new resume id.
    std::string create_resume(std::string full_name);
    /// Throws Error("unknown-resume") or Error("invalid-position").
    credential::Resume add_position(const std::string &resume_id, const credential::Position &position);
    std::vector<StoredResume> resumes() const;
    /// Throws Error("unknown-resume").
    credential::Resume resume(const std::string &resume_id) const;

    /// Runs offer -> token -> proof -> credential against `issuer`, then checks
    /// the returned token against the issuer key resolved from `registry`
    /// before storing it. Throws Error("unknown-resume"),
    /// Error("issuance-flow-failure") (message starts with the issuer's code),
    /// Error("issuer-unresolvable") or Error("issuer-signature-invalid").
    credential::VerifiableCredential acquire_credential(issuance::IssuerApi &issuer,
                                                        const registry::RegistryReader &registry,
                                                        const std::string &resume_id,
                                                        std::string_view credential_type =
                                                            credential::kResumeCredentialType);

    std::vector<credential::VerifiableCredential> credentials() const;
    /// Newest unexpired credential of the given type.
    std::optional<credential::VerifiableCredential> find_credential(std::string_view credential_type) const;

    /// Queues a request received over the realtime channel. Duplicates (same
    /// request id) are ignored.
    void receive_request(const verification::PresentationRequest &request);
    std::vector<verification::PresentationRequest> pending_requests() const;

    /// Builds a presentation bound to the request nonce and verifier audience,
    /// encrypted to the verifier's response key. Throws
    /// Error("request-already-answered"), Error("request-expired") or
    /// Error("no-matching-credential").
    crypto::EncryptedEnvelope handle_presentation_request(const verification::PresentationRequest &request);

    bool answered(const std::string &request_id) const;

    /// Drops a pending request without answering it. Throws
    /// Error("unknown-request") or Error("request-already-answered").
    void decline_request(const std::string &request_id);
    bool declined(const std::string &request_id) const;

  private:
    Wallet(std::filesystem::path path, Clock clock, crypto::KeyPair key);

    void persist_locked() const;
    Json to_json_locked() const;
    void store_credential_locked(credential::VerifiableCredential vc);

    std::filesystem::path path_;
    Clock clock_;
    crypto::KeyPair holder_key_;
    did::Did holder_did_;
    mutable std::mutex mutex_;
    std::vector<StoredResume> resumes_;
    std::vector<credential::VerifiableCredential> credentials_;
    std::vector<verification::PresentationRequest> pending_;
    std::set<std::string> answered_;
    std::set<std::string> declined_;
    int next_resume_ = 1;
};

} // namespace resumevc::wallet
