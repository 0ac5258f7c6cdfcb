#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "resumevc/clock.hpp"
#include "resumevc/credential.hpp"
#include "resumevc/crypto.hpp"
#include "resumevc/did.hpp"

namespace resumevc::issuance {

struct CredentialOffer {
    std::string offer_id;
    did::Did issuer;
    std::string credential_type;
    std::string resume_ref;
    Timestamp expires_at = 0;

    /// {"offerId","issuer","credentialType","resumeRef","expiresAt"}
    Json to_json() const;
    static CredentialOffer from_json(const Json &json);

    bool operator==(const CredentialOffer &) const = default;
};

struct TokenResponse {
    std::string access_ref;
    std::string c_nonce;
    Timestamp c_nonce_expires_at = 0;

    /// {"accessRef","cNonce","cNonceExpiresAt"}
    Json to_json() const;
    static TokenResponse from_json(const Json &json);
};

enum class SessionState { offered, challenged, issued, expired };

std::string_view session_state_name(SessionState state);

/// Issuance flow as seen by a wallet: offer -> token exchange -> proof ->
/// credential. Implemented in-process by IssuerService and over HTTP by
/// HttpIssuerClient. Failures surface as Error with the codes documented on
/// IssuerService.
class IssuerApi {
  public:
    virtual ~IssuerApi() = default;
    virtual CredentialOffer create_offer(const credential::Resume &resume, std::string_view credential_type) = 0;
    virtual TokenResponse exchange_token(const std::string &offer_id) = 0;
    virtual crypto::CompactToken issue_credential(const std::string &access_ref,
                                                  const crypto::CompactToken &proof) = 0;
};

struct IssuerConfig {
    did::Did issuer_did;
    crypto::KeyPair signing_key;
    std::string key_id = "key-1";
    std::int64_t offer_ttl_seconds = 10 * 60;
    std::int64_t c_nonce_ttl_seconds = 5 * 60;
    std::int64_t credential_validity_seconds = 365 * 24 * 60 * 60;
};

/// Proof-of-possession claims a holder signs with its did:key:
/// {"iss": holder, "aud": issuer, "nonce": c_nonce, "iat": now}.
crypto::CompactToken build_proof(const crypto::KeyPair &holder_key, const did::Did &issuer, std::string_view c_nonce,
                                 Timestamp now);

class IssuerService final : public IssuerApi {
  public:
    /// Without a config every operation fails with "issuer-unconfigured".
    explicit IssuerService(std::optional<IssuerConfig> config, Clock clock = system_clock());

    /// Throws invalid-resume, issuer-unconfigured.
    CredentialOffer create_offer(const credential::Resume &resume, std::string_view credential_type) override;
    /// Throws unknown-offer, offer-expired, offer-already-used.
    TokenResponse exchange_token(const std::string &offer_id) override;
    /// Throws unknown-session, bad-proof-signature, audience-mismatch,
    /// nonce-replayed, nonce-mismatch, nonce-expired, holder-mismatch.
    crypto::CompactToken issue_credential(const std::string &access_ref, const crypto::CompactToken &proof) override;

    credential::VerifiableCredential issue(const std::string &access_ref, const crypto::CompactToken &proof);

    std::optional<SessionState> session_state(const std::string &offer_id) const;
    const std::optional<IssuerConfig> &config() const noexcept { return config_; }
    std::size_t issued_count() const;

  private:
    struct Session {
        CredentialOffer offer;
        credential::Resume resume;
        SessionState state = SessionState::offered;
        std::optional<crypto::Nonce> c_nonce;
        std::optional<did::Did> holder_did;
    };

    const IssuerConfig &require_config() const;

    std::optional<IssuerConfig> config_;
    Clock clock_;
    mutable std::mutex mutex_;
    std::map<std::string, Session> sessions_;           // by offer_id
    std::map<std::string, std::string> access_refs_;    // access_ref -> offer_id
    std::set<std::string> consumed_nonces_;
    std::size_t issued_ = 0;
};

} // namespace resumevc::issuance
