#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "resumevc/clock.hpp"
#include "resumevc/credential.hpp"
#include "resumevc/crypto.hpp"
#include "resumevc/did.hpp"
#include "resumevc/registry.hpp"

namespace resumevc::verification {

/// Trust-chain checks in execution order. Verification stops at the first
/// failure; the remaining checks are reported as skipped.
inline constexpr std::array<std::string_view, 11> kCheckOrder = {
    "envelope-decryption", "presentation-structure", "nonce-binding", "audience-binding",
    "holder-signature",    "holder-binding",         "credential-structure", "issuer-resolution",
    "issuer-signature",    "issuer-trusted",         "validity-window"};

/// Fragment of the verifier's response-encryption key.
inline constexpr std::string_view kEncryptionKeyId = "enc-1";

struct PresentationRequest {
    std::string request_id;
    did::Did verifier_did;
    std::string credential_type;
    crypto::Nonce nonce;
    crypto::PublicKey response_encryption_key;
    Timestamp expires_at = 0;

    /// Frame form shared by HTTP and the realtime channel:
    /// {"requestId","verifierDid","credentialType","nonce","responseKey","expiresAt"}
    Json to_frame() const;
    /// Throws Error("malformed-request").
    static PresentationRequest from_frame(const Json &frame);

    /// Key id the holder puts in the response envelope.
    std::string response_key_id() const;
};

enum class CheckStatus { passed, failed, skipped };

struct CheckResult {
    std::string name;
    CheckStatus status = CheckStatus::skipped;
    std::string detail;

    bool operator==(const CheckResult &) const = default;
};

enum class Outcome { accepted, rejected };

struct VerificationReport {
    std::string request_id;
    Outcome outcome = Outcome::rejected;
    std::vector<CheckResult> checks;
    Timestamp verified_at = 0;
    std::optional<credential::Resume> presented_resume;

    /// First non-passing check, if any.
    std::optional<std::string> failed_check() const;

    Json to_json() const;
    static VerificationReport from_json(const Json &json);

    bool operator==(const VerificationReport &) const = default;
};

struct VerifierConfig {
    did::Did verifier_did;
    crypto::KeyPair encryption_key;
    std::int64_t request_ttl_seconds = 5 * 60;
    std::int64_t clock_skew_seconds = 60;
};

/// Called after a request is stored; used to push the frame to the holder
/// over the realtime channel and to publish it on the broker.
using RequestNotifier = std::function<void(const PresentationRequest &, const std::optional<did::Did> &holder)>;

class VerifierService {
  public:
    /// `data_dir`, when given, journals requests, nonce consumption and reports.
    VerifierService(std::optional<VerifierConfig> config, const registry::RegistryReader &registry,
                    Clock clock = system_clock(), std::optional<std::filesystem::path> data_dir = std::nullopt);

    VerifierService(const VerifierService &) = delete;
    VerifierService &operator=(const VerifierService &) = delete;

    void set_notifier(RequestNotifier notifier);

    /// Throws Error("verifier-unconfigured").
    PresentationRequest create_presentation_request(std::string_view credential_type,
                                                    const std::optional<did::Did> &holder = std::nullopt);

    /// Consumes the request's nonce, then runs the checks. A second submission
    /// for the same request is rejected at nonce-binding and does not replace
    /// the stored report. Throws Error("unknown-request") or
    /// Error("request-expired"); in both cases no check ran.
    VerificationReport verify_presentation(const std::string &request_id, const crypto::EncryptedEnvelope &envelope);

    /// Throws Error("not-found").
    VerificationReport get_report(const std::string &request_id) const;

    std::optional<PresentationRequest> find_request(const std::string &request_id) const;
    const std::optional<VerifierConfig> &config() const noexcept { return config_; }

  private:
    struct StoredRequest {
        PresentationRequest request;
        bool consumed = false;
    };

    VerificationReport run_checks(const PresentationRequest &request, const crypto::EncryptedEnvelope &envelope,
                                  Timestamp now, bool nonce_used) const;
    void journal(const Json &entry);
    void load_journal();

    std::optional<VerifierConfig> config_;
    const registry::RegistryReader &registry_;
    Clock clock_;
    std::optional<std::filesystem::path> data_dir_;
    std::ofstream journal_file_;
    RequestNotifier notifier_;
    mutable std::mutex mutex_;
    std::map<std::string, StoredRequest> requests_;
    std::map<std::string, VerificationReport> reports_;
};

} // namespace resumevc::verification
