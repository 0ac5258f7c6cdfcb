#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "resumevc/encoding.hpp"
#include "resumevc/issuance.hpp"
#include "resumevc/registry.hpp"
#include "resumevc/verification.hpp"
#include "resumevc/wallet.hpp"

namespace resumevc::http {

/// Receives one JSON line per wire message:
/// {"service","direction":"request"|"response","method","path","status"?,"body"}.
using TranscriptSink = std::function<void(const Json &entry)>;

/// HTTP status for an error code: 404 for unknown/not-found, 409 for
/// conflicts, 503 for unconfigured services, 400 otherwise.
int status_for_error(std::string_view code);

/// A JSON-over-HTTP service running on its own thread. Errors are returned as
/// {"code","message"}. Every response carries permissive CORS headers.
class HttpService {
  public:
    class Impl;
    explicit HttpService(std::unique_ptr<Impl> impl);
    ~HttpService();
    HttpService(const HttpService &) = delete;
    HttpService &operator=(const HttpService &) = delete;

    /// Binds `host:port` (0 = ephemeral) and starts serving. Returns the
    /// bound port. Throws Error("port-in-use").
    std::uint16_t start(std::uint16_t port, const std::string &host = "127.0.0.1");
    std::uint16_t port() const noexcept;
    std::string url() const;
    /// Blocks until stop() is called from another thread.
    void wait();
    void stop();

  private:
    std::unique_ptr<Impl> impl_;
};

/// GET /did/{did}, POST /did, DELETE /did/{did}, GET /tir/{did}?type=&at=,
/// POST /tir, DELETE /tir/{did}, GET /events.
std::unique_ptr<HttpService> registry_service(registry::TrustRegistry &registry);

/// POST /offers {"resume","credentialType"?}, POST /token {"offerId"},
/// POST /credential {"accessRef","proof"} -> {"credential"}.
std::unique_ptr<HttpService> issuer_service(issuance::IssuerService &issuer);

/// POST /requests {"credentialType"?,"holderDid"?} -> request frame,
/// GET /requests/{id}, POST /verify/{id} (envelope) -> report, GET /reports/{id}.
std::unique_ptr<HttpService> verifier_service(verification::VerifierService &verifier);

class HttpVerifierClient;

struct WalletServiceOptions {
    issuance::IssuerApi *issuer = nullptr;
    const registry::RegistryReader *registry = nullptr;
    /// When set, approved requests are submitted to this verifier.
    HttpVerifierClient *verifier = nullptr;
};

/// Holder endpoints used by the companion UI:
/// GET /wallet, POST /resumes {"fullName"}, POST /resumes/{id}/positions,
/// POST /credentials {"resumeId","credentialType"?}, GET /requests,
/// POST /requests (request frame), POST /requests/{id}/approve,
/// POST /requests/{id}/decline.
std::unique_ptr<HttpService> wallet_service(wallet::Wallet &wallet, WalletServiceOptions options);

/// Summary of a stored credential for listings.
Json credential_summary(const credential::VerifiableCredential &vc);

/// Shared plumbing for the JSON clients. Transport failures throw
/// Error("service-unreachable"); error replies throw Error(code, message).
class JsonClient {
  public:
    JsonClient(std::string base_url, std::string service, TranscriptSink transcript = {});
    ~JsonClient();
    JsonClient(const JsonClient &) = delete;
    JsonClient &operator=(const JsonClient &) = delete;

    Json get(const std::string &path) const;
    Json post(const std::string &path, const Json &body) const;
    Json del(const std::string &path) const;

    const std::string &base_url() const noexcept { return base_url_; }

  private:
    struct Impl;
    Json call(const char *method, const std::string &path, const Json *body) const;

    std::string base_url_;
    std::string service_;
    TranscriptSink transcript_;
    std::unique_ptr<Impl> impl_;
    mutable std::mutex mutex_;
};

/// Percent-encodes a path segment.
std::string url_encode(std::string_view text);

class HttpRegistryClient final : public registry::RegistryReader {
  public:
    explicit HttpRegistryClient(std::string base_url, TranscriptSink transcript = {});

    did::DidDocument resolve_did_document(const did::Did &did) const override;
    bool tir_is_trusted(const did::Did &did, std::string_view credential_type, Timestamp at) const override;

    std::uint64_t register_did_document(const did::DidDocument &doc);
    std::uint64_t deactivate_did_document(const did::Did &did);
    registry::TirEntry tir_register(const did::Did &did, const std::vector<std::string> &accredited_for);
    registry::TirEntry tir_revoke(const did::Did &did);

  private:
    JsonClient client_;
};

class HttpIssuerClient final : public issuance::IssuerApi {
  public:
    explicit HttpIssuerClient(std::string base_url, TranscriptSink transcript = {});

    issuance::CredentialOffer create_offer(const credential::Resume &resume,
                                           std::string_view credential_type) override;
    issuance::TokenResponse exchange_token(const std::string &offer_id) override;
    crypto::CompactToken issue_credential(const std::string &access_ref, const crypto::CompactToken &proof) override;

  private:
    JsonClient client_;
};

class HttpVerifierClient {
  public:
    explicit HttpVerifierClient(std::string base_url, TranscriptSink transcript = {});

    verification::PresentationRequest create_request(std::string_view credential_type,
                                                     const std::optional<did::Did> &holder = std::nullopt);
    verification::PresentationRequest request(const std::string &request_id);
    verification::VerificationReport verify(const std::string &request_id, const crypto::EncryptedEnvelope &envelope);
    verification::VerificationReport report(const std::string &request_id);

  private:
    JsonClient client_;
};

} // namespace resumevc::http
