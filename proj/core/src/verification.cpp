#include "resumevc/verification.hpp"

#include <sstream>

#include "resumevc/error.hpp"

namespace resumevc::verification {

namespace {

std::string_view status_name(CheckStatus s) {
    switch (s) {
    case CheckStatus::passed:
        return "pass";
    case CheckStatus::failed:
        return "fail";
    case CheckStatus::skipped:
        return "skipped";
    }
    return "skipped";
}

CheckStatus status_from_name(std::string_view s) {
    if (s == "pass") return CheckStatus::passed;
    if (s == "fail") return CheckStatus::failed;
    if (s == "skipped") return CheckStatus::skipped;
    throw Error("malformed-report", "unknown check status");
}

// Accumulates check results; the first failure marks every later check skipped.
class CheckRunner {
  public:
    bool ok() const { return !failed_; }

    template <typename Fn> void run(std::string_view name, Fn &&fn) {
        CheckResult result{std::string(name), CheckStatus::skipped, ""};
        if (!failed_) {
            try {
                result.detail = fn();
                result.status = CheckStatus::passed;
            } catch (const Error &e) {
                result.status = CheckStatus::failed;
                result.detail = e.what();
                failed_ = true;
            } catch (const std::exception &e) {
                result.status = CheckStatus::failed;
                result.detail = e.what();
                failed_ = true;
            }
        }
        checks_.push_back(std::move(result));
    }

    std::vector<CheckResult> take() { return std::move(checks_); }

  private:
    bool failed_ = false;
    std::vector<CheckResult> checks_;
};

[[noreturn]] void fail(const std::string &detail) { throw Error("check-failed", detail); }

} // namespace

// PresentationRequest --------------------------------------------------------

Json PresentationRequest::to_frame() const {
    return Json{{"requestId", request_id},
                {"verifierDid", verifier_did.str()},
                {"credentialType", credential_type},
                {"nonce", nonce.value()},
                {"responseKey", response_encryption_key.to_base64url()},
                {"expiresAt", expires_at}};
}

PresentationRequest PresentationRequest::from_frame(const Json &frame) {
    try {
        return PresentationRequest{
            .request_id = frame.at("requestId").get<std::string>(),
            .verifier_did = did::Did::parse(frame.at("verifierDid").get<std::string>()),
            .credential_type = frame.at("credentialType").get<std::string>(),
            .nonce = crypto::Nonce(frame.at("nonce").get<std::string>(), 0),
            .response_encryption_key = crypto::PublicKey::from_base64url(frame.at("responseKey").get<std::string>()),
            .expires_at = frame.at("expiresAt").get<Timestamp>()};
    } catch (const Json::exception &e) {
        throw Error("malformed-request", e.what());
    } catch (const Error &e) {
        throw Error("malformed-request", e.what());
    }
}

std::string PresentationRequest::response_key_id() const { return verifier_did.str() + "#" + std::string(kEncryptionKeyId); }

// VerificationReport ---------------------------------------------------------

std::optional<std::string> VerificationReport::failed_check() const {
    for (const auto &c : checks) {
        if (c.status != CheckStatus::passed) {
            return c.name;
        }
    }
    return std::nullopt;
}

Json VerificationReport::to_json() const {
    Json checks_json = Json::array();
    for (const auto &c : checks) {
        checks_json.push_back({{"name", c.name}, {"status", std::string(status_name(c.status))}, {"detail", c.detail}});
    }
    Json j{{"requestId", request_id},
           {"outcome", outcome == Outcome::accepted ? "accepted" : "rejected"},
           {"checks", checks_json},
           {"verifiedAt", verified_at}};
    j["presentedResume"] = presented_resume ? presented_resume->to_json() : Json(nullptr);
    return j;
}

VerificationReport VerificationReport::from_json(const Json &json) {
    try {
        VerificationReport r;
        r.request_id = json.at("requestId").get<std::string>();
        const auto outcome = json.at("outcome").get<std::string>();
        if (outcome != "accepted" && outcome != "rejected") {
            throw Error("malformed-report", "unknown outcome");
        }
        r.outcome = outcome == "accepted" ? Outcome::accepted : Outcome::rejected;
        for (const auto &c : json.at("checks")) {
            r.checks.push_back({c.at("name").get<std::string>(), status_from_name(c.at("status").get<std::string>()),
                                c.at("detail").get<std::string>()});
        }
        r.verified_at = json.at("verifiedAt").get<Timestamp>();
        if (json.contains("presentedResume") && !json.at("presentedResume").is_null()) {
            r.presented_resume = credential::Resume::from_json(json.at("presentedResume"));
        }
        return r;
    } catch (const Json::exception &e) {
        throw Error("malformed-report", e.what());
    }
}

// VerifierService ------------------------------------------------------------

VerifierService::VerifierService(std::optional<VerifierConfig> config, const registry::RegistryReader &registry,
                                 Clock clock, std::optional<std::filesystem::path> data_dir)
    : config_(std::move(config)), registry_(registry), clock_(std::move(clock)), data_dir_(std::move(data_dir)) {
    if (data_dir_) {
        std::error_code ec;
        std::filesystem::create_directories(*data_dir_, ec);
        if (ec) {
            throw Error("io-failure", "cannot create " + data_dir_->string());
        }
        load_journal();
        journal_file_.open(*data_dir_ / "verifier.log", std::ios::binary | std::ios::app);
        if (!journal_file_) {
            throw Error("io-failure", "cannot open verifier journal");
        }
    }
}

void VerifierService::set_notifier(RequestNotifier notifier) {
    std::lock_guard lock(mutex_);
    notifier_ = std::move(notifier);
}

void VerifierService::journal(const Json &entry) {
    if (!data_dir_) {
        return;
    }
    journal_file_ << canonical_json(entry) << '\n';
    journal_file_.flush();
    if (!journal_file_) {
        throw Error("io-failure", "verifier journal write failed");
    }
}

void VerifierService::load_journal() {
    std::ifstream in(*data_dir_ / "verifier.log", std::ios::binary);
    if (!in) {
        return;
    }
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        Json entry;
        try {
            entry = Json::parse(line);
        } catch (const Json::exception &) {
            break; // torn tail
        }
        const auto type = entry.value("type", std::string{});
        if (type == "request") {
            auto req = PresentationRequest::from_frame(entry.at("frame"));
            auto id = req.request_id;
            requests_.insert_or_assign(std::move(id), StoredRequest{std::move(req), false});
        } else if (type == "consumed") {
            auto it = requests_.find(entry.at("requestId").get<std::string>());
            if (it != requests_.end()) {
                it->second.consumed = true;
            }
        } else if (type == "report") {
            auto report = VerificationReport::from_json(entry.at("report"));
            reports_.insert_or_assign(report.request_id, std::move(report));
        }
    }
}

PresentationRequest VerifierService::create_presentation_request(std::string_view credential_type,
                                                                 const std::optional<did::Did> &holder) {
    if (!config_) {
        throw Error("verifier-unconfigured", "verifier DID and encryption key are not configured");
    }
    const auto now = clock_();
    PresentationRequest request{.request_id = crypto::random_id(16),
                                .verifier_did = config_->verifier_did,
                                .credential_type = std::string(credential_type),
                                .nonce = crypto::generate_nonce(now),
                                .response_encryption_key = config_->encryption_key.public_key(),
                                .expires_at = now + config_->request_ttl_seconds};
    RequestNotifier notifier;
    {
        std::lock_guard lock(mutex_);
        journal(Json{{"type", "request"}, {"frame", request.to_frame()}});
        requests_.insert_or_assign(request.request_id, StoredRequest{request, false});
        notifier = notifier_;
    }
    if (notifier) {
        notifier(request, holder);
    }
    return request;
}

VerificationReport VerifierService::verify_presentation(const std::string &request_id,
                                                        const crypto::EncryptedEnvelope &envelope) {
    if (!config_) {
        throw Error("verifier-unconfigured", "verifier DID and encryption key are not configured");
    }
    const auto now = clock_();
    std::optional<PresentationRequest> request;
    bool nonce_used = false;
    {
        std::lock_guard lock(mutex_);
        auto it = requests_.find(request_id);
        if (it == requests_.end()) {
            throw Error("unknown-request", "no request with id " + request_id);
        }
        nonce_used = it->second.consumed;
        if (!nonce_used) {
            it->second.consumed = true;
            journal(Json{{"type", "consumed"}, {"requestId", request_id}});
        }
        if (now > it->second.request.expires_at + config_->clock_skew_seconds) {
            throw Error("request-expired", "request " + request_id + " has expired");
        }
        request = it->second.request;
    }
    auto report = run_checks(*request, envelope, now, nonce_used);
    if (!nonce_used) {
        std::lock_guard lock(mutex_);
        journal(Json{{"type", "report"}, {"report", report.to_json()}});
        reports_.insert_or_assign(request_id, report);
    }
    return report;
}

VerificationReport VerifierService::run_checks(const PresentationRequest &request,
                                               const crypto::EncryptedEnvelope &envelope, Timestamp now,
                                               bool nonce_used) const {
    const auto &cfg = *config_;
    CheckRunner checks;
    Bytes plaintext;
    std::optional<credential::VerifiablePresentation> vp;
    std::optional<credential::VerifiableCredential> vc;
    std::optional<crypto::PublicKey> issuer_key;

    checks.run("envelope-decryption", [&] {
        if (envelope.recipient_key_id != request.response_key_id()) {
            fail("envelope addressed to '" + envelope.recipient_key_id + "'");
        }
        plaintext = crypto::ecdh_decrypt(envelope, cfg.encryption_key);
        return std::string("decrypted ") + std::to_string(plaintext.size()) + " bytes";
    });
    checks.run("presentation-structure", [&] {
        vp = credential::decode_presentation(crypto::CompactToken::parse(to_string(plaintext)));
        return std::string("one embedded credential");
    });
    checks.run("nonce-binding", [&] {
        if (vp->nonce_value != request.nonce.value()) {
            fail("presentation nonce does not match the request nonce");
        }
        if (nonce_used) {
            fail("request nonce was already used by an earlier submission");
        }
        return std::string("nonce matches request");
    });
    checks.run("audience-binding", [&] {
        if (vp->audience != cfg.verifier_did) {
            fail("presentation audience is " + vp->audience.str());
        }
        return "audience " + vp->audience.str();
    });
    checks.run("holder-signature", [&] {
        const auto kid = vp->token.header().value("kid", std::string{});
        if (kid != did::did_key_kid(vp->holder)) {
            fail("header kid does not reference the presenting did:key");
        }
        crypto::verify_token(vp->token, did::resolve_did_key(vp->holder));
        return "signed by " + vp->holder.str();
    });
    checks.run("holder-binding", [&] {
        const auto &inner = vp->credential_token.payload();
        const auto sub = inner.find("sub");
        if (sub == inner.end() || !sub->is_string()) {
            fail("credential carries no subject");
        }
        if (sub->get<std::string>() != vp->holder.str()) {
            fail("presenter " + vp->holder.str() + " is not the credential subject " + sub->get<std::string>());
        }
        return std::string("presenter is the credential subject");
    });
    checks.run("credential-structure", [&] {
        vc = credential::decode_credential(vp->credential_token);
        if (vc->type != request.credential_type) {
            fail("credential type '" + vc->type + "' was not requested");
        }
        return "type " + vc->type;
    });
    checks.run("issuer-resolution", [&] {
        const auto doc = registry_.resolve_did_document(vc->issuer);
        if (doc.deactivated) {
            fail("issuer DID document is deactivated");
        }
        const auto kid = vc->token.header().value("kid", std::string{});
        issuer_key = doc.find_key(kid);
        if (!issuer_key) {
            fail("issuer document has no key '" + kid + "'");
        }
        return "resolved " + kid;
    });
    checks.run("issuer-signature", [&] {
        crypto::verify_token(vc->token, *issuer_key);
        vc->signature_verified = true;
        return std::string("credential signature valid");
    });
    checks.run("issuer-trusted", [&] {
        if (!registry_.tir_is_trusted(vc->issuer, vc->type, now)) {
            fail(vc->issuer.str() + " is not a trusted issuer of " + vc->type);
        }
        return vc->issuer.str() + " listed in TIR";
    });
    checks.run("validity-window", [&] {
        if (vc->issued_at > now + cfg.clock_skew_seconds) {
            fail("credential issued in the future");
        }
        if (now > vc->expires_at + cfg.clock_skew_seconds) {
            fail("credential expired at " + std::to_string(vc->expires_at));
        }
        return std::string("within validity window");
    });

    VerificationReport report{.request_id = request.request_id,
                              .outcome = checks.ok() ? Outcome::accepted : Outcome::rejected,
                              .checks = checks.take(),
                              .verified_at = now,
                              .presented_resume = std::nullopt};
    if (report.outcome == Outcome::accepted) {
        report.presented_resume = vc->claims;
    }
    return report;
}

VerificationReport VerifierService::get_report(const std::string &request_id) const {
    std::lock_guard lock(mutex_);
    auto it = reports_.find(request_id);
    if (it == reports_.end()) {
        throw Error("not-found", "no report for request " + request_id);
    }
    return it->second;
}

std::optional<PresentationRequest> VerifierService::find_request(const std::string &request_id) const {
    std::lock_guard lock(mutex_);
    auto it = requests_.find(request_id);
    if (it == requests_.end()) {
        return std::nullopt;
    }
    return it->second.request;
}

} // namespace resumevc::verification
