#include "resumevc/issuance.hpp"

#include "resumevc/error.hpp"

namespace resumevc::issuance {

Json CredentialOffer::to_json() const {
    return Json{{"offerId", offer_id},
                {"issuer", issuer.str()},
                {"credentialType", credential_type},
                {"resumeRef", resume_ref},
                {"expiresAt", expires_at}};
}

CredentialOffer CredentialOffer::from_json(const Json &json) {
    try {
        return CredentialOffer{.offer_id = json.at("offerId").get<std::string>(),
                               .issuer = did::Did::parse(json.at("issuer").get<std::string>()),
                               .credential_type = json.at("credentialType").get<std::string>(),
                               .resume_ref = json.at("resumeRef").get<std::string>(),
                               .expires_at = json.at("expiresAt").get<Timestamp>()};
    } catch (const Json::exception &e) {
        throw Error("malformed-offer", e.what());
    }
}

Json TokenResponse::to_json() const {
    return Json{{"accessRef", access_ref}, {"cNonce", c_nonce}, {"cNonceExpiresAt", c_nonce_expires_at}};
}

TokenResponse TokenResponse::from_json(const Json &json) {
    try {
        return TokenResponse{.access_ref = json.at("accessRef").get<std::string>(),
                             .c_nonce = json.at("cNonce").get<std::string>(),
                             .c_nonce_expires_at = json.at("cNonceExpiresAt").get<Timestamp>()};
    } catch (const Json::exception &e) {
        throw Error("malformed-token-response", e.what());
    }
}

std::string_view session_state_name(SessionState state) {
    switch (state) {
    case SessionState::offered:
        return "offered";
    case SessionState::challenged:
        return "challenged";
    case SessionState::issued:
        return "issued";
    case SessionState::expired:
        return "expired";
    }
    return "expired";
}

crypto::CompactToken build_proof(const crypto::KeyPair &holder_key, const did::Did &issuer, std::string_view c_nonce,
                                 Timestamp now) {
    const auto holder = did::did_key_from_public_key(holder_key.public_key());
    return crypto::sign_token(
        Json{{"iss", holder.str()}, {"aud", issuer.str()}, {"nonce", std::string(c_nonce)}, {"iat", now}},
        Json{{"kid", did::did_key_kid(holder)}, {"typ", "openid4vci-proof+jwt"}}, holder_key);
}

IssuerService::IssuerService(std::optional<IssuerConfig> config, Clock clock)
    : config_(std::move(config)), clock_(std::move(clock)) {}

const IssuerConfig &IssuerService::require_config() const {
    if (!config_) {
        throw Error("issuer-unconfigured", "issuer DID and signing key are not configured");
    }
    return *config_;
}

CredentialOffer IssuerService::create_offer(const credential::Resume &resume, std::string_view credential_type) {
    const auto &cfg = require_config();
    credential::validate_resume_for_issuance(resume);
    if (credential_type.empty()) {
        throw Error("invalid-resume", "credential type is required");
    }
    const auto now = clock_();
    Session session{.offer = CredentialOffer{.offer_id = crypto::random_id(16),
                                             .issuer = cfg.issuer_did,
                                             .credential_type = std::string(credential_type),
                                             .resume_ref = crypto::random_id(12),
                                             .expires_at = now + cfg.offer_ttl_seconds},
                    .resume = resume,
                    .state = SessionState::offered,
                    .c_nonce = std::nullopt,
                    .holder_did = std::nullopt};
    std::lock_guard lock(mutex_);
    auto offer = session.offer;
    sessions_.emplace(offer.offer_id, std::move(session));
    return offer;
}

TokenResponse IssuerService::exchange_token(const std::string &offer_id) {
    const auto &cfg = require_config();
    const auto now = clock_();
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(offer_id);
    if (it == sessions_.end()) {
        throw Error("unknown-offer", "no offer with id " + offer_id);
    }
    auto &session = it->second;
    if (session.state == SessionState::offered && now >= session.offer.expires_at) {
        session.state = SessionState::expired;
    }
    if (session.state == SessionState::expired) {
        throw Error("offer-expired", "offer " + offer_id + " has expired");
    }
    if (session.state != SessionState::offered) {
        throw Error("offer-already-used", "offer " + offer_id + " was already exchanged");
    }
    auto nonce = crypto::generate_nonce(now);
    TokenResponse response{.access_ref = crypto::random_id(24),
                           .c_nonce = nonce.value(),
                           .c_nonce_expires_at = now + cfg.c_nonce_ttl_seconds};
    session.c_nonce = std::move(nonce);
    session.state = SessionState::challenged;
    access_refs_[response.access_ref] = offer_id;
    return response;
}

crypto::CompactToken IssuerService::issue_credential(const std::string &access_ref, const crypto::CompactToken &proof) {
    return issue(access_ref, proof).token;
}

credential::VerifiableCredential IssuerService::issue(const std::string &access_ref,
                                                      const crypto::CompactToken &proof) {
    const auto &cfg = require_config();
    const auto now = clock_();
    std::lock_guard lock(mutex_);
    auto ref = access_refs_.find(access_ref);
    if (ref == access_refs_.end()) {
        throw Error("unknown-session", "no session for the given access reference");
    }
    auto &session = sessions_.at(ref->second);

    // Proof of possession: the proof must verify under the did:key it names.
    did::Did holder = [&] {
        try {
            const auto iss = proof.payload().at("iss").get<std::string>();
            auto holder_did = did::Did::parse(iss);
            const auto kid = proof.header().at("kid").get<std::string>();
            if (kid != did::did_key_kid(holder_did)) {
                throw Error("bad-proof-signature", "kid does not reference the proof issuer");
            }
            crypto::verify_token(proof, did::resolve_did_key(holder_did));
            return holder_did;
        } catch (const Json::exception &e) {
            throw Error("bad-proof-signature", e.what());
        } catch (const Error &e) {
            throw Error("bad-proof-signature", e.what());
        }
    }();

    const auto aud = proof.payload().find("aud");
    if (aud == proof.payload().end() || !aud->is_string() || aud->get<std::string>() != cfg.issuer_did.str()) {
        throw Error("audience-mismatch", "proof audience is not this issuer");
    }

    if (session.state == SessionState::issued || (session.c_nonce && session.c_nonce->consumed())) {
        throw Error("nonce-replayed", "the session's c_nonce was already used");
    }
    if (session.state != SessionState::challenged || !session.c_nonce) {
        throw Error("unknown-session", "session is not awaiting a proof");
    }
    const auto nonce = proof.payload().find("nonce");
    if (nonce == proof.payload().end() || !nonce->is_string()) {
        throw Error("nonce-mismatch", "proof carries no nonce");
    }
    const auto proof_nonce = nonce->get<std::string>();
    if (consumed_nonces_.contains(proof_nonce) && proof_nonce != session.c_nonce->value()) {
        throw Error("nonce-mismatch", "proof nonce belongs to an earlier session");
    }
    if (proof_nonce != session.c_nonce->value()) {
        throw Error("nonce-mismatch", "proof nonce does not match the session challenge");
    }
    if (now >= session.c_nonce->issued_at() + cfg.c_nonce_ttl_seconds) {
        session.state = SessionState::expired;
        throw Error("nonce-expired", "c_nonce has expired");
    }
    if (holder != session.resume.holder_did) {
        throw Error("holder-mismatch", "proof key does not control the resume holder DID");
    }

    auto vc = credential::build_credential(session.resume, cfg.issuer_did, cfg.signing_key,
                                           cfg.credential_validity_seconds, now, session.offer.credential_type,
                                           cfg.key_id);
    session.c_nonce->consume();
    consumed_nonces_.insert(proof_nonce);
    session.holder_did = holder;
    session.state = SessionState::issued;
    ++issued_;
    return vc;
}

std::optional<SessionState> IssuerService::session_state(const std::string &offer_id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(offer_id);
    if (it == sessions_.end()) {
        return std::nullopt;
    }
    return it->second.state;
}

std::size_t IssuerService::issued_count() const {
    std::lock_guard lock(mutex_);
    return issued_;
}

} // namespace resumevc::issuance
