#include <httplib.h>

#include "resumevc/error.hpp"
#include "resumevc/http.hpp"

namespace resumevc::http {

std::string url_encode(std::string_view text) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out += static_cast<char>(c);
        } else {
            out += '%';
            out += kHex[c >> 4];
            out += kHex[c & 15];
        }
    }
    return out;
}

struct JsonClient::Impl {
    explicit Impl(const std::string &url) : client(url) {
        client.set_connection_timeout(5);
        client.set_read_timeout(30);
        client.set_write_timeout(30);
    }
    httplib::Client client;
};

JsonClient::JsonClient(std::string base_url, std::string service, TranscriptSink transcript)
    : base_url_(std::move(base_url)), service_(std::move(service)), transcript_(std::move(transcript)) {
    while (!base_url_.empty() && base_url_.back() == '/') {
        base_url_.pop_back();
    }
    if (base_url_.find("://") == std::string::npos) {
        base_url_ = "http://" + base_url_;
    }
    impl_ = std::make_unique<Impl>(base_url_);
    if (!impl_->client.is_valid()) {
        throw Error("bad-address", "invalid service URL " + base_url_);
    }
}

JsonClient::~JsonClient() = default;

Json JsonClient::get(const std::string &path) const { return call("GET", path, nullptr); }

Json JsonClient::post(const std::string &path, const Json &body) const { return call("POST", path, &body); }

Json JsonClient::del(const std::string &path) const { return call("DELETE", path, nullptr); }

Json JsonClient::call(const char *method, const std::string &path, const Json *body) const {
    std::lock_guard lock(mutex_);
    if (transcript_) {
        transcript_(Json{{"service", service_},
                         {"direction", "request"},
                         {"method", method},
                         {"path", path},
                         {"body", body ? *body : Json(nullptr)}});
    }
    httplib::Result result = [&] {
        const std::string m = method;
        if (m == "GET") {
            return impl_->client.Get(path);
        }
        if (m == "DELETE") {
            return impl_->client.Delete(path);
        }
        return impl_->client.Post(path, body ? body->dump() : std::string{}, "application/json");
    }();
    if (!result) {
        throw Error("service-unreachable",
                    service_ + " at " + base_url_ + ": " + httplib::to_string(result.error()));
    }
    Json reply;
    try {
        reply = result->body.empty() ? Json(nullptr) : Json::parse(result->body);
    } catch (const Json::exception &) {
        throw Error("bad-response", service_ + " returned a non-JSON body");
    }
    if (transcript_) {
        transcript_(Json{{"service", service_},
                         {"direction", "response"},
                         {"method", method},
                         {"path", path},
                         {"status", result->status},
                         {"body", reply}});
    }
    if (result->status >= 400) {
        if (reply.is_object() && reply.contains("code")) {
            throw Error(reply.at("code").get<std::string>(), reply.value("message", std::string{}));
        }
        throw Error("bad-response", service_ + " returned status " + std::to_string(result->status));
    }
    return reply;
}

// Registry -------------------------------------------------------------------

HttpRegistryClient::HttpRegistryClient(std::string base_url, TranscriptSink transcript)
    : client_(std::move(base_url), "registry", std::move(transcript)) {}

did::DidDocument HttpRegistryClient::resolve_did_document(const did::Did &did) const {
    return did::DidDocument::from_json(client_.get("/did/" + url_encode(did.str())));
}

bool HttpRegistryClient::tir_is_trusted(const did::Did &did, std::string_view credential_type, Timestamp at) const {
    const auto reply = client_.get("/tir/" + url_encode(did.str()) + "?type=" + url_encode(credential_type) +
                                   "&at=" + std::to_string(at));
    return reply.at("trusted").get<bool>();
}

std::uint64_t HttpRegistryClient::register_did_document(const did::DidDocument &doc) {
    return client_.post("/did", doc.to_json()).at("sequence").get<std::uint64_t>();
}

std::uint64_t HttpRegistryClient::deactivate_did_document(const did::Did &did) {
    return client_.del("/did/" + url_encode(did.str())).at("sequence").get<std::uint64_t>();
}

registry::TirEntry HttpRegistryClient::tir_register(const did::Did &did,
                                                    const std::vector<std::string> &accredited_for) {
    return registry::TirEntry::from_json(
        client_.post("/tir", Json{{"did", did.str()}, {"accreditedFor", accredited_for}}));
}

registry::TirEntry HttpRegistryClient::tir_revoke(const did::Did &did) {
    return registry::TirEntry::from_json(client_.del("/tir/" + url_encode(did.str())));
}

// Issuer ---------------------------------------------------------------------

HttpIssuerClient::HttpIssuerClient(std::string base_url, TranscriptSink transcript)
    : client_(std::move(base_url), "issuer", std::move(transcript)) {}

issuance::CredentialOffer HttpIssuerClient::create_offer(const credential::Resume &resume,
                                                         std::string_view credential_type) {
    return issuance::CredentialOffer::from_json(client_.post(
        "/offers", Json{{"resume", resume.to_json()}, {"credentialType", std::string(credential_type)}}));
}

issuance::TokenResponse HttpIssuerClient::exchange_token(const std::string &offer_id) {
    return issuance::TokenResponse::from_json(client_.post("/token", Json{{"offerId", offer_id}}));
}

crypto::CompactToken HttpIssuerClient::issue_credential(const std::string &access_ref,
                                                        const crypto::CompactToken &proof) {
    const auto reply = client_.post("/credential", Json{{"accessRef", access_ref}, {"proof", proof.serialize()}});
    return crypto::CompactToken::parse(reply.at("credential").get<std::string>());
}

// Verifier -------------------------------------------------------------------

HttpVerifierClient::HttpVerifierClient(std::string base_url, TranscriptSink transcript)
    : client_(std::move(base_url), "verifier", std::move(transcript)) {}

verification::PresentationRequest HttpVerifierClient::create_request(std::string_view credential_type,
                                                                     const std::optional<did::Did> &holder) {
    Json body{{"credentialType", std::string(credential_type)}};
    if (holder) {
        body["holderDid"] = holder->str();
    }
    return verification::PresentationRequest::from_frame(client_.post("/requests", body));
}

verification::PresentationRequest HttpVerifierClient::request(const std::string &request_id) {
    return verification::PresentationRequest::from_frame(client_.get("/requests/" + url_encode(request_id)));
}

verification::VerificationReport HttpVerifierClient::verify(const std::string &request_id,
                                                            const crypto::EncryptedEnvelope &envelope) {
    return verification::VerificationReport::from_json(
        client_.post("/verify/" + url_encode(request_id), envelope.to_json()));
}

verification::VerificationReport HttpVerifierClient::report(const std::string &request_id) {
    return verification::VerificationReport::from_json(client_.get("/reports/" + url_encode(request_id)));
}

} // namespace resumevc::http
