#include "resumevc/did.hpp"

#include <algorithm>
#include <set>

#include "resumevc/error.hpp"
#include "resumevc/random.hpp"

namespace resumevc::did {

namespace {

constexpr std::size_t kEbsiIdBytes = 16;

} // namespace

std::string_view method_name(Method m) { return m == Method::key ? "key" : "ebsi"; }

Did::Did(Method method, std::string method_specific_id) : method_(method), id_(std::move(method_specific_id)) {
    if (id_.empty()) {
        throw Error("malformed-did", "empty method-specific id");
    }
    if (method_ == Method::key) {
        if (id_.size() < 2 || id_[0] != 'z' || !is_base58(std::string_view(id_).substr(1))) {
            throw Error("malformed-did", "did:key id must be 'z' + base58btc");
        }
    } else if (!is_base58(id_)) {
        throw Error("malformed-did", "did:ebsi id must be base58btc");
    }
}

Did Did::parse(std::string_view text) {
    constexpr std::string_view kPrefix = "did:";
    if (text.substr(0, kPrefix.size()) != kPrefix) {
        throw Error("malformed-did", "missing did: prefix");
    }
    const auto rest = text.substr(kPrefix.size());
    const auto colon = rest.find(':');
    if (colon == std::string_view::npos) {
        throw Error("malformed-did", "missing method");
    }
    const auto method = rest.substr(0, colon);
    const auto id = rest.substr(colon + 1);
    if (method == "key") {
        return Did(Method::key, std::string(id));
    }
    if (method == "ebsi") {
        return Did(Method::ebsi, std::string(id));
    }
    throw Error("malformed-did", "unsupported method '" + std::string(method) + "'");
}

std::string Did::str() const { return "did:" + std::string(method_name(method_)) + ":" + id_; }

std::string public_key_multibase(const crypto::PublicKey &key) {
    Bytes raw(std::begin(kP256MulticodecPrefix), std::end(kP256MulticodecPrefix));
    raw.insert(raw.end(), key.point_bytes().begin(), key.point_bytes().end());
    return "z" + base58_encode(raw);
}

crypto::PublicKey public_key_from_multibase(std::string_view multibase) {
    if (multibase.empty() || multibase[0] != 'z') {
        throw Error("malformed-multibase", "expected base58btc multibase prefix 'z'");
    }
    Bytes raw;
    try {
        raw = base58_decode(multibase.substr(1));
    } catch (const Error &e) {
        throw Error("malformed-multibase", e.what());
    }
    if (raw.size() != 2 + crypto::kCompressedPointSize || raw[0] != kP256MulticodecPrefix[0] ||
        raw[1] != kP256MulticodecPrefix[1]) {
        throw Error("malformed-multibase", "expected p256-pub multicodec and a 33-byte point");
    }
    try {
        return crypto::PublicKey::from_compressed(std::span(raw).subspan(2));
    } catch (const Error &e) {
        throw Error("off-curve-point", e.what());
    }
}

Did did_key_from_public_key(const crypto::PublicKey &key) { return Did(Method::key, public_key_multibase(key)); }

crypto::PublicKey resolve_did_key(const Did &did) {
    if (did.method() != Method::key) {
        throw Error("wrong-method", "expected did:key, got " + did.str());
    }
    return public_key_from_multibase(did.method_specific_id());
}

std::string did_key_kid(const Did &did) { return did.str() + "#" + did.method_specific_id(); }

Did new_ebsi_did() { return Did(Method::ebsi, base58_encode(rng::bytes(kEbsiIdBytes))); }

std::optional<crypto::PublicKey> DidDocument::find_key(std::string_view key_ref) const {
    auto fragment = key_ref;
    if (const auto hash = key_ref.find('#'); hash != std::string_view::npos) {
        if (key_ref.substr(0, hash) != id.str()) {
            return std::nullopt;
        }
        fragment = key_ref.substr(hash + 1);
    }
    for (const auto &k : verification_keys) {
        if (k.key_id == fragment) {
            return k.public_key;
        }
    }
    return std::nullopt;
}

Json DidDocument::to_json() const {
    Json methods = Json::array();
    for (const auto &k : verification_keys) {
        methods.push_back({{"id", id.str() + "#" + k.key_id}, {"publicKeyMultibase", public_key_multibase(k.public_key)}});
    }
    return Json{{"id", id.str()}, {"verificationMethod", methods}, {"created", created_at}, {"deactivated", deactivated}};
}

DidDocument DidDocument::from_json(const Json &json) {
    try {
        DidDocument doc{.id = Did::parse(json.at("id").get<std::string>()),
                        .verification_keys = {},
                        .created_at = json.at("created").get<Timestamp>(),
                        .deactivated = json.at("deactivated").get<bool>()};
        const auto prefix = doc.id.str() + "#";
        for (const auto &m : json.at("verificationMethod")) {
            const auto ref = m.at("id").get<std::string>();
            if (ref.rfind(prefix, 0) != 0 || ref.size() == prefix.size()) {
                throw Error("invalid-document", "verification method id must be <did>#<fragment>");
            }
            doc.verification_keys.push_back(
                {ref.substr(prefix.size()), public_key_from_multibase(m.at("publicKeyMultibase").get<std::string>())});
        }
        validate_document(doc);
        return doc;
    } catch (const Json::exception &e) {
        throw Error("invalid-document", e.what());
    } catch (const Error &e) {
        if (e.code() == "invalid-document") {
            throw;
        }
        throw Error("invalid-document", e.what());
    }
}

void validate_document(const DidDocument &doc) {
    if (doc.id.method() != Method::ebsi) {
        throw Error("invalid-document", "only did:ebsi subjects have documents");
    }
    if (doc.verification_keys.empty() && !doc.deactivated) {
        throw Error("invalid-document", "an active document needs at least one key");
    }
    std::set<std::string> seen;
    for (const auto &k : doc.verification_keys) {
        if (k.key_id.empty() || !seen.insert(k.key_id).second) {
            throw Error("invalid-document", "key ids must be non-empty and unique");
        }
    }
}

DidDocument build_did_document(const Did &did, std::vector<VerificationKey> keys, Timestamp now) {
    if (did.method() != Method::ebsi) {
        throw Error("wrong-method", "documents are only built for did:ebsi");
    }
    if (keys.empty()) {
        throw Error("empty-keys", "at least one verification key is required");
    }
    std::set<std::string> seen;
    for (const auto &k : keys) {
        if (k.key_id.empty()) {
            throw Error("invalid-document", "key id must be non-empty");
        }
        if (!seen.insert(k.key_id).second) {
            throw Error("duplicate-key-id", "key id '" + k.key_id + "' appears twice");
        }
    }
    return DidDocument{.id = did, .verification_keys = std::move(keys), .created_at = now, .deactivated = false};
}

} // namespace resumevc::did
