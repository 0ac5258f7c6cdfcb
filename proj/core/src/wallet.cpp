#include "resumevc/wallet.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "resumevc/error.hpp"

namespace resumevc::wallet {

namespace fs = std::filesystem;

namespace {

constexpr int kStoreVersion = 1;

[[noreturn]] void corrupt(const std::string &detail) { throw Error("corrupt-store", detail); }

} // namespace

Wallet::Wallet(fs::path path, Clock clock, crypto::KeyPair key)
    : path_(std::move(path)), clock_(std::move(clock)), holder_key_(std::move(key)),
      holder_did_(did::did_key_from_public_key(holder_key_.public_key())) {}

Wallet::Wallet(Wallet &&other) noexcept
    : path_(std::move(other.path_)), clock_(std::move(other.clock_)), holder_key_(std::move(other.holder_key_)),
      holder_did_(std::move(other.holder_did_)), resumes_(std::move(other.resumes_)),
      credentials_(std::move(other.credentials_)), pending_(std::move(other.pending_)),
      answered_(std::move(other.answered_)), declined_(std::move(other.declined_)), next_resume_(other.next_resume_) {}

Wallet Wallet::init(const fs::path &storage_path, Clock clock) {
    std::error_code ec;
    if (!fs::exists(storage_path, ec)) {
        if (storage_path.has_parent_path()) {
            fs::create_directories(storage_path.parent_path(), ec);
            if (ec) {
                throw Error("io-failure", "cannot create " + storage_path.parent_path().string());
            }
        }
        Wallet w(storage_path, std::move(clock), crypto::generate_key_pair());
        std::lock_guard lock(w.mutex_);
        w.persist_locked();
        return w;
    }

    std::ifstream in(storage_path, std::ios::binary);
    if (!in) {
        throw Error("io-failure", "cannot read " + storage_path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    Json json;
    try {
        json = Json::parse(buf.str());
    } catch (const Json::exception &e) {
        corrupt(e.what());
    }
    try {
        if (json.at("version").get<int>() != kStoreVersion) {
            corrupt("unsupported store version");
        }
        Wallet w(storage_path, std::move(clock), crypto::key_pair_from_json(json.at("holderKey")));
        if (json.at("holderDid").get<std::string>() != w.holder_did_.str()) {
            corrupt("holder DID does not match the stored key");
        }
        for (const auto &r : json.at("resumes")) {
            w.resumes_.push_back({r.at("id").get<std::string>(), credential::Resume::from_json(r.at("resume"))});
        }
        for (const auto &c : json.at("credentials")) {
            auto vc = credential::decode_credential(crypto::CompactToken::parse(c.get<std::string>()));
            if (vc.subject != w.holder_did_) {
                corrupt("stored credential belongs to another subject");
            }
            vc.signature_verified = true; // verified before it was stored
            w.credentials_.push_back(std::move(vc));
        }
        for (const auto &p : json.at("pendingRequests")) {
            w.pending_.push_back(verification::PresentationRequest::from_frame(p));
        }
        for (const auto &a : json.at("answeredRequests")) {
            w.answered_.insert(a.get<std::string>());
        }
        for (const auto &d : json.value("declinedRequests", Json::array())) {
            w.declined_.insert(d.get<std::string>());
        }
        w.next_resume_ = json.at("nextResume").get<int>();
        return w;
    } catch (const Json::exception &e) {
        corrupt(e.what());
    } catch (const Error &e) {
        if (e.code() == "corrupt-store") {
            throw;
        }
        corrupt(e.what());
    }
}

Json Wallet::to_json_locked() const {
    Json resumes = Json::array();
    for (const auto &r : resumes_) {
        resumes.push_back({{"id", r.id}, {"resume", r.resume.to_json()}});
    }
    Json creds = Json::array();
    for (const auto &c : credentials_) {
        creds.push_back(c.token.serialize());
    }
    Json pending = Json::array();
    for (const auto &p : pending_) {
        pending.push_back(p.to_frame());
    }
    return Json{{"version", kStoreVersion},
                {"holderKey", crypto::key_pair_to_json(holder_key_)},
                {"holderDid", holder_did_.str()},
                {"resumes", resumes},
                {"credentials", creds},
                {"pendingRequests", pending},
                {"answeredRequests", answered_},
                {"declinedRequests", declined_},
                {"nextResume", next_resume_}};
}

void Wallet::persist_locked() const {
    const auto tmp = fs::path(path_.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("io-failure", "cannot write " + tmp.string());
        }
        fs::permissions(tmp, fs::perms::owner_read | fs::perms::owner_write, fs::perm_options::replace);
        out << to_json_locked().dump(2) << '\n';
        if (!out.flush()) {
            throw Error("io-failure", "cannot write " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path_, ec);
    if (ec) {
        throw Error("io-failure", "cannot replace wallet store: " + ec.message());
    }
}

std::string Wallet::create_resume(std::string full_name) {
    std::lock_guard lock(mutex_);
    auto id = "resume-" + std::to_string(next_resume_++);
    resumes_.push_back({id, credential::Resume{holder_did_, std::move(full_name), {}}});
    persist_locked();
    return id;
}

credential::Resume Wallet::add_position(const std::string &resume_id, const credential::Position &position) {
    std::lock_guard lock(mutex_);
    auto it = std::find_if(resumes_.begin(), resumes_.end(), [&](const auto &r) { return r.id == resume_id; });
    if (it == resumes_.end()) {
        throw Error("unknown-resume", "no resume " + resume_id);
    }
    credential::validate_position(position);
    it->resume.positions.push_back(position);
    persist_locked();
    return it->resume;
}

std::vector<StoredResume> Wallet::resumes() const {
    std::lock_guard lock(mutex_);
    return resumes_;
}

credential::Resume Wallet::resume(const std::string &resume_id) const {
    std::lock_guard lock(mutex_);
    auto it = std::find_if(resumes_.begin(), resumes_.end(), [&](const auto &r) { return r.id == resume_id; });
    if (it == resumes_.end()) {
        throw Error("unknown-resume", "no resume " + resume_id);
    }
    return it->resume;
}

credential::VerifiableCredential Wallet::acquire_credential(issuance::IssuerApi &issuer,
                                                            const registry::RegistryReader &registry,
                                                            const std::string &resume_id,
                                                            std::string_view credential_type) {
    const auto cv = resume(resume_id);

    auto flow = [](auto &&step) {
        try {
            return step();
        } catch (const Error &e) {
            throw Error("issuance-flow-failure", e.what());
        }
    };

    const auto offer = flow([&] { return issuer.create_offer(cv, credential_type); });

    did::DidDocument issuer_doc = [&] {
        try {
            return registry.resolve_did_document(offer.issuer);
        } catch (const Error &e) {
            throw Error("issuer-unresolvable", e.what());
        }
    }();
    if (issuer_doc.deactivated) {
        throw Error("issuer-unresolvable", offer.issuer.str() + " is deactivated");
    }

    const auto token = flow([&] { return issuer.exchange_token(offer.offer_id); });
    const auto proof = issuance::build_proof(holder_key_, offer.issuer, token.c_nonce, clock_());
    const auto credential_token = flow([&] { return issuer.issue_credential(token.access_ref, proof); });

    credential::VerifiableCredential vc = [&] {
        try {
            return credential::decode_credential(credential_token);
        } catch (const Error &e) {
            throw Error("issuer-signature-invalid", e.what());
        }
    }();
    if (vc.issuer != offer.issuer) {
        throw Error("issuer-signature-invalid", "credential issuer differs from the offering issuer");
    }
    if (vc.subject != holder_did_) {
        throw Error("issuer-signature-invalid", "credential is not bound to this wallet");
    }
    const auto key = issuer_doc.find_key(credential_token.header().value("kid", std::string{}));
    if (!key) {
        throw Error("issuer-signature-invalid", "signing key is not in the issuer's DID document");
    }
    try {
        crypto::verify_token(credential_token, *key);
    } catch (const Error &e) {
        throw Error("issuer-signature-invalid", e.what());
    }
    vc.signature_verified = true;

    std::lock_guard lock(mutex_);
    store_credential_locked(vc);
    return vc;
}

void Wallet::store_credential_locked(credential::VerifiableCredential vc) {
    credentials_.push_back(std::move(vc));
    persist_locked();
}

std::vector<credential::VerifiableCredential> Wallet::credentials() const {
    std::lock_guard lock(mutex_);
    return credentials_;
}

std::optional<credential::VerifiableCredential> Wallet::find_credential(std::string_view credential_type) const {
    const auto now = clock_();
    std::lock_guard lock(mutex_);
    const credential::VerifiableCredential *best = nullptr;
    for (const auto &c : credentials_) {
        if (c.type == credential_type && c.expires_at > now && (!best || c.issued_at >= best->issued_at)) {
            best = &c;
        }
    }
    if (!best) {
        return std::nullopt;
    }
    return *best;
}

void Wallet::receive_request(const verification::PresentationRequest &request) {
    std::lock_guard lock(mutex_);
    if (answered_.contains(request.request_id) || declined_.contains(request.request_id) ||
        std::any_of(pending_.begin(), pending_.end(),
                    [&](const auto &p) { return p.request_id == request.request_id; })) {
        return;
    }
    pending_.push_back(request);
    persist_locked();
}

std::vector<verification::PresentationRequest> Wallet::pending_requests() const {
    std::lock_guard lock(mutex_);
    return pending_;
}

crypto::EncryptedEnvelope Wallet::handle_presentation_request(const verification::PresentationRequest &request) {
    const auto now = clock_();
    {
        std::lock_guard lock(mutex_);
        if (answered_.contains(request.request_id) || declined_.contains(request.request_id)) {
            throw Error("request-already-answered", "request " + request.request_id + " was already answered");
        }
    }
    if (now > request.expires_at) {
        throw Error("request-expired", "request " + request.request_id + " has expired");
    }
    const auto vc = find_credential(request.credential_type);
    if (!vc) {
        throw Error("no-matching-credential", "no unexpired " + request.credential_type + " in the wallet");
    }
    const auto vp = credential::build_presentation(*vc, holder_key_, request.verifier_did, request.nonce.value(), now);
    auto envelope = crypto::ecdh_encrypt(to_bytes(vp.token.serialize()), request.response_encryption_key,
                                         request.response_key_id());

    std::lock_guard lock(mutex_);
    if (!answered_.insert(request.request_id).second) {
        throw Error("request-already-answered", "request " + request.request_id + " was already answered");
    }
    std::erase_if(pending_, [&](const auto &p) { return p.request_id == request.request_id; });
    persist_locked();
    return envelope;
}

bool Wallet::answered(const std::string &request_id) const {
    std::lock_guard lock(mutex_);
    return answered_.contains(request_id);
}

void Wallet::decline_request(const std::string &request_id) {
    std::lock_guard lock(mutex_);
    if (answered_.contains(request_id) || declined_.contains(request_id)) {
        throw Error("request-already-answered", "request " + request_id + " was already answered");
    }
    const auto removed =
        std::erase_if(pending_, [&](const auto &p) { return p.request_id == request_id; });
    if (removed == 0) {
        throw Error("unknown-request", "no pending request " + request_id);
    }
    declined_.insert(request_id);
    persist_locked();
}

bool Wallet::declined(const std::string &request_id) const {
    std::lock_guard lock(mutex_);
    return declined_.contains(request_id);
}

} // namespace resumevc::wallet
