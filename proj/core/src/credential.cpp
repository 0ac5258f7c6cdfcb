#include "resumevc/credential.hpp"

#include <chrono>

#include "resumevc/error.hpp"

namespace resumevc::credential {

namespace {

const Json &require(const Json &obj, const char *name) {
    auto it = obj.find(name);
    if (it == obj.end()) {
        throw Error("malformed-claims", std::string("missing claim '") + name + "'");
    }
    return *it;
}

std::string require_string(const Json &obj, const char *name) {
    const auto &v = require(obj, name);
    if (!v.is_string()) {
        throw Error("type-mismatch", std::string("claim '") + name + "' must be a string");
    }
    return v.get<std::string>();
}

Timestamp require_int(const Json &obj, const char *name) {
    const auto &v = require(obj, name);
    if (!v.is_number_integer()) {
        throw Error("type-mismatch", std::string("claim '") + name + "' must be an integer");
    }
    return v.get<Timestamp>();
}

did::Did require_did(const Json &obj, const char *name, did::Method method) {
    const auto text = require_string(obj, name);
    did::Did d = [&] {
        try {
            return did::Did::parse(text);
        } catch (const Error &e) {
            throw Error("malformed-claims", std::string("claim '") + name + "': " + e.what());
        }
    }();
    if (d.method() != method) {
        throw Error("malformed-claims",
                    std::string("claim '") + name + "' must be a did:" + std::string(did::method_name(method)));
    }
    return d;
}

} // namespace

std::string_view position_kind_name(PositionKind kind) {
    switch (kind) {
    case PositionKind::education:
        return "education";
    case PositionKind::work:
        return "work";
    case PositionKind::certificate:
        return "certificate";
    }
    return "work";
}

PositionKind position_kind_from_name(std::string_view name) {
    for (auto k : {PositionKind::education, PositionKind::work, PositionKind::certificate}) {
        if (position_kind_name(k) == name) {
            return k;
        }
    }
    throw Error("invalid-position", "unknown position kind '" + std::string(name) + "'");
}

bool is_iso_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        return false;
    }
    auto digits = [&](std::size_t from, std::size_t len, int &out) {
        out = 0;
        for (std::size_t i = from; i < from + len; ++i) {
            if (text[i] < '0' || text[i] > '9') {
                return false;
            }
            out = out * 10 + (text[i] - '0');
        }
        return true;
    };
    int y = 0, m = 0, d = 0;
    if (!digits(0, 4, y) || !digits(5, 2, m) || !digits(8, 2, d)) {
        return false;
    }
    const std::chrono::year_month_day ymd{std::chrono::year(y), std::chrono::month(static_cast<unsigned>(m)),
                                          std::chrono::day(static_cast<unsigned>(d))};
    return ymd.ok();
}

// Position / Resume ----------------------------------------------------------

Json Position::to_json() const {
    Json j{{"kind", std::string(position_kind_name(kind))},
           {"title", title},
           {"organization", organization},
           {"start", start},
           {"description", description}};
    j["organizationDid"] = organization_did ? Json(organization_did->str()) : Json(nullptr);
    j["end"] = end ? Json(*end) : Json(nullptr);
    return j;
}

Position Position::from_json(const Json &json) {
    try {
        Position p;
        p.kind = position_kind_from_name(json.at("kind").get<std::string>());
        p.title = json.at("title").get<std::string>();
        p.organization = json.at("organization").get<std::string>();
        p.start = json.at("start").get<std::string>();
        p.description = json.value("description", std::string{});
        if (json.contains("organizationDid") && !json.at("organizationDid").is_null()) {
            p.organization_did = did::Did::parse(json.at("organizationDid").get<std::string>());
        }
        if (json.contains("end") && !json.at("end").is_null()) {
            p.end = json.at("end").get<std::string>();
        }
        return p;
    } catch (const Json::exception &e) {
        throw Error("invalid-position", e.what());
    } catch (const Error &e) {
        if (e.code() == "invalid-position") {
            throw;
        }
        throw Error("invalid-position", e.what());
    }
}

void validate_position(const Position &position) {
    if (position.title.empty() || position.organization.empty()) {
        throw Error("invalid-position", "title and organization are required");
    }
    if (!is_iso_date(position.start)) {
        throw Error("invalid-position", "start must be an ISO-8601 date");
    }
    if (position.end) {
        if (!is_iso_date(*position.end)) {
            throw Error("invalid-position", "end must be an ISO-8601 date");
        }
        // Fixed-width ISO dates order lexicographically.
        if (*position.end < position.start) {
            throw Error("invalid-position", "end precedes start");
        }
    }
}

Json Resume::to_json() const {
    Json positions_json = Json::array();
    for (const auto &p : positions) {
        positions_json.push_back(p.to_json());
    }
    return Json{{"holderDid", holder_did.str()}, {"fullName", full_name}, {"positions", positions_json}};
}

Resume Resume::from_json(const Json &json) {
    try {
        Resume r{.holder_did = did::Did::parse(json.at("holderDid").get<std::string>()),
                 .full_name = json.at("fullName").get<std::string>(),
                 .positions = {}};
        for (const auto &p : json.at("positions")) {
            r.positions.push_back(Position::from_json(p));
        }
        return r;
    } catch (const Json::exception &e) {
        throw Error("invalid-resume", e.what());
    } catch (const Error &e) {
        throw Error("invalid-resume", e.what());
    }
}

void validate_resume_for_issuance(const Resume &resume) {
    if (resume.holder_did.method() != did::Method::key) {
        throw Error("invalid-resume", "holder must be identified by a did:key");
    }
    if (resume.full_name.empty()) {
        throw Error("invalid-resume", "full name is required");
    }
    if (resume.positions.empty()) {
        throw Error("invalid-resume", "a credential needs at least one position");
    }
    for (const auto &p : resume.positions) {
        try {
            validate_position(p);
        } catch (const Error &e) {
            throw Error("invalid-resume", e.what());
        }
    }
}

// Credentials ----------------------------------------------------------------

VerifiableCredential build_credential(const Resume &resume, const did::Did &issuer, const crypto::KeyPair &issuer_key,
                                      std::int64_t validity_seconds, Timestamp now, std::string_view credential_type,
                                      std::string_view issuer_key_id) {
    if (issuer.method() != did::Method::ebsi) {
        throw Error("wrong-issuer-method", "issuers are identified by did:ebsi");
    }
    validate_resume_for_issuance(resume);
    if (validity_seconds <= 0) {
        throw Error("invalid-validity", "validity must be positive");
    }
    VerifiableCredential vc{.id = "urn:resumevc:" + crypto::random_id(16),
                            .type = std::string(credential_type),
                            .issuer = issuer,
                            .subject = resume.holder_did,
                            .claims = resume,
                            .issued_at = now,
                            .expires_at = now + validity_seconds,
                            .token = {},
                            .signature_verified = true};
    const Json claims{{"iss", issuer.str()},
                      {"sub", vc.subject.str()},
                      {"iat", vc.issued_at},
                      {"exp", vc.expires_at},
                      {"jti", vc.id},
                      {"vc", {{"type", vc.type}, {"credentialSubject", resume.to_json()}}}};
    const Json header{{"kid", issuer.str() + "#" + std::string(issuer_key_id)}, {"typ", "JWT"}};
    vc.token = crypto::sign_token(claims, header, issuer_key);
    return vc;
}

VerifiableCredential decode_credential(const crypto::CompactToken &token) {
    const auto &p = token.payload();
    const auto &vc_map = require(p, "vc");
    if (!vc_map.is_object()) {
        throw Error("type-mismatch", "claim 'vc' must be an object");
    }
    const auto &subject_json = require(vc_map, "credentialSubject");
    if (!subject_json.is_object()) {
        throw Error("type-mismatch", "claim 'vc.credentialSubject' must be an object");
    }
    VerifiableCredential vc{.id = require_string(p, "jti"),
                            .type = require_string(vc_map, "type"),
                            .issuer = require_did(p, "iss", did::Method::ebsi),
                            .subject = require_did(p, "sub", did::Method::key),
                            .claims = [&] {
                                try {
                                    return Resume::from_json(subject_json);
                                } catch (const Error &e) {
                                    throw Error("malformed-claims", e.what());
                                }
                            }(),
                            .issued_at = require_int(p, "iat"),
                            .expires_at = require_int(p, "exp"),
                            .token = token,
                            .signature_verified = false};
    if (vc.claims.holder_did != vc.subject) {
        throw Error("malformed-claims", "credentialSubject.holderDid differs from 'sub'");
    }
    return vc;
}

// Presentations --------------------------------------------------------------

Json presentation_claims(const did::Did &holder, const crypto::CompactToken &credential_token,
                         const did::Did &audience, std::string_view nonce_value, Timestamp now) {
    return Json{{"iss", holder.str()},
                {"aud", audience.str()},
                {"nonce", std::string(nonce_value)},
                {"iat", now},
                {"vp",
                 {{"type", "VerifiablePresentation"},
                  {"verifiableCredential", Json::array({credential_token.serialize()})}}}};
}

VerifiablePresentation build_presentation(const VerifiableCredential &vc, const crypto::KeyPair &holder_key,
                                          const did::Did &audience, std::string_view nonce_value, Timestamp now) {
    const auto holder = did::did_key_from_public_key(holder_key.public_key());
    if (holder != vc.subject) {
        throw Error("subject-mismatch", "the presenting key is not the credential subject");
    }
    auto token = crypto::sign_token(presentation_claims(holder, vc.token, audience, nonce_value, now),
                                    Json{{"kid", did::did_key_kid(holder)}, {"typ", "JWT"}}, holder_key);
    return VerifiablePresentation{.holder = holder,
                                  .credential_token = vc.token,
                                  .audience = audience,
                                  .nonce_value = std::string(nonce_value),
                                  .issued_at = now,
                                  .token = std::move(token)};
}

VerifiablePresentation decode_presentation(const crypto::CompactToken &token) {
    const auto &p = token.payload();
    const auto &vp_map = require(p, "vp");
    if (!vp_map.is_object()) {
        throw Error("type-mismatch", "claim 'vp' must be an object");
    }
    const auto &creds = require(vp_map, "verifiableCredential");
    if (!creds.is_array()) {
        throw Error("type-mismatch", "claim 'vp.verifiableCredential' must be an array");
    }
    if (creds.size() != 1 || !creds[0].is_string()) {
        throw Error("malformed-claims", "a presentation carries exactly one credential token");
    }
    auto audience = [&] {
        try {
            return did::Did::parse(require_string(p, "aud"));
        } catch (const Error &e) {
            if (e.code() == "malformed-did") {
                throw Error("malformed-claims", e.what());
            }
            throw;
        }
    }();
    VerifiablePresentation vp{.holder = require_did(p, "iss", did::Method::key),
                              .credential_token = [&] {
                                  try {
                                      return crypto::CompactToken::parse(creds[0].get<std::string>());
                                  } catch (const Error &e) {
                                      throw Error("malformed-claims",
                                                  std::string("embedded credential: ") + e.what());
                                  }
                              }(),
                              .audience = std::move(audience),
                              .nonce_value = require_string(p, "nonce"),
                              .issued_at = require_int(p, "iat"),
                              .token = token};
    return vp;
}

} // namespace resumevc::credential
