#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "resumevc/clock.hpp"
#include "resumevc/crypto.hpp"
#include "resumevc/did.hpp"
#include "resumevc/encoding.hpp"

namespace resumevc::credential {

inline constexpr std::string_view kResumeCredentialType = "ResumeCredential";

enum class PositionKind { education, work, certificate };

std::string_view position_kind_name(PositionKind kind);
/// Throws Error("invalid-position").
PositionKind position_kind_from_name(std::string_view name);

/// ISO-8601 calendar date, YYYY-MM-DD.
bool is_iso_date(std::string_view text);

struct Position {
    PositionKind kind = PositionKind::work;
    std::string title;
    std::string organization;
    std::optional<did::Did> organization_did;
    std::string start;
    std::optional<std::string> end;
    std::string description;

    Json to_json() const;
    static Position from_json(const Json &json);

    bool operator==(const Position &) const = default;
};

/// Throws Error("invalid-position") for bad dates or end < start.
void validate_position(const Position &position);

struct Resume {
    did::Did holder_did;
    std::string full_name;
    std::vector<Position> positions;

    /// {"holderDid","fullName","positions":[...]}
    Json to_json() const;
    /// Throws Error("invalid-resume").
    static Resume from_json(const Json &json);

    bool operator==(const Resume &) const = default;
};

/// Checks everything a credential needs: did:key holder, non-empty name,
/// at least one position, valid positions. Throws Error("invalid-resume").
void validate_resume_for_issuance(const Resume &resume);

struct VerifiableCredential {
    std::string id;
    std::string type;
    did::Did issuer;
    did::Did subject;
    Resume claims;
    Timestamp issued_at = 0;
    Timestamp expires_at = 0;
    crypto::CompactToken token;
    /// Set only by code paths that checked the issuer signature.
    bool signature_verified = false;
};

/// Signs the whole resume as one credential. The header kid is
/// "<issuer>#<issuer_key_id>". Throws Error("invalid-resume") or
/// Error("wrong-issuer-method").
VerifiableCredential build_credential(const Resume &resume, const did::Did &issuer, const crypto::KeyPair &issuer_key,
                                      std::int64_t validity_seconds, Timestamp now,
                                      std::string_view credential_type = kResumeCredentialType,
                                      std::string_view issuer_key_id = "key-1");

/// Structure only; the signature is not checked.
/// Throws Error("malformed-claims") or Error("type-mismatch").
VerifiableCredential decode_credential(const crypto::CompactToken &token);

struct VerifiablePresentation {
    did::Did holder;
    /// Embedded verbatim. Its claims are decoded separately (decode_credential)
    /// so presentation and credential structure fail independently.
    crypto::CompactToken credential_token;
    did::Did audience;
    std::string nonce_value;
    Timestamp issued_at = 0;
    crypto::CompactToken token;
};

/// Throws Error("subject-mismatch") when holder_key is not the credential subject.
VerifiablePresentation build_presentation(const VerifiableCredential &vc, const crypto::KeyPair &holder_key,
                                          const did::Did &audience, std::string_view nonce_value, Timestamp now);

/// Wraps a credential token in presentation claims without the subject check.
/// Used by build_presentation and by adversarial test tooling.
Json presentation_claims(const did::Did &holder, const crypto::CompactToken &credential_token,
                         const did::Did &audience, std::string_view nonce_value, Timestamp now);

/// Structure only; the embedded credential is parsed as a compact token but
/// its claims are not decoded. Throws Error("malformed-claims") or
/// Error("type-mismatch").
VerifiablePresentation decode_presentation(const crypto::CompactToken &token);

} // namespace resumevc::credential
