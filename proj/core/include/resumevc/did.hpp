#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "resumevc/clock.hpp"
#include "resumevc/crypto.hpp"
#include "resumevc/encoding.hpp"

namespace resumevc::did {

enum class Method { key, ebsi };

std::string_view method_name(Method m);

class Did {
  public:
    /// Throws Error("malformed-did").
    static Did parse(std::string_view text);
    Did(Method method, std::string method_specific_id);

    Method method() const noexcept { return method_; }
    const std::string &method_specific_id() const noexcept { return id_; }
    std::string str() const;

    auto operator<=>(const Did &) const = default;

  private:
    Method method_;
    std::string id_;
};

/// Multicodec varint for p256-pub (0x1200).
inline constexpr std::uint8_t kP256MulticodecPrefix[2] = {0x80, 0x24};

/// 'z' + base58btc(multicodec prefix || compressed point).
std::string public_key_multibase(const crypto::PublicKey &key);
/// Throws Error("malformed-multibase") or Error("off-curve-point").
crypto::PublicKey public_key_from_multibase(std::string_view multibase);

Did did_key_from_public_key(const crypto::PublicKey &key);
/// Throws Error("wrong-method"), Error("malformed-multibase") or Error("off-curve-point").
crypto::PublicKey resolve_did_key(const Did &did);

/// did:key verification method reference: did:key:z...#z...
std::string did_key_kid(const Did &did);

/// did:ebsi with 16 random bytes in base58btc.
Did new_ebsi_did();

struct VerificationKey {
    std::string key_id; // fragment without the leading '#'
    crypto::PublicKey public_key;

    bool operator==(const VerificationKey &) const = default;
};

struct DidDocument {
    Did id;
    std::vector<VerificationKey> verification_keys;
    Timestamp created_at = 0;
    bool deactivated = false;

    /// Looks up a key by fragment ("key-1") or full reference ("did:ebsi:..#key-1").
    std::optional<crypto::PublicKey> find_key(std::string_view key_ref) const;

    /// {"id","verificationMethod":[{"id":"<did>#<key_id>","publicKeyMultibase"}],"created","deactivated"}
    Json to_json() const;
    /// Throws Error("invalid-document").
    static DidDocument from_json(const Json &json);

    bool operator==(const DidDocument &) const = default;
};

/// Throws Error("invalid-document") for structural violations.
void validate_document(const DidDocument &doc);

/// Throws Error("wrong-method"), Error("empty-keys") or Error("duplicate-key-id").
DidDocument build_did_document(const Did &did, std::vector<VerificationKey> keys, Timestamp now);

} // namespace resumevc::did
