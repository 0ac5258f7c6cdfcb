#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "resumevc/clock.hpp"
#include "resumevc/encoding.hpp"

namespace resumevc::crypto {

// Single supported profile: NIST P-256, ES256 compact signatures (raw r||s),
// deterministic nonces per RFC 6979, ECDH-ES + Concat KDF + AES-256-GCM.
inline constexpr std::string_view kCurveName = "P-256";
inline constexpr std::string_view kSignatureAlg = "ES256";
inline constexpr std::string_view kEnvelopeEnc = "A256GCM";
inline constexpr std::size_t kScalarSize = 32;
inline constexpr std::size_t kCompressedPointSize = 33;
inline constexpr std::size_t kSignatureSize = 64;
inline constexpr std::size_t kIvSize = 12;
inline constexpr std::size_t kTagSize = 16;
inline constexpr std::size_t kNonceBytes = 32;

class PublicKey {
  public:
    using Point = std::array<std::uint8_t, kCompressedPointSize>;

    /// Validates the SEC1 compressed encoding; off-curve points, the identity
    /// and uncompressed forms are rejected with Error("invalid-key").
    static PublicKey from_compressed(std::span<const std::uint8_t> bytes);
    static PublicKey from_base64url(std::string_view text);

    const Point &point_bytes() const noexcept { return point_; }
    std::string_view curve() const noexcept { return kCurveName; }
    std::string to_base64url() const;

    bool operator==(const PublicKey &) const = default;

  private:
    friend class KeyPair;
    explicit PublicKey(const Point &point) : point_(point) {}
    Point point_{};
};

class KeyPair {
  public:
    using Scalar = std::array<std::uint8_t, kScalarSize>;

    /// Derives the public key; scalars of zero or >= the group order are
    /// rejected with Error("invalid-key").
    static KeyPair from_private_scalar(std::span<const std::uint8_t> scalar);

    KeyPair(const KeyPair &) = default;
    KeyPair &operator=(const KeyPair &) = default;
    KeyPair(KeyPair &&) noexcept = default;
    KeyPair &operator=(KeyPair &&) noexcept = default;
    ~KeyPair();

    const PublicKey &public_key() const noexcept { return public_; }
    std::string_view curve() const noexcept { return kCurveName; }

    /// Secret material. Only key files and the wallet store persist it.
    const Scalar &private_scalar() const noexcept { return scalar_; }

  private:
    KeyPair(const Scalar &scalar, const PublicKey &pub) : scalar_(scalar), public_(pub) {}
    Scalar scalar_{};
    PublicKey public_;
};

KeyPair generate_key_pair();

/// Key file format: {"curve":"P-256","d":<b64url scalar>,"x":<b64url compressed point>}.
Json key_pair_to_json(const KeyPair &key);
KeyPair key_pair_from_json(const Json &json);

/// header.payload.signature. The encoded header and payload segments are kept
/// verbatim so verification runs over exactly the bytes that were received.
class CompactToken {
  public:
    CompactToken() = default;
    CompactToken(Json header, Json payload, Bytes signature);

    /// Throws Error("malformed-token").
    static CompactToken parse(std::string_view wire);

    const Json &header() const noexcept { return header_; }
    const Json &payload() const noexcept { return payload_; }
    const Bytes &signature() const noexcept { return signature_; }

    std::string signing_input() const;
    std::string serialize() const;

    bool operator==(const CompactToken &other) const { return serialize() == other.serialize(); }

  private:
    Json header_ = Json::object();
    Json payload_ = Json::object();
    Bytes signature_;
    std::string header_segment_;
    std::string payload_segment_;
};

/// Header is header_extras plus "alg"; the caller supplies "kid".
/// Throws Error("unserializable-claims") when claims is not a JSON object.
CompactToken sign_token(const Json &claims, const Json &header_extras, const KeyPair &key);

/// Returns the payload claims when the signature is valid.
/// Throws Error("unsupported-algorithm") or Error("bad-signature").
Json verify_token(const CompactToken &token, const PublicKey &key);

/// Raw ES256 over an arbitrary message.
std::array<std::uint8_t, kSignatureSize> sign_message(std::span<const std::uint8_t> message, const KeyPair &key);
bool verify_message(std::span<const std::uint8_t> message, std::span<const std::uint8_t> signature,
                    const PublicKey &key);

struct EncryptedEnvelope {
    PublicKey ephemeral_public_key;
    std::array<std::uint8_t, kIvSize> iv{};
    Bytes ciphertext;
    std::array<std::uint8_t, kTagSize> auth_tag{};
    std::string recipient_key_id;

    /// {"epk","iv","ciphertext","tag","kid"}; binary fields base64url.
    Json to_json() const;
    std::string serialize() const;
    /// Throws Error("malformed-envelope").
    static EncryptedEnvelope from_json(const Json &json);
    static EncryptedEnvelope parse(std::string_view wire);

    bool operator==(const EncryptedEnvelope &) const = default;
};

EncryptedEnvelope ecdh_encrypt(std::span<const std::uint8_t> plaintext, const PublicKey &recipient,
                               std::string_view recipient_key_id);
/// Throws Error("auth-failure") on tamper or wrong key.
Bytes ecdh_decrypt(const EncryptedEnvelope &envelope, const KeyPair &key);

/// Single-use challenge. Consumption is tracked by the owning service.
class Nonce {
  public:
    Nonce(std::string value, Timestamp issued_at) : value_(std::move(value)), issued_at_(issued_at) {}

    const std::string &value() const noexcept { return value_; }
    Timestamp issued_at() const noexcept { return issued_at_; }
    bool consumed() const noexcept { return consumed_; }

    /// Returns false if the nonce was already consumed.
    bool consume() noexcept {
        if (consumed_) {
            return false;
        }
        consumed_ = true;
        return true;
    }

  private:
    std::string value_;
    Timestamp issued_at_ = 0;
    bool consumed_ = false;
};

Nonce generate_nonce(Timestamp now);

/// Random base64url identifier of `bytes` random bytes.
std::string random_id(std::size_t bytes = 16);

/// SHA-256 digest.
std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data);

} // namespace resumevc::crypto
