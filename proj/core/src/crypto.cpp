#include "resumevc/crypto.hpp"

#include <cstring>
#include <memory>

#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/crypto.h>
#include <openssl/ec.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/obj_mac.h>
#include <openssl/param_build.h>
#include <openssl/sha.h>

#include "resumevc/error.hpp"
#include "resumevc/random.hpp"

namespace resumevc::crypto {

namespace {

struct BnDeleter {
    void operator()(BIGNUM *p) const { BN_clear_free(p); }
};
struct BnCtxDeleter {
    void operator()(BN_CTX *p) const { BN_CTX_free(p); }
};
struct PointDeleter {
    void operator()(EC_POINT *p) const { EC_POINT_free(p); }
};
struct GroupDeleter {
    void operator()(EC_GROUP *p) const { EC_GROUP_free(p); }
};
struct PkeyDeleter {
    void operator()(EVP_PKEY *p) const { EVP_PKEY_free(p); }
};
struct PkeyCtxDeleter {
    void operator()(EVP_PKEY_CTX *p) const { EVP_PKEY_CTX_free(p); }
};
struct MdCtxDeleter {
    void operator()(EVP_MD_CTX *p) const { EVP_MD_CTX_free(p); }
};
struct CipherCtxDeleter {
    void operator()(EVP_CIPHER_CTX *p) const { EVP_CIPHER_CTX_free(p); }
};
struct SigDeleter {
    void operator()(ECDSA_SIG *p) const { ECDSA_SIG_free(p); }
};
struct ParamBldDeleter {
    void operator()(OSSL_PARAM_BLD *p) const { OSSL_PARAM_BLD_free(p); }
};
struct ParamDeleter {
    void operator()(OSSL_PARAM *p) const { OSSL_PARAM_free(p); }
};

using BnPtr = std::unique_ptr<BIGNUM, BnDeleter>;
using BnCtxPtr = std::unique_ptr<BN_CTX, BnCtxDeleter>;
using PointPtr = std::unique_ptr<EC_POINT, PointDeleter>;

void check(int ok, const char *what) {
    if (ok != 1) {
        throw Error("crypto-failure", what);
    }
}

const EC_GROUP *group() {
    static const std::unique_ptr<EC_GROUP, GroupDeleter> g(EC_GROUP_new_by_curve_name(NID_X9_62_prime256v1));
    return g.get();
}

const BIGNUM *order() { return EC_GROUP_get0_order(group()); }

BnPtr bn_new() {
    BnPtr bn(BN_new());
    if (!bn) {
        throw Error("crypto-failure", "BN_new");
    }
    return bn;
}

BnCtxPtr ctx_new() {
    BnCtxPtr ctx(BN_CTX_new());
    if (!ctx) {
        throw Error("crypto-failure", "BN_CTX_new");
    }
    return ctx;
}

BnPtr bn_from(std::span<const std::uint8_t> bytes) {
    BnPtr bn(BN_bin2bn(bytes.data(), static_cast<int>(bytes.size()), nullptr));
    if (!bn) {
        throw Error("crypto-failure", "BN_bin2bn");
    }
    return bn;
}

std::array<std::uint8_t, 32> bn_to_32(const BIGNUM *bn) {
    std::array<std::uint8_t, 32> out{};
    check(BN_bn2binpad(bn, out.data(), 32) == 32 ? 1 : 0, "BN_bn2binpad");
    return out;
}

PointPtr point_new() {
    PointPtr p(EC_POINT_new(group()));
    if (!p) {
        throw Error("crypto-failure", "EC_POINT_new");
    }
    return p;
}

PointPtr decode_point(const PublicKey::Point &bytes, BN_CTX *ctx) {
    auto p = point_new();
    check(EC_POINT_oct2point(group(), p.get(), bytes.data(), bytes.size(), ctx), "EC_POINT_oct2point");
    return p;
}

PublicKey::Point encode_point(const EC_POINT *p, BN_CTX *ctx) {
    PublicKey::Point out{};
    const auto n = EC_POINT_point2oct(group(), p, POINT_CONVERSION_COMPRESSED, out.data(), out.size(), ctx);
    check(n == out.size() ? 1 : 0, "EC_POINT_point2oct");
    return out;
}

std::array<std::uint8_t, 32> hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data) {
    std::array<std::uint8_t, 32> out{};
    unsigned int len = 0;
    if (HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(), out.data(), &len) ==
            nullptr ||
        len != 32) {
        throw Error("crypto-failure", "HMAC");
    }
    return out;
}

template <typename... Parts> Bytes concat(const Parts &...parts) {
    Bytes out;
    (out.insert(out.end(), std::begin(parts), std::end(parts)), ...);
    return out;
}

// RFC 6979 section 3.2 for qlen = hlen = 256. `next` is called until it
// yields a usable k; each rejection advances the HMAC-DRBG.
class DeterministicK {
  public:
    DeterministicK(const KeyPair::Scalar &x, const std::array<std::uint8_t, 32> &h1) {
        auto ctx = ctx_new();
        auto h = bn_from(h1);
        check(BN_nnmod(h.get(), h.get(), order(), ctx.get()), "BN_nnmod");
        const auto h_octets = bn_to_32(h.get());
        v_.fill(0x01);
        k_.fill(0x00);
        const std::array<std::uint8_t, 1> zero{0x00};
        const std::array<std::uint8_t, 1> one{0x01};
        k_ = hmac_sha256(k_, concat(v_, zero, x, h_octets));
        v_ = hmac_sha256(k_, v_);
        k_ = hmac_sha256(k_, concat(v_, one, x, h_octets));
        v_ = hmac_sha256(k_, v_);
    }

    ~DeterministicK() {
        OPENSSL_cleanse(k_.data(), k_.size());
        OPENSSL_cleanse(v_.data(), v_.size());
    }

    BnPtr next() {
        for (;;) {
            if (!first_) {
                const std::array<std::uint8_t, 1> zero{0x00};
                k_ = hmac_sha256(k_, concat(v_, zero));
                v_ = hmac_sha256(k_, v_);
            }
            first_ = false;
            v_ = hmac_sha256(k_, v_);
            auto k = bn_from(v_);
            if (!BN_is_zero(k.get()) && BN_cmp(k.get(), order()) < 0) {
                return k;
            }
        }
    }

  private:
    std::array<std::uint8_t, 32> k_{};
    std::array<std::uint8_t, 32> v_{};
    bool first_ = true;
};

std::unique_ptr<EVP_PKEY, PkeyDeleter> to_evp_public(const PublicKey &key) {
    std::unique_ptr<OSSL_PARAM_BLD, ParamBldDeleter> bld(OSSL_PARAM_BLD_new());
    if (!bld) {
        throw Error("crypto-failure", "OSSL_PARAM_BLD_new");
    }
    check(OSSL_PARAM_BLD_push_utf8_string(bld.get(), OSSL_PKEY_PARAM_GROUP_NAME, "prime256v1", 0),
          "push group");
    check(OSSL_PARAM_BLD_push_octet_string(bld.get(), OSSL_PKEY_PARAM_PUB_KEY, key.point_bytes().data(),
                                           key.point_bytes().size()),
          "push pub");
    std::unique_ptr<OSSL_PARAM, ParamDeleter> params(OSSL_PARAM_BLD_to_param(bld.get()));
    std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDeleter> pctx(EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr));
    if (!params || !pctx) {
        throw Error("crypto-failure", "EVP_PKEY_CTX_new_from_name");
    }
    check(EVP_PKEY_fromdata_init(pctx.get()), "EVP_PKEY_fromdata_init");
    EVP_PKEY *raw = nullptr;
    check(EVP_PKEY_fromdata(pctx.get(), &raw, EVP_PKEY_PUBLIC_KEY, params.get()), "EVP_PKEY_fromdata");
    return std::unique_ptr<EVP_PKEY, PkeyDeleter>(raw);
}

// NIST SP 800-56A single-step KDF as profiled by JOSE ECDH-ES: one SHA-256
// round yields the 256-bit content key.
std::array<std::uint8_t, 32> concat_kdf(std::span<const std::uint8_t> shared_secret, std::string_view kid) {
    auto be32 = [](std::uint32_t v) {
        return std::array<std::uint8_t, 4>{static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
                                           static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
    };
    const auto alg = to_bytes(kEnvelopeEnc);
    const auto apv = to_bytes(kid);
    const auto input = concat(be32(1), shared_secret, be32(static_cast<std::uint32_t>(alg.size())), alg, be32(0),
                              be32(static_cast<std::uint32_t>(apv.size())), apv, be32(256));
    return sha256(input);
}

std::array<std::uint8_t, 32> ecdh_shared_x(const KeyPair::Scalar &scalar, const PublicKey &peer) {
    auto ctx = ctx_new();
    auto q = decode_point(peer.point_bytes(), ctx.get());
    auto d = bn_from(scalar);
    auto shared = point_new();
    check(EC_POINT_mul(group(), shared.get(), nullptr, q.get(), d.get(), ctx.get()), "EC_POINT_mul");
    if (EC_POINT_is_at_infinity(group(), shared.get())) {
        throw Error("invalid-key", "ECDH produced the identity");
    }
    auto x = bn_new();
    check(EC_POINT_get_affine_coordinates(group(), shared.get(), x.get(), nullptr, ctx.get()), "affine");
    return bn_to_32(x.get());
}

std::string envelope_aad(const PublicKey &epk, std::string_view kid) {
    return epk.to_base64url() + "." + std::string(kid);
}

} // namespace

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data) {
    std::array<std::uint8_t, 32> out{};
    SHA256(data.data(), data.size(), out.data());
    return out;
}

// PublicKey ------------------------------------------------------------------

PublicKey PublicKey::from_compressed(std::span<const std::uint8_t> bytes) {
    if (bytes.size() != kCompressedPointSize || (bytes[0] != 0x02 && bytes[0] != 0x03)) {
        throw Error("invalid-key", "expected a 33-byte compressed P-256 point");
    }
    Point point{};
    std::copy(bytes.begin(), bytes.end(), point.begin());
    auto ctx = ctx_new();
    auto p = point_new();
    if (EC_POINT_oct2point(group(), p.get(), point.data(), point.size(), ctx.get()) != 1 ||
        EC_POINT_is_at_infinity(group(), p.get()) || EC_POINT_is_on_curve(group(), p.get(), ctx.get()) != 1) {
        throw Error("invalid-key", "point is not on the curve");
    }
    return PublicKey(point);
}

PublicKey PublicKey::from_base64url(std::string_view text) {
    try {
        return from_compressed(base64url_decode(text));
    } catch (const Error &e) {
        if (e.code() == "invalid-key") {
            throw;
        }
        throw Error("invalid-key", e.what());
    }
}

std::string PublicKey::to_base64url() const { return base64url_encode(point_); }

// KeyPair --------------------------------------------------------------------

KeyPair::~KeyPair() { OPENSSL_cleanse(scalar_.data(), scalar_.size()); }

KeyPair KeyPair::from_private_scalar(std::span<const std::uint8_t> scalar) {
    if (scalar.size() != kScalarSize) {
        throw Error("invalid-key", "private scalar must be 32 bytes");
    }
    auto d = bn_from(scalar);
    if (BN_is_zero(d.get()) || BN_cmp(d.get(), order()) >= 0) {
        throw Error("invalid-key", "private scalar out of range");
    }
    auto ctx = ctx_new();
    auto q = point_new();
    check(EC_POINT_mul(group(), q.get(), d.get(), nullptr, nullptr, ctx.get()), "EC_POINT_mul");
    Scalar s{};
    std::copy(scalar.begin(), scalar.end(), s.begin());
    return KeyPair(s, PublicKey(encode_point(q.get(), ctx.get())));
}

KeyPair generate_key_pair() {
    KeyPair::Scalar candidate{};
    for (;;) {
        rng::fill(candidate);
        try {
            auto kp = KeyPair::from_private_scalar(candidate);
            OPENSSL_cleanse(candidate.data(), candidate.size());
            return kp;
        } catch (const Error &e) {
            if (e.code() != "invalid-key") {
                throw;
            }
        }
    }
}

Json key_pair_to_json(const KeyPair &key) {
    return Json{{"curve", std::string(kCurveName)},
                {"d", base64url_encode(key.private_scalar())},
                {"x", key.public_key().to_base64url()}};
}

KeyPair key_pair_from_json(const Json &json) {
    try {
        if (json.at("curve").get<std::string>() != kCurveName) {
            throw Error("invalid-key", "unsupported curve");
        }
        auto scalar = base64url_decode(json.at("d").get<std::string>());
        auto kp = KeyPair::from_private_scalar(scalar);
        OPENSSL_cleanse(scalar.data(), scalar.size());
        if (json.contains("x") && json.at("x").get<std::string>() != kp.public_key().to_base64url()) {
            throw Error("invalid-key", "public key does not match private scalar");
        }
        return kp;
    } catch (const Json::exception &e) {
        throw Error("invalid-key", e.what());
    } catch (const Error &e) {
        if (e.code() == "invalid-key") {
            throw;
        }
        throw Error("invalid-key", e.what());
    }
}

// Signatures -----------------------------------------------------------------

std::array<std::uint8_t, kSignatureSize> sign_message(std::span<const std::uint8_t> message, const KeyPair &key) {
    const auto h1 = sha256(message);
    auto ctx = ctx_new();
    auto d = bn_from(key.private_scalar());
    auto e = bn_from(h1);
    DeterministicK gen(key.private_scalar(), h1);
    auto r = bn_new();
    auto s = bn_new();
    auto kinv = bn_new();
    auto tmp = bn_new();
    auto point = point_new();
    for (;;) {
        auto k = gen.next();
        check(EC_POINT_mul(group(), point.get(), k.get(), nullptr, nullptr, ctx.get()), "EC_POINT_mul");
        check(EC_POINT_get_affine_coordinates(group(), point.get(), r.get(), nullptr, ctx.get()), "affine");
        check(BN_nnmod(r.get(), r.get(), order(), ctx.get()), "BN_nnmod");
        if (BN_is_zero(r.get())) {
            continue;
        }
        // s = k^-1 (e + r d) mod n
        if (BN_mod_inverse(kinv.get(), k.get(), order(), ctx.get()) == nullptr) {
            throw Error("crypto-failure", "BN_mod_inverse");
        }
        check(BN_mod_mul(tmp.get(), r.get(), d.get(), order(), ctx.get()), "BN_mod_mul");
        check(BN_mod_add(tmp.get(), tmp.get(), e.get(), order(), ctx.get()), "BN_mod_add");
        check(BN_mod_mul(s.get(), kinv.get(), tmp.get(), order(), ctx.get()), "BN_mod_mul");
        if (BN_is_zero(s.get())) {
            continue;
        }
        break;
    }
    std::array<std::uint8_t, kSignatureSize> out{};
    const auto r_bytes = bn_to_32(r.get());
    const auto s_bytes = bn_to_32(s.get());
    std::copy(r_bytes.begin(), r_bytes.end(), out.begin());
    std::copy(s_bytes.begin(), s_bytes.end(), out.begin() + 32);
    return out;
}

bool verify_message(std::span<const std::uint8_t> message, std::span<const std::uint8_t> signature,
                    const PublicKey &key) {
    if (signature.size() != kSignatureSize) {
        return false;
    }
    std::unique_ptr<ECDSA_SIG, SigDeleter> sig(ECDSA_SIG_new());
    BIGNUM *r = BN_bin2bn(signature.data(), 32, nullptr);
    BIGNUM *s = BN_bin2bn(signature.data() + 32, 32, nullptr);
    if (!sig || !r || !s || ECDSA_SIG_set0(sig.get(), r, s) != 1) {
        BN_free(r);
        BN_free(s);
        throw Error("crypto-failure", "ECDSA_SIG_set0");
    }
    unsigned char *der = nullptr;
    const int der_len = i2d_ECDSA_SIG(sig.get(), &der);
    if (der_len <= 0) {
        throw Error("crypto-failure", "i2d_ECDSA_SIG");
    }
    std::unique_ptr<EVP_PKEY, PkeyDeleter> pkey;
    try {
        pkey = to_evp_public(key);
    } catch (...) {
        OPENSSL_free(der);
        throw;
    }
    std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> md(EVP_MD_CTX_new());
    bool ok = md && EVP_DigestVerifyInit(md.get(), nullptr, EVP_sha256(), nullptr, pkey.get()) == 1 &&
              EVP_DigestVerify(md.get(), der, static_cast<std::size_t>(der_len), message.data(), message.size()) == 1;
    OPENSSL_free(der);
    return ok;
}

// CompactToken ---------------------------------------------------------------

CompactToken::CompactToken(Json header, Json payload, Bytes signature)
    : header_(std::move(header)), payload_(std::move(payload)), signature_(std::move(signature)) {
    header_segment_ = base64url_encode(canonical_json(header_));
    payload_segment_ = base64url_encode(canonical_json(payload_));
}

CompactToken CompactToken::parse(std::string_view wire) {
    const auto first = wire.find('.');
    const auto second = first == std::string_view::npos ? first : wire.find('.', first + 1);
    if (first == std::string_view::npos || second == std::string_view::npos ||
        wire.find('.', second + 1) != std::string_view::npos) {
        throw Error("malformed-token", "expected three dot-separated segments");
    }
    CompactToken token;
    try {
        token.header_segment_ = std::string(wire.substr(0, first));
        token.payload_segment_ = std::string(wire.substr(first + 1, second - first - 1));
        token.header_ = Json::parse(to_string(base64url_decode(token.header_segment_)));
        token.payload_ = Json::parse(to_string(base64url_decode(token.payload_segment_)));
        token.signature_ = base64url_decode(wire.substr(second + 1));
    } catch (const Json::exception &e) {
        throw Error("malformed-token", e.what());
    } catch (const Error &e) {
        throw Error("malformed-token", e.what());
    }
    if (!token.header_.is_object() || !token.payload_.is_object()) {
        throw Error("malformed-token", "header and payload must be objects");
    }
    if (token.signature_.size() != kSignatureSize) {
        throw Error("malformed-token", "signature must be 64 bytes (r||s)");
    }
    return token;
}

std::string CompactToken::signing_input() const { return header_segment_ + "." + payload_segment_; }

std::string CompactToken::serialize() const { return signing_input() + "." + base64url_encode(signature_); }

CompactToken sign_token(const Json &claims, const Json &header_extras, const KeyPair &key) {
    if (!claims.is_object()) {
        throw Error("unserializable-claims", "claims must be a JSON object");
    }
    if (!header_extras.is_null() && !header_extras.is_object()) {
        throw Error("unserializable-claims", "header extras must be a JSON object");
    }
    Json header = header_extras.is_object() ? header_extras : Json::object();
    header["alg"] = std::string(kSignatureAlg);
    try {
        CompactToken unsigned_token(header, claims, {});
        const auto input = unsigned_token.signing_input();
        const auto sig = sign_message(to_bytes(input), key);
        return CompactToken(std::move(header), claims, Bytes(sig.begin(), sig.end()));
    } catch (const Json::exception &e) {
        throw Error("unserializable-claims", e.what());
    }
}

Json verify_token(const CompactToken &token, const PublicKey &key) {
    const auto alg = token.header().find("alg");
    if (alg == token.header().end() || !alg->is_string() || alg->get<std::string>() != kSignatureAlg) {
        throw Error("unsupported-algorithm", "expected alg ES256");
    }
    if (!verify_message(to_bytes(token.signing_input()), token.signature(), key)) {
        throw Error("bad-signature", "signature does not verify under the given key");
    }
    return token.payload();
}

// Envelope -------------------------------------------------------------------

Json EncryptedEnvelope::to_json() const {
    return Json{{"epk", ephemeral_public_key.to_base64url()},
                {"iv", base64url_encode(iv)},
                {"ciphertext", base64url_encode(ciphertext)},
                {"tag", base64url_encode(auth_tag)},
                {"kid", recipient_key_id}};
}

std::string EncryptedEnvelope::serialize() const { return canonical_json(to_json()); }

EncryptedEnvelope EncryptedEnvelope::from_json(const Json &json) {
    try {
        if (!json.is_object() || json.size() != 5) {
            throw Error("malformed-envelope", "expected exactly epk, iv, ciphertext, tag, kid");
        }
        const auto iv = base64url_decode(json.at("iv").get<std::string>());
        const auto tag = base64url_decode(json.at("tag").get<std::string>());
        if (iv.size() != kIvSize || tag.size() != kTagSize) {
            throw Error("malformed-envelope", "bad iv or tag length");
        }
        EncryptedEnvelope env{.ephemeral_public_key = PublicKey::from_base64url(json.at("epk").get<std::string>()),
                              .iv = {},
                              .ciphertext = base64url_decode(json.at("ciphertext").get<std::string>()),
                              .auth_tag = {},
                              .recipient_key_id = json.at("kid").get<std::string>()};
        std::copy(iv.begin(), iv.end(), env.iv.begin());
        std::copy(tag.begin(), tag.end(), env.auth_tag.begin());
        return env;
    } catch (const Json::exception &e) {
        throw Error("malformed-envelope", e.what());
    } catch (const Error &e) {
        if (e.code() == "malformed-envelope") {
            throw;
        }
        throw Error("malformed-envelope", e.what());
    }
}

EncryptedEnvelope EncryptedEnvelope::parse(std::string_view wire) {
    Json json;
    try {
        json = Json::parse(wire);
    } catch (const Json::exception &e) {
        throw Error("malformed-envelope", e.what());
    }
    return from_json(json);
}

EncryptedEnvelope ecdh_encrypt(std::span<const std::uint8_t> plaintext, const PublicKey &recipient,
                               std::string_view recipient_key_id) {
    const auto ephemeral = generate_key_pair();
    std::array<std::uint8_t, 32> shared{};
    try {
        shared = ecdh_shared_x(ephemeral.private_scalar(), recipient);
    } catch (const Error &e) {
        throw Error("invalid-recipient-key", e.what());
    }
    auto cek = concat_kdf(shared, recipient_key_id);
    OPENSSL_cleanse(shared.data(), shared.size());

    EncryptedEnvelope env{.ephemeral_public_key = ephemeral.public_key(),
                          .iv = {},
                          .ciphertext = Bytes(plaintext.size()),
                          .auth_tag = {},
                          .recipient_key_id = std::string(recipient_key_id)};
    rng::fill(env.iv);
    const auto aad = envelope_aad(env.ephemeral_public_key, recipient_key_id);

    std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter> c(EVP_CIPHER_CTX_new());
    int len = 0;
    bool ok = c && EVP_EncryptInit_ex(c.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) == 1 &&
              EVP_CIPHER_CTX_ctrl(c.get(), EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(kIvSize), nullptr) == 1 &&
              EVP_EncryptInit_ex(c.get(), nullptr, nullptr, cek.data(), env.iv.data()) == 1 &&
              EVP_EncryptUpdate(c.get(), nullptr, &len, reinterpret_cast<const unsigned char *>(aad.data()),
                                static_cast<int>(aad.size())) == 1 &&
              EVP_EncryptUpdate(c.get(), env.ciphertext.data(), &len, plaintext.data(),
                                static_cast<int>(plaintext.size())) == 1 &&
              EVP_EncryptFinal_ex(c.get(), env.ciphertext.data() + len, &len) == 1 &&
              EVP_CIPHER_CTX_ctrl(c.get(), EVP_CTRL_GCM_GET_TAG, static_cast<int>(kTagSize), env.auth_tag.data()) ==
                  1;
    OPENSSL_cleanse(cek.data(), cek.size());
    if (!ok) {
        throw Error("crypto-failure", "AES-256-GCM encryption failed");
    }
    return env;
}

Bytes ecdh_decrypt(const EncryptedEnvelope &envelope, const KeyPair &key) {
    std::array<std::uint8_t, 32> shared{};
    try {
        shared = ecdh_shared_x(key.private_scalar(), envelope.ephemeral_public_key);
    } catch (const Error &e) {
        throw Error("malformed-envelope", e.what());
    }
    auto cek = concat_kdf(shared, envelope.recipient_key_id);
    OPENSSL_cleanse(shared.data(), shared.size());
    const auto aad = envelope_aad(envelope.ephemeral_public_key, envelope.recipient_key_id);

    Bytes plaintext(envelope.ciphertext.size());
    auto tag = envelope.auth_tag;
    std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter> c(EVP_CIPHER_CTX_new());
    int len = 0;
    bool ok = c && EVP_DecryptInit_ex(c.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) == 1 &&
              EVP_CIPHER_CTX_ctrl(c.get(), EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(kIvSize), nullptr) == 1 &&
              EVP_DecryptInit_ex(c.get(), nullptr, nullptr, cek.data(), envelope.iv.data()) == 1 &&
              EVP_DecryptUpdate(c.get(), nullptr, &len, reinterpret_cast<const unsigned char *>(aad.data()),
                                static_cast<int>(aad.size())) == 1 &&
              EVP_DecryptUpdate(c.get(), plaintext.data(), &len, envelope.ciphertext.data(),
                                static_cast<int>(envelope.ciphertext.size())) == 1 &&
              EVP_CIPHER_CTX_ctrl(c.get(), EVP_CTRL_GCM_SET_TAG, static_cast<int>(kTagSize), tag.data()) == 1 &&
              EVP_DecryptFinal_ex(c.get(), plaintext.data() + len, &len) == 1;
    OPENSSL_cleanse(cek.data(), cek.size());
    if (!ok) {
        OPENSSL_cleanse(plaintext.data(), plaintext.size());
        throw Error("auth-failure", "envelope failed authentication");
    }
    return plaintext;
}

// Nonces ---------------------------------------------------------------------

Nonce generate_nonce(Timestamp now) { return Nonce(base64url_encode(rng::bytes(kNonceBytes)), now); }

std::string random_id(std::size_t bytes) { return base64url_encode(rng::bytes(bytes)); }

} // namespace resumevc::crypto
