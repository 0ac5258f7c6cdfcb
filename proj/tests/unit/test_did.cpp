#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "properties.hpp"
#include "resumevc/did.hpp"
#include "resumevc/error.hpp"

using namespace resumevc;

namespace {

std::string code_of(auto &&fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.code();
    }
    return "";
}

} // namespace

TEST(DidKey, Bijection) {
    const auto o = properties::did_key_bijection(1000, 4);
    EXPECT_TRUE(o.ok) << o.detail;
    EXPECT_EQ(o.cases, 1000u);
}

TEST(DidKey, MultibaseLayout) {
    const auto key = crypto::generate_key_pair();
    const auto mb = did::public_key_multibase(key.public_key());
    ASSERT_EQ(mb[0], 'z');
    const auto raw = base58_decode(mb.substr(1));
    ASSERT_EQ(raw.size(), 35u);
    EXPECT_EQ(raw[0], 0x80);
    EXPECT_EQ(raw[1], 0x24);
    EXPECT_TRUE(std::equal(raw.begin() + 2, raw.end(), key.public_key().point_bytes().begin()));
    const auto d = did::did_key_from_public_key(key.public_key());
    EXPECT_EQ(did::did_key_kid(d), d.str() + "#" + mb);
}

TEST(DidKey, ResolveRejectsBadIdentifiers) {
    EXPECT_EQ(code_of([] { did::resolve_did_key(did::new_ebsi_did()); }), "wrong-method");
    EXPECT_EQ(code_of([] { did::public_key_from_multibase("uAAAA"); }), "malformed-multibase");
    EXPECT_EQ(code_of([] { did::public_key_from_multibase("z" + base58_encode(Bytes{0xed, 0x01, 1, 2})); }),
              "malformed-multibase");
    Bytes off(35, 0);
    off[0] = 0x80;
    off[1] = 0x24;
    off[2] = 0x02;
    off[34] = 1;
    EXPECT_EQ(code_of([&] { did::public_key_from_multibase("z" + base58_encode(off)); }), "off-curve-point");
}

TEST(Did, ParseAndFormat) {
    const auto d = did::Did::parse("did:ebsi:zAbc");
    EXPECT_EQ(d.method(), did::Method::ebsi);
    EXPECT_EQ(d.method_specific_id(), "zAbc");
    EXPECT_EQ(d.str(), "did:ebsi:zAbc");
    for (const char *bad : {"", "did:", "did:web:example.com", "did:key:", "dad:key:z1", "did:ebsi:z0OIl"}) {
        EXPECT_EQ(code_of([&] { did::Did::parse(bad); }), "malformed-did") << bad;
    }
}

TEST(Did, EbsiIdentifiersAreRandomAndWellFormed) {
    const auto a = did::new_ebsi_did();
    const auto b = did::new_ebsi_did();
    EXPECT_NE(a, b);
    EXPECT_EQ(base58_decode(a.method_specific_id()).size(), 16u);
    EXPECT_EQ(did::Did::parse(a.str()), a);
}

TEST(DidDocument, JsonRoundTripAndLookup) {
    const auto id = did::new_ebsi_did();
    const auto k1 = crypto::generate_key_pair().public_key();
    const auto k2 = crypto::generate_key_pair().public_key();
    const auto doc = did::build_did_document(id, {{"key-1", k1}, {"enc-1", k2}}, 42);
    EXPECT_EQ(did::DidDocument::from_json(doc.to_json()), doc);
    EXPECT_EQ(doc.find_key("key-1"), k1);
    EXPECT_EQ(doc.find_key(id.str() + "#enc-1"), k2);
    EXPECT_FALSE(doc.find_key("key-9"));
    EXPECT_FALSE(doc.find_key("did:ebsi:zOther#key-1"));
    EXPECT_EQ(doc.to_json().at("verificationMethod").at(0).at("id"), id.str() + "#key-1");
}

TEST(DidDocument, BuildRejectsInvalidInput) {
    const auto key = crypto::generate_key_pair().public_key();
    EXPECT_EQ(code_of([&] { did::build_did_document(did::did_key_from_public_key(key), {{"key-1", key}}, 0); }),
              "wrong-method");
    EXPECT_EQ(code_of([&] { did::build_did_document(did::new_ebsi_did(), {}, 0); }), "empty-keys");
    EXPECT_EQ(code_of([&] { did::build_did_document(did::new_ebsi_did(), {{"k", key}, {"k", key}}, 0); }),
              "duplicate-key-id");
    EXPECT_EQ(code_of([] { did::DidDocument::from_json(Json{{"id", "did:ebsi:zA"}}); }), "invalid-document");
}
