#include <gtest/gtest.h>

#include <random>

#include "resumevc/encoding.hpp"
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

TEST(Base64Url, Rfc4648Vectors) {
    const std::pair<std::string, std::string> cases[] = {
        {"", ""}, {"f", "Zg"}, {"fo", "Zm8"}, {"foo", "Zm9v"}, {"foob", "Zm9vYg"}, {"fooba", "Zm9vYmE"}, {"foobar", "Zm9vYmFy"}};
    for (const auto &[plain, encoded] : cases) {
        EXPECT_EQ(base64url_encode(plain), encoded);
        EXPECT_EQ(to_string(base64url_decode(encoded)), plain);
    }
    EXPECT_EQ(base64url_encode(Bytes{0xfb, 0xff}), "-_8");
}

TEST(Base64Url, StrictDecoderRejectsNonCanonicalInput) {
    for (const char *bad : {"Zg==", "Zm9v+", "Zm9v/", "Z", "Zh", "Zm9=", "Zm 9", "Zm9vY"}) {
        EXPECT_EQ(code_of([&] { base64url_decode(bad); }), "malformed-base64url") << bad;
    }
}

TEST(Base64Url, RandomRoundTrip) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 500; ++i) {
        Bytes data(rng() % 100);
        for (auto &b : data) {
            b = static_cast<std::uint8_t>(rng());
        }
        const auto text = base64url_encode(data);
        EXPECT_EQ(text.find('='), std::string::npos);
        EXPECT_EQ(base64url_decode(text), data);
    }
}

TEST(Base58, KnownVectors) {
    EXPECT_EQ(base58_encode(to_bytes("Hello World!")), "2NEpo7TZRRrLZSi2U");
    EXPECT_EQ(base58_encode(Bytes{0, 0, 1}), "112");
    EXPECT_EQ(base58_encode(Bytes{}), "");
    EXPECT_EQ(to_string(base58_decode("2NEpo7TZRRrLZSi2U")), "Hello World!");
    EXPECT_EQ(base58_decode("112"), (Bytes{0, 0, 1}));
}

TEST(Base58, RejectsOutsideAlphabet) {
    for (const char *bad : {"0abc", "Oabc", "Iabc", "labc", "ab+c"}) {
        EXPECT_FALSE(is_base58(bad)) << bad;
        EXPECT_EQ(code_of([&] { base58_decode(bad); }), "malformed-base58") << bad;
    }
}

TEST(Base58, RandomRoundTripWithLeadingZeros) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 300; ++i) {
        Bytes data(rng() % 4, 0);
        for (std::size_t n = rng() % 40; n > 0; --n) {
            data.push_back(static_cast<std::uint8_t>(rng()));
        }
        EXPECT_EQ(base58_decode(base58_encode(data)), data);
    }
}

TEST(Hex, RoundTrip) {
    EXPECT_EQ(hex_encode(Bytes{0x00, 0xab, 0xff}), "00abff");
    EXPECT_EQ(hex_decode("00abff"), (Bytes{0x00, 0xab, 0xff}));
}

TEST(CanonicalJson, SortsKeysCompactly) {
    const auto j = Json::parse(R"({"b":1,"a":{"d":[1,2],"c":"x"}})");
    EXPECT_EQ(canonical_json(j), R"({"a":{"c":"x","d":[1,2]},"b":1})");
}
