#include "p256_oracle.hpp"

#include <gmpxx.h>

#include <optional>

namespace oracle {

namespace {

const mpz_class kP("ffffffff00000001000000000000000000000000ffffffffffffffffffffffff", 16);
const mpz_class kA = kP - 3;
const mpz_class kB("5ac635d8aa3a93e7b3ebbd55769886bc651d06b0cc53b0f63bce3c3e27d2604b", 16);
const mpz_class kGx("6b17d1f2e12c4247f8bce6e563a440f277037d812deb33a0f4a13945d898c296", 16);
const mpz_class kGy("4fe342e2fe1a7f9b8ee7eb4a7c0f9e162bce33576b315ececbb6406837bf51f5", 16);

struct Point {
    mpz_class x, y;
};

mpz_class mod(const mpz_class &v) {
    mpz_class r = v % kP;
    if (r < 0) {
        r += kP;
    }
    return r;
}

mpz_class inverse(const mpz_class &v) {
    mpz_class r;
    mpz_invert(r.get_mpz_t(), mod(v).get_mpz_t(), kP.get_mpz_t());
    return r;
}

std::optional<Point> add(const std::optional<Point> &p, const std::optional<Point> &q) {
    if (!p) {
        return q;
    }
    if (!q) {
        return p;
    }
    mpz_class lambda;
    if (p->x == q->x) {
        if (mod(p->y + q->y) == 0) {
            return std::nullopt;
        }
        lambda = mod((3 * p->x * p->x + kA) * inverse(2 * p->y));
    } else {
        lambda = mod((q->y - p->y) * inverse(q->x - p->x));
    }
    const mpz_class x = mod(lambda * lambda - p->x - q->x);
    const mpz_class y = mod(lambda * (p->x - x) - p->y);
    return Point{x, y};
}

mpz_class from_bytes(std::span<const std::uint8_t> bytes) {
    mpz_class v = 0;
    for (auto b : bytes) {
        v = v * 256 + b;
    }
    return v;
}

} // namespace

std::array<std::uint8_t, 33> p256_public_key(std::span<const std::uint8_t, 32> scalar) {
    mpz_class k = from_bytes(scalar);
    std::optional<Point> acc;
    std::optional<Point> addend = Point{kGx, kGy};
    while (k > 0) {
        if (mpz_odd_p(k.get_mpz_t())) {
            acc = add(acc, addend);
        }
        addend = add(addend, addend);
        k >>= 1;
    }
    std::array<std::uint8_t, 33> out{};
    if (!acc) {
        return out;
    }
    out[0] = mpz_odd_p(acc->y.get_mpz_t()) ? 0x03 : 0x02;
    mpz_class x = acc->x;
    for (int i = 32; i >= 1; --i) {
        out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(mpz_class(x & 0xff).get_ui());
        x >>= 8;
    }
    return out;
}

bool p256_on_curve(std::span<const std::uint8_t, 33> compressed) {
    if (compressed[0] != 0x02 && compressed[0] != 0x03) {
        return false;
    }
    const mpz_class x = from_bytes(compressed.subspan(1));
    if (x >= kP) {
        return false;
    }
    const mpz_class rhs = mod(x * x * x + kA * x + kB);
    // p = 3 mod 4, so a square root is rhs^((p+1)/4).
    mpz_class y;
    const mpz_class e = (kP + 1) / 4;
    mpz_powm(y.get_mpz_t(), rhs.get_mpz_t(), e.get_mpz_t(), kP.get_mpz_t());
    return mod(y * y) == rhs;
}

} // namespace oracle
