#include "doctest.h"
#include "pipeparse/bitvec.hpp"

#include <random>
#include <vector>

using pipeparse::BitVec;

namespace {

// Naive model: one bool per bit, MSB first.
std::vector<bool> bools(const BitVec& v) {
    std::vector<bool> out(v.width());
    for (std::size_t i = 0; i < v.width(); ++i) out[i] = v.bit(i);
    return out;
}

}  // namespace

TEST_CASE("bytes map MSB first") {
    const std::vector<std::uint8_t> bytes{0x80, 0x01};
    const auto v = BitVec::from_bytes(bytes, 16);
    CHECK(v.bit(0));
    CHECK_FALSE(v.bit(1));
    CHECK(v.bit(15));
    CHECK(v.field(0, 16) == 0x8001);
    CHECK(v.to_hex() == "8001");
    CHECK(v.to_bytes() == bytes);
}

TEST_CASE("hex round trip and zero padding") {
    const auto v = BitVec::from_hex("86dd", 32);
    CHECK(v.to_hex() == "86dd0000");
    CHECK(v.field(0, 16) == 0x86dd);
    CHECK(BitVec::from_hex(v.to_hex(), 32) == v);
}

TEST_CASE("field and set_field across limb boundaries") {
    BitVec v(200);
    v.set_field(60, 16, 0xBEEF);
    CHECK(v.field(60, 16) == 0xBEEF);
    CHECK(v.field(56, 4) == 0);
    CHECK(v.field(76, 4) == 0);
    v.set_field(130, 64, 0x0123456789ABCDEFULL);
    CHECK(v.field(130, 64) == 0x0123456789ABCDEFULL);
}

TEST_CASE("shifts agree with a bool-vector model") {
    std::mt19937_64 rng(11);
    for (std::size_t width : {8u, 63u, 64u, 65u, 320u, 333u}) {
        BitVec v(width);
        for (std::size_t i = 0; i < width; ++i) v.set_bit(i, rng() & 1);
        const auto model = bools(v);
        for (std::size_t s : {0ul, 1ul, 7ul, 64ul, width / 2, width - 1, width, width + 5}) {
            const auto left = bools(v << s);
            const auto right = bools(v >> s);
            for (std::size_t i = 0; i < width; ++i) {
                REQUIRE(left[i] == (i + s < width ? model[i + s] : false));
                REQUIRE(right[i] == (i >= s ? model[i - s] : false));
            }
        }
    }
}

TEST_CASE("slice, resize and deposit") {
    auto v = BitVec::from_hex("0123456789abcdef", 64);
    CHECK(v.slice(8, 16).to_hex() == "2345");
    CHECK(v.resized(16).to_hex() == "0123");
    CHECK(v.resized(72).to_hex() == "0123456789abcdef00");

    BitVec acc(32);
    acc.deposit(BitVec::from_hex("ff", 8), 12);
    CHECK(acc.to_hex() == "000ff000");
    acc.deposit(BitVec::from_hex("ffff", 16), 24);  // clipped at the end
    CHECK(acc.to_hex() == "000ff0ff");
}

TEST_CASE("bitwise operators and any") {
    auto a = BitVec::from_hex("f0f0", 16);
    const auto b = BitVec::from_hex("0ff0", 16);
    CHECK_FALSE(BitVec(16).any());
    auto c = a;
    c |= b;
    CHECK(c.to_hex() == "fff0");
    a &= b;
    CHECK(a.to_hex() == "00f0");
}
