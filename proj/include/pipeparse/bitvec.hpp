#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pipeparse {

/// Fixed-width bit vector in network order: bit 0 is the MSB of the first
/// byte. Shifting left moves bits toward bit 0 (earlier in the stream),
/// shifting right moves them toward the end. Bits shifted past either edge
/// are dropped.
class BitVec {
public:
    BitVec() = default;
    explicit BitVec(std::size_t width);

    static BitVec from_bytes(std::span<const std::uint8_t> bytes, std::size_t width);
    static BitVec from_hex(std::string_view hex, std::size_t width);

    std::size_t width() const { return width_; }
    bool empty() const { return width_ == 0; }

    bool bit(std::size_t pos) const;
    void set_bit(std::size_t pos, bool value);

    /// Reads `len` (<= 64) bits starting at `pos`, MSB-first. Bits past the
    /// end of the vector read as zero.
    std::uint64_t field(std::size_t pos, std::size_t len) const;
    void set_field(std::size_t pos, std::size_t len, std::uint64_t value);

    /// Copy of bits [pos, pos + len); bits past the end read as zero.
    BitVec slice(std::size_t pos, std::size_t len) const;

    /// Same bits, new width (truncates or zero-extends at the end).
    BitVec resized(std::size_t width) const;

    BitVec& operator<<=(std::size_t n);
    BitVec& operator>>=(std::size_t n);
    BitVec& operator|=(const BitVec& other);
    BitVec& operator&=(const BitVec& other);

    friend BitVec operator<<(BitVec v, std::size_t n) { return v <<= n; }
    friend BitVec operator>>(BitVec v, std::size_t n) { return v >>= n; }
    friend BitVec operator|(BitVec a, const BitVec& b) { return a |= b; }
    friend BitVec operator&(BitVec a, const BitVec& b) { return a &= b; }

    /// Writes `src` into this vector starting at bit `pos` (OR semantics).
    void deposit(const BitVec& src, std::size_t pos);

    bool any() const;

    /// ceil(width / 8) bytes; trailing pad bits are zero.
    std::vector<std::uint8_t> to_bytes() const;
    /// Lowercase hex of to_bytes(), no prefix.
    std::string to_hex() const;

    friend bool operator==(const BitVec&, const BitVec&) = default;

private:
    void clear_tail();

    std::size_t width_ = 0;
    // limb 0 holds bits 0..63, bit 0 at the limb's MSB
    std::vector<std::uint64_t> limbs_;
};

}  // namespace pipeparse
