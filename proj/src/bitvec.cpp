#include "pipeparse/bitvec.hpp"

#include <algorithm>
#include <stdexcept>

namespace pipeparse {

namespace {

constexpr std::size_t kLimbBits = 64;

std::size_t limb_count(std::size_t width) { return (width + kLimbBits - 1) / kLimbBits; }

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

BitVec::BitVec(std::size_t width) : width_(width), limbs_(limb_count(width), 0) {}

BitVec BitVec::from_bytes(std::span<const std::uint8_t> bytes, std::size_t width) {
    BitVec v(width);
    const std::size_t n = std::min(bytes.size(), (width + 7) / 8);
    for (std::size_t i = 0; i < n; ++i) {
        v.limbs_[i / 8] |= std::uint64_t{bytes[i]} << (56 - 8 * (i % 8));
    }
    v.clear_tail();
    return v;
}

BitVec BitVec::from_hex(std::string_view hex, std::size_t width) {
    if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
    std::vector<std::uint8_t> bytes;
    bytes.reserve(hex.size() / 2 + 1);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        const int hi = hex_value(hex[i]);
        const int lo = i + 1 < hex.size() ? hex_value(hex[i + 1]) : 0;
        if (hi < 0 || lo < 0) throw std::invalid_argument("invalid hex digit");
        bytes.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
    }
    return from_bytes(bytes, width);
}

bool BitVec::bit(std::size_t pos) const {
    if (pos >= width_) return false;
    return (limbs_[pos / kLimbBits] >> (63 - pos % kLimbBits)) & 1U;
}

void BitVec::set_bit(std::size_t pos, bool value) {
    if (pos >= width_) throw std::out_of_range("BitVec::set_bit");
    const std::uint64_t m = std::uint64_t{1} << (63 - pos % kLimbBits);
    if (value) {
        limbs_[pos / kLimbBits] |= m;
    } else {
        limbs_[pos / kLimbBits] &= ~m;
    }
}

std::uint64_t BitVec::field(std::size_t pos, std::size_t len) const {
    if (len == 0) return 0;
    if (len > 64) throw std::invalid_argument("BitVec::field wider than 64 bits");
    // two-limb window, aligned so the field's first bit lands at the top
    const std::size_t li = pos / kLimbBits;
    const std::size_t off = pos % kLimbBits;
    const std::uint64_t hi = li < limbs_.size() ? limbs_[li] : 0;
    const std::uint64_t lo = li + 1 < limbs_.size() ? limbs_[li + 1] : 0;
    std::uint64_t top = off == 0 ? hi : (hi << off) | (lo >> (kLimbBits - off));
    if (pos >= width_) top = 0;
    // bits past width_ are kept zero by clear_tail()
    return top >> (kLimbBits - len);
}

void BitVec::set_field(std::size_t pos, std::size_t len, std::uint64_t value) {
    if (len > 64) throw std::invalid_argument("BitVec::set_field wider than 64 bits");
    if (pos + len > width_) throw std::out_of_range("BitVec::set_field");
    for (std::size_t i = 0; i < len; ++i) {
        set_bit(pos + i, (value >> (len - 1 - i)) & 1U);
    }
}

BitVec BitVec::slice(std::size_t pos, std::size_t len) const {
    BitVec out = *this << pos;
    return out.resized(len);
}

BitVec BitVec::resized(std::size_t width) const {
    BitVec out(width);
    const std::size_t n = std::min(out.limbs_.size(), limbs_.size());
    std::copy_n(limbs_.begin(), n, out.limbs_.begin());
    out.clear_tail();
    return out;
}

BitVec& BitVec::operator<<=(std::size_t n) {
    if (n >= width_) {
        std::fill(limbs_.begin(), limbs_.end(), 0);
        return *this;
    }
    const std::size_t whole = n / kLimbBits;
    const std::size_t part = n % kLimbBits;
    const std::size_t count = limbs_.size();
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t src = i + whole;
        const std::uint64_t a = src < count ? limbs_[src] : 0;
        const std::uint64_t b = src + 1 < count ? limbs_[src + 1] : 0;
        limbs_[i] = part == 0 ? a : (a << part) | (b >> (kLimbBits - part));
    }
    clear_tail();
    return *this;
}

BitVec& BitVec::operator>>=(std::size_t n) {
    if (n >= width_) {
        std::fill(limbs_.begin(), limbs_.end(), 0);
        return *this;
    }
    const std::size_t whole = n / kLimbBits;
    const std::size_t part = n % kLimbBits;
    for (std::size_t i = limbs_.size(); i-- > 0;) {
        const std::uint64_t a = i >= whole ? limbs_[i - whole] : 0;
        const std::uint64_t b = i >= whole + 1 ? limbs_[i - whole - 1] : 0;
        limbs_[i] = part == 0 ? a : (a >> part) | (b << (kLimbBits - part));
    }
    clear_tail();
    return *this;
}

BitVec& BitVec::operator|=(const BitVec& other) {
    const std::size_t n = std::min(limbs_.size(), other.limbs_.size());
    for (std::size_t i = 0; i < n; ++i) limbs_[i] |= other.limbs_[i];
    clear_tail();
    return *this;
}

BitVec& BitVec::operator&=(const BitVec& other) {
    for (std::size_t i = 0; i < limbs_.size(); ++i) {
        limbs_[i] &= i < other.limbs_.size() ? other.limbs_[i] : 0;
    }
    return *this;
}

void BitVec::deposit(const BitVec& src, std::size_t pos) {
    if (pos >= width_) return;
    BitVec placed = src.resized(width_);
    placed >>= pos;
    *this |= placed;
}

bool BitVec::any() const {
    return std::any_of(limbs_.begin(), limbs_.end(), [](std::uint64_t l) { return l != 0; });
}

std::vector<std::uint8_t> BitVec::to_bytes() const {
    std::vector<std::uint8_t> out((width_ + 7) / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(limbs_[i / 8] >> (56 - 8 * (i % 8)));
    }
    return out;
}

std::string BitVec::to_hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s;
    for (std::uint8_t b : to_bytes()) {
        s.push_back(kDigits[b >> 4]);
        s.push_back(kDigits[b & 0xF]);
    }
    return s;
}

void BitVec::clear_tail() {
    const std::size_t used = width_ % kLimbBits;
    if (used != 0 && !limbs_.empty()) {
        limbs_.back() &= ~std::uint64_t{0} << (kLimbBits - used);
    }
}

}  // namespace pipeparse
