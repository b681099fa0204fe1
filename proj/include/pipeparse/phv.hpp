#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pipeparse/bitvec.hpp"
#include "pipeparse/layout_gen.hpp"

namespace pipeparse {

/// Parsed header vector entry: one extracted header of one packet.
struct Phv {
    HeaderId header_id = 0;
    std::string header;
    std::uint32_t packet_id = 0;
    BitVec bits;  // first bit_count bits of the header
    std::uint32_t bit_count = 0;
    bool valid = false;

    friend bool operator==(const Phv&, const Phv&) = default;
};

enum class ExceptionKind {
    Truncated,   // packet ended inside the header
    BadSize,     // size field value outside the header's valid set
    UnknownKey,  // key matched nothing and the default is REJECT
    Unparsed,    // packet left the pipeline with a header still pending
};

std::string_view to_string(ExceptionKind k);

struct ParseException {
    std::uint32_t packet_id = 0;
    ExceptionKind kind = ExceptionKind::Truncated;
    HeaderId header_id = 0;
    std::string header;

    friend bool operator==(const ParseException&, const ParseException&) = default;
};

/// Everything a parser produced for one packet. PHVs are ordered by
/// header_id, which follows pipeline level order.
struct PacketResult {
    std::uint32_t packet_id = 0;
    std::vector<Phv> phvs;
    std::optional<ParseException> exception;

    friend bool operator==(const PacketResult&, const PacketResult&) = default;
};

void sort_phvs(std::vector<Phv>& phvs);

/// One JSON object per line: PHVs as
/// {"packet_id","header","bits_hex","bit_count","valid"}, followed by
/// {"packet_id","exception","header"} when the packet raised one.
std::string to_jsonl(const PacketResult& r);
std::string to_jsonl(const std::vector<PacketResult>& results);

/// Human-readable dump used in divergence reports.
std::string describe(const PacketResult& r);

}  // namespace pipeparse
