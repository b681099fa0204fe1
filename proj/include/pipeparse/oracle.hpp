#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pipeparse/layout_gen.hpp"
#include "pipeparse/parser_model.hpp"
#include "pipeparse/phv.hpp"

namespace pipeparse {

// ---------------------------------------------------------------------------
// Reference sequential parser

struct ReferenceParse {
    std::vector<Phv> phvs;
    std::vector<std::string> trail;  // states whose header was fully extracted
    std::optional<ParseException> exception;
    std::size_t consumed_bits = 0;

    PacketResult to_result(std::uint32_t packet_id) const;
};

/// Walks the parse graph state by state over the raw bytes. `ids` supplies
/// header ids for the PHVs (missing names get 0).
ReferenceParse reference_parse(const ParseGraph& g, std::span<const std::uint8_t> packet,
                               const HeaderIds& ids = {}, std::uint32_t packet_id = 0);

/// Header ids of a compiled plan, keyed by state name.
HeaderIds plan_header_ids(const PipelinePlan& plan);

// ---------------------------------------------------------------------------
// Packet generation

struct HeaderChoice {
    std::string state;
    std::map<std::string, std::uint64_t> overrides;  // field name -> value

    friend bool operator==(const HeaderChoice&, const HeaderChoice&) = default;
};

struct PacketSpec {
    std::vector<HeaderChoice> header_sequence;  // root ... last header
    std::size_t payload_len_bytes = 0;
    /// The last header's key is set to a value that falls through to REJECT
    /// instead of leading to END.
    bool reject_last = false;

    friend bool operator==(const PacketSpec&, const PacketSpec&) = default;
};

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GeneratedPacket {
    std::vector<std::uint8_t> bytes;
    std::vector<std::size_t> header_offsets_bits;  // parallel to header_sequence
    std::vector<std::uint32_t> header_sizes_bits;
};

/// Deterministic in (spec, seed). Keys are chosen so the reference parser
/// follows spec.header_sequence; remaining fields and payload are random.
GeneratedPacket gen_packet_detailed(const ParseGraph& g, const PacketSpec& spec, std::uint64_t seed);
std::vector<std::uint8_t> gen_packet(const ParseGraph& g, const PacketSpec& spec, std::uint64_t seed);

/// Random root->END walk over the original graph.
PacketSpec random_packet_spec(const ParseGraph& g, std::mt19937_64& rng, std::size_t max_payload_bytes = 64);

enum class Mutation { None, Truncated, UnknownKey, BadSize };

std::string_view to_string(Mutation m);

struct CorpusPacket {
    std::vector<std::uint8_t> bytes;
    PacketSpec spec;
    Mutation mutation = Mutation::None;
};

struct CorpusOptions {
    std::size_t max_payload_bytes = 64;
    double truncate_rate = 0.1;
    double unknown_key_rate = 0.1;
    double bad_size_rate = 0.05;
};

/// Seeded random corpus with a share of malformed packets. Packet i depends
/// only on (seed, i).
std::vector<CorpusPacket> generate_corpus(const ParseGraph& g, std::size_t count, std::uint64_t seed,
                                          const CorpusOptions& options = {});

/// PacketSpec as JSON: {"headers":[{"state":..,"fields":{..}}],"payload_len":N,"reject_last":false}.
PacketSpec packet_spec_from_json(std::string_view text);
std::string packet_spec_to_json(const PacketSpec& spec);

// ---------------------------------------------------------------------------
// Classic pcap

class PcapError : public std::runtime_error {
public:
    PcapError(std::uint64_t offset, const std::string& message);
    std::uint64_t offset() const { return offset_; }

private:
    std::uint64_t offset_;
};

struct PcapRecord {
    std::vector<std::uint8_t> bytes;
    std::uint32_t ts_sec = 0;
    std::uint32_t ts_usec = 0;
    std::uint32_t orig_len = 0;
};

/// Streaming reader for classic (non-ng) pcap with Ethernet link type, in
/// either byte order.
class PcapReader {
public:
    explicit PcapReader(const std::string& path);
    std::optional<PcapRecord> next();
    bool swapped() const { return swapped_; }

private:
    std::uint32_t u32(const std::uint8_t* p) const;
    std::ifstream in_;
    std::uint64_t offset_ = 0;
    bool swapped_ = false;
};

std::vector<PcapRecord> read_pcap(const std::string& path);
void write_pcap(const std::string& path, const std::vector<PcapRecord>& records, bool swapped = false);

}  // namespace pipeparse
