#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pipeparse/bitvec.hpp"
#include "pipeparse/layout_gen.hpp"
#include "pipeparse/phv.hpp"

namespace pipeparse {

/// One clock's worth of the packet stream plus metadata. `valid` is false
/// for slots that carry no packet data (bits already consumed by an
/// upstream header, or the empty tail after the last data word).
struct BusWord {
    BitVec data;
    bool start = false;
    bool end = false;
    bool valid = false;
    std::uint32_t packet_id = 0;
    std::uint32_t valid_bits = 0;
    HeaderId next_header = kPendingId;  // NHeader travelling with the data

    friend bool operator==(const BusWord&, const BusWord&) = default;
};

/// Splits a packet into bus words (word 0 = bytes 0..bus/8-1), zero-padding
/// the last one.
std::vector<BusWord> segment_packet(std::span<const std::uint8_t> bytes, std::uint32_t packet_id,
                                    std::uint32_t bus_width);

/// Registers and counters of one header engine.
struct EngineState {
    // per-packet, cleared on packet start
    std::uint32_t received_bits = 0;
    std::uint32_t received_words = 0;
    BitVec phv_accum;
    std::optional<std::uint32_t> header_size_latched;
    HeaderId next_header = kPendingId;
    bool key_resolved = false;
    bool key_exception = false;
    bool header_valid = false;  // this engine owns the current packet
    bool done = false;
    bool failed = false;

    // alignment pipeline register and what was decided about it
    std::optional<BusWord> delay_reg;
    bool delay_owned = false;
    std::uint32_t delay_index = 0;

    void reset_packet();
    /// NHeader driven on this engine's output slots.
    HeaderId next_header_out() const;
};

struct TransitionOutput {
    HeaderId next_header_out = kPendingId;
    bool next_header_valid = false;
    bool header_exception = false;
    bool valid_header = false;
};

/// Key match: compares NHeader with this header, pulls the key out of its
/// bus word with a shift and mask, and looks it up in the match table.
TransitionOutput state_transition_step(const HeaderLayout& layout, std::uint32_t bus_width, EngineState& st,
                                       const BusWord& w, HeaderId next_header_in);

struct ExtractionOutput {
    bool header_done = false;  // completed on this word
    std::optional<std::uint32_t> header_size;
    std::optional<std::uint64_t> header_size_field;
    bool size_exception = false;
};

/// Accumulates the header into the PHV register and resolves its size.
ExtractionOutput header_extraction_step(const HeaderLayout& layout, std::uint32_t bus_width, EngineState& st,
                                        const BusWord& w, bool valid_header);

struct AlignmentOutput {
    std::optional<BusWord> word;
    bool driven = false;  // false: bypass of the delayed word
};

/// Emits the delayed word with this header's bits removed, pulling the head
/// of `w` in behind it. Loads `w` into the delay register.
AlignmentOutput pipeline_alignment_step(const HeaderLayout& layout, std::uint32_t bus_width, EngineState& st,
                                        const std::optional<BusWord>& w);

class ProtocolError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct TraceRow {
    std::uint64_t cycle = 0;
    std::size_t level = 0;
    std::string engine;
    bool valid_header = false;
    HeaderId next_header = kPendingId;
    bool done = false;
};

std::string trace_csv(const std::vector<TraceRow>& rows, const PipelinePlan& plan);

struct ClockResult {
    std::optional<BusWord> out;
    std::vector<Phv> phvs;
    std::vector<ParseException> exceptions;
};

/// Cycle-accurate model of a compiled plan. Not thread-safe; use one
/// instance per worker over a shared plan.
class PipelineInstance {
public:
    explicit PipelineInstance(const PipelinePlan& plan);

    /// Advances one clock. `in` is the bus word presented this cycle.
    ClockResult clock(std::optional<BusWord> in);

    void enable_trace(bool on) { tracing_ = on; }
    std::vector<TraceRow> take_trace();

    std::uint64_t cycle() const { return cycle_; }
    const PipelinePlan& plan() const { return *plan_; }

    /// Convenience: feeds one packet, drains, and returns its PHVs sorted by
    /// header id. The pipeline must be idle.
    PacketResult parse_packet(std::span<const std::uint8_t> bytes, std::uint32_t packet_id = 0);

private:
    struct Engine {
        const HeaderLayout* layout;
        EngineState state;
    };
    struct Level {
        std::vector<Engine> engines;
    };

    std::optional<BusWord> clock_level(std::size_t index, const std::optional<BusWord>& in, ClockResult& result);

    const PipelinePlan* plan_;
    std::vector<Level> levels_;
    std::optional<BusWord> output_reg_;
    std::uint64_t cycle_ = 0;
    bool in_packet_ = false;
    bool tracing_ = false;
    std::vector<TraceRow> trace_;
};

struct PacketTiming {
    std::uint32_t packet_id = 0;
    std::uint64_t first_in_cycle = 0;
    std::uint64_t first_out_cycle = 0;
    std::uint64_t latency() const { return first_out_cycle - first_in_cycle; }
};

struct SimulationRun {
    std::vector<PacketResult> results;  // input order
    std::vector<PacketTiming> timing;
    std::uint64_t cycles_total = 0;
    std::uint64_t words_total = 0;
    std::vector<TraceRow> trace;
};

/// Streams packets back to back (one word per cycle, no gaps) and clocks
/// until the last word leaves the pipeline.
SimulationRun simulate_packets(const PipelinePlan& plan, const std::vector<std::vector<std::uint8_t>>& packets,
                               bool trace = false, std::uint32_t first_packet_id = 0);

}  // namespace pipeparse
