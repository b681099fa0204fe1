#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "pipeparse/graph_transform.hpp"
#include "pipeparse/parser_model.hpp"

namespace pipeparse {

using HeaderId = std::uint32_t;

// Reserved ids. Real headers are numbered densely from 0.
inline constexpr HeaderId kEndId = 0xFF;
inline constexpr HeaderId kRejectId = 0xFE;
inline constexpr HeaderId kPendingId = 0xFD;  // next header not resolved yet
inline constexpr HeaderId kMaxHeaders = kPendingId;

class CompileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// name -> id for every state, plus END/REJECT.
using HeaderIds = std::map<std::string, HeaderId>;

/// Dense ids in topological (level, name) order.
HeaderIds assign_header_ids(const LeveledGraph& lg);

struct MatchEntry {
    std::uint64_t value = 0;
    HeaderId next = kRejectId;
    friend bool operator==(const MatchEntry&, const MatchEntry&) = default;
};

/// Precomputed shift amounts; replaces dynamic barrel shifters.
struct ShiftRom {
    /// ReceivedWords -> bit offset at which that bus word is deposited into
    /// the extraction accumulator.
    std::vector<std::uint32_t> extract_shifts;
    /// header size -> bits consumed from the head of the word holding the
    /// header boundary (size mod bus width).
    std::map<std::uint32_t, std::uint32_t> align_right;
    /// header size -> shift that brings the following word in behind the
    /// survivor bits, (bus width - align_right) mod bus width.
    std::map<std::uint32_t, std::uint32_t> align_left;

    friend bool operator==(const ShiftRom&, const ShiftRom&) = default;
};

struct HeaderLayout {
    std::string name;
    HeaderId this_header = 0;

    bool has_key = false;
    std::uint32_t key_location_bits = 0;
    std::uint32_t key_width_bits = 0;
    std::uint64_t key_mask = 0;
    std::uint32_t key_word_index = 0;
    std::vector<MatchEntry> match_table;
    HeaderId default_next = kRejectId;

    std::optional<std::uint32_t> fixed_size_bits;
    // variable headers only
    std::uint32_t size_field_offset_bits = 0;
    std::uint32_t size_field_width_bits = 0;
    std::uint32_t size_field_word_index = 0;
    std::optional<std::map<std::uint64_t, std::uint32_t>> size_lut;

    std::uint32_t max_size_bits = 0;
    bool last_header = false;
    ShiftRom roms;

    friend bool operator==(const HeaderLayout&, const HeaderLayout&) = default;
};

struct PipelinePlan {
    std::uint32_t bus_width_bits = 0;
    std::vector<std::vector<HeaderId>> levels;
    std::map<HeaderId, HeaderLayout> engines;
    std::set<std::size_t> mux_levels;
    std::uint32_t depth_cycles = 0;

    HeaderId root() const { return levels.at(0).at(0); }
    const HeaderLayout& engine(HeaderId id) const;
    std::string header_name(HeaderId id) const;
    std::optional<HeaderId> find_header(const std::string& name) const;

    friend bool operator==(const PipelinePlan&, const PipelinePlan&) = default;
};

/// Brute-force ROM contents: size -> (size mod bus, (bus - size mod bus) mod bus).
std::uint32_t align_right_amount(std::uint32_t size_bits, std::uint32_t bus_width);
std::uint32_t align_left_amount(std::uint32_t size_bits, std::uint32_t bus_width);

ShiftRom build_shift_roms(const HeaderTypeSpec& h, std::uint32_t bus_width);

HeaderLayout build_header_layout(const ParseGraph& g, const ParseState& state, const HeaderIds& ids,
                                 std::uint32_t bus_width);

PipelinePlan build_pipeline_plan(const ParseGraph& g, const LeveledGraph& lg, std::uint32_t bus_width);

/// load -> reduce -> level -> balance -> plan.
PipelinePlan compile_plan(const ParseGraph& g, std::uint32_t bus_width);

/// Structural checks for plans read from disk.
void validate_plan(const PipelinePlan& p);

std::string plan_to_json(const PipelinePlan& p);
PipelinePlan plan_from_json(std::string_view text);

struct PlanStats {
    std::uint32_t depth_cycles = 0;
    std::vector<std::size_t> engines_per_level;
    std::size_t engine_count = 0;
    std::size_t rom_entries = 0;
    std::size_t rom_bits = 0;
    std::size_t match_entries = 0;
    std::optional<double> clock_mhz;
    std::optional<double> throughput_gbps;
    std::optional<double> latency_ns;
};

PlanStats plan_stats(const PipelinePlan& p, std::optional<double> clock_mhz);
std::string format_stats(const PlanStats& s);

}  // namespace pipeparse
