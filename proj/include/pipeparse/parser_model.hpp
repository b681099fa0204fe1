#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pipeparse {

/// Pseudo-state names. END marks successful completion of the parse and is a
/// graph node; REJECT is a transition outcome only.
inline constexpr std::string_view kEnd = "END";
inline constexpr std::string_view kReject = "REJECT";

struct FieldSpec {
    std::string name;
    std::uint32_t width_bits = 0;  // 0 only for a varbit remainder ("*")
    bool is_size_field = false;

    bool is_remainder() const { return width_bits == 0; }
    friend bool operator==(const FieldSpec&, const FieldSpec&) = default;
};

/// Header size in bits = multiplier * value(field) + addend.
struct SizeExpr {
    std::string field;
    std::int64_t multiplier = 1;
    std::int64_t addend = 0;

    std::int64_t evaluate(std::uint64_t value) const {
        return multiplier * static_cast<std::int64_t>(value) + addend;
    }
    friend bool operator==(const SizeExpr&, const SizeExpr&) = default;
};

struct HeaderTypeSpec {
    std::string name;
    std::vector<FieldSpec> fields;
    std::uint32_t max_size_bits = 0;
    std::optional<SizeExpr> size_expr;
    std::vector<std::uint64_t> valid_size_values;  // sorted, unique

    bool is_fixed() const { return !size_expr.has_value(); }
    std::uint32_t fixed_width_sum() const;
    /// Bit offset of a named field, if it sits at a fixed position.
    std::optional<std::uint32_t> field_offset(std::string_view field) const;
    std::optional<FieldSpec> find_field(std::string_view field) const;
    /// Every size this header can take, ascending.
    std::vector<std::uint32_t> valid_sizes() const;
    std::uint32_t min_size_bits() const;

    friend bool operator==(const HeaderTypeSpec&, const HeaderTypeSpec&) = default;
};

struct TransitionKeySpec {
    std::uint32_t offset_bits = 0;
    std::uint32_t width_bits = 0;
    friend bool operator==(const TransitionKeySpec&, const TransitionKeySpec&) = default;
};

struct TransitionEntry {
    std::uint64_t match_value = 0;
    std::string next_state;
    friend bool operator==(const TransitionEntry&, const TransitionEntry&) = default;
};

struct ParseState {
    std::string name;
    std::string header_type;
    std::optional<TransitionKeySpec> key;
    std::vector<TransitionEntry> transitions;
    std::string default_transition{kReject};

    bool is_terminal() const { return transitions.empty(); }
    /// Target for a key value: a matching entry, else the default.
    const std::string& next_for(std::uint64_t key_value) const;
    friend bool operator==(const ParseState&, const ParseState&) = default;
};

struct Edge {
    std::string from;
    std::string to;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};
using EdgeSet = std::set<Edge>;

/// Node set plus edges; what the graph algorithms operate on.
struct Topology {
    std::string root;
    std::set<std::string> nodes;  // always contains END
    EdgeSet edges;

    std::vector<std::string> successors(const std::string& node) const;
    std::vector<std::string> predecessors(const std::string& node) const;
    friend bool operator==(const Topology&, const Topology&) = default;
};

struct ParseGraph {
    std::map<std::string, HeaderTypeSpec> header_types;
    std::map<std::string, ParseState> states;
    std::string root;
    EdgeSet edges;

    const ParseState& state(const std::string& name) const;
    const HeaderTypeSpec& header_of(const std::string& state_name) const;
    Topology topology() const;
    friend bool operator==(const ParseGraph&, const ParseGraph&) = default;
};

/// Edges implied by the states' transitions and defaults (REJECT excluded).
EdgeSet derive_edges(const std::map<std::string, ParseState>& states);

enum class Severity { Warning, Error };

struct Diagnostic {
    Severity severity = Severity::Error;
    std::string code;     // "cycle", "unreachable", ...
    std::string path;     // JSON path or node name the diagnostic is about
    std::string message;
};

std::string to_string(const Diagnostic& d);

/// Input-spec problem. `path` is a JSON path such as
/// "$.parse_states[2].transitions[0].value".
class SpecError : public std::runtime_error {
public:
    SpecError(std::string path, const std::string& message);
    SpecError(std::vector<Diagnostic> diagnostics);
    const std::string& path() const { return path_; }
    const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

private:
    std::string path_;
    std::vector<Diagnostic> diagnostics_;
};

/// Checks every structural invariant of the IR; empty result iff valid.
std::vector<Diagnostic> validate_graph(const ParseGraph& g);

/// Parses and validates a parser-spec JSON document.
ParseGraph load_parser_spec(std::string_view json_text);
ParseGraph load_parser_spec_file(const std::string& path);

/// Inverse of load_parser_spec (pretty-printed, stable order).
std::string serialize_parser_spec(const ParseGraph& g);

}  // namespace pipeparse
