#include "pipeparse/parser_model.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"

namespace pipeparse {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// IR helpers

std::uint32_t HeaderTypeSpec::fixed_width_sum() const {
    std::uint32_t sum = 0;
    for (const auto& f : fields) sum += f.width_bits;
    return sum;
}

std::optional<std::uint32_t> HeaderTypeSpec::field_offset(std::string_view field) const {
    std::uint32_t offset = 0;
    for (const auto& f : fields) {
        if (f.name == field) return offset;
        if (f.is_remainder()) return std::nullopt;
        offset += f.width_bits;
    }
    return std::nullopt;
}

std::optional<FieldSpec> HeaderTypeSpec::find_field(std::string_view field) const {
    for (const auto& f : fields) {
        if (f.name == field) return f;
    }
    return std::nullopt;
}

std::vector<std::uint32_t> HeaderTypeSpec::valid_sizes() const {
    if (!size_expr) return {max_size_bits};
    std::set<std::uint32_t> sizes;
    for (auto v : valid_size_values) {
        sizes.insert(static_cast<std::uint32_t>(size_expr->evaluate(v)));
    }
    return {sizes.begin(), sizes.end()};
}

std::uint32_t HeaderTypeSpec::min_size_bits() const {
    const auto sizes = valid_sizes();
    return sizes.empty() ? 0 : sizes.front();
}

const std::string& ParseState::next_for(std::uint64_t key_value) const {
    for (const auto& t : transitions) {
        if (t.match_value == key_value) return t.next_state;
    }
    return default_transition;
}

std::vector<std::string> Topology::successors(const std::string& node) const {
    std::vector<std::string> out;
    for (auto it = edges.lower_bound(Edge{node, ""}); it != edges.end() && it->from == node; ++it) {
        out.push_back(it->to);
    }
    return out;
}

std::vector<std::string> Topology::predecessors(const std::string& node) const {
    std::vector<std::string> out;
    for (const auto& e : edges) {
        if (e.to == node) out.push_back(e.from);
    }
    return out;
}

const ParseState& ParseGraph::state(const std::string& name) const {
    auto it = states.find(name);
    if (it == states.end()) throw std::out_of_range("unknown parse state '" + name + "'");
    return it->second;
}

const HeaderTypeSpec& ParseGraph::header_of(const std::string& state_name) const {
    const auto& s = state(state_name);
    auto it = header_types.find(s.header_type);
    if (it == header_types.end()) {
        throw std::out_of_range("unknown header type '" + s.header_type + "'");
    }
    return it->second;
}

Topology ParseGraph::topology() const {
    Topology t;
    t.root = root;
    for (const auto& [name, _] : states) t.nodes.insert(name);
    t.nodes.insert(std::string(kEnd));
    t.edges = edges;
    return t;
}

EdgeSet derive_edges(const std::map<std::string, ParseState>& states) {
    EdgeSet edges;
    for (const auto& [name, s] : states) {
        for (const auto& t : s.transitions) {
            if (t.next_state != kReject) edges.insert({name, t.next_state});
        }
        if (s.default_transition != kReject) edges.insert({name, s.default_transition});
    }
    return edges;
}

std::string to_string(const Diagnostic& d) {
    std::string out = d.severity == Severity::Error ? "error" : "warning";
    out += " [" + d.code + "]";
    if (!d.path.empty()) out += " " + d.path;
    out += ": " + d.message;
    return out;
}

namespace {

std::string join_messages(const std::vector<Diagnostic>& diags) {
    std::string out;
    for (const auto& d : diags) {
        if (!out.empty()) out += "\n";
        out += to_string(d);
    }
    return out;
}

}  // namespace

SpecError::SpecError(std::string path, const std::string& message)
    : std::runtime_error(path + ": " + message), path_(std::move(path)) {
    diagnostics_.push_back({Severity::Error, "schema", path_, message});
}

SpecError::SpecError(std::vector<Diagnostic> diagnostics)
    : std::runtime_error(join_messages(diagnostics)),
      path_(diagnostics.empty() ? "" : diagnostics.front().path),
      diagnostics_(std::move(diagnostics)) {}

// ---------------------------------------------------------------------------
// Validation

namespace {

bool fits(std::uint64_t value, std::uint32_t width) {
    return width >= 64 || value < (std::uint64_t{1} << width);
}

void check_header_type(const HeaderTypeSpec& h, std::vector<Diagnostic>& out) {
    const std::string where = "header_types." + h.name;
    auto error = [&](std::string code, std::string msg) {
        out.push_back({Severity::Error, std::move(code), where, std::move(msg)});
    };

    std::size_t size_fields = 0;
    for (std::size_t i = 0; i < h.fields.size(); ++i) {
        const auto& f = h.fields[i];
        if (f.is_remainder() && i + 1 != h.fields.size()) {
            error("field", "remainder field '" + f.name + "' must be last");
        }
        if (f.is_size_field) ++size_fields;
    }
    if (size_fields > 1) error("size_field", "more than one size field");
    if (h.max_size_bits == 0) error("size", "max_size_bits must be positive");
    if (h.fixed_width_sum() > h.max_size_bits) {
        error("size", "fixed field widths (" + std::to_string(h.fixed_width_sum()) +
                          ") exceed max_size_bits (" + std::to_string(h.max_size_bits) + ")");
    }

    if (!h.size_expr) {
        if (h.fixed_width_sum() != h.max_size_bits) {
            error("size", "fixed-size header must have max_size_bits equal to its field widths");
        }
        if (!h.fields.empty() && h.fields.back().is_remainder()) {
            error("size", "remainder field requires a size expression");
        }
        return;
    }

    const auto field = h.find_field(h.size_expr->field);
    const auto offset = h.field_offset(h.size_expr->field);
    if (!field || !offset || field->is_remainder()) {
        error("size_expr", "size field '" + h.size_expr->field + "' is not a fixed-position field");
        return;
    }
    if (field->width_bits > 64) error("size_expr", "size field wider than 64 bits");
    if (!field->is_size_field) error("size_expr", "size field is not flagged");
    if (h.valid_size_values.empty()) {
        error("size_expr", "variable-size header needs a non-empty valid_size_values set");
    }
    for (auto v : h.valid_size_values) {
        const auto size = h.size_expr->evaluate(v);
        if (!fits(v, field->width_bits)) {
            error("size_expr", "size value " + std::to_string(v) + " does not fit the size field");
        } else if (size <= 0 || size > static_cast<std::int64_t>(h.max_size_bits)) {
            error("size_expr", "size value " + std::to_string(v) + " gives " +
                                   std::to_string(size) + " bits, outside (0, max_size_bits]");
        } else if (size < static_cast<std::int64_t>(h.fixed_width_sum())) {
            error("size_expr", "size value " + std::to_string(v) +
                                   " gives a header shorter than its fixed fields");
        }
    }
    if (*offset + field->width_bits > h.min_size_bits()) {
        error("size_expr", "size field must lie within the smallest valid header");
    }
}

void check_state(const ParseGraph& g, const ParseState& s, std::vector<Diagnostic>& out) {
    const std::string where = "parse_states." + s.name;
    auto error = [&](std::string code, std::string msg) {
        out.push_back({Severity::Error, std::move(code), where, std::move(msg)});
    };
    auto resolves = [&](const std::string& target, bool allow_reject) {
        return target == kEnd || (allow_reject && target == kReject) || g.states.contains(target);
    };

    if (s.name == kEnd || s.name == kReject) error("name", "reserved state name");
    const auto ht = g.header_types.find(s.header_type);
    if (ht == g.header_types.end()) {
        error("header_type", "unknown header type '" + s.header_type + "'");
    }

    if (s.key) {
        if (s.key->width_bits == 0 || s.key->width_bits > 64) {
            error("key", "key width must be in 1..64 bits");
        }
        if (ht != g.header_types.end() &&
            s.key->offset_bits + s.key->width_bits > ht->second.min_size_bits()) {
            error("key", "key does not lie within the smallest valid '" + s.header_type + "' header");
        }
    } else if (!s.transitions.empty()) {
        error("key", "state has transitions but no key");
    }

    std::set<std::uint64_t> seen;
    for (const auto& t : s.transitions) {
        if (s.key && !fits(t.match_value, s.key->width_bits)) {
            error("transition", "match value " + std::to_string(t.match_value) +
                                    " does not fit key width " + std::to_string(s.key->width_bits));
        }
        if (!seen.insert(t.match_value).second) {
            error("transition", "duplicate match value " + std::to_string(t.match_value));
        }
        if (!resolves(t.next_state, true)) {
            error("transition", "unknown next state '" + t.next_state + "'");
        }
    }
    if (!resolves(s.default_transition, true)) {
        error("default", "unknown default state '" + s.default_transition + "'");
    }
    if (s.transitions.empty() && s.default_transition != kEnd && s.default_transition != kReject) {
        error("default", "state without transitions must default to END or REJECT");
    }
}

// Returns one cycle (as node list, first node repeated at the end) if any.
std::optional<std::vector<std::string>> find_cycle(const Topology& t) {
    enum class Mark { White, Grey, Black };
    std::map<std::string, Mark> mark;
    for (const auto& n : t.nodes) mark[n] = Mark::White;
    std::vector<std::string> stack;
    std::optional<std::vector<std::string>> cycle;

    std::function<bool(const std::string&)> visit = [&](const std::string& n) {
        mark[n] = Mark::Grey;
        stack.push_back(n);
        for (const auto& s : t.successors(n)) {
            if (mark[s] == Mark::Grey) {
                auto it = std::find(stack.begin(), stack.end(), s);
                cycle = std::vector<std::string>(it, stack.end());
                cycle->push_back(s);
                return true;
            }
            if (mark[s] == Mark::White && visit(s)) return true;
        }
        stack.pop_back();
        mark[n] = Mark::Black;
        return false;
    };
    for (const auto& n : t.nodes) {
        if (mark[n] == Mark::White && visit(n)) break;
    }
    return cycle;
}

std::set<std::string> reachable_from(const Topology& t, const std::string& start, bool forward) {
    std::set<std::string> seen{start};
    std::vector<std::string> work{start};
    while (!work.empty()) {
        const auto n = work.back();
        work.pop_back();
        for (const auto& m : forward ? t.successors(n) : t.predecessors(n)) {
            if (seen.insert(m).second) work.push_back(m);
        }
    }
    return seen;
}

}  // namespace

std::vector<Diagnostic> validate_graph(const ParseGraph& g) {
    std::vector<Diagnostic> out;
    for (const auto& [_, h] : g.header_types) check_header_type(h, out);
    for (const auto& [_, s] : g.states) check_state(g, s, out);

    if (!g.states.contains(g.root)) {
        out.push_back({Severity::Error, "root", "root", "root state '" + g.root + "' does not exist"});
        return out;
    }
    if (g.edges != derive_edges(g.states)) {
        out.push_back({Severity::Error, "edges", "edges",
                       "edge set does not match the states' transitions"});
    }

    Topology t = g.topology();
    // drop dangling edges before traversal
    std::erase_if(t.edges, [&](const Edge& e) {
        return !t.nodes.contains(e.from) || !t.nodes.contains(e.to);
    });

    if (auto cycle = find_cycle(t)) {
        std::string names;
        for (const auto& n : *cycle) names += (names.empty() ? "" : " -> ") + n;
        out.push_back({Severity::Error, "cycle", cycle->front(), "cycle detected: " + names});
        return out;
    }
    if (!t.predecessors(g.root).empty()) {
        out.push_back({Severity::Error, "root", g.root, "root state has incoming edges"});
    }
    const auto from_root = reachable_from(t, g.root, true);
    const auto to_end = reachable_from(t, std::string(kEnd), false);
    for (const auto& n : t.nodes) {
        if (!from_root.contains(n)) {
            out.push_back({Severity::Error, "unreachable", n, "unreachable state '" + n + "'"});
        } else if (!to_end.contains(n)) {
            out.push_back({Severity::Error, "dead_end", n, "END is not reachable from '" + n + "'"});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON ingestion

namespace {

class Reader {
public:
    const json& require(const json& obj, const std::string& path, const char* key) {
        if (!obj.is_object()) fail(path, "expected an object");
        auto it = obj.find(key);
        if (it == obj.end()) fail(path, std::string("missing required key '") + key + "'");
        return *it;
    }

    std::string string_at(const json& v, const std::string& path) {
        if (!v.is_string()) fail(path, "expected a string");
        return v.get<std::string>();
    }

    // Accepts a JSON integer or a "0x..." / decimal string.
    std::uint64_t uint_at(const json& v, const std::string& path) {
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer()) {
            if (v.get<std::int64_t>() < 0) fail(path, "expected a non-negative integer");
            return static_cast<std::uint64_t>(v.get<std::int64_t>());
        }
        if (v.is_string()) {
            const auto s = v.get<std::string>();
            try {
                std::size_t used = 0;
                const auto value = std::stoull(s, &used, 0);
                if (used == s.size() && !s.empty() && s.front() != '-') return value;
            } catch (const std::exception&) {
            }
        }
        fail(path, "expected a non-negative integer");
    }

    std::int64_t int_at(const json& v, const std::string& path) {
        if (!v.is_number_integer()) fail(path, "expected an integer");
        return v.get<std::int64_t>();
    }

    std::uint32_t u32_at(const json& v, const std::string& path) {
        const auto value = uint_at(v, path);
        if (value > 0xFFFFFFFFULL) fail(path, "value out of range");
        return static_cast<std::uint32_t>(value);
    }

    const json& array_at(const json& v, const std::string& path) {
        if (!v.is_array()) fail(path, "expected an array");
        return v;
    }

    [[noreturn]] void fail(const std::string& path, const std::string& msg) {
        throw SpecError(path, msg);
    }
};

HeaderTypeSpec read_header_type(Reader& r, const json& j, const std::string& path) {
    HeaderTypeSpec h;
    h.name = r.string_at(r.require(j, path, "name"), path + ".name");
    const auto& fields = r.array_at(r.require(j, path, "fields"), path + ".fields");
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const std::string fp = path + ".fields[" + std::to_string(i) + "]";
        FieldSpec f;
        f.name = r.string_at(r.require(fields[i], fp, "name"), fp + ".name");
        const auto& w = r.require(fields[i], fp, "width");
        if (w.is_string() && w.get<std::string>() == "*") {
            f.width_bits = 0;
        } else {
            f.width_bits = r.u32_at(w, fp + ".width");
            if (f.width_bits == 0) r.fail(fp + ".width", "field width must be positive");
        }
        h.fields.push_back(std::move(f));
    }

    if (auto it = j.find("size_expr"); it != j.end()) {
        const std::string sp = path + ".size_expr";
        const auto& e = *it;
        for (const auto& [k, _] : e.items()) {
            if (k != "field" && k != "mul" && k != "add") {
                r.fail(sp + "." + k, "unsupported size expression term; only field*mul+add is allowed");
            }
        }
        SizeExpr expr;
        expr.field = r.string_at(r.require(e, sp, "field"), sp + ".field");
        expr.multiplier = e.contains("mul") ? r.int_at(e["mul"], sp + ".mul") : 1;
        expr.addend = e.contains("add") ? r.int_at(e["add"], sp + ".add") : 0;
        bool found = false;
        for (auto& f : h.fields) {
            if (f.name == expr.field) {
                f.is_size_field = true;
                found = true;
            }
        }
        if (!found) r.fail(sp + ".field", "unknown field '" + expr.field + "'");
        h.size_expr = std::move(expr);

        const std::string vp = path + ".valid_size_values";
        const auto& values = r.array_at(r.require(j, path, "valid_size_values"), vp);
        std::set<std::uint64_t> uniq;
        for (std::size_t i = 0; i < values.size(); ++i) {
            uniq.insert(r.uint_at(values[i], vp + "[" + std::to_string(i) + "]"));
        }
        h.valid_size_values.assign(uniq.begin(), uniq.end());
    } else if (j.contains("valid_size_values")) {
        r.fail(path + ".valid_size_values", "valid_size_values given without size_expr");
    }

    if (auto it = j.find("max_size_bits"); it != j.end()) {
        h.max_size_bits = r.u32_at(*it, path + ".max_size_bits");
    } else if (!h.size_expr) {
        h.max_size_bits = h.fixed_width_sum();
    } else {
        r.fail(path, "variable-size header requires max_size_bits");
    }
    return h;
}

ParseState read_state(Reader& r, const json& j, const std::string& path) {
    ParseState s;
    s.name = r.string_at(r.require(j, path, "name"), path + ".name");
    s.header_type = r.string_at(r.require(j, path, "header_type"), path + ".header_type");
    if (auto it = j.find("key"); it != j.end()) {
        const std::string kp = path + ".key";
        s.key = TransitionKeySpec{r.u32_at(r.require(*it, kp, "offset"), kp + ".offset"),
                                  r.u32_at(r.require(*it, kp, "width"), kp + ".width")};
    }
    if (auto it = j.find("transitions"); it != j.end()) {
        const std::string tp = path + ".transitions";
        const auto& ts = r.array_at(*it, tp);
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const std::string ep = tp + "[" + std::to_string(i) + "]";
            TransitionEntry e;
            e.match_value = r.uint_at(r.require(ts[i], ep, "value"), ep + ".value");
            e.next_state = r.string_at(r.require(ts[i], ep, "next"), ep + ".next");
            if (s.key && !fits(e.match_value, s.key->width_bits)) {
                r.fail(ep + ".value", "match value does not fit the key width");
            }
            s.transitions.push_back(std::move(e));
        }
    }
    if (auto it = j.find("default"); it != j.end()) {
        s.default_transition = r.string_at(*it, path + ".default");
    }
    return s;
}

}  // namespace

ParseGraph load_parser_spec(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw SpecError("$", std::string("malformed JSON: ") + e.what());
    }

    Reader r;
    ParseGraph g;
    const auto& types = r.array_at(r.require(doc, "$", "header_types"), "$.header_types");
    for (std::size_t i = 0; i < types.size(); ++i) {
        const std::string path = "$.header_types[" + std::to_string(i) + "]";
        auto h = read_header_type(r, types[i], path);
        if (g.header_types.contains(h.name)) r.fail(path + ".name", "duplicate header type '" + h.name + "'");
        g.header_types.emplace(h.name, std::move(h));
    }
    const auto& states = r.array_at(r.require(doc, "$", "parse_states"), "$.parse_states");
    for (std::size_t i = 0; i < states.size(); ++i) {
        const std::string path = "$.parse_states[" + std::to_string(i) + "]";
        auto s = read_state(r, states[i], path);
        if (g.states.contains(s.name)) r.fail(path + ".name", "duplicate state '" + s.name + "'");
        if (!g.header_types.contains(s.header_type)) {
            r.fail(path + ".header_type", "unknown header type '" + s.header_type + "'");
        }
        g.states.emplace(s.name, std::move(s));
    }
    g.root = r.string_at(r.require(doc, "$", "root"), "$.root");
    g.edges = derive_edges(g.states);

    auto diags = validate_graph(g);
    std::erase_if(diags, [](const Diagnostic& d) { return d.severity != Severity::Error; });
    if (!diags.empty()) throw SpecError(std::move(diags));
    return g;
}

ParseGraph load_parser_spec_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError("$", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_parser_spec(ss.str());
}

std::string serialize_parser_spec(const ParseGraph& g) {
    ordered_json doc;
    doc["header_types"] = ordered_json::array();
    for (const auto& [name, h] : g.header_types) {
        ordered_json jh;
        jh["name"] = name;
        jh["fields"] = ordered_json::array();
        for (const auto& f : h.fields) {
            ordered_json jf;
            jf["name"] = f.name;
            if (f.is_remainder()) {
                jf["width"] = "*";
            } else {
                jf["width"] = f.width_bits;
            }
            jh["fields"].push_back(std::move(jf));
        }
        jh["max_size_bits"] = h.max_size_bits;
        if (h.size_expr) {
            jh["size_expr"] = {{"field", h.size_expr->field},
                               {"mul", h.size_expr->multiplier},
                               {"add", h.size_expr->addend}};
            jh["valid_size_values"] = h.valid_size_values;
        }
        doc["header_types"].push_back(std::move(jh));
    }
    doc["parse_states"] = ordered_json::array();
    for (const auto& [name, s] : g.states) {
        ordered_json js;
        js["name"] = name;
        js["header_type"] = s.header_type;
        if (s.key) js["key"] = {{"offset", s.key->offset_bits}, {"width", s.key->width_bits}};
        js["transitions"] = ordered_json::array();
        for (const auto& t : s.transitions) {
            js["transitions"].push_back({{"value", t.match_value}, {"next", t.next_state}});
        }
        js["default"] = s.default_transition;
        doc["parse_states"].push_back(std::move(js));
    }
    doc["root"] = g.root;
    return doc.dump(2) + "\n";
}

}  // namespace pipeparse
