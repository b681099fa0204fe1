#include "pipeparse/layout_gen.hpp"

#include <algorithm>
#include <bit>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace pipeparse {

using ordered_json = nlohmann::ordered_json;

const HeaderLayout& PipelinePlan::engine(HeaderId id) const {
    auto it = engines.find(id);
    if (it == engines.end()) throw std::out_of_range("no engine for header id " + std::to_string(id));
    return it->second;
}

std::string PipelinePlan::header_name(HeaderId id) const {
    if (id == kEndId) return std::string(kEnd);
    if (id == kRejectId) return std::string(kReject);
    if (id == kPendingId) return "PENDING";
    auto it = engines.find(id);
    return it == engines.end() ? "#" + std::to_string(id) : it->second.name;
}

std::optional<HeaderId> PipelinePlan::find_header(const std::string& name) const {
    for (const auto& [id, e] : engines) {
        if (e.name == name) return id;
    }
    return std::nullopt;
}

HeaderIds assign_header_ids(const LeveledGraph& lg) {
    HeaderIds ids;
    HeaderId next = 0;
    for (const auto& level : lg.levels()) {
        for (const auto& n : level) {
            if (n == kEnd) continue;
            if (next >= kMaxHeaders) throw CompileError("too many parse states");
            ids[n] = next++;
        }
    }
    ids[std::string(kEnd)] = kEndId;
    ids[std::string(kReject)] = kRejectId;
    return ids;
}

std::uint32_t align_right_amount(std::uint32_t size_bits, std::uint32_t bus_width) {
    return size_bits % bus_width;
}

std::uint32_t align_left_amount(std::uint32_t size_bits, std::uint32_t bus_width) {
    return (bus_width - size_bits % bus_width) % bus_width;
}

ShiftRom build_shift_roms(const HeaderTypeSpec& h, std::uint32_t bus_width) {
    if (bus_width == 0) throw CompileError("bus width must be positive");
    const auto sizes = h.valid_sizes();
    if (sizes.empty()) throw CompileError("header '" + h.name + "' has no enumerable size");

    ShiftRom rom;
    const std::uint32_t words = (h.max_size_bits + bus_width - 1) / bus_width;
    for (std::uint32_t k = 0; k < words; ++k) rom.extract_shifts.push_back(k * bus_width);
    for (auto s : sizes) {
        rom.align_right[s] = align_right_amount(s, bus_width);
        rom.align_left[s] = align_left_amount(s, bus_width);
    }
    return rom;
}

HeaderLayout build_header_layout(const ParseGraph& g, const ParseState& state, const HeaderIds& ids,
                                 std::uint32_t bus_width) {
    const auto& h = g.header_of(state.name);
    auto id_of = [&](const std::string& name) {
        auto it = ids.find(name);
        if (it == ids.end()) throw CompileError("no header id for '" + name + "'");
        return it->second;
    };

    HeaderLayout l;
    l.name = state.name;
    l.this_header = id_of(state.name);
    l.max_size_bits = h.max_size_bits;
    l.last_header = state.is_terminal();
    l.default_next = id_of(state.default_transition);

    if (state.key) {
        const auto& k = *state.key;
        if (k.offset_bits % bus_width + k.width_bits > bus_width) {
            throw CompileError("key of state '" + state.name + "' (bits " +
                               std::to_string(k.offset_bits) + ".." +
                               std::to_string(k.offset_bits + k.width_bits - 1) +
                               ") straddles a " + std::to_string(bus_width) +
                               "-bit bus word boundary; use a wider bus or split the key");
        }
        l.has_key = true;
        l.key_location_bits = k.offset_bits;
        l.key_width_bits = k.width_bits;
        l.key_mask = k.width_bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << k.width_bits) - 1;
        l.key_word_index = k.offset_bits / bus_width;
        for (const auto& t : state.transitions) l.match_table.push_back({t.match_value, id_of(t.next_state)});
    }

    if (h.is_fixed()) {
        l.fixed_size_bits = h.max_size_bits;
    } else {
        const auto field = *h.find_field(h.size_expr->field);
        const auto offset = *h.field_offset(h.size_expr->field);
        if (offset % bus_width + field.width_bits > bus_width) {
            throw CompileError("size field of header '" + h.name +
                               "' straddles a bus word boundary; use a wider bus");
        }
        l.size_field_offset_bits = offset;
        l.size_field_width_bits = field.width_bits;
        l.size_field_word_index = offset / bus_width;
        std::map<std::uint64_t, std::uint32_t> lut;
        for (auto v : h.valid_size_values) lut[v] = static_cast<std::uint32_t>(h.size_expr->evaluate(v));
        l.size_lut = std::move(lut);
    }
    l.roms = build_shift_roms(h, bus_width);
    return l;
}

PipelinePlan build_pipeline_plan(const ParseGraph& g, const LeveledGraph& lg, std::uint32_t bus_width) {
    if (bus_width == 0 || bus_width % 8 != 0) {
        throw CompileError("bus width must be a positive multiple of 8");
    }
    const auto ids = assign_header_ids(lg);

    PipelinePlan p;
    p.bus_width_bits = bus_width;
    for (const auto& level : lg.levels()) {
        std::vector<HeaderId> engines;
        for (const auto& n : level) {
            if (n == kEnd) continue;
            engines.push_back(ids.at(n));
            p.engines.emplace(ids.at(n), build_header_layout(g, g.state(n), ids, bus_width));
        }
        if (engines.empty()) continue;
        if (engines.size() > 1) p.mux_levels.insert(p.levels.size());
        p.levels.push_back(std::move(engines));
    }
    // one register per level plus the output register after the final mux
    p.depth_cycles = static_cast<std::uint32_t>(p.levels.size()) + 1;
    return p;
}

PipelinePlan compile_plan(const ParseGraph& g, std::uint32_t bus_width) {
    return build_pipeline_plan(g, balanced_pipeline_graph(g), bus_width);
}

void validate_plan(const PipelinePlan& p) {
    auto fail = [](const std::string& msg) { throw CompileError("invalid plan: " + msg); };
    if (p.bus_width_bits == 0 || p.bus_width_bits % 8 != 0) fail("bus_width must be a positive multiple of 8");
    if (p.levels.empty() || p.levels.front().size() != 1) fail("level 0 must hold exactly the root engine");
    if (p.depth_cycles != p.levels.size() + 1) fail("depth_cycles must equal levels + 1");

    std::set<HeaderId> placed;
    for (std::size_t i = 0; i < p.levels.size(); ++i) {
        if (p.levels[i].empty()) fail("empty level " + std::to_string(i));
        if ((p.levels[i].size() > 1) != p.mux_levels.contains(i)) fail("mux_levels disagree with levels");
        for (auto id : p.levels[i]) {
            if (!placed.insert(id).second) fail("engine " + std::to_string(id) + " placed twice");
            if (!p.engines.contains(id)) fail("level references unknown engine " + std::to_string(id));
        }
    }
    if (placed.size() != p.engines.size()) fail("engine not placed in any level");

    auto known = [&](HeaderId id) { return id == kEndId || id == kRejectId || p.engines.contains(id); };
    for (const auto& [id, e] : p.engines) {
        const std::string where = "engine '" + e.name + "': ";
        if (e.this_header != id) fail(where + "this_header disagrees with its key");
        if (e.fixed_size_bits.has_value() == e.size_lut.has_value()) {
            fail(where + "exactly one of fixed_size_bits and size_lut must be present");
        }
        if (!known(e.default_next)) fail(where + "unknown default_next");
        for (const auto& m : e.match_table) {
            if (!known(m.next)) fail(where + "match table targets unknown header");
        }
        if (e.has_key && (e.key_location_bits % p.bus_width_bits + e.key_width_bits > p.bus_width_bits ||
                          e.key_word_index != e.key_location_bits / p.bus_width_bits ||
                          e.key_width_bits == 0 || e.key_width_bits > 64)) {
            fail(where + "key placement inconsistent with the bus width");
        }
        const std::size_t words = (e.max_size_bits + p.bus_width_bits - 1) / p.bus_width_bits;
        if (e.roms.extract_shifts.size() != words) fail(where + "extract_shifts has the wrong length");
        std::vector<std::uint32_t> sizes;
        if (e.fixed_size_bits) {
            sizes.push_back(*e.fixed_size_bits);
        } else {
            for (const auto& [_, s] : *e.size_lut) sizes.push_back(s);
        }
        for (auto s : sizes) {
            if (s == 0 || s > e.max_size_bits) fail(where + "header size outside (0, max_size_bits]");
            if (!e.roms.align_right.contains(s) || !e.roms.align_left.contains(s)) {
                fail(where + "alignment ROM lacks size " + std::to_string(s));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// JSON

namespace {

ordered_json size_map_json(const std::map<std::uint32_t, std::uint32_t>& m) {
    ordered_json j = ordered_json::object();
    for (const auto& [k, v] : m) j[std::to_string(k)] = v;
    return j;
}

ordered_json layout_json(const HeaderLayout& l) {
    ordered_json j;
    j["name"] = l.name;
    j["this_header"] = l.this_header;
    if (l.has_key) {
        j["key"] = {{"location_bits", l.key_location_bits},
                    {"width_bits", l.key_width_bits},
                    {"mask", l.key_mask},
                    {"word_index", l.key_word_index}};
    }
    j["match_table"] = ordered_json::array();
    for (const auto& m : l.match_table) j["match_table"].push_back({{"value", m.value}, {"next", m.next}});
    j["default_next"] = l.default_next;
    if (l.fixed_size_bits) {
        j["fixed_size_bits"] = *l.fixed_size_bits;
    } else {
        j["size_field"] = {{"offset_bits", l.size_field_offset_bits},
                           {"width_bits", l.size_field_width_bits},
                           {"word_index", l.size_field_word_index}};
        ordered_json lut = ordered_json::object();
        for (const auto& [v, s] : *l.size_lut) lut[std::to_string(v)] = s;
        j["size_lut"] = std::move(lut);
    }
    j["max_size_bits"] = l.max_size_bits;
    j["last_header"] = l.last_header;
    j["roms"] = {{"extract_shifts", l.roms.extract_shifts},
                 {"align_right", size_map_json(l.roms.align_right)},
                 {"align_left", size_map_json(l.roms.align_left)}};
    return j;
}

template <typename J>
const J& at(const J& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw CompileError(std::string("plan JSON: missing key '") + key + "'");
    return *it;
}

std::uint64_t parse_key(const std::string& s) {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used, 10);
    if (used != s.size()) throw CompileError("plan JSON: bad numeric key '" + s + "'");
    return v;
}

template <typename J>
std::map<std::uint32_t, std::uint32_t> size_map_from(const J& j) {
    std::map<std::uint32_t, std::uint32_t> m;
    for (const auto& [k, v] : j.items()) m[static_cast<std::uint32_t>(parse_key(k))] = v.template get<std::uint32_t>();
    return m;
}

template <typename J>
HeaderLayout layout_from(const J& j) {
    HeaderLayout l;
    l.name = at(j, "name").template get<std::string>();
    l.this_header = at(j, "this_header").template get<HeaderId>();
    if (auto it = j.find("key"); it != j.end()) {
        l.has_key = true;
        l.key_location_bits = at(*it, "location_bits").template get<std::uint32_t>();
        l.key_width_bits = at(*it, "width_bits").template get<std::uint32_t>();
        l.key_mask = at(*it, "mask").template get<std::uint64_t>();
        l.key_word_index = at(*it, "word_index").template get<std::uint32_t>();
    }
    for (const auto& m : at(j, "match_table")) {
        l.match_table.push_back({at(m, "value").template get<std::uint64_t>(), at(m, "next").template get<HeaderId>()});
    }
    l.default_next = at(j, "default_next").template get<HeaderId>();
    if (auto it = j.find("fixed_size_bits"); it != j.end()) {
        l.fixed_size_bits = it->template get<std::uint32_t>();
    }
    if (auto it = j.find("size_field"); it != j.end()) {
        l.size_field_offset_bits = at(*it, "offset_bits").template get<std::uint32_t>();
        l.size_field_width_bits = at(*it, "width_bits").template get<std::uint32_t>();
        l.size_field_word_index = at(*it, "word_index").template get<std::uint32_t>();
    }
    if (auto it = j.find("size_lut"); it != j.end()) {
        std::map<std::uint64_t, std::uint32_t> lut;
        for (const auto& [k, v] : it->items()) lut[parse_key(k)] = v.template get<std::uint32_t>();
        l.size_lut = std::move(lut);
    }
    l.max_size_bits = at(j, "max_size_bits").template get<std::uint32_t>();
    l.last_header = at(j, "last_header").template get<bool>();
    const auto& roms = at(j, "roms");
    l.roms.extract_shifts = at(roms, "extract_shifts").template get<std::vector<std::uint32_t>>();
    l.roms.align_right = size_map_from(at(roms, "align_right"));
    l.roms.align_left = size_map_from(at(roms, "align_left"));
    return l;
}

}  // namespace

std::string plan_to_json(const PipelinePlan& p) {
    ordered_json j;
    j["bus_width"] = p.bus_width_bits;
    j["depth_cycles"] = p.depth_cycles;
    j["end_id"] = kEndId;
    j["reject_id"] = kRejectId;
    j["levels"] = p.levels;
    j["mux_levels"] = p.mux_levels;
    ordered_json engines = ordered_json::object();
    for (const auto& [id, l] : p.engines) engines[std::to_string(id)] = layout_json(l);
    j["engines"] = std::move(engines);
    return j.dump(2) + "\n";
}

PipelinePlan plan_from_json(std::string_view text) {
    PipelinePlan p;
    try {
        const auto j = ordered_json::parse(text);
        p.bus_width_bits = at(j, "bus_width").get<std::uint32_t>();
        p.depth_cycles = at(j, "depth_cycles").get<std::uint32_t>();
        if (at(j, "end_id").get<HeaderId>() != kEndId || at(j, "reject_id").get<HeaderId>() != kRejectId) {
            throw CompileError("plan JSON: unsupported END/REJECT encoding");
        }
        p.levels = at(j, "levels").get<std::vector<std::vector<HeaderId>>>();
        p.mux_levels = at(j, "mux_levels").get<std::set<std::size_t>>();
        for (const auto& [k, v] : at(j, "engines").items()) {
            p.engines.emplace(static_cast<HeaderId>(parse_key(k)), layout_from(v));
        }
    } catch (const nlohmann::json::exception& e) {
        throw CompileError(std::string("plan JSON: ") + e.what());
    }
    validate_plan(p);
    return p;
}

// ---------------------------------------------------------------------------
// Stats

namespace {

std::size_t entry_bits(std::uint64_t max_value) {
    return std::max<std::size_t>(1, std::bit_width(max_value));
}

template <typename Map>
std::size_t map_bits(const Map& m) {
    std::uint64_t max_value = 0;
    for (const auto& [_, v] : m) max_value = std::max<std::uint64_t>(max_value, v);
    return m.size() * entry_bits(max_value);
}

std::string number(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

}  // namespace

PlanStats plan_stats(const PipelinePlan& p, std::optional<double> clock_mhz) {
    PlanStats s;
    s.depth_cycles = p.depth_cycles;
    for (const auto& level : p.levels) s.engines_per_level.push_back(level.size());
    s.engine_count = p.engines.size();
    for (const auto& [_, e] : p.engines) {
        const auto& r = e.roms;
        s.rom_entries += r.extract_shifts.size() + r.align_right.size() + r.align_left.size();
        std::uint64_t max_shift = 0;
        for (auto v : r.extract_shifts) max_shift = std::max<std::uint64_t>(max_shift, v);
        s.rom_bits += r.extract_shifts.size() * entry_bits(max_shift);
        s.rom_bits += map_bits(r.align_right) + map_bits(r.align_left);
        if (e.size_lut) {
            s.rom_entries += e.size_lut->size();
            s.rom_bits += map_bits(*e.size_lut);
        }
        s.match_entries += e.match_table.size();
    }
    if (clock_mhz && *clock_mhz > 0) {
        s.clock_mhz = *clock_mhz;
        s.throughput_gbps = p.bus_width_bits * *clock_mhz / 1000.0;
        s.latency_ns = p.depth_cycles * 1000.0 / *clock_mhz;
    }
    return s;
}

std::string format_stats(const PlanStats& s) {
    std::ostringstream os;
    os << "depth_cycles: " << s.depth_cycles << "\n";
    os << "levels: " << s.engines_per_level.size() << "\n";
    os << "engines_per_level:";
    for (auto n : s.engines_per_level) os << " " << n;
    os << "\n";
    os << "engines: " << s.engine_count << "\n";
    os << "match_entries: " << s.match_entries << "\n";
    os << "rom_entries: " << s.rom_entries << "\n";
    os << "rom_bits: " << s.rom_bits << "\n";
    if (s.clock_mhz) {
        os << "clock_mhz: " << number(*s.clock_mhz) << "\n";
        os << "latency_ns: " << number(*s.latency_ns) << "\n";
        os << "throughput_gbps: " << number(*s.throughput_gbps) << "\n";
    }
    return os.str();
}

}  // namespace pipeparse
