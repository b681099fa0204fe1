#include "doctest.h"
#include "pipeparse/bitvec.hpp"
#include "pipeparse/graph_transform.hpp"
#include "pipeparse/layout_gen.hpp"
#include "support.hpp"

#include "json.hpp"

using namespace pipeparse;

namespace {

ParseGraph load(const char* name) { return load_parser_spec_file(testing::fixture(name)); }

const HeaderLayout& layout_named(const PipelinePlan& p, const std::string& name) {
    return p.engine(*p.find_header(name));
}

// Bits [from, from + n) of a word stream, zero past its end.
BitVec splice(const std::vector<BitVec>& words, std::size_t bus, std::size_t from, std::size_t n) {
    BitVec out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t pos = from + i;
        const std::size_t w = pos / bus;
        if (w < words.size()) out.set_bit(i, words[w].bit(pos % bus));
    }
    return out;
}

}  // namespace

TEST_CASE("ethernet layout on a 320-bit bus") {
    const auto plan = compile_plan(load("simple_parser.json"), 320);
    const auto& eth = layout_named(plan, "ethernet");
    CHECK(eth.has_key);
    CHECK(eth.key_location_bits == 96);
    CHECK(eth.key_width_bits == 16);
    CHECK(eth.key_word_index == 0);
    CHECK(eth.key_mask == 0xFFFF);
    CHECK(eth.fixed_size_bits == 112u);
    CHECK_FALSE(eth.size_lut);
    CHECK_FALSE(eth.last_header);
    const std::vector<MatchEntry> table{{0x0800, *plan.find_header("ipv4")}, {0x86DD, *plan.find_header("ipv6")}};
    CHECK(eth.match_table == table);
    CHECK(eth.default_next == kRejectId);
}

TEST_CASE("terminal and variable layouts") {
    const auto plan = compile_plan(load("simple_parser.json"), 320);
    const auto& icmp = layout_named(plan, "icmp");
    CHECK(icmp.last_header);
    CHECK(icmp.match_table.empty());
    CHECK(icmp.default_next == kEndId);

    const auto& ipv4 = layout_named(plan, "ipv4");
    REQUIRE(ipv4.size_lut);
    CHECK_FALSE(ipv4.fixed_size_bits);
    std::map<std::uint64_t, std::uint32_t> lut;
    for (std::uint64_t ihl = 5; ihl <= 15; ++ihl) lut[ihl] = static_cast<std::uint32_t>(32 * ihl);
    CHECK(*ipv4.size_lut == lut);
    CHECK(ipv4.size_lut->at(15) == 480);
    CHECK(ipv4.size_field_offset_bits == 4);
    CHECK(ipv4.size_field_width_bits == 4);
}

TEST_CASE("header ids follow level then name") {
    const auto g = load("simple_parser.json");
    const auto ids = assign_header_ids(balanced_pipeline_graph(g));
    CHECK(ids.at("ethernet") == 0);
    CHECK(ids.at("ipv4") == 1);
    CHECK(ids.at("ipv6") == 2);
    CHECK(ids.at("END") == kEndId);
    CHECK(ids.at("REJECT") == kRejectId);
}

TEST_CASE("shift ROM examples") {
    const auto g = load("simple_parser.json");
    const auto eth = build_shift_roms(g.header_types.at("ethernet"), 320);
    CHECK(eth.align_right == std::map<std::uint32_t, std::uint32_t>{{112, 112}});
    CHECK(eth.align_left == std::map<std::uint32_t, std::uint32_t>{{112, 208}});
    CHECK(eth.extract_shifts == std::vector<std::uint32_t>{0});

    const auto ipv6 = build_shift_roms(g.header_types.at("ipv6"), 320);
    CHECK(ipv6.align_right.at(320) == 0);
    CHECK(ipv6.align_left.at(320) == 0);

    const auto ipv4 = build_shift_roms(g.header_types.at("ipv4"), 320);
    CHECK(ipv4.align_right.size() == 11);
    CHECK(ipv4.align_right.begin()->first == 160);
    CHECK(ipv4.align_right.rbegin()->first == 480);
    CHECK(ipv4.align_right.at(480) == 160);
    CHECK(ipv4.extract_shifts == std::vector<std::uint32_t>{0, 320});
}

TEST_CASE("ROM contents equal brute-force arithmetic for every size") {
    for (const auto* name : {"simple_parser.json", "full_parser.json"}) {
        const auto g = load(name);
        for (std::uint32_t bus : {64u, 128u, 320u, 512u}) {
            for (const auto& [_, h] : g.header_types) {
                const auto rom = build_shift_roms(h, bus);
                std::set<std::uint32_t> sizes;
                if (h.size_expr) {
                    for (auto v : h.valid_size_values) sizes.insert(static_cast<std::uint32_t>(h.size_expr->evaluate(v)));
                } else {
                    sizes.insert(h.max_size_bits);
                }
                CHECK(rom.align_right.size() == sizes.size());
                for (auto s : sizes) {
                    CHECK(rom.align_right.at(s) == s % bus);
                    CHECK(rom.align_left.at(s) == (bus - s % bus) % bus);
                }
                const std::size_t words = (h.max_size_bits + bus - 1) / bus;
                REQUIRE(rom.extract_shifts.size() == words);
                for (std::size_t k = 0; k < words; ++k) CHECK(rom.extract_shifts[k] == k * bus);
            }
        }
    }
}

TEST_CASE("shift composition removes exactly the header bits") {
    std::mt19937_64 rng(99);
    for (const auto* name : {"simple_parser.json", "full_parser.json"}) {
        const auto g = load(name);
        for (std::uint32_t bus : {64u, 128u, 320u}) {
            for (const auto& [_, h] : g.header_types) {
                const auto rom = build_shift_roms(h, bus);
                std::vector<BitVec> words(h.max_size_bits / bus + 3, BitVec(bus));
                for (auto& w : words) {
                    for (std::size_t i = 0; i < bus; i += 64) w.set_field(i, std::min<std::size_t>(64, bus - i), rng());
                }
                for (const auto& [s, right] : rom.align_right) {
                    const std::size_t k = s / bus;
                    BitVec out = words[k] << right;
                    if (right != 0) out |= words[k + 1] >> rom.align_left.at(s);
                    CHECK(out == splice(words, bus, s, bus));
                }
            }
        }
    }
}

TEST_CASE("plans for the fixtures") {
    const auto fig5 = compile_plan(load("fig5.json"), 320);
    REQUIRE(fig5.levels.size() == 4);
    std::vector<std::vector<std::string>> names;
    for (const auto& level : fig5.levels) {
        names.emplace_back();
        for (auto id : level) names.back().push_back(fig5.engine(id).name);
    }
    CHECK(names == std::vector<std::vector<std::string>>{{"ETH"}, {"IPv4", "IPv6"}, {"EXT"}, {"TCP", "UDP"}});
    CHECK(fig5.mux_levels == std::set<std::size_t>{1, 3});
    CHECK(fig5.depth_cycles == 5);

    const auto single = compile_plan(load("single.json"), 320);
    CHECK(single.levels.size() == 1);
    CHECK(single.mux_levels.empty());
    CHECK(single.depth_cycles == 2);

    CHECK(compile_plan(load("simple_parser.json"), 320).depth_cycles == 6);
    CHECK(compile_plan(load("full_parser.json"), 320).depth_cycles == 8);
}

TEST_CASE("keys straddling a word boundary are rejected") {
    const auto g = load("simple_parser.json");
    try {
        compile_plan(g, 104);
        FAIL("expected CompileError");
    } catch (const CompileError& e) {
        CHECK(std::string(e.what()).find("wider bus") != std::string::npos);
    }
    CHECK_THROWS_AS(compile_plan(g, 100), CompileError);
    CHECK_NOTHROW(compile_plan(g, 64));
}

TEST_CASE("plan JSON round trip and field order") {
    for (const auto* name : {"simple_parser.json", "full_parser.json", "fig5.json"}) {
        for (std::uint32_t bus : {64u, 320u}) {
            const auto plan = compile_plan(load(name), bus);
            CHECK(plan_from_json(plan_to_json(plan)) == plan);
            CHECK(plan_to_json(plan) == plan_to_json(compile_plan(load(name), bus)));
        }
    }
    const auto doc = nlohmann::ordered_json::parse(plan_to_json(compile_plan(load("fig5.json"), 320)));
    std::vector<std::string> keys;
    for (const auto& [k, _] : doc.items()) keys.push_back(k);
    CHECK(keys == std::vector<std::string>{"bus_width", "depth_cycles", "end_id", "reject_id", "levels",
                                           "mux_levels", "engines"});
}

TEST_CASE("hand-edited plans are validated") {
    auto doc = nlohmann::json::parse(plan_to_json(compile_plan(load("fig5.json"), 320)));
    doc["depth_cycles"] = 3;
    CHECK_THROWS(plan_from_json(doc.dump()));
    CHECK_THROWS(plan_from_json("[]"));
}

TEST_CASE("stats") {
    const auto plan = compile_plan(load("simple_parser.json"), 320);
    const auto s = plan_stats(plan, 312.5);
    CHECK(s.throughput_gbps == 100.0);
    CHECK(s.latency_ns == doctest::Approx(19.2).epsilon(1e-12));
    CHECK(s.engines_per_level == std::vector<std::size_t>{1, 2, 2, 1, 3});
    CHECK(s.engine_count == 9);
    CHECK(s.match_entries == 20);
    CHECK(format_stats(s).find("throughput_gbps: 100\n") != std::string::npos);

    const auto narrow = plan_stats(compile_plan(load("simple_parser.json"), 64), 156.25);
    CHECK(narrow.throughput_gbps == 10.0);

    const auto bare = plan_stats(plan, std::nullopt);
    CHECK_FALSE(bare.throughput_gbps);
    CHECK(format_stats(bare).find("throughput") == std::string::npos);
}
