#include "pipeparse/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pipeparse/graph_transform.hpp"
#include "pipeparse/oracle.hpp"
#include "pipeparse/pipeline_sim.hpp"

namespace pipeparse::cli {

namespace {

class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Every parser state must have an engine and every engine a state.
void check_plan_matches(const PipelinePlan& plan, const ParseGraph& g) {
    std::set<std::string> engines;
    for (const auto& [_, e] : plan.engines) engines.insert(e.name);
    std::set<std::string> states;
    for (const auto& [name, _] : g.states) states.insert(name);
    if (engines != states) throw InputError("plan does not match the parser spec (different state sets)");
}

std::string hex_bytes(const std::vector<std::uint8_t>& bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    for (auto b : bytes) {
        s += digits[b >> 4];
        s += digits[b & 0xF];
    }
    return s;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const SpecError& e) {
        for (const auto& d : e.diagnostics()) err << to_string(d) << "\n";
        if (e.diagnostics().empty()) err << "error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
    }
    return kUsage;
}

}  // namespace

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << text;
}

PipelinePlan load_plan_or_spec(const std::string& path, std::uint32_t bus_width) {
    const std::string text = read_text_file(path);
    const auto doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_object() && doc.contains("engines")) return plan_from_json(text);
    return compile_plan(load_parser_spec(text), bus_width);
}

std::string compile_report(const PipelinePlan& plan) {
    std::ostringstream os;
    os << "depth_cycles: " << plan.depth_cycles << "\n";
    os << "levels: " << plan.levels.size() << "\n";
    os << "engines: " << plan.engines.size() << "\n";
    for (std::size_t i = 0; i < plan.levels.size(); ++i) {
        os << "level " << i << ":";
        for (auto id : plan.levels[i]) os << " " << plan.engine(id).name;
        os << "\n";
    }
    return os.str();
}

int cmd_compile(const CompileOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto plan = compile_plan(load_parser_spec_file(o.spec_path), o.bus_width);
        if (o.out_path) write_text_file(*o.out_path, plan_to_json(plan));
        out << compile_report(plan);
        return kOk;
    });
}

int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const std::string text = read_text_file(o.input_path);
        const auto doc = nlohmann::json::parse(text, nullptr, false);
        const bool is_plan = doc.is_object() && doc.contains("engines");

        std::optional<ParseGraph> graph;
        if (o.spec_path) {
            graph = load_parser_spec_file(*o.spec_path);
        } else if (!is_plan) {
            graph = load_parser_spec(text);
        }
        const PipelinePlan plan = is_plan ? plan_from_json(text) : compile_plan(*graph, o.bus_width);
        if (graph) check_plan_matches(plan, *graph);

        std::vector<std::vector<std::uint8_t>> packets;
        if (o.pcap_path) {
            for (auto& r : read_pcap(*o.pcap_path)) packets.push_back(std::move(r.bytes));
        }
        if (o.packets > 0) {
            if (!graph) throw InputError("random packets need a parser spec (--spec)");
            for (auto& c : generate_corpus(*graph, o.packets, o.seed)) packets.push_back(std::move(c.bytes));
        }

        const auto run = simulate_packets(plan, packets, o.trace_path.has_value());
        const std::string jsonl = to_jsonl(run.results);
        std::ostream& report = o.out_path ? out : err;
        if (o.out_path) {
            write_text_file(*o.out_path, jsonl);
        } else {
            out << jsonl;
        }
        if (o.trace_path) write_text_file(*o.trace_path, trace_csv(run.trace, plan));

        report << "packets: " << packets.size() << "\n";
        report << "words: " << run.words_total << "\n";
        report << "cycles: " << run.cycles_total << "\n";
        if (!run.timing.empty()) {
            const auto [lo, hi] = std::minmax_element(
                run.timing.begin(), run.timing.end(),
                [](const PacketTiming& a, const PacketTiming& b) { return a.latency() < b.latency(); });
            report << "latency_cycles_min: " << lo->latency() << "\n";
            report << "latency_cycles_max: " << hi->latency() << "\n";
        }
        std::size_t exceptions = 0;
        for (const auto& r : run.results) exceptions += r.exception.has_value();
        report << "exceptions: " << exceptions << "\n";
        return kOk;
    });
}

int cmd_compare(const CompareOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto graph = load_parser_spec_file(o.spec_path);
        const auto plan = load_plan_or_spec(o.plan_path, kDefaultBusWidth);
        check_plan_matches(plan, graph);
        const auto ids = plan_header_ids(plan);

        const auto corpus = generate_corpus(graph, o.packets, o.seed);
        std::vector<std::vector<std::uint8_t>> packets;
        packets.reserve(corpus.size());
        for (const auto& c : corpus) packets.push_back(c.bytes);
        const auto run = simulate_packets(plan, packets);

        for (std::size_t i = 0; i < packets.size(); ++i) {
            const auto id = static_cast<std::uint32_t>(i);
            const auto expected = reference_parse(graph, packets[i], ids, id).to_result(id);
            if (expected == run.results[i]) continue;

            out << "MISMATCH at packet " << i << " (" << to_string(corpus[i].mutation) << ")\n";
            out << "bytes: " << hex_bytes(packets[i]) << "\n";
            out << "oracle:\n" << describe(expected);
            out << "pipeline:\n" << describe(run.results[i]);
            const auto replay = simulate_packets(plan, {packets[i]}, true, id);
            out << "trace:\n" << trace_csv(replay.trace, plan);
            return kMismatch;
        }
        out << "packets: " << packets.size() << "\n";
        out << "result: identical\n";
        return kOk;
    });
}

int cmd_dot(const DotOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto stage = parse_stage(o.stage);
        const auto dot = stage_dot(load_parser_spec_file(o.spec_path), stage);
        if (o.out_path) {
            write_text_file(*o.out_path, dot);
        } else {
            out << dot;
        }
        return kOk;
    });
}

int cmd_stats(const StatsOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (!(o.clock_mhz > 0)) throw InputError("--clock-mhz must be positive");
        out << format_stats(plan_stats(load_plan_or_spec(o.input_path, o.bus_width), o.clock_mhz));
        return kOk;
    });
}

int cmd_generate(const GenerateOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto graph = load_parser_spec_file(o.spec_path);
        std::vector<PcapRecord> records;
        std::uint32_t n = 0;
        for (auto& c : generate_corpus(graph, o.packets, o.seed)) {
            PcapRecord r;
            r.ts_sec = n++;
            r.orig_len = static_cast<std::uint32_t>(c.bytes.size());
            r.bytes = std::move(c.bytes);
            records.push_back(std::move(r));
        }
        write_pcap(o.pcap_path, records);
        out << "packets: " << records.size() << "\n";
        return kOk;
    });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Streaming packet parser compiler and cycle-accurate simulator", "pipeparse"};
    app.require_subcommand(1);

    CompileOptions compile;
    auto* c = app.add_subcommand("compile", "Compile a parser spec into a pipeline plan");
    c->add_option("spec", compile.spec_path, "Parser spec JSON")->required();
    c->add_option("--bus", compile.bus_width, "Bus width in bits")->capture_default_str();
    c->add_option("--out", compile.out_path, "Write the plan JSON here");

    SimulateOptions simulate;
    auto* s = app.add_subcommand("simulate", "Run packets through a compiled pipeline");
    s->add_option("input", simulate.input_path, "Plan JSON or parser spec")->required();
    s->add_option("--bus", simulate.bus_width, "Bus width when compiling a spec")->capture_default_str();
    s->add_option("--pcap", simulate.pcap_path, "Replay packets from a classic pcap file");
    s->add_option("--spec", simulate.spec_path, "Parser spec used to generate random packets");
    s->add_option("--packets", simulate.packets, "Number of random packets")->capture_default_str();
    s->add_option("--seed", simulate.seed, "Random seed")->capture_default_str();
    s->add_option("--out", simulate.out_path, "PHV JSONL output (default stdout)");
    s->add_option("--trace", simulate.trace_path, "Cycle trace CSV output");

    CompareOptions compare;
    auto* m = app.add_subcommand("compare", "Check the pipeline against the reference parser");
    m->add_option("plan", compare.plan_path, "Plan JSON or parser spec")->required();
    m->add_option("spec", compare.spec_path, "Parser spec")->required();
    m->add_option("--packets", compare.packets, "Number of random packets")->capture_default_str();
    m->add_option("--seed", compare.seed, "Random seed")->capture_default_str();

    DotOptions dot;
    auto* d = app.add_subcommand("dot", "Emit a Graphviz view of a graph stage");
    d->add_option("spec", dot.spec_path, "Parser spec")->required();
    d->add_option("--stage", dot.stage, "original, reduced or balanced")->capture_default_str();
    d->add_option("--out", dot.out_path, "Output file (default stdout)");

    StatsOptions stats;
    auto* t = app.add_subcommand("stats", "Report depth, ROM sizes, latency and throughput");
    t->add_option("input", stats.input_path, "Plan JSON or parser spec")->required();
    t->add_option("--bus", stats.bus_width, "Bus width when compiling a spec")->capture_default_str();
    t->add_option("--clock-mhz", stats.clock_mhz, "Clock frequency")->capture_default_str();

    GenerateOptions generate;
    auto* g = app.add_subcommand("generate", "Write a random packet corpus as pcap");
    g->add_option("spec", generate.spec_path, "Parser spec")->required();
    g->add_option("--packets", generate.packets, "Number of packets")->required();
    g->add_option("--seed", generate.seed, "Random seed")->capture_default_str();
    g->add_option("--pcap", generate.pcap_path, "Output pcap")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    if (*c) return cmd_compile(compile, out, err);
    if (*s) return cmd_simulate(simulate, out, err);
    if (*m) return cmd_compare(compare, out, err);
    if (*d) return cmd_dot(dot, out, err);
    if (*t) return cmd_stats(stats, out, err);
    return cmd_generate(generate, out, err);
}

}  // namespace pipeparse::cli
