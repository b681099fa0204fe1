#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "pipeparse/layout_gen.hpp"
#include "pipeparse/parser_model.hpp"

namespace pipeparse::cli {

inline constexpr std::uint32_t kDefaultBusWidth = 320;
inline constexpr double kDefaultClockMhz = 312.5;

enum ExitCode : int { kOk = 0, kMismatch = 1, kUsage = 2 };

struct CompileOptions {
    std::string spec_path;
    std::uint32_t bus_width = kDefaultBusWidth;
    std::optional<std::string> out_path;
};

struct SimulateOptions {
    std::string input_path;  // plan or parser spec
    std::uint32_t bus_width = kDefaultBusWidth;
    std::optional<std::string> pcap_path;
    std::optional<std::string> spec_path;  // generator graph when the input is a plan
    std::size_t packets = 0;
    std::uint64_t seed = 1;
    std::optional<std::string> out_path;  // PHV JSONL, stdout if absent
    std::optional<std::string> trace_path;
};

struct CompareOptions {
    std::string plan_path;
    std::string spec_path;
    std::size_t packets = 10000;
    std::uint64_t seed = 1;
};

struct DotOptions {
    std::string spec_path;
    std::string stage = "original";
    std::optional<std::string> out_path;
};

struct StatsOptions {
    std::string input_path;
    std::uint32_t bus_width = kDefaultBusWidth;
    double clock_mhz = kDefaultClockMhz;
};

struct GenerateOptions {
    std::string spec_path;
    std::size_t packets = 0;
    std::uint64_t seed = 1;
    std::string pcap_path;
};

/// Text report printed by `compile`.
std::string compile_report(const PipelinePlan& plan);

/// A plan file (recognised by its "engines" key) is loaded as is; anything
/// else is read as a parser spec and compiled for `bus_width`.
PipelinePlan load_plan_or_spec(const std::string& path, std::uint32_t bus_width);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

int cmd_compile(const CompileOptions& o, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err);
int cmd_compare(const CompareOptions& o, std::ostream& out, std::ostream& err);
int cmd_dot(const DotOptions& o, std::ostream& out, std::ostream& err);
int cmd_stats(const StatsOptions& o, std::ostream& out, std::ostream& err);
int cmd_generate(const GenerateOptions& o, std::ostream& out, std::ostream& err);

/// Full command line entry point used by the executable.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pipeparse::cli
