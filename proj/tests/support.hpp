#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "pipeparse/parser_model.hpp"

namespace testing {

inline std::string fixture(const std::string& name) {
    return std::string(PIPEPARSE_SOURCE_DIR) + "/fixtures/" + name;
}

inline std::string golden(const std::string& name) {
    return std::string(PIPEPARSE_SOURCE_DIR) + "/tests/golden/" + name;
}

inline std::string build_path(const std::string& name) {
    return std::string(PIPEPARSE_BINARY_DIR) + "/" + name;
}

inline std::string node_name(std::size_t i) {
    std::string s = "N";
    if (i < 10) s += "0";
    return s + std::to_string(i);
}

// Random parse graph with `n` states over three header shapes: a 32-bit
// word, a 200-bit block and a variable header of (len+1)*32 bits. Each
// state keys on its first byte. Successors always have a higher index, and
// every state gets at least one predecessor and one successor.
inline pipeparse::ParseGraph random_parse_graph(std::mt19937_64& rng, std::size_t n) {
    using namespace pipeparse;
    ParseGraph g;
    HeaderTypeSpec small{"small", {{"tag", 8, false}, {"body", 24, false}}, 32, std::nullopt, {}};
    HeaderTypeSpec block{"block", {{"tag", 8, false}, {"body", 192, false}}, 200, std::nullopt, {}};
    HeaderTypeSpec var{"var",
                       {{"tag", 8, false}, {"len", 8, true}, {"body", 16, false}, {"rest", 0, false}},
                       352,
                       SizeExpr{"len", 32, 32},
                       {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10}};
    g.header_types = {{"small", small}, {"block", block}, {"var", var}};
    const std::vector<std::string> kinds{"small", "block", "var"};

    std::vector<std::set<std::size_t>> succ(n);  // index n stands for END
    for (std::size_t j = 1; j < n; ++j) {
        succ[std::uniform_int_distribution<std::size_t>(0, j - 1)(rng)].insert(j);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto extra = std::uniform_int_distribution<int>(0, 2)(rng);
        for (int k = 0; k < extra; ++k) succ[i].insert(std::uniform_int_distribution<std::size_t>(i + 1, n)(rng));
        if (succ[i].empty()) succ[i].insert(n);
    }

    for (std::size_t i = 0; i < n; ++i) {
        ParseState s;
        s.name = node_name(i);
        s.header_type = kinds[std::uniform_int_distribution<std::size_t>(0, 2)(rng)];
        s.default_transition = std::string(kReject);
        std::uint64_t value = std::uniform_int_distribution<std::uint64_t>(0, 60)(rng);
        for (auto j : succ[i]) {
            const std::string target = j == n ? std::string(kEnd) : node_name(j);
            if (target == kEnd && std::uniform_int_distribution<int>(0, 1)(rng) == 0) {
                s.default_transition = target;
                continue;
            }
            s.transitions.push_back({value, target});
            value += std::uniform_int_distribution<std::uint64_t>(1, 40)(rng);
        }
        if (!s.transitions.empty()) s.key = TransitionKeySpec{0, 8};
        if (s.transitions.empty()) s.default_transition = std::string(kEnd);
        g.states[s.name] = std::move(s);
    }
    g.root = node_name(0);
    g.edges = derive_edges(g.states);
    return g;
}

// Boolean reachability matrix by repeated DFS (reflexive closure excluded).
inline std::map<std::string, std::set<std::string>> reachability(const pipeparse::Topology& t) {
    std::map<std::string, std::set<std::string>> out;
    for (const auto& n : t.nodes) {
        std::set<std::string> seen;
        std::vector<std::string> stack{n};
        while (!stack.empty()) {
            const auto cur = stack.back();
            stack.pop_back();
            for (const auto& e : t.edges) {
                if (e.from == cur && seen.insert(e.to).second) stack.push_back(e.to);
            }
        }
        out[n] = std::move(seen);
    }
    return out;
}

// Every root-to-target path, by exhaustive enumeration.
inline std::vector<std::vector<std::string>> all_paths(const pipeparse::Topology& t, const std::string& from,
                                                       const std::string& to) {
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> cur{from};
    std::function<void(const std::string&)> walk = [&](const std::string& n) {
        if (n == to) {
            out.push_back(cur);
            return;
        }
        for (const auto& e : t.edges) {
            if (e.from != n) continue;
            cur.push_back(e.to);
            walk(e.to);
            cur.pop_back();
        }
    };
    walk(from);
    return out;
}

}  // namespace testing
