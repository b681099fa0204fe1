#include "pipeparse/graph_transform.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace pipeparse {

namespace {

// Kahn's algorithm with ties broken by name.
std::vector<std::string> topological_order(const Topology& g) {
    std::map<std::string, int> indegree;
    for (const auto& n : g.nodes) indegree[n] = 0;
    for (const auto& e : g.edges) ++indegree[e.to];
    std::set<std::string> ready;
    for (const auto& [n, d] : indegree) {
        if (d == 0) ready.insert(n);
    }
    std::vector<std::string> order;
    while (!ready.empty()) {
        auto n = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(n);
        for (const auto& s : g.successors(n)) {
            if (--indegree[s] == 0) ready.insert(s);
        }
    }
    if (order.size() != g.nodes.size()) throw GraphError("graph contains a cycle");
    return order;
}

}  // namespace

std::vector<std::vector<std::string>> LeveledGraph::levels() const {
    int depth = 0;
    for (const auto& [_, l] : level) depth = std::max(depth, l + 1);
    std::vector<std::vector<std::string>> out(static_cast<std::size_t>(depth));
    for (const auto& [n, l] : level) out[static_cast<std::size_t>(l)].push_back(n);
    return out;
}

Topology transitive_reduction(const Topology& g) {
    const auto order = topological_order(g);
    // reach[n] = nodes reachable from n by a path of length >= 1
    std::map<std::string, std::set<std::string>> reach;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto& r = reach[*it];
        for (const auto& s : g.successors(*it)) {
            r.insert(s);
            r.insert(reach[s].begin(), reach[s].end());
        }
    }
    Topology out = g;
    std::erase_if(out.edges, [&](const Edge& e) {
        // redundant iff another successor of e.from already reaches e.to
        for (const auto& s : g.successors(e.from)) {
            if (s != e.to && reach[s].contains(e.to)) return true;
        }
        return false;
    });
    return out;
}

ParseGraph transitive_reduction(const ParseGraph& g) {
    ParseGraph out = g;
    out.edges = transitive_reduction(g.topology()).edges;
    return out;
}

LevelMap compute_levels(const Topology& g) {
    LevelMap level;
    for (const auto& n : topological_order(g)) {
        auto [it, _] = level.try_emplace(n, 0);
        for (const auto& s : g.successors(n)) {
            auto& ls = level[s];
            ls = std::max(ls, it->second + 1);
        }
    }
    return level;
}

std::vector<std::string> longest_path(const Topology& g, const LevelMap& levels) {
    const std::string end(kEnd);
    // height[n] = longest distance from n to END
    std::map<std::string, int> height;
    const auto order = topological_order(g);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        int h = *it == end ? 0 : -1;
        for (const auto& s : g.successors(*it)) {
            if (height[s] >= 0) h = std::max(h, height[s] + 1);
        }
        height[*it] = h;
    }

    const int total = levels.at(end);
    std::vector<std::string> path{g.root};
    while (path.back() != end) {
        const auto& cur = path.back();
        const int next_level = levels.at(cur) + 1;
        // first fit in name order
        std::string pick;
        for (const auto& s : g.successors(cur)) {
            if (levels.at(s) == next_level && height[s] >= 0 && next_level + height[s] == total) {
                pick = s;
                break;
            }
        }
        if (pick.empty()) throw GraphError("no maximal path continues from '" + cur + "'");
        path.push_back(pick);
    }
    return path;
}

LeveledGraph balance_graph(const Topology& reduced, const std::vector<std::string>& path) {
    LeveledGraph out;
    out.base = reduced;
    out.level = compute_levels(reduced);
    out.longest_path = path;

    const std::set<std::string> on_path(path.begin(), path.end());
    auto& edges = out.base.edges;

    // nodes off the longest path lose every out-edge; on the path, edges that
    // skip a level are dropped
    std::erase_if(edges, [&](const Edge& e) {
        if (!on_path.contains(e.from)) return true;
        return out.level.at(e.to) != out.level.at(e.from) + 1;
    });

    for (const auto& n : reduced.nodes) {
        if (on_path.contains(n)) continue;
        const auto next = static_cast<std::size_t>(out.level.at(n) + 1);
        if (next >= path.size()) {
            throw GraphError("node '" + n + "' sits at or below the end of the longest path");
        }
        edges.insert({n, path[next]});
    }
    return out;
}

LeveledGraph balanced_pipeline_graph(const ParseGraph& g) {
    const auto reduced = transitive_reduction(g.topology());
    const auto levels = compute_levels(reduced);
    return balance_graph(reduced, longest_path(reduced, levels));
}

GraphStage parse_stage(const std::string& name) {
    if (name == "original") return GraphStage::Original;
    if (name == "reduced") return GraphStage::Reduced;
    if (name == "balanced") return GraphStage::Balanced;
    throw std::invalid_argument("unknown graph stage '" + name + "' (original, reduced, balanced)");
}

std::string to_dot(const Topology& g, const LevelMap& levels, const std::string& graph_name) {
    std::ostringstream os;
    os << "digraph " << graph_name << " {\n";
    os << "  rankdir=TB;\n";
    os << "  node [shape=circle];\n";
    os << "  \"" << kEnd << "\" [shape=doublecircle];\n";

    std::map<int, std::vector<std::string>> by_level;
    for (const auto& n : g.nodes) by_level[levels.at(n)].push_back(n);
    for (const auto& [l, nodes] : by_level) {
        os << "  { rank=same;";
        for (const auto& n : nodes) os << " \"" << n << "\";";
        os << " }  // level " << l << "\n";
    }
    for (const auto& e : g.edges) {
        os << "  \"" << e.from << "\" -> \"" << e.to << "\";\n";
    }
    os << "}\n";
    return os.str();
}

std::string stage_dot(const ParseGraph& g, GraphStage stage) {
    const auto original = g.topology();
    const auto reduced = transitive_reduction(original);
    const auto levels = compute_levels(reduced);
    switch (stage) {
        case GraphStage::Original:
            return to_dot(original, levels, "original");
        case GraphStage::Reduced:
            return to_dot(reduced, levels, "reduced");
        case GraphStage::Balanced: {
            const auto lg = balance_graph(reduced, longest_path(reduced, levels));
            return to_dot(lg.base, lg.level, "balanced");
        }
    }
    throw std::logic_error("unreachable");
}

}  // namespace pipeparse
