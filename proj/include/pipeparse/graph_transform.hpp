#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "pipeparse/parser_model.hpp"

namespace pipeparse {

using LevelMap = std::map<std::string, int>;

/// A graph whose nodes carry pipeline levels. After balancing every edge
/// spans exactly one level.
struct LeveledGraph {
    Topology base;
    LevelMap level;
    std::vector<std::string> longest_path;  // root ... END

    /// Nodes grouped by level, names ascending within a level.
    std::vector<std::vector<std::string>> levels() const;
};

class GraphError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Unique minimal edge subset with the same reachability. Throws GraphError
/// on a cycle.
Topology transitive_reduction(const Topology& g);
ParseGraph transitive_reduction(const ParseGraph& g);

/// Longest-path distance of every node from the root.
LevelMap compute_levels(const Topology& g);

/// A maximal root->END path. Ties go to the lexicographically smallest node
/// at each step.
std::vector<std::string> longest_path(const Topology& g, const LevelMap& levels);

/// Rewires the reduced graph so that every edge spans one level: nodes off
/// the longest path lose their out-edges and get a single edge to the
/// longest-path node one level below them.
LeveledGraph balance_graph(const Topology& reduced, const std::vector<std::string>& path);

/// reduce -> level -> longest path -> balance.
LeveledGraph balanced_pipeline_graph(const ParseGraph& g);

enum class GraphStage { Original, Reduced, Balanced };

GraphStage parse_stage(const std::string& name);

/// Graphviz DOT with one rank group per level. Output is deterministic.
std::string to_dot(const Topology& g, const LevelMap& levels, const std::string& graph_name);

/// DOT for one stage of the transformation of `g`.
std::string stage_dot(const ParseGraph& g, GraphStage stage);

}  // namespace pipeparse
