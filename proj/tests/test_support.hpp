#pragma once

#include <algorithm>
#include <initializer_list>
#include <string>
#include <vector>

#include "cid/graph.hpp"

#ifndef CID_FIXTURE_DIR
#error "CID_FIXTURE_DIR must point at tests/fixtures"
#endif

namespace cid::testing {

inline std::string fixture(const std::string& name) { return std::string(CID_FIXTURE_DIR) + "/" + name; }

inline CausalGraph load(const std::string& name) { return load_graph_file(fixture(name + ".cg")); }

inline VarSet vs(const CausalGraph& g, std::initializer_list<const char*> names) {
    std::vector<std::string> v(names.begin(), names.end());
    return g.resolve(v);
}

inline std::vector<std::string> edge_names(const CausalGraph& g) {
    std::vector<std::string> out;
    for (const auto& [p, c] : g.edges()) out.push_back(g.name(p) + "->" + g.name(c));
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<std::string> sorted(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace cid::testing
