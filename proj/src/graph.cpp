#include "cid/graph.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <queue>
#include <set>
#include <sstream>

namespace cid {

// VarSet ----------------------------------------------------------------------

VarSet::VarSet(std::initializer_list<NodeIndex> init) : members_(init) {
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
}

VarSet::VarSet(std::vector<NodeIndex> members) : members_(std::move(members)) {
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
}

bool VarSet::contains(NodeIndex v) const {
    return std::binary_search(members_.begin(), members_.end(), v);
}

void VarSet::insert(NodeIndex v) {
    auto it = std::lower_bound(members_.begin(), members_.end(), v);
    if (it == members_.end() || *it != v) members_.insert(it, v);
}

void VarSet::erase(NodeIndex v) {
    auto it = std::lower_bound(members_.begin(), members_.end(), v);
    if (it != members_.end() && *it == v) members_.erase(it);
}

VarSet VarSet::unite(const VarSet& other) const {
    VarSet out;
    std::set_union(members_.begin(), members_.end(), other.members_.begin(), other.members_.end(),
                   std::back_inserter(out.members_));
    return out;
}

VarSet VarSet::intersect(const VarSet& other) const {
    VarSet out;
    std::set_intersection(members_.begin(), members_.end(), other.members_.begin(),
                          other.members_.end(), std::back_inserter(out.members_));
    return out;
}

VarSet VarSet::minus(const VarSet& other) const {
    VarSet out;
    std::set_difference(members_.begin(), members_.end(), other.members_.begin(),
                        other.members_.end(), std::back_inserter(out.members_));
    return out;
}

bool VarSet::subset_of(const VarSet& other) const {
    return std::includes(other.members_.begin(), other.members_.end(), members_.begin(),
                         members_.end());
}

bool VarSet::disjoint(const VarSet& other) const { return intersect(other).empty(); }

// CausalGraph -------------------------------------------------------------------

namespace {

// Returns one directed cycle (as node indices, first node repeated at the end)
// or an empty vector when the graph is acyclic.
std::vector<NodeIndex> find_cycle(const std::vector<std::vector<NodeIndex>>& children,
                                  const VarSet& present) {
    enum class Mark { kNone, kActive, kDone };
    std::vector<Mark> mark(children.size(), Mark::kNone);
    std::vector<NodeIndex> stack;
    std::vector<NodeIndex> cycle;

    auto dfs = [&](auto&& self, NodeIndex v) -> bool {
        mark[v] = Mark::kActive;
        stack.push_back(v);
        for (NodeIndex c : children[v]) {
            if (mark[c] == Mark::kActive) {
                auto it = std::find(stack.begin(), stack.end(), c);
                cycle.assign(it, stack.end());
                cycle.push_back(c);
                return true;
            }
            if (mark[c] == Mark::kNone && self(self, c)) return true;
        }
        stack.pop_back();
        mark[v] = Mark::kDone;
        return false;
    };
    for (NodeIndex v : present) {
        if (mark[v] == Mark::kNone && dfs(dfs, v)) return cycle;
    }
    return {};
}

}  // namespace

CausalGraph CausalGraph::build(const std::vector<NodeSpec>& nodes,
                               const std::vector<std::pair<std::string, std::string>>& edges) {
    auto universe = std::make_shared<Universe>();
    for (const auto& spec : nodes) {
        if (spec.name.empty()) throw InputError("empty node name");
        if (spec.name.find('\'') != std::string::npos) {
            throw InputError("node name '" + spec.name + "' contains a quote character");
        }
        if (universe->index.count(spec.name)) {
            throw InputError("duplicate node name '" + spec.name + "'");
        }
        universe->index.emplace(spec.name, static_cast<NodeIndex>(universe->names.size()));
        universe->names.push_back(spec.name);
        universe->observable.push_back(spec.observable);
    }

    CausalGraph g;
    const auto n = universe->names.size();
    std::vector<NodeIndex> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<NodeIndex>(i);
    g.present_ = VarSet(std::move(all));
    g.parents_.assign(n, {});
    g.children_.assign(n, {});
    g.universe_ = universe;

    for (const auto& [from, to] : edges) {
        auto f = universe->index.find(from);
        auto t = universe->index.find(to);
        if (f == universe->index.end()) throw InputError("edge references undeclared node '" + from + "'");
        if (t == universe->index.end()) throw InputError("edge references undeclared node '" + to + "'");
        if (f->second == t->second) throw InputError("self-loop on node '" + from + "'");
        if (g.has_edge(f->second, t->second)) {
            throw InputError("duplicate edge " + from + " -> " + to);
        }
        g.add_edge_unchecked(f->second, t->second);
    }

    auto cycle = find_cycle(g.children_, g.present_);
    if (!cycle.empty()) {
        std::string msg = "graph has a cycle: ";
        for (std::size_t i = 0; i < cycle.size(); ++i) {
            if (i) msg += " -> ";
            msg += universe->names[cycle[i]];
        }
        throw InputError(msg);
    }
    return g;
}

void CausalGraph::add_edge_unchecked(NodeIndex from, NodeIndex to) {
    auto& ch = children_[from];
    ch.insert(std::lower_bound(ch.begin(), ch.end(), to), to);
    auto& pa = parents_[to];
    pa.insert(std::lower_bound(pa.begin(), pa.end(), from), from);
}

VarSet CausalGraph::observables() const {
    std::vector<NodeIndex> out;
    for (NodeIndex v : present_) {
        if (is_observable(v)) out.push_back(v);
    }
    return VarSet(std::move(out));
}

VarSet CausalGraph::latents() const { return present_.minus(observables()); }

NodeIndex CausalGraph::index_of(std::string_view name) const {
    if (!universe_) throw InputError("unknown node '" + std::string(name) + "'");
    auto it = universe_->index.find(std::string(name));
    if (it == universe_->index.end() || !present_.contains(it->second)) {
        throw InputError("unknown node '" + std::string(name) + "'");
    }
    return it->second;
}

bool CausalGraph::has_name(std::string_view name) const {
    if (!universe_) return false;
    auto it = universe_->index.find(std::string(name));
    return it != universe_->index.end() && present_.contains(it->second);
}

VarSet CausalGraph::resolve(const std::vector<std::string>& names) const {
    VarSet out;
    for (const auto& n : names) out.insert(index_of(n));
    return out;
}

std::vector<std::string> CausalGraph::names_of(const VarSet& s) const {
    std::vector<std::string> out;
    out.reserve(s.size());
    for (NodeIndex v : s) out.push_back(name(v));
    return out;
}

bool CausalGraph::has_edge(NodeIndex from, NodeIndex to) const {
    const auto& ch = children_[from];
    return std::binary_search(ch.begin(), ch.end(), to);
}

std::vector<std::pair<NodeIndex, NodeIndex>> CausalGraph::edges() const {
    std::vector<std::pair<NodeIndex, NodeIndex>> out;
    for (NodeIndex v : present_) {
        for (NodeIndex c : children_[v]) out.emplace_back(v, c);
    }
    return out;
}

std::size_t CausalGraph::edge_count() const {
    std::size_t n = 0;
    for (NodeIndex v : present_) n += children_[v].size();
    return n;
}

CausalGraph CausalGraph::induced(const VarSet& keep) const {
    CausalGraph out;
    out.universe_ = universe_;
    out.present_ = present_.intersect(keep);
    out.parents_.assign(parents_.size(), {});
    out.children_.assign(children_.size(), {});
    for (NodeIndex v : out.present_) {
        for (NodeIndex c : children_[v]) {
            if (out.present_.contains(c)) out.add_edge_unchecked(v, c);
        }
    }
    return out;
}

void CausalGraph::require_nodes(const VarSet& s, const char* what) const {
    for (NodeIndex v : s) {
        if (!present_.contains(v)) {
            throw InputError(std::string(what) + ": node index " + std::to_string(v) +
                             " is not in the graph");
        }
    }
}

bool operator==(const CausalGraph& a, const CausalGraph& b) {
    if (a.present_ != b.present_) return false;
    if (a.universe_size() != b.universe_size()) return false;
    for (NodeIndex v : a.present_) {
        if (a.name(v) != b.name(v) || a.is_observable(v) != b.is_observable(v)) return false;
        if (a.children_[v] != b.children_[v]) return false;
    }
    return true;
}

// Structural operations ---------------------------------------------------------

namespace {

template <typename Next>
VarSet reach(const CausalGraph& g, const VarSet& start, Next next) {
    g.require_nodes(start, "reachability");
    std::vector<bool> seen(g.universe_size(), false);
    std::vector<NodeIndex> stack(start.begin(), start.end());
    for (NodeIndex v : start) seen[v] = true;
    while (!stack.empty()) {
        NodeIndex v = stack.back();
        stack.pop_back();
        for (NodeIndex w : next(v)) {
            if (!seen[w]) {
                seen[w] = true;
                stack.push_back(w);
            }
        }
    }
    std::vector<NodeIndex> out;
    for (NodeIndex v : g.nodes()) {
        if (seen[v]) out.push_back(v);
    }
    return VarSet(std::move(out));
}

void require_observable(const CausalGraph& g, const VarSet& c, const char* what) {
    g.require_nodes(c, what);
    for (NodeIndex v : c) {
        if (!g.is_observable(v)) {
            throw InputError(std::string(what) + ": node '" + g.name(v) + "' is not observable");
        }
    }
}

}  // namespace

VarSet ancestors(const CausalGraph& g, const VarSet& c) {
    return reach(g, c, [&](NodeIndex v) -> const std::vector<NodeIndex>& { return g.parents(v); });
}

VarSet descendants(const CausalGraph& g, const VarSet& c) {
    return reach(g, c, [&](NodeIndex v) -> const std::vector<NodeIndex>& { return g.children(v); });
}

VarSet dup(const CausalGraph& g, const VarSet& c) {
    require_observable(g, c, "dup");
    // Walk backwards from C, continuing only through latent nodes.
    std::vector<bool> seen(g.universe_size(), false);
    std::vector<NodeIndex> stack;
    auto visit_parents = [&](NodeIndex v) {
        for (NodeIndex p : g.parents(v)) {
            if (!g.is_observable(p) && !seen[p]) {
                seen[p] = true;
                stack.push_back(p);
            }
        }
    };
    for (NodeIndex v : c) visit_parents(v);
    while (!stack.empty()) {
        NodeIndex u = stack.back();
        stack.pop_back();
        visit_parents(u);
    }
    std::vector<NodeIndex> out;
    for (NodeIndex v : g.nodes()) {
        if (seen[v]) out.push_back(v);
    }
    return VarSet(std::move(out));
}

CausalGraph latent_subgraph(const CausalGraph& g, const VarSet& c) {
    return g.induced(c.unite(dup(g, c)));
}

CausalGraph cut_incoming(const CausalGraph& g, const VarSet& x) {
    g.require_nodes(x, "cut_incoming");
    return g.filter_edges([&](NodeIndex, NodeIndex to) { return !x.contains(to); });
}

CausalGraph cut_outgoing(const CausalGraph& g, const VarSet& x) {
    g.require_nodes(x, "cut_outgoing");
    return g.filter_edges([&](NodeIndex from, NodeIndex) { return !x.contains(from); });
}

CausalGraph remove_barren_latents(const CausalGraph& g) {
    // A latent is kept iff it has an observable descendant; a single backward
    // sweep from the observables reaches exactly those.
    const VarSet keep = ancestors(g, g.observables());
    return g.induced(keep);
}

std::vector<NodeIndex> topo_order(const CausalGraph& g, const VarSet& scope) {
    g.require_nodes(scope, "topo_order");
    // Ancestry restricted to the scope, counted per node.
    std::vector<VarSet> scope_ancestors;
    std::vector<std::size_t> pending(scope.size());
    scope_ancestors.reserve(scope.size());
    for (std::size_t i = 0; i < scope.size(); ++i) {
        VarSet a = ancestors(g, VarSet::single(scope[i])).intersect(scope);
        a.erase(scope[i]);
        pending[i] = a.size();
        scope_ancestors.push_back(std::move(a));
    }
    std::vector<NodeIndex> order;
    std::vector<bool> emitted(scope.size(), false);
    while (order.size() < scope.size()) {
        std::size_t pick = scope.size();
        for (std::size_t i = 0; i < scope.size(); ++i) {
            if (!emitted[i] && pending[i] == 0) {
                pick = i;
                break;
            }
        }
        if (pick == scope.size()) throw StructuralError("topo_order: cycle detected");
        emitted[pick] = true;
        order.push_back(scope[pick]);
        for (std::size_t i = 0; i < scope.size(); ++i) {
            if (!emitted[i] && scope_ancestors[i].contains(scope[pick])) --pending[i];
        }
    }
    return order;
}

bool is_ancestral(const CausalGraph& g, const VarSet& s, const VarSet& within) {
    require_observable(g, within, "is_ancestral");
    if (!s.subset_of(within)) throw InputError("is_ancestral: s is not a subset of within");
    const CausalGraph gw = latent_subgraph(g, within);
    const VarSet an = ancestors(gw, s);
    return an.intersect(gw.observables()) == s;
}

// Text formats --------------------------------------------------------------------

CausalGraph parse_graph_text(std::string_view text) {
    std::vector<NodeSpec> nodes;
    std::vector<std::pair<std::string, std::string>> edges;
    std::set<std::string> declared;
    std::set<std::pair<std::string, std::string>> seen_edges;

    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw InputError("line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::vector<std::string> tok{std::istream_iterator<std::string>(fields),
                                     std::istream_iterator<std::string>()};
        if (tok.empty()) continue;
        if (tok[0] == "node") {
            if (tok.size() != 3 || (tok[2] != "obs" && tok[2] != "lat")) {
                fail("expected 'node <name> obs|lat'");
            }
            if (!declared.insert(tok[1]).second) fail("duplicate node '" + tok[1] + "'");
            nodes.push_back({tok[1], tok[2] == "obs"});
        } else if (tok[0] == "edge") {
            if (tok.size() != 3) fail("expected 'edge <parent> <child>'");
            if (!declared.count(tok[1])) fail("edge references undeclared node '" + tok[1] + "'");
            if (!declared.count(tok[2])) fail("edge references undeclared node '" + tok[2] + "'");
            if (tok[1] == tok[2]) fail("self-loop on node '" + tok[1] + "'");
            if (!seen_edges.emplace(tok[1], tok[2]).second) {
                fail("duplicate edge " + tok[1] + " -> " + tok[2]);
            }
            edges.emplace_back(tok[1], tok[2]);
        } else {
            fail("unknown directive '" + tok[0] + "'");
        }
    }
    if (nodes.empty()) throw InputError("graph declares no nodes");
    return CausalGraph::build(nodes, edges);
}

CausalGraph load_graph_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot open graph file '" + path + "'");
    std::stringstream buf;
    buf << f.rdbuf();
    try {
        return parse_graph_text(buf.str());
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

std::string to_graph_text(const CausalGraph& g) {
    std::string out;
    for (NodeIndex v : g.nodes()) {
        out += "node " + g.name(v) + (g.is_observable(v) ? " obs\n" : " lat\n");
    }
    for (auto [a, b] : g.edges()) out += "edge " + g.name(a) + " " + g.name(b) + "\n";
    return out;
}

std::string to_dot(const CausalGraph& g) {
    std::string out = "digraph G {\n";
    for (NodeIndex v : g.nodes()) {
        out += "  \"" + g.name(v) + "\"";
        if (!g.is_observable(v)) out += " [style=dashed]";
        out += ";\n";
    }
    for (auto [a, b] : g.edges()) {
        out += "  \"" + g.name(a) + "\" -> \"" + g.name(b) + "\"";
        if (!g.is_observable(a)) out += " [style=dashed]";
        out += ";\n";
    }
    out += "}\n";
    return out;
}

std::string format_set(const CausalGraph& g, const VarSet& s) {
    std::string out = "{";
    bool first = true;
    for (NodeIndex v : s) {
        if (!first) out += ", ";
        first = false;
        out += g.name(v);
    }
    return out + "}";
}

}  // namespace cid
