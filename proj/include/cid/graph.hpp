#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cid/errors.hpp"

namespace cid {

using NodeIndex = std::uint32_t;

/// Ordered set of node indices. Members are kept sorted (graph index order),
/// which is the canonical order for every set-valued output.
class VarSet {
public:
    VarSet() = default;
    VarSet(std::initializer_list<NodeIndex> init);
    explicit VarSet(std::vector<NodeIndex> members);

    static VarSet single(NodeIndex v) { return VarSet{v}; }

    bool contains(NodeIndex v) const;
    bool empty() const { return members_.empty(); }
    std::size_t size() const { return members_.size(); }

    void insert(NodeIndex v);
    void erase(NodeIndex v);

    VarSet unite(const VarSet& other) const;
    VarSet intersect(const VarSet& other) const;
    VarSet minus(const VarSet& other) const;
    bool subset_of(const VarSet& other) const;
    bool disjoint(const VarSet& other) const;

    auto begin() const { return members_.begin(); }
    auto end() const { return members_.end(); }
    NodeIndex front() const { return members_.front(); }
    NodeIndex operator[](std::size_t i) const { return members_[i]; }
    const std::vector<NodeIndex>& members() const { return members_; }

    friend bool operator==(const VarSet&, const VarSet&) = default;
    friend auto operator<=>(const VarSet& a, const VarSet& b) { return a.members_ <=> b.members_; }

private:
    std::vector<NodeIndex> members_;
};

struct NodeSpec {
    std::string name;
    bool observable = true;
};

/// Directed acyclic graph over observable and latent nodes.
///
/// Graphs are immutable values. Subgraph and mutilation operations return new
/// graphs sharing the parent's node index space: removed nodes simply stop
/// being present, so a VarSet computed on G is meaningful on G_C or G_overline(X).
class CausalGraph {
public:
    CausalGraph() = default;

    /// Validates names, endpoints, self-loops, duplicate edges and acyclicity.
    static CausalGraph build(const std::vector<NodeSpec>& nodes,
                             const std::vector<std::pair<std::string, std::string>>& edges);

    std::size_t universe_size() const { return universe_ ? universe_->names.size() : 0; }
    const VarSet& nodes() const { return present_; }
    VarSet observables() const;
    VarSet latents() const;

    bool contains(NodeIndex v) const { return present_.contains(v); }
    bool is_observable(NodeIndex v) const { return universe_->observable[v]; }
    const std::string& name(NodeIndex v) const { return universe_->names[v]; }
    NodeIndex index_of(std::string_view name) const;
    bool has_name(std::string_view name) const;
    VarSet resolve(const std::vector<std::string>& names) const;
    std::vector<std::string> names_of(const VarSet& s) const;

    const std::vector<NodeIndex>& parents(NodeIndex v) const { return parents_[v]; }
    const std::vector<NodeIndex>& children(NodeIndex v) const { return children_[v]; }
    bool has_edge(NodeIndex from, NodeIndex to) const;
    std::vector<std::pair<NodeIndex, NodeIndex>> edges() const;
    std::size_t edge_count() const;

    /// Same universe, keeps only `keep` and the edges between kept nodes.
    CausalGraph induced(const VarSet& keep) const;
    /// Same node set, keeps only edges accepted by `keep_edge(from, to)`.
    template <typename Pred>
    CausalGraph filter_edges(Pred keep_edge) const;

    /// Throws InputError naming the first index not present in the graph.
    void require_nodes(const VarSet& s, const char* what) const;

    friend bool operator==(const CausalGraph& a, const CausalGraph& b);

private:
    struct Universe {
        std::vector<std::string> names;
        std::vector<bool> observable;
        std::unordered_map<std::string, NodeIndex> index;
    };

    void add_edge_unchecked(NodeIndex from, NodeIndex to);

    std::shared_ptr<const Universe> universe_;
    VarSet present_;
    std::vector<std::vector<NodeIndex>> parents_;
    std::vector<std::vector<NodeIndex>> children_;
};

template <typename Pred>
CausalGraph CausalGraph::filter_edges(Pred keep_edge) const {
    CausalGraph out;
    out.universe_ = universe_;
    out.present_ = present_;
    out.parents_.assign(parents_.size(), {});
    out.children_.assign(children_.size(), {});
    for (NodeIndex v : present_) {
        for (NodeIndex c : children_[v]) {
            if (keep_edge(v, c)) out.add_edge_unchecked(v, c);
        }
    }
    return out;
}

// Structural operations -----------------------------------------------------

VarSet ancestors(const CausalGraph& g, const VarSet& c);
VarSet descendants(const CausalGraph& g, const VarSet& c);

/// Latent nodes with a directed path into `c` whose internal nodes are all latent.
VarSet dup(const CausalGraph& g, const VarSet& c);

/// G_C: the subgraph over C ∪ DUP(C).
CausalGraph latent_subgraph(const CausalGraph& g, const VarSet& c);

/// G_overline(X): drops every edge pointing into X.
CausalGraph cut_incoming(const CausalGraph& g, const VarSet& x);
/// G_underline(X): drops every edge leaving X.
CausalGraph cut_outgoing(const CausalGraph& g, const VarSet& x);

/// Repeatedly deletes latent nodes without observable descendants.
CausalGraph remove_barren_latents(const CausalGraph& g);

/// Deterministic topological order of `scope`: a node is emitted once all of
/// its ancestors (in g) that lie in scope have been emitted; ties go to the
/// smallest index.
std::vector<NodeIndex> topo_order(const CausalGraph& g, const VarSet& scope);

/// True iff s = An(s) ∩ N evaluated in latent_subgraph(g, within).
bool is_ancestral(const CausalGraph& g, const VarSet& s, const VarSet& within);

// Text formats ----------------------------------------------------------------

/// Parses the line format `node <name> obs|lat` / `edge <parent> <child>`.
CausalGraph parse_graph_text(std::string_view text);
CausalGraph load_graph_file(const std::string& path);
std::string to_graph_text(const CausalGraph& g);
/// DOT export; latent nodes are drawn dashed.
std::string to_dot(const CausalGraph& g);

std::string format_set(const CausalGraph& g, const VarSet& s);

}  // namespace cid
