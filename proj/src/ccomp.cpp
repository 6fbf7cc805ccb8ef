#include "cid/ccomp.hpp"

#include <algorithm>
#include <numeric>

namespace cid {

namespace {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t v) {
        while (parent_[v] != v) {
            parent_[v] = parent_[parent_[v]];
            v = parent_[v];
        }
        return v;
    }

    void merge(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

}  // namespace

std::size_t CComponentPartition::block_index(NodeIndex v) const {
    if (v >= block_of.size() || !block_of[v]) throw InputError("node is not covered by the partition");
    return *block_of[v];
}

CComponentPartition c_components(const CausalGraph& g) {
    const std::size_t n = g.universe_size();
    DisjointSets sets(n);

    for (NodeIndex v : g.nodes()) {
        std::vector<NodeIndex> latent_parents;
        for (NodeIndex p : g.parents(v)) {
            if (!g.is_observable(p)) latent_parents.push_back(p);
        }
        // Observable v: its latent parents become related and v joins their
        // class. Latent v: each latent-latent edge relates the endpoints.
        for (NodeIndex p : latent_parents) sets.merge(v, p);
    }

    CComponentPartition out;
    out.block_of.assign(n, std::nullopt);
    std::vector<std::optional<std::size_t>> root_block(n);
    for (NodeIndex v : g.nodes()) {
        const std::size_t r = sets.find(v);
        if (!root_block[r]) {
            root_block[r] = out.blocks.size();
            out.blocks.emplace_back();
        }
        out.blocks[*root_block[r]].insert(v);
        out.block_of[v] = *root_block[r];
    }
    // Nodes are visited in index order, so block creation order is already
    // ordered by smallest member.
    return out;
}

std::vector<VarSet> observable_blocks(const CComponentPartition& p, const CausalGraph& g) {
    const VarSet obs = g.observables();
    std::vector<VarSet> out;
    for (const auto& b : p.blocks) {
        VarSet o = b.intersect(obs);
        if (!o.empty()) out.push_back(std::move(o));
    }
    return out;
}

std::vector<VarSet> observable_blocks_of(const CausalGraph& g, const VarSet& c) {
    const CausalGraph gc = latent_subgraph(g, c);
    return observable_blocks(c_components(gc), gc);
}

}  // namespace cid
