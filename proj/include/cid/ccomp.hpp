#pragma once

#include <optional>
#include <vector>

#include "cid/graph.hpp"

namespace cid {

/// Partition of a graph's nodes into c-components, blocks ordered by their
/// smallest member index.
struct CComponentPartition {
    std::vector<VarSet> blocks;
    std::vector<std::optional<std::size_t>> block_of;  // indexed by NodeIndex

    std::size_t block_index(NodeIndex v) const;
};

CComponentPartition c_components(const CausalGraph& g);

/// Blocks intersected with the observables, empty intersections dropped.
std::vector<VarSet> observable_blocks(const CComponentPartition& p, const CausalGraph& g);

/// Observable c-component blocks of G_C (the H_i = H'_i ∩ H of the lemmas).
std::vector<VarSet> observable_blocks_of(const CausalGraph& g, const VarSet& c);

}  // namespace cid
