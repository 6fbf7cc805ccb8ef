#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cid/graph.hpp"

namespace cid::testing {

struct RandomGraphSpec {
    int max_observable = 5;
    int max_latent = 3;
    double edge_probability = 0.4;
};

// Random DAG: nodes in a random order, forward edges only. Observable nodes
// are named A, B, ...; latent nodes U0, U1, ...
inline CausalGraph random_dag(std::mt19937_64& rng, const RandomGraphSpec& spec = {}) {
    std::uniform_int_distribution<int> n_obs(2, spec.max_observable);
    std::uniform_int_distribution<int> n_lat(0, spec.max_latent);
    std::bernoulli_distribution edge(spec.edge_probability);
    std::vector<NodeSpec> nodes;
    const int obs = n_obs(rng);
    const int lat = n_lat(rng);
    for (int i = 0; i < obs; ++i) nodes.push_back({std::string(1, static_cast<char>('A' + i)), true});
    for (int i = 0; i < lat; ++i) nodes.push_back({"U" + std::to_string(i), false});

    std::vector<std::size_t> order(nodes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::pair<std::string, std::string>> edges;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& from = nodes[order[i]];
        std::vector<std::size_t> later(order.begin() + static_cast<long>(i) + 1, order.end());
        if (!from.observable) {
            // a latent confounder: two or more children, so it is never barren by construction
            std::shuffle(later.begin(), later.end(), rng);
            const std::size_t k = std::min<std::size_t>(later.size(), 2 + (edge(rng) ? 1 : 0));
            for (std::size_t j = 0; j < k; ++j) edges.emplace_back(from.name, nodes[later[j]].name);
            continue;
        }
        for (std::size_t j : later) {
            if (edge(rng)) edges.emplace_back(from.name, nodes[j].name);
        }
    }
    return CausalGraph::build(nodes, edges);
}

// Random non-empty disjoint (t, s) over the observables.
inline std::pair<VarSet, VarSet> random_query(std::mt19937_64& rng, const CausalGraph& g) {
    const VarSet n = g.observables();
    std::vector<NodeIndex> v(n.begin(), n.end());
    std::shuffle(v.begin(), v.end(), rng);
    std::uniform_int_distribution<std::size_t> split(1, v.size() - 1);
    const std::size_t k = split(rng);
    std::uniform_int_distribution<std::size_t> take(1, v.size() - k);
    const std::size_t m = take(rng);
    VarSet t(std::vector<NodeIndex>(v.begin(), v.begin() + static_cast<long>(k)));
    VarSet s(std::vector<NodeIndex>(v.begin() + static_cast<long>(k), v.begin() + static_cast<long>(k + m)));
    return {t, s};
}

}  // namespace cid::testing
