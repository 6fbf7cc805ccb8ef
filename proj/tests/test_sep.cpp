#include <doctest.h>

#include <random>

#include "cid/docalc.hpp"
#include "cid/separation.hpp"
#include "random_graphs.hpp"
#include "test_support.hpp"

using namespace cid;
using namespace cid::testing;

namespace {

// Reference separation test: x and y are d-separated given z iff they are
// disconnected in the moralised ancestral graph of x ∪ y ∪ z with z removed.
bool moral_separated(const CausalGraph& g, const VarSet& x, const VarSet& y, const VarSet& z) {
    const VarSet keep = ancestors(g, x.unite(y).unite(z));
    const std::size_t n = g.universe_size();
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    auto link = [&](NodeIndex a, NodeIndex b) { adj[a][b] = adj[b][a] = true; };
    for (NodeIndex v : keep) {
        std::vector<NodeIndex> pa;
        for (NodeIndex p : g.parents(v)) {
            if (!keep.contains(p)) continue;
            link(p, v);
            pa.push_back(p);
        }
        for (std::size_t i = 0; i < pa.size(); ++i)
            for (std::size_t j = i + 1; j < pa.size(); ++j) link(pa[i], pa[j]);
    }
    std::vector<bool> seen(n, false);
    std::vector<NodeIndex> stack(x.begin(), x.end());
    for (NodeIndex v : x) seen[v] = true;
    while (!stack.empty()) {
        NodeIndex v = stack.back();
        stack.pop_back();
        if (y.contains(v)) return false;
        for (NodeIndex u : keep) {
            if (adj[v][u] && !seen[u] && !z.contains(u)) {
                seen[u] = true;
                stack.push_back(u);
            }
        }
    }
    return true;
}

VarSet random_subset(std::mt19937_64& rng, const VarSet& from, double p) {
    std::bernoulli_distribution b(p);
    std::vector<NodeIndex> out;
    for (NodeIndex v : from) if (b(rng)) out.push_back(v);
    return VarSet(out);
}

}  // namespace

TEST_SUITE("sep") {

TEST_CASE("d_separated examples") {
    const auto chain = load("chain"), coll = load("coll"), bd = load("bd");
    CHECK(d_separated(chain, {vs(chain, {"X"}), vs(chain, {"Y"}), vs(chain, {"Z"})}));
    CHECK_FALSE(d_separated(chain, {vs(chain, {"X"}), vs(chain, {"Y"}), {}}));
    CHECK_FALSE(d_separated(coll, {vs(coll, {"X"}), vs(coll, {"Y"}), vs(coll, {"Z"})}));
    CHECK(d_separated(coll, {vs(coll, {"X"}), vs(coll, {"Y"}), {}}));
    const auto bd_cut = cut_outgoing(bd, vs(bd, {"X"}));
    CHECK(d_separated(bd_cut, {vs(bd, {"Y"}), vs(bd, {"X"}), vs(bd, {"Z"})}));
    CHECK_FALSE(d_separated(bd_cut, {vs(bd, {"Y"}), vs(bd, {"X"}), {}}));
}

TEST_CASE("descendant of a collider opens it") {
    const auto g = parse_graph_text("node X obs\nnode Y obs\nnode C obs\nnode D obs\nedge X C\nedge Y C\nedge C D\n");
    CHECK_FALSE(d_separated(g, {vs(g, {"X"}), vs(g, {"Y"}), vs(g, {"D"})}));
    CHECK(d_separated(g, {vs(g, {"X"}), vs(g, {"Y"}), {}}));
}

TEST_CASE("overlapping sets are rejected") {
    const auto chain = load("chain");
    CHECK_THROWS_AS(d_separated(chain, {vs(chain, {"X"}), vs(chain, {"X", "Y"}), {}}), InputError);
    CHECK_THROWS_AS(d_separated(chain, {vs(chain, {"X"}), vs(chain, {"Y"}), vs(chain, {"Y"})}), InputError);
    CHECK_THROWS_AS(rule_applicable(chain, {Rule::kAction, vs(chain, {"X"}), vs(chain, {"Y"}), vs(chain, {"X"}), {}}),
                    InputError);
}

TEST_CASE("z_w") {
    const auto bd = load("bd"), fd = load("fd");
    CHECK(z_w(bd, {}, vs(bd, {"X"}), {}) == vs(bd, {"X"}));
    CHECK(z_w(bd, {}, vs(bd, {"Z"}), vs(bd, {"Y"})).empty());
    CHECK(z_w(fd, {}, vs(fd, {"X"}), vs(fd, {"Y"})).empty());
    // cutting into Z removes X's route to W = {Z}
    const auto chain = load("chain");
    CHECK(z_w(chain, vs(chain, {"Z"}), vs(chain, {"X"}), vs(chain, {"Y"})) == vs(chain, {"X"}));
}

TEST_CASE("rule_applicable examples") {
    const auto bd = load("bd"), bow = load("bow"), fd = load("fd");
    const auto r2 = rule_applicable(bd, {Rule::kExchange, {}, vs(bd, {"Y"}), vs(bd, {"X"}), vs(bd, {"Z"})});
    CHECK(r2.holds);
    CHECK(r2.cut_incoming.empty());
    CHECK(r2.cut_outgoing == vs(bd, {"X"}));
    CHECK(r2.query.z == vs(bd, {"Z"}));

    const auto r3 = rule_applicable(bow, {Rule::kAction, {}, vs(bow, {"Y"}), vs(bow, {"X"}), {}});
    CHECK_FALSE(r3.holds);
    CHECK(r3.cut_incoming == vs(bow, {"X"}));

    for (const auto& g : {bd, bow, fd}) {
        const VarSet n = g.observables();
        const auto r1 = rule_applicable(g, {Rule::kObservation, {}, VarSet{n[0]}, {}, {}});
        CHECK(r1.holds);
    }
}

TEST_CASE("d_separated agrees with the moralisation criterion") {
    std::mt19937_64 rng(3);
    int separated = 0;
    for (int i = 0; i < 400; ++i) {
        const auto g = random_dag(rng, {6, 3, 0.35});
        const VarSet all = g.nodes();
        std::vector<NodeIndex> v(all.begin(), all.end());
        std::shuffle(v.begin(), v.end(), rng);
        const VarSet x{v[0]};
        const VarSet y{v[1]};
        const VarSet z = random_subset(rng, VarSet(std::vector<NodeIndex>(v.begin() + 2, v.end())), 0.4);
        const bool sep = d_separated(g, {x, y, z});
        CHECK(sep == moral_separated(g, x, y, z));
        CHECK(sep == d_separated(g, {y, x, z}));
        separated += sep;
        // deleting edges never unblocks a path
        if (sep) CHECK(d_separated(cut_outgoing(cut_incoming(g, z), x), {x, y, z}));
    }
    CHECK(separated > 50);
}

TEST_CASE("rule 1 implies rules 2 and 3 after expansion") {
    std::mt19937_64 rng(5);
    int applicable = 0;
    for (int i = 0; i < 600; ++i) {
        const auto g = random_dag(rng);
        const VarSet n = g.observables();
        std::vector<NodeIndex> v(n.begin(), n.end());
        std::shuffle(v.begin(), v.end(), rng);
        const VarSet y{v[0]};
        VarSet x, z, w;
        std::uniform_int_distribution<int> which(0, 3);
        for (std::size_t k = 1; k < v.size(); ++k) {
            switch (which(rng)) {
                case 0: x.insert(v[k]); break;
                case 1: z.insert(v[k]); break;
                case 2: w.insert(v[k]); break;
                default: break;
            }
        }
        const RuleInstance r1{Rule::kObservation, x, y, z, w};
        if (!rule_applicable(g, r1).holds) continue;
        ++applicable;
        const auto [r2, r3] = expand_rule1(g, r1);
        CHECK(r2.rule == Rule::kExchange);
        CHECK(r3.rule == Rule::kAction);
        CHECK(rule_applicable(g, r2).holds);
        CHECK(rule_applicable(g, r3).holds);
    }
    CHECK(applicable > 100);
}

}  // TEST_SUITE
