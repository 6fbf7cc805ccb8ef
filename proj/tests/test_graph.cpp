#include <doctest.h>

#include <random>

#include "cid/graph.hpp"
#include "random_graphs.hpp"
#include "test_support.hpp"

using namespace cid;
using namespace cid::testing;

TEST_SUITE("graph") {

TEST_CASE("ancestors") {
    const auto fd = load("fd"), chain = load("chain"), bow = load("bow");
    CHECK(ancestors(fd, vs(fd, {"Y"})) == vs(fd, {"X", "Z", "Y", "U"}));
    CHECK(ancestors(chain, vs(chain, {"X"})) == vs(chain, {"X"}));
    CHECK(ancestors(bow, vs(bow, {"Y"})) == vs(bow, {"X", "Y", "U"}));
}

TEST_CASE("descendants") {
    const auto fd = load("fd"), chain = load("chain");
    CHECK(descendants(chain, vs(chain, {"X"})) == vs(chain, {"X", "Z", "Y"}));
    CHECK(descendants(chain, vs(chain, {"Y"})) == vs(chain, {"Y"}));
    CHECK(descendants(fd, vs(fd, {"U"})) == vs(fd, {"U", "X", "Z", "Y"}));
}

TEST_CASE("dup") {
    const auto fd = load("fd"), bd = load("bd");
    CHECK(dup(fd, vs(fd, {"X", "Y"})) == vs(fd, {"U"}));
    CHECK(dup(fd, vs(fd, {"Z"})).empty());
    CHECK(dup(bd, vs(bd, {"X", "Z", "Y"})).empty());
}

TEST_CASE("dup follows latent chains only") {
    const auto g = parse_graph_text("node A obs\nnode B obs\nnode U1 lat\nnode U2 lat\nedge U1 U2\nedge U2 A\nedge U1 B\n");
    CHECK(dup(g, vs(g, {"A"})) == vs(g, {"U1", "U2"}));
    CHECK(dup(g, vs(g, {"B"})) == vs(g, {"U1"}));
}

TEST_CASE("latent_subgraph") {
    const auto fd = load("fd"), bow = load("bow");
    const auto zy = latent_subgraph(fd, vs(fd, {"Z", "Y"}));
    CHECK(zy.nodes() == vs(fd, {"Z", "Y", "U"}));
    CHECK(edge_names(zy) == std::vector<std::string>{"U->Y", "Z->Y"});
    CHECK(latent_subgraph(fd, vs(fd, {"X", "Z", "Y"})) == fd);
    const auto y = latent_subgraph(bow, vs(bow, {"Y"}));
    CHECK(y.nodes() == vs(bow, {"Y", "U"}));
    CHECK(edge_names(y) == std::vector<std::string>{"U->Y"});
}

TEST_CASE("cut_incoming and cut_outgoing") {
    const auto bd = load("bd"), bow = load("bow"), chain = load("chain");
    CHECK(edge_names(cut_incoming(bd, vs(bd, {"X"}))) == std::vector<std::string>{"X->Y", "Z->Y"});
    CHECK(cut_incoming(bd, {}) == bd);
    CHECK(edge_names(cut_incoming(bow, vs(bow, {"X"}))) == std::vector<std::string>{"U->Y", "X->Y"});
    CHECK(edge_names(cut_outgoing(bd, vs(bd, {"X"}))) == std::vector<std::string>{"Z->X", "Z->Y"});
    CHECK(cut_outgoing(bd, {}) == bd);
    CHECK(edge_names(cut_outgoing(chain, vs(chain, {"Z"}))) == std::vector<std::string>{"X->Z"});
}

TEST_CASE("remove_barren_latents") {
    const auto bow = load("bow"), fd = load("fd");
    const auto bow_w = parse_graph_text("node X obs\nnode Y obs\nnode U lat\nnode W lat\nedge X Y\nedge U X\nedge U Y\n");
    const auto pruned = remove_barren_latents(bow_w);
    CHECK(pruned.nodes() == vs(bow_w, {"X", "Y", "U"}));
    CHECK(edge_names(pruned) == edge_names(bow));
    CHECK(remove_barren_latents(fd) == fd);
    const auto chain = parse_graph_text("node A obs\nnode U1 lat\nnode U2 lat\nedge U1 U2\n");
    CHECK(remove_barren_latents(chain).nodes() == vs(chain, {"A"}));
}

TEST_CASE("topo_order") {
    const auto fd = load("fd");
    CHECK(topo_order(fd, vs(fd, {"X", "Z", "Y"})) == std::vector<NodeIndex>{0, 1, 2});
    CHECK(topo_order(fd, {}).empty());
    const auto coll = parse_graph_text("node X obs\nnode Y obs\nnode Z obs\nedge X Z\nedge Y Z\n");
    CHECK(topo_order(coll, vs(coll, {"X", "Y", "Z"})) == std::vector<NodeIndex>{0, 1, 2});
    // order follows ancestry through nodes outside the scope
    const auto chain = parse_graph_text("node Y obs\nnode Z obs\nnode X obs\nedge X Z\nedge Z Y\n");
    CHECK(topo_order(chain, vs(chain, {"X", "Y"})) == std::vector<NodeIndex>{2, 0});
}

TEST_CASE("is_ancestral") {
    const auto fd = load("fd"), bow = load("bow");
    CHECK(is_ancestral(fd, vs(fd, {"Z", "Y"}), vs(fd, {"Z", "Y"})));
    CHECK(is_ancestral(fd, vs(fd, {"Y"}), vs(fd, {"X", "Y"})));
    CHECK_FALSE(is_ancestral(bow, vs(bow, {"Y"}), vs(bow, {"X", "Y"})));
    CHECK(is_ancestral(bow, vs(bow, {"X", "Y"}), vs(bow, {"X", "Y"})));
}

TEST_CASE("parsing errors") {
    CHECK_THROWS_WITH_AS(parse_graph_text("node X obs\nedge X Y\nnode Y obs\n"), doctest::Contains("line 2"), InputError);
    CHECK_THROWS_WITH_AS(parse_graph_text("node X obs\nedge X X\n"), doctest::Contains("self-loop"), InputError);
    CHECK_THROWS_WITH_AS(parse_graph_text("node X obs\nnode X lat\n"), doctest::Contains("duplicate node"), InputError);
    CHECK_THROWS_WITH_AS(parse_graph_text("node X obs\nnode Y obs\nedge X Y\nedge X Y\n"),
                         doctest::Contains("duplicate edge"), InputError);
    CHECK_THROWS_WITH_AS(parse_graph_text("# nothing\n"), doctest::Contains("no nodes"), InputError);
    CHECK_THROWS_WITH_AS(parse_graph_text("node X maybe\n"), doctest::Contains("line 1"), InputError);
    CHECK_THROWS_AS(parse_graph_text("node X' obs\n"), InputError);
    CHECK_THROWS_AS(load_graph_file(fixture("missing.cg")), InputError);
}

TEST_CASE("cycles are reported with their members") {
    try {
        parse_graph_text("node A obs\nnode B obs\nnode C obs\nedge A B\nedge B C\nedge C A\n");
        FAIL("cycle accepted");
    } catch (const InputError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("cycle") != std::string::npos);
        for (const char* n : {"A", "B", "C"}) CHECK(msg.find(n) != std::string::npos);
    }
}

TEST_CASE("text and DOT output") {
    const auto fd = load("fd");
    CHECK(parse_graph_text(to_graph_text(fd)) == fd);
    const std::string dot = to_dot(fd);
    CHECK(dot.find("\"U\" [style=dashed]") != std::string::npos);
    CHECK(dot.find("\"X\" -> \"Z\"") != std::string::npos);
    CHECK(format_set(fd, vs(fd, {"Y", "X"})) == "{X, Y}");
}

TEST_CASE("structural properties on random graphs") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 300; ++i) {
        const auto g = random_dag(rng, {6, 3, 0.4});
        const VarSet all = g.nodes();
        std::uniform_int_distribution<int> coin(0, 1);
        std::vector<NodeIndex> pick;
        for (NodeIndex v : all) if (coin(rng)) pick.push_back(v);
        const VarSet c(pick);

        const VarSet an = ancestors(g, c), de = descendants(g, c);
        CHECK(c.subset_of(an));
        CHECK(c.subset_of(de));
        for (NodeIndex v : all) {
            // v is an ancestor of c iff some member of c descends from v
            CHECK(an.contains(v) == !descendants(g, VarSet{v}).intersect(c).empty());
        }

        const auto order = topo_order(g, all);
        REQUIRE(order.size() == all.size());
        CHECK(VarSet(order) == all);
        std::vector<std::size_t> pos(g.universe_size());
        for (std::size_t k = 0; k < order.size(); ++k) pos[order[k]] = k;
        for (const auto& [p, ch] : g.edges()) CHECK(pos[p] < pos[ch]);

        // mutilations keep a valid order (acyclicity) and only delete edges
        for (const auto& h : {cut_incoming(g, c), cut_outgoing(g, c), latent_subgraph(g, c.intersect(g.observables())),
                              remove_barren_latents(g)}) {
            CHECK(topo_order(h, h.nodes()).size() == h.nodes().size());
            for (const auto& [p, ch] : h.edges()) CHECK(g.has_edge(p, ch));
        }
        for (const auto& [p, ch] : cut_incoming(g, c).edges()) CHECK_FALSE(c.contains(ch));
        for (const auto& [p, ch] : cut_outgoing(g, c).edges()) CHECK_FALSE(c.contains(p));

        const VarSet obs_c = c.intersect(g.observables());
        const auto gc = latent_subgraph(g, obs_c);
        CHECK(gc.nodes() == obs_c.unite(dup(g, obs_c)));
        CHECK(is_ancestral(g, obs_c, obs_c));

        const auto pruned = remove_barren_latents(g);
        CHECK(remove_barren_latents(pruned) == pruned);
        CHECK(pruned.observables() == g.observables());
        for (NodeIndex u : pruned.latents()) CHECK_FALSE(descendants(pruned, VarSet{u}).intersect(pruned.observables()).empty());
    }
}

}  // TEST_SUITE
