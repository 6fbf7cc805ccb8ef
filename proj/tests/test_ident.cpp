#include <doctest.h>

#include <random>

#include "cid/ccomp.hpp"
#include "cid/ident.hpp"
#include "cid/oracle.hpp"
#include "random_graphs.hpp"
#include "test_support.hpp"

using namespace cid;
using namespace cid::testing;

namespace {

Expr P(const CausalGraph& g, std::initializer_list<const char*> names) { return Expr::marginal(vs(g, names)); }
VarRef ref(const CausalGraph& g, const char* name, std::uint32_t alias = 0) { return {g.index_of(name), alias}; }

// Q[H] must equal P_{N\H}(H) on random models.
bool q_matches(const QFactor& q, const CausalGraph& g, std::uint64_t seed, int trials = 5) {
    return check_estimand(q.estimand, g, g.observables().minus(q.scope), q.scope, trials, seed).pass;
}

double gap_on_models(const Expr& a, const Expr& b, const CausalGraph& g, int models = 20) {
    double worst = 0;
    for (int i = 0; i < models; ++i) worst = std::max(worst, max_discrepancy(a, b, random_model(g, 2, 100 + i)));
    return worst;
}

// Σ_x' P(x') P(x', z, y) / P(x', z)
Expr front_door_inner(const CausalGraph& g) {
    const auto xp = ref(g, "X", 1), z = ref(g, "Z"), y = ref(g, "Y");
    return Expr::sum({xp}, Expr::product({Expr::marginal(RefList{xp}),
                                          Expr::quotient(Expr::marginal(RefList{xp, z, y}), Expr::marginal(RefList{xp, z}))}));
}

}  // namespace

TEST_SUITE("ident") {

TEST_CASE("sum_out folds marginals") {
    const auto g = load("chain");
    CHECK(sum_out(vs(g, {"Z"}), P(g, {"X", "Z", "Y"})) == P(g, {"X", "Y"}));
    CHECK(sum_out(vs(g, {"X", "Z", "Y"}), P(g, {"X", "Z", "Y"})).is_one());
    const auto q = Expr::quotient(P(g, {"X", "Z"}), P(g, {"X"}));
    CHECK(sum_out(vs(g, {"Z"}), q).kind() == ExprKind::kSum);
}

TEST_CASE("lemma1_sum") {
    const auto fd = load("fd"), bd = load("bd");
    const QFactor fd_zy{vs(fd, {"Z", "Y"}), *compute_q(vs(fd, {"Z", "Y"}), fd).estimand};
    const auto same = lemma1_sum(fd_zy, fd_zy.scope, fd);
    CHECK(same.scope == fd_zy.scope);
    CHECK(same.estimand == fd_zy.estimand);

    const QFactor bd_zy{vs(bd, {"Z", "Y"}), *compute_q(vs(bd, {"Z", "Y"}), bd).estimand};
    const auto z = lemma1_sum(bd_zy, vs(bd, {"Z"}), bd);
    CHECK(z.scope == vs(bd, {"Z"}));
    CHECK(q_matches(z, bd, 1));
    CHECK(gap_on_models(z.estimand, P(bd, {"Z"}), bd) < 1e-12);

    // {Y} is not ancestral in G_{Z,Y} of G_BD (Z -> Y)
    CHECK_THROWS_AS(lemma1_sum(bd_zy, vs(bd, {"Y"}), bd), StructuralError);
}

TEST_CASE("lemma2_decompose on the front-door graph") {
    const auto fd = load("fd");
    const VarSet h = vs(fd, {"X", "Z", "Y"});
    const auto blocks = lemma2_decompose(h, QFactor{h, P(fd, {"X", "Z", "Y"})}, fd);
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0].scope == vs(fd, {"X", "Y"}));
    CHECK(blocks[1].scope == vs(fd, {"Z"}));
    const auto q_xy = Expr::product({P(fd, {"X"}), Expr::quotient(P(fd, {"X", "Z", "Y"}), P(fd, {"X", "Z"}))});
    const auto q_z = Expr::quotient(P(fd, {"X", "Z"}), P(fd, {"X"}));
    CHECK(gap_on_models(blocks[0].estimand, q_xy, fd) < 1e-12);
    CHECK(gap_on_models(blocks[1].estimand, q_z, fd) < 1e-12);
    for (const auto& b : blocks) CHECK(q_matches(b, fd, 2));
}

TEST_CASE("lemma2_decompose on the back-door graph gives chain-rule factors") {
    const auto bd = load("bd");
    const VarSet h = bd.observables();
    const auto blocks = lemma2_decompose(h, QFactor{h, P(bd, {"X", "Z", "Y"})}, bd);
    REQUIRE(blocks.size() == 3);
    for (const auto& b : blocks) {
        CHECK(b.scope.size() == 1);
        CHECK(q_matches(b, bd, 3));
        const char* name = bd.name(b.scope.front()).c_str();
        if (std::string(name) == "Z") CHECK(gap_on_models(b.estimand, P(bd, {"Z"}), bd) < 1e-12);
        if (std::string(name) == "X") CHECK(gap_on_models(b.estimand, Expr::quotient(P(bd, {"X", "Z"}), P(bd, {"Z"})), bd) < 1e-12);
        if (std::string(name) == "Y")
            CHECK(gap_on_models(b.estimand, Expr::quotient(P(bd, {"X", "Z", "Y"}), P(bd, {"X", "Z"})), bd) < 1e-12);
    }
}

TEST_CASE("lemma2_decompose on a single node") {
    const auto g = parse_graph_text("node A obs\n");
    const VarSet h = vs(g, {"A"});
    const auto blocks = lemma2_decompose(h, QFactor{h, P(g, {"A"})}, g);
    REQUIRE(blocks.size() == 1);
    CHECK(blocks[0].scope == h);
    CHECK(gap_on_models(blocks[0].estimand, P(g, {"A"}), g) < 1e-12);
}

TEST_CASE("identify") {
    const auto fd = load("fd"), bow = load("bow");
    const VarSet xy = vs(fd, {"X", "Y"});
    const QFactor q_xy{xy, Expr::product({P(fd, {"X"}), Expr::quotient(P(fd, {"X", "Z", "Y"}), P(fd, {"X", "Z"}))})};
    const auto r = identify(vs(fd, {"Y"}), xy, q_xy, fd);
    REQUIRE(r.identifiable());
    CHECK(gap_on_models(*r.estimand, front_door_inner(fd), fd) < 1e-12);
    CHECK(q_matches(QFactor{vs(fd, {"Y"}), *r.estimand}, fd, 4));

    const VarSet bxy = vs(bow, {"X", "Y"});
    const auto f = identify(vs(bow, {"Y"}), bxy, QFactor{bxy, P(bow, {"X", "Y"})}, bow);
    CHECK_FALSE(f.identifiable());
    REQUIRE(f.failure.has_value());
    CHECK(f.failure->c == vs(bow, {"Y"}));
    CHECK(f.failure->t == bxy);

    const auto same = identify(xy, xy, q_xy, fd);
    REQUIRE(same.identifiable());
    CHECK(*same.estimand == q_xy.estimand);
}

TEST_CASE("compute_q") {
    const auto fd = load("fd"), bow = load("bow");
    const auto r = compute_q(vs(fd, {"Z", "Y"}), fd);
    REQUIRE(r.identifiable());
    const auto hand = Expr::product({Expr::quotient(P(fd, {"X", "Z"}), P(fd, {"X"})), front_door_inner(fd)});
    CHECK(gap_on_models(*r.estimand, hand, fd) < 1e-12);
    CHECK(q_matches(QFactor{vs(fd, {"Z", "Y"}), *r.estimand}, fd, 5));

    CHECK_FALSE(compute_q(vs(bow, {"Y"}), bow).identifiable());
    const auto all = compute_q(fd.observables(), fd);
    REQUIRE(all.identifiable());
    CHECK(*all.estimand == Expr::marginal(fd.observables()));
}

TEST_CASE("causal_effect on the fixtures") {
    const auto fd = load("fd"), bd = load("bd"), bow = load("bow");
    const auto front = causal_effect(vs(fd, {"X"}), vs(fd, {"Y"}), fd);
    REQUIRE(front.identifiable());
    const auto zp = ref(fd, "Z", 1), x = ref(fd, "X"), xp = ref(fd, "X", 2), y = ref(fd, "Y");
    const auto hand_fd = Expr::sum(
        {zp}, Expr::product({Expr::quotient(Expr::marginal(RefList{x, zp}), Expr::marginal(RefList{x})),
                             Expr::sum({xp}, Expr::product({Expr::marginal(RefList{xp}),
                                                            Expr::quotient(Expr::marginal(RefList{xp, zp, y}),
                                                                           Expr::marginal(RefList{xp, zp}))}))}));
    CHECK(gap_on_models(*front.estimand, hand_fd, fd) < 1e-12);
    CHECK(check_estimand(*front.estimand, fd, vs(fd, {"X"}), vs(fd, {"Y"}), 100, 0).pass);

    const auto back = causal_effect(vs(bd, {"X"}), vs(bd, {"Y"}), bd);
    REQUIRE(back.identifiable());
    CHECK(to_pretty(*back.estimand, bd) == "Σ_{z'} [P(x, z', y) / P(x, z') · P(z')]");
    CHECK(check_estimand(*back.estimand, bd, vs(bd, {"X"}), vs(bd, {"Y"}), 100, 0).pass);

    const auto bow_r = causal_effect(vs(bow, {"X"}), vs(bow, {"Y"}), bow);
    CHECK_FALSE(bow_r.identifiable());
    CHECK(bow_r.failure->c == vs(bow, {"Y"}));
}

TEST_CASE("causal_effect input validation") {
    const auto fd = load("fd");
    CHECK_THROWS_AS(causal_effect(vs(fd, {"X"}), {}, fd), InputError);
    CHECK_THROWS_AS(causal_effect(vs(fd, {"X"}), vs(fd, {"X", "Y"}), fd), InputError);
    CHECK_THROWS_AS(causal_effect(vs(fd, {"U"}), vs(fd, {"Y"}), fd), InputError);
}

TEST_CASE("effect_ancestors") {
    const auto fd = load("fd"), bd = load("bd");
    CHECK(effect_ancestors(fd, vs(fd, {"X"}), vs(fd, {"Y"})) == vs(fd, {"Z", "Y"}));
    CHECK(effect_ancestors(bd, vs(bd, {"X"}), vs(bd, {"Y"})) == vs(bd, {"Z", "Y"}));
}

TEST_CASE("barren latents do not change the verdict") {
    const auto bow_w = parse_graph_text("node X obs\nnode Y obs\nnode U lat\nnode W lat\nedge X Y\nedge U X\nedge U Y\nedge X W\n");
    CHECK_FALSE(causal_effect(vs(bow_w, {"X"}), vs(bow_w, {"Y"}), bow_w).identifiable());
    const auto bd = load("bd");
    const auto bd_w = parse_graph_text(to_graph_text(bd) + "node W lat\nedge X W\nedge Y W\n");
    const auto a = causal_effect(vs(bd, {"X"}), vs(bd, {"Y"}), bd);
    const auto b = causal_effect(vs(bd_w, {"X"}), vs(bd_w, {"Y"}), bd_w);
    REQUIRE(b.identifiable());
    CHECK(*a.estimand == *b.estimand);
}

TEST_CASE("estimand shape and soundness on random graphs") {
    std::mt19937_64 rng(29);
    int identifiable = 0, not_identifiable = 0;
    for (int i = 0; i < 200; ++i) {
        const auto g = random_dag(rng);
        const auto [t, s] = random_query(rng, g);
        const auto r = causal_effect(t, s, g);
        if (!r.identifiable()) {
            ++not_identifiable;
            CHECK_FALSE(r.failure->c.empty());
            CHECK(r.failure->c.subset_of(r.failure->t));
            continue;
        }
        ++identifiable;
        const Expr& e = *r.estimand;
        CHECK(is_pure_estimand(e));
        CHECK(bound_vars_hygienic(e));
        CHECK(free_vars(e).subset_of(s.unite(t)));
        CHECK(s.subset_of(free_vars(e)));
        CHECK(check_estimand(e, g, t, s, 3, static_cast<std::uint64_t>(i)).pass);
        // determinism
        CHECK(*causal_effect(t, s, g).estimand == e);
    }
    CHECK(identifiable > 50);
    CHECK(not_identifiable > 5);
}

TEST_CASE("lemma laws on random graphs") {
    std::mt19937_64 rng(31);
    int l1 = 0, l2 = 0;
    for (int i = 0; i < 120; ++i) {
        const auto g = remove_barren_latents(random_dag(rng));
        const VarSet n = g.observables();
        std::bernoulli_distribution coin(0.6);
        std::vector<NodeIndex> pick;
        for (NodeIndex v : n) if (coin(rng)) pick.push_back(v);
        if (pick.empty()) continue;
        const VarSet c(pick);
        const auto q = compute_q(c, g);
        if (!q.identifiable()) continue;
        const QFactor qc{c, *q.estimand};

        // summation law: any set closed under ancestry in G_C
        const VarSet seed{c[std::uniform_int_distribution<std::size_t>(0, c.size() - 1)(rng)]};
        const VarSet w = ancestors(latent_subgraph(g, c), seed).intersect(c);
        REQUIRE(is_ancestral(g, w, c));
        CHECK(q_matches(lemma1_sum(qc, w, g), g, 1000 + i, 3));
        ++l1;

        // decomposition law: every block of G_C
        for (const auto& b : lemma2_decompose(c, qc, g)) {
            CHECK(q_matches(b, g, 2000 + i, 3));
            ++l2;
        }
    }
    CHECK(l1 > 40);
    CHECK(l2 > 60);
}

}  // TEST_SUITE
