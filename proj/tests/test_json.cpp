#include <doctest.h>

#include <random>

#include "cid/json.hpp"
#include "random_graphs.hpp"
#include "test_support.hpp"

using namespace cid;
using namespace cid::testing;

TEST_SUITE("json") {

TEST_CASE("graph round-trip") {
    for (const char* name : {"chain", "coll", "bd", "fd", "bow"}) {
        const auto g = load(name);
        CHECK(graph_from_json(to_json(g)) == g);
    }
    std::mt19937_64 rng(43);
    for (int i = 0; i < 50; ++i) {
        const auto g = random_dag(rng);
        CHECK(graph_from_json(Json::parse(to_json(g).dump())) == g);
    }
}

TEST_CASE("graph JSON errors") {
    CHECK_THROWS_AS(graph_from_json(Json::parse(R"({"nodes": [{"name": "X"}], "edges": []})")), InputError);
    CHECK_THROWS_AS(graph_from_json(Json::parse(R"({"nodes": [{"name": "X", "observable": true}], "edges": [["X", "Y"]]})")),
                    InputError);
}

TEST_CASE("estimand round-trip") {
    std::mt19937_64 rng(47);
    int n = 0;
    for (int i = 0; i < 100; ++i) {
        const auto g = random_dag(rng);
        const auto [t, s] = random_query(rng, g);
        const auto r = causal_effect(t, s, g);
        if (!r.identifiable()) continue;
        const Json j = to_json(*r.estimand, g);
        CHECK(expr_from_json(Json::parse(j.dump()), g) == *r.estimand);
        ++n;
    }
    CHECK(n > 30);
}

TEST_CASE("refs with aliases") {
    const auto g = load("bd");
    const auto e = Expr::term(Term{{{g.index_of("Y"), 0}}, {{g.index_of("X"), 3}}, {{g.index_of("Z"), 12}}});
    const Json j = to_json(e, g);
    CHECK(j["do"][0] == "X'3");
    CHECK(j["given"][0] == "Z'12");
    CHECK(expr_from_json(j, g) == e);
    CHECK_THROWS_AS(expr_from_json(Json::parse(R"({"kind": "marginal", "vars": ["X'"]})"), g), InputError);
    CHECK_THROWS_AS(expr_from_json(Json::parse(R"({"kind": "marginal", "vars": ["Q"]})"), g), InputError);
    CHECK_THROWS_AS(expr_from_json(Json::parse(R"({"kind": "power"})"), g), InputError);
}

TEST_CASE("derivation round-trip") {
    for (const char* name : {"bd", "fd"}) {
        const auto g = load(name);
        const auto d = *derive_effect(vs(g, {"X"}), vs(g, {"Y"}), g).derivation;
        const Json j = to_json(d);
        const auto back = derivation_from_json(Json::parse(j.dump()));
        CHECK(back.graph == d.graph);
        CHECK(back.t == d.t);
        CHECK(back.s == d.s);
        CHECK(back.start == d.start);
        REQUIRE(back.steps.size() == d.steps.size());
        for (std::size_t i = 0; i < d.steps.size(); ++i) {
            CHECK(back.steps[i].kind == d.steps[i].kind);
            CHECK(back.steps[i].before == d.steps[i].before);
            CHECK(back.steps[i].after == d.steps[i].after);
            CHECK(back.steps[i].path == d.steps[i].path);
        }
        CHECK(total_steps(back) == total_steps(d));
        CHECK(to_json(back) == j);
        CHECK(verify_derivation(back).accepted);
    }
}

TEST_CASE("rule evidence serialization") {
    const auto bd = load("bd");
    const auto ev = rule_applicable(bd, {Rule::kExchange, {}, vs(bd, {"Y"}), vs(bd, {"X"}), vs(bd, {"Z"})});
    const Json j = to_json(ev, bd);
    CHECK(j["rule"] == 2);
    CHECK(j["z"] == Json::array({"X"}));
    CHECK(j["w"] == Json::array({"Z"}));
    CHECK(j["cut_incoming"] == Json::array());
    CHECK(j["cut_outgoing"] == Json::array({"X"}));
    CHECK(j["holds"] == true);
}

}  // TEST_SUITE
