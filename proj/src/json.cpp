#include "cid/json.hpp"

#include <string>

namespace cid {

Json to_json(const CausalGraph& g) {
    Json nodes = Json::array();
    for (NodeIndex v : g.nodes()) nodes.push_back({{"name", g.name(v)}, {"observable", g.is_observable(v)}});
    Json edges = Json::array();
    for (const auto& [p, c] : g.edges()) edges.push_back({g.name(p), g.name(c)});
    return {{"nodes", nodes}, {"edges", edges}};
}

CausalGraph graph_from_json(const Json& j) {
    try {
        std::vector<NodeSpec> nodes;
        for (const auto& n : j.at("nodes")) {
            nodes.push_back({n.at("name").get<std::string>(), n.at("observable").get<bool>()});
        }
        std::vector<std::pair<std::string, std::string>> edges;
        for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
        return CausalGraph::build(nodes, edges);
    } catch (const Json::exception& e) {
        throw InputError(std::string("malformed graph JSON: ") + e.what());
    }
}

Json names_json(const CausalGraph& g, const VarSet& s) {
    Json out = Json::array();
    for (NodeIndex v : s) out.push_back(g.name(v));
    return out;
}

VarSet names_from_json(const CausalGraph& g, const Json& j) {
    std::vector<NodeIndex> out;
    for (const auto& n : j) out.push_back(g.index_of(n.get<std::string>()));
    return VarSet(std::move(out));
}

namespace {

Json refs_json(const CausalGraph& g, const RefList& refs) {
    Json out = Json::array();
    for (const auto& r : refs) {
        out.push_back(r.alias == 0 ? g.name(r.node) : g.name(r.node) + "'" + std::to_string(r.alias));
    }
    return out;
}

RefList refs_from_json(const CausalGraph& g, const Json& j) {
    RefList out;
    for (const auto& item : j) {
        const std::string s = item.get<std::string>();
        const auto q = s.find('\'');
        if (q == std::string::npos) {
            out.push_back({g.index_of(s), 0});
            continue;
        }
        const std::string alias = s.substr(q + 1);
        if (alias.empty() || alias.find_first_not_of("0123456789") != std::string::npos) {
            throw InputError("malformed variable reference '" + s + "'");
        }
        out.push_back({g.index_of(s.substr(0, q)), static_cast<std::uint32_t>(std::stoul(alias))});
    }
    std::sort(out.begin(), out.end());
    return out;
}

Json path_json(const Path& p) {
    Json out = Json::array();
    for (auto i : p) out.push_back(i);
    return out;
}

}  // namespace

Json to_json(const Expr& e, const CausalGraph& g) {
    switch (e.kind()) {
        case ExprKind::kOne:
            return {{"kind", "one"}};
        case ExprKind::kTerm: {
            const Term& t = e.term();
            if (t.is_marginal()) return {{"kind", "marginal"}, {"vars", refs_json(g, t.outcome)}};
            return {{"kind", "term"},
                    {"outcome", refs_json(g, t.outcome)},
                    {"do", refs_json(g, t.intervened)},
                    {"given", refs_json(g, t.observed)}};
        }
        case ExprKind::kSum:
            return {{"kind", "sum"}, {"bound", refs_json(g, e.bound())}, {"body", to_json(e.body(), g)}};
        case ExprKind::kProduct: {
            Json f = Json::array();
            for (const auto& c : e.children()) f.push_back(to_json(c, g));
            return {{"kind", "product"}, {"factors", f}};
        }
        case ExprKind::kQuotient:
            return {{"kind", "quotient"}, {"num", to_json(e.numerator(), g)}, {"den", to_json(e.denominator(), g)}};
    }
    return {};
}

Expr expr_from_json(const Json& j, const CausalGraph& g) {
    try {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "one") return Expr::one();
        if (kind == "marginal") return Expr::marginal(refs_from_json(g, j.at("vars")));
        if (kind == "term") {
            return Expr::term(Term{refs_from_json(g, j.at("outcome")), refs_from_json(g, j.value("do", Json::array())),
                                   refs_from_json(g, j.value("given", Json::array()))});
        }
        if (kind == "sum") return Expr::sum(refs_from_json(g, j.at("bound")), expr_from_json(j.at("body"), g));
        if (kind == "product") {
            std::vector<Expr> f;
            for (const auto& c : j.at("factors")) f.push_back(expr_from_json(c, g));
            return Expr::product(std::move(f));
        }
        if (kind == "quotient") return Expr::quotient(expr_from_json(j.at("num"), g), expr_from_json(j.at("den"), g));
        throw InputError("unknown expression kind '" + kind + "'");
    } catch (const Json::exception& e) {
        throw InputError(std::string("malformed expression JSON: ") + e.what());
    }
}

Json to_json(const RuleEvidence& ev, const CausalGraph& g) {
    const RuleInstance& r = ev.instance;
    return {{"rule", rule_number(r.rule)},
            {"x", names_json(g, r.x)},
            {"y", names_json(g, r.y)},
            {"z", names_json(g, r.z)},
            {"w", names_json(g, r.w)},
            {"cut_incoming", names_json(g, ev.cut_incoming)},
            {"cut_outgoing", names_json(g, ev.cut_outgoing)},
            {"query", {{"x", names_json(g, ev.query.x)}, {"y", names_json(g, ev.query.y)}, {"given", names_json(g, ev.query.z)}}},
            {"holds", ev.holds}};
}

namespace {

Json steps_json(const Derivation& d, const CausalGraph& g);

Json step_json(const DerivationStep& s, const CausalGraph& g) {
    Json just;
    switch (s.kind) {
        case StepKind::kRule1:
        case StepKind::kRule2:
        case StepKind::kRule3:
            just = to_json(s.evidence ? *s.evidence : rule_applicable(g, s.rule), g);
            break;
        case StepKind::kChainRule:
            just = {{"form", s.chain == ChainForm::kSplit ? "split" : "conditional"}, {"vars", names_json(g, s.vars)}};
            break;
        case StepKind::kMarginalize:
        case StepKind::kNormalizeToOne:
            just = {{"vars", names_json(g, s.vars)}, {"factor", s.factor}};
            break;
        case StepKind::kFactorSubstitute: {
            Json f = Json::array();
            for (auto i : s.factors) f.push_back(i);
            just = {{"factors", f}};
            if (s.lemma) just["lemma"] = {{"start", to_json(s.lemma->start, g)}, {"steps", steps_json(*s.lemma, g)}};
            break;
        }
    }
    return {{"kind", step_kind_name(s.kind)},
            {"before", to_json(s.before, g)},
            {"after", to_json(s.after, g)},
            {"path", path_json(s.path)},
            {"reversed", s.reversed},
            {"justification", just}};
}

Json steps_json(const Derivation& d, const CausalGraph& g) {
    Json out = Json::array();
    for (const auto& s : d.steps) out.push_back(step_json(s, g));
    return out;
}

std::vector<DerivationStep> steps_from_json(const Json& j, const CausalGraph& g);

DerivationStep step_from_json(const Json& j, const CausalGraph& g) {
    DerivationStep s;
    s.kind = step_kind_from_name(j.at("kind").get<std::string>());
    s.before = expr_from_json(j.at("before"), g);
    s.after = expr_from_json(j.at("after"), g);
    for (const auto& i : j.value("path", Json::array())) s.path.push_back(i.get<std::size_t>());
    s.reversed = j.value("reversed", false);
    const Json& just = j.at("justification");
    switch (s.kind) {
        case StepKind::kRule1:
        case StepKind::kRule2:
        case StepKind::kRule3:
            s.rule = RuleInstance{rule_from_number(just.at("rule").get<int>()), names_from_json(g, just.at("x")),
                                  names_from_json(g, just.at("y")), names_from_json(g, just.at("z")),
                                  names_from_json(g, just.at("w"))};
            break;
        case StepKind::kChainRule: {
            const std::string form = just.at("form").get<std::string>();
            if (form != "split" && form != "conditional") throw InputError("unknown chain rule form '" + form + "'");
            s.chain = form == "split" ? ChainForm::kSplit : ChainForm::kConditional;
            s.vars = names_from_json(g, just.at("vars"));
            break;
        }
        case StepKind::kMarginalize:
        case StepKind::kNormalizeToOne:
            s.vars = names_from_json(g, just.at("vars"));
            s.factor = just.value("factor", std::size_t{0});
            break;
        case StepKind::kFactorSubstitute:
            for (const auto& i : just.value("factors", Json::array())) s.factors.push_back(i.get<std::size_t>());
            if (just.contains("lemma")) {
                Derivation lemma;
                lemma.graph = g;
                lemma.start = expr_from_json(just["lemma"].at("start"), g);
                lemma.steps = steps_from_json(just["lemma"].at("steps"), g);
                s.lemma = std::make_shared<const Derivation>(std::move(lemma));
            }
            break;
    }
    return s;
}

std::vector<DerivationStep> steps_from_json(const Json& j, const CausalGraph& g) {
    std::vector<DerivationStep> out;
    for (const auto& s : j) out.push_back(step_from_json(s, g));
    return out;
}

}  // namespace

Json to_json(const Derivation& d) {
    return {{"graph", to_json(d.graph)},
            {"query", {{"do", names_json(d.graph, d.t)}, {"on", names_json(d.graph, d.s)}}},
            {"start", to_json(d.start, d.graph)},
            {"steps", steps_json(d, d.graph)}};
}

Derivation derivation_from_json(const Json& j) {
    try {
        Derivation d;
        d.graph = graph_from_json(j.at("graph"));
        if (j.contains("query")) {
            d.t = names_from_json(d.graph, j["query"].value("do", Json::array()));
            d.s = names_from_json(d.graph, j["query"].value("on", Json::array()));
        }
        d.steps = steps_from_json(j.at("steps"), d.graph);
        if (j.contains("start")) {
            d.start = expr_from_json(j["start"], d.graph);
        } else if (!d.steps.empty()) {
            d.start = d.steps.front().before;
        } else {
            d.start = query_sentence(d.t, d.s);
        }
        return d;
    } catch (const Json::exception& e) {
        throw InputError(std::string("malformed derivation JSON: ") + e.what());
    }
}

Json to_json(const CComponentPartition& p, const CausalGraph& g) {
    Json out = Json::array();
    for (const auto& b : p.blocks) out.push_back(names_json(g, b));
    return out;
}

Json to_json(const EstimandReport& r) {
    std::size_t passed = 0;
    for (double e : r.model_error) passed += e <= kCheckTolerance;
    return {{"pass", r.pass}, {"trials", r.model_error.size()}, {"passed", passed}, {"max_error", r.max_error},
            {"model_error", r.model_error}};
}

Json to_json(const DiscreteModel& m) {
    Json nodes = Json::array();
    for (NodeIndex v : m.graph.nodes()) {
        nodes.push_back({{"name", m.graph.name(v)},
                         {"arity", m.arity[v]},
                         {"parents", names_json(m.graph, VarSet(m.graph.parents(v)))},
                         {"cpt", m.cpt[v]}});
    }
    return {{"nodes", nodes}};
}

}  // namespace cid
