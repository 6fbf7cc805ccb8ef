#include "cid/docalc.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include "cid/ccomp.hpp"
#include "cid/ident.hpp"
#include "cid/oracle.hpp"

namespace cid {

std::string step_kind_name(StepKind k) {
    switch (k) {
        case StepKind::kRule1: return "Rule1";
        case StepKind::kRule2: return "Rule2";
        case StepKind::kRule3: return "Rule3";
        case StepKind::kChainRule: return "ChainRule";
        case StepKind::kMarginalize: return "Marginalize";
        case StepKind::kNormalizeToOne: return "NormalizeToOne";
        case StepKind::kFactorSubstitute: return "FactorSubstitute";
    }
    return "?";
}

StepKind step_kind_from_name(const std::string& name) {
    for (auto k : {StepKind::kRule1, StepKind::kRule2, StepKind::kRule3, StepKind::kChainRule,
                   StepKind::kMarginalize, StepKind::kNormalizeToOne, StepKind::kFactorSubstitute}) {
        if (step_kind_name(k) == name) return k;
    }
    throw InputError("unknown step kind '" + name + "'");
}

std::size_t count_steps(const Derivation& d, StepKind k) {
    std::size_t n = 0;
    for (const auto& s : d.steps) {
        if (s.kind == k) ++n;
        if (s.lemma) n += count_steps(*s.lemma, k);
    }
    return n;
}

std::size_t total_steps(const Derivation& d) {
    std::size_t n = d.steps.size();
    for (const auto& s : d.steps) {
        if (s.lemma) n += total_steps(*s.lemma);
    }
    return n;
}

Derivation reversed(const Derivation& d) {
    Derivation out;
    out.graph = d.graph;
    out.start = d.result();
    for (auto it = d.steps.rbegin(); it != d.steps.rend(); ++it) {
        DerivationStep s = *it;
        std::swap(s.before, s.after);
        s.reversed = !s.reversed;
        out.steps.push_back(std::move(s));
    }
    return out;
}

Expr query_sentence(const VarSet& t, const VarSet& s) { return Expr::term(Term{refs_of(s), refs_of(t), {}}); }

// Rewrites ---------------------------------------------------------------------------

namespace {

[[noreturn]] void bad(const std::string& why) { throw InputError(why); }

const Term& require_term(const Expr& e, const char* what) {
    if (e.kind() != ExprKind::kTerm) bad(std::string(what) + " must apply to a single term");
    return e.term();
}

bool refs_within(const RefList& refs, const RefList& pool) {
    return std::all_of(refs.begin(), refs.end(),
                       [&](const VarRef& r) { return std::find(pool.begin(), pool.end(), r) != pool.end(); });
}

bool refs_free_in(const RefList& refs, const Expr& e) {
    const RefList f = free_refs(e);
    return std::any_of(refs.begin(), refs.end(),
                       [&](const VarRef& r) { return std::binary_search(f.begin(), f.end(), r); });
}

Expr rule_rewrite(const DerivationStep& s, const Term& t) {
    const RuleInstance& r = s.rule;
    const VarSet out = nodes_of(t.outcome);
    const VarSet held = nodes_of(t.intervened);
    const VarSet seen = nodes_of(t.observed);
    if (out != r.y) bad("rule outcome set differs from the term");
    switch (r.rule) {
        case Rule::kObservation:
            if (held != r.x || seen != r.w.unite(r.z)) bad("rule 1 sets do not match the term");
            return Expr::term(Term{t.outcome, t.intervened, remove_nodes(t.observed, r.z)});
        case Rule::kExchange:
            if (held != r.x.unite(r.z) || seen != r.w) bad("rule 2 sets do not match the term");
            return Expr::term(Term{t.outcome, remove_nodes(t.intervened, r.z),
                                   merge_refs(t.observed, select_nodes(t.intervened, r.z))});
        case Rule::kAction:
            if (held != r.x.unite(r.z) || seen != r.w) bad("rule 3 sets do not match the term");
            return Expr::term(Term{t.outcome, remove_nodes(t.intervened, r.z), t.observed});
    }
    bad("unknown rule");
}

Expr chain_rewrite(const DerivationStep& s, const Term& t) {
    if (s.vars.empty()) bad("chain rule needs a non-empty variable set");
    if (s.chain == ChainForm::kSplit) {
        const VarSet out = nodes_of(t.outcome);
        if (!s.vars.subset_of(out) || s.vars == out) bad("chain rule split set must be a proper part of the outcome");
        const RefList a = select_nodes(t.outcome, s.vars);
        const RefList b = remove_nodes(t.outcome, s.vars);
        return Expr::product({Expr::term(Term{a, t.intervened, merge_refs(t.observed, b)}),
                              Expr::term(Term{b, t.intervened, t.observed})});
    }
    if (!s.vars.subset_of(nodes_of(t.observed))) bad("chain rule conditioning set must be observed in the term");
    const RefList b = select_nodes(t.observed, s.vars);
    const RefList w = remove_nodes(t.observed, s.vars);
    return Expr::quotient(Expr::term(Term{merge_refs(t.outcome, b), t.intervened, w}),
                          Expr::term(Term{b, t.intervened, w}));
}

// The term inside a sum body addressed by `factor`, plus the other factors.
std::pair<Term, std::vector<Expr>> split_body(const Expr& body, std::size_t factor) {
    if (body.kind() == ExprKind::kTerm) return {body.term(), {}};
    if (body.kind() != ExprKind::kProduct || factor >= body.children().size()) {
        bad("sum body has no term at the given factor");
    }
    const Expr& f = body.children()[factor];
    if (f.kind() != ExprKind::kTerm) bad("selected factor is not a term");
    std::vector<Expr> rest;
    for (std::size_t i = 0; i < body.children().size(); ++i) {
        if (i != factor) rest.push_back(body.children()[i]);
    }
    return {f.term(), rest};
}

RefList minus_refs(const RefList& a, const RefList& b) {
    RefList out;
    for (const auto& r : a) {
        if (std::find(b.begin(), b.end(), r) == b.end()) out.push_back(r);
    }
    return out;
}

Expr sum_rewrite(const DerivationStep& s, const Expr& sub) {
    if (sub.kind() != ExprKind::kSum) bad(step_kind_name(s.kind) + " must apply to a sum");
    if (s.vars.empty()) bad(step_kind_name(s.kind) + " needs a non-empty variable set");
    auto [t, rest] = split_body(sub.body(), s.factor);
    const RefList a = select_nodes(t.outcome, s.vars);
    if (nodes_of(a) != s.vars) bad("summed variables are not outcomes of the term");
    if (!refs_within(a, sub.bound())) bad("summed variables are not bound by the sum");
    for (const auto& f : rest) {
        if (refs_free_in(a, f)) bad("summed variables occur in another factor");
    }
    const RefList bound = minus_refs(sub.bound(), a);
    if (s.kind == StepKind::kMarginalize) {
        RefList kept = remove_nodes(t.outcome, s.vars);
        if (kept.empty()) bad("marginalize would leave an empty outcome");
        rest.push_back(Expr::term(Term{std::move(kept), t.intervened, t.observed}));
        return Expr::sum(bound, Expr::product(std::move(rest)));
    }
    if (nodes_of(t.outcome) != s.vars) bad("normalization must sum out the whole outcome");
    return Expr::sum(bound, Expr::product(std::move(rest)));
}

Expr substitute_rewrite(const DerivationStep& s, const Expr& sub) {
    if (!s.lemma) bad("factor substitution without a lemma");
    if (s.factors.empty()) {
        if (!equivalent(sub, s.lemma->start)) bad("lemma start does not match the substituted expression");
        return s.lemma->result();
    }
    if (sub.kind() != ExprKind::kProduct) bad("factor selection requires a product");
    std::vector<std::size_t> idx = s.factors;
    std::sort(idx.begin(), idx.end());
    if (std::adjacent_find(idx.begin(), idx.end()) != idx.end() || idx.back() >= sub.children().size()) {
        bad("invalid factor selection");
    }
    std::vector<Expr> chosen, rest;
    for (std::size_t i = 0; i < sub.children().size(); ++i) {
        (std::binary_search(idx.begin(), idx.end(), i) ? chosen : rest).push_back(sub.children()[i]);
    }
    if (!equivalent(Expr::product(chosen), s.lemma->start)) {
        bad("lemma start does not match the selected factors");
    }
    rest.push_back(s.lemma->result());
    return Expr::product(std::move(rest));
}

}  // namespace

Expr forward_rewrite(const DerivationStep& s, const Expr& sub) {
    switch (s.kind) {
        case StepKind::kRule1:
        case StepKind::kRule2:
        case StepKind::kRule3: {
            const Rule expected = s.kind == StepKind::kRule1   ? Rule::kObservation
                                  : s.kind == StepKind::kRule2 ? Rule::kExchange
                                                               : Rule::kAction;
            if (s.rule.rule != expected) bad("step kind and rule number disagree");
            return rule_rewrite(s, require_term(sub, "a rule"));
        }
        case StepKind::kChainRule:
            return chain_rewrite(s, require_term(sub, "the chain rule"));
        case StepKind::kMarginalize:
        case StepKind::kNormalizeToOne:
            return sum_rewrite(s, sub);
        case StepKind::kFactorSubstitute:
            return substitute_rewrite(s, sub);
    }
    bad("unknown step kind");
}

std::pair<RuleInstance, RuleInstance> expand_rule1(const CausalGraph& g, const RuleInstance& r) {
    if (r.rule != Rule::kObservation) throw InputError("expand_rule1: not a rule 1 instance");
    if (!rule_applicable(g, r).holds) throw InputError("expand_rule1: rule 1 does not apply");
    RuleInstance r2 = r;
    r2.rule = Rule::kExchange;
    RuleInstance r3 = r;
    r3.rule = Rule::kAction;
    return {r2, r3};
}

// Generation -----------------------------------------------------------------------------

namespace {

using RefMap = std::vector<VarRef>;  // indexed by NodeIndex

struct Ctx {
    const CausalGraph& g;      // barren latents removed
    const CausalGraph& input;  // recorded in every derivation
    VarSet n;
    AliasSource& aliases;
};

RefList map_refs(const VarSet& s, const RefMap& rm) {
    RefList out;
    for (NodeIndex v : s) out.push_back(rm[v]);
    return out;
}

/// Q[S] = P(s | do(N \ S)) under the refs of rm.
Expr q_sentence(const Ctx& c, const VarSet& s, const RefMap& rm) {
    return Expr::term(Term{map_refs(s, rm), map_refs(c.n.minus(s), rm), {}});
}

bool is_q_sentence(const Ctx& c, const Expr& e, const VarSet& s) {
    if (e.kind() != ExprKind::kTerm) return false;
    const Term& t = e.term();
    return t.observed.empty() && nodes_of(t.outcome) == s && nodes_of(t.intervened) == c.n.minus(s);
}

RefMap ref_map_of(const Ctx& c, const Term& t) {
    RefMap rm(c.g.universe_size());
    for (const auto& r : t.outcome) rm[r.node] = r;
    for (const auto& r : t.intervened) rm[r.node] = r;
    return rm;
}

std::optional<Path> find_if(const Expr& root, const std::function<bool(const Expr&)>& pred) {
    Path path;
    std::function<bool(const Expr&)> walk = [&](const Expr& e) {
        if (pred(e)) return true;
        for (std::size_t i = 0; i < e.children().size(); ++i) {
            path.push_back(i);
            if (walk(e.children()[i])) return true;
            path.pop_back();
        }
        return false;
    };
    if (walk(root)) return path;
    return std::nullopt;
}

Path require_path(const Expr& root, const Expr& target) {
    auto p = find_subexpr(root, target);
    if (!p) throw StructuralError("derivation generator lost track of a sub-expression");
    return *p;
}

std::size_t block_containing(const std::vector<VarSet>& blocks, const VarSet& c) {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (c.subset_of(blocks[i])) return i;
    }
    throw StructuralError("set spans several c-components");
}

class Builder {
public:
    Builder(const Ctx& c, Expr start) : c_(c) {
        d_.graph = c.input;
        d_.start = start;
        cur_ = std::move(start);
    }

    const Expr& current() const { return cur_; }

    void forward(DerivationStep s) {
        Expr rewritten = forward_rewrite(s, expr_at(cur_, s.path));
        s.before = cur_;
        s.after = replace_at(cur_, s.path, rewritten);
        push(std::move(s));
    }

    // `after` is given; the step's path addresses the rewritten part in it.
    void backward(DerivationStep s, Expr after) {
        s.before = cur_;
        s.after = std::move(after);
        s.reversed = true;
        push(std::move(s));
    }

    void append(const Derivation& local) {
        if (!(local.start == cur_)) throw StructuralError("derivation fragment does not continue the chain");
        for (const auto& s : local.steps) d_.steps.push_back(s);
        cur_ = local.result();
    }

    void substitute(const Path& path, Derivation lemma, std::vector<std::size_t> factors = {}) {
        if (lemma.steps.empty()) return;
        DerivationStep s;
        s.kind = StepKind::kFactorSubstitute;
        s.path = path;
        s.factors = std::move(factors);
        s.lemma = std::make_shared<const Derivation>(std::move(lemma));
        forward(std::move(s));
    }

    Derivation finish() { return std::move(d_); }

private:
    void push(DerivationStep s) {
        if (s.kind == StepKind::kRule1 || s.kind == StepKind::kRule2 || s.kind == StepKind::kRule3) {
            s.evidence = rule_applicable(c_.input, s.rule);
        }
        cur_ = s.after;
        d_.steps.push_back(std::move(s));
    }

    const Ctx& c_;
    Derivation d_;
    Expr cur_;
};

DerivationStep rule_step(Rule r, VarSet held, VarSet y, VarSet z, VarSet w, Path path) {
    DerivationStep s;
    s.kind = r == Rule::kExchange ? StepKind::kRule2 : StepKind::kRule3;
    s.rule = RuleInstance{r, std::move(held), std::move(y), std::move(z), std::move(w)};
    s.path = std::move(path);
    return s;
}

DerivationStep chain_step(ChainForm form, VarSet vars, Path path) {
    DerivationStep s;
    s.kind = StepKind::kChainRule;
    s.chain = form;
    s.vars = std::move(vars);
    s.path = std::move(path);
    return s;
}

DerivationStep sum_step(StepKind kind, VarSet vars, std::size_t factor, Path path) {
    DerivationStep s;
    s.kind = kind;
    s.vars = std::move(vars);
    s.factor = factor;
    s.path = std::move(path);
    return s;
}

Path child(Path p, std::size_t i) {
    p.push_back(i);
    return p;
}

// Σ_{C\W} Q[C] -> Q[W], for W ancestral in G_C. The bound copies of C \ W
// are fresh; the do() refs of C \ W in the result come from rm.
Derivation sum_to_ancestral(const Ctx& c, const VarSet& cset, const VarSet& w, const RefMap& rm) {
    RefMap inner = rm;
    RefList bound;
    for (NodeIndex v : cset.minus(w)) {
        inner[v] = VarRef{v, c.aliases.fresh()};
        bound.push_back(inner[v]);
    }
    Builder b(c, Expr::sum(bound, q_sentence(c, cset, inner)));
    VarSet rest = cset.minus(w);
    while (!rest.empty()) {
        const VarSet scope = w.unite(rest);
        const auto order = topo_order(latent_subgraph(c.g, scope), scope);
        NodeIndex x = 0;
        for (NodeIndex v : order) {
            if (rest.contains(v)) x = v;
        }
        const VarSet held = c.n.minus(scope);
        b.forward(chain_step(ChainForm::kSplit, VarSet{x}, {0}));
        b.forward(sum_step(StepKind::kNormalizeToOne, VarSet{x}, 0, {}));
        rest.erase(x);

        const Path term_path = rest.empty() ? Path{} : Path{0};
        const Term& t = expr_at(b.current(), term_path).term();
        RefList held_refs = t.intervened;
        held_refs.push_back(rm[x]);
        Expr inserted = Expr::term(Term{t.outcome, held_refs, {}});
        b.backward(rule_step(Rule::kAction, held, scope.minus(VarSet{x}), VarSet{x}, {}, term_path),
                   replace_at(b.current(), term_path, inserted));
    }
    return b.finish();
}

struct Peel {
    std::vector<NodeIndex> order;
    NodeIndex x = 0;
    VarSet h;
    std::vector<VarSet> h_blocks;
    std::vector<VarSet> in_b;   // H_1 .. H_m
    std::vector<VarSet> out_b;  // H_{m+1} .. H_n
    VarSet h_in;
    VarSet h_out;
    VarSet b;
    VarSet y;
};

Peel peel(const Ctx& c, const VarSet& e) {
    Peel p;
    p.order = topo_order(latent_subgraph(c.g, e), e);
    p.x = p.order.back();
    p.h = e.minus(VarSet{p.x});
    p.h_blocks = observable_blocks_of(c.g, p.h);
    const auto e_blocks = observable_blocks_of(c.g, e);
    p.b = e_blocks[block_containing(e_blocks, VarSet{p.x})];
    for (const auto& hb : p.h_blocks) {
        if (hb.subset_of(p.b)) {
            p.in_b.push_back(hb);
            p.h_in = p.h_in.unite(hb);
        } else {
            p.out_b.push_back(hb);
            p.h_out = p.h_out.unite(hb);
        }
    }
    p.y = c.n.minus(e);
    return p;
}

// Q[E] -> Π Q[E_i] over the observable c-components of G_E.
Derivation factor_by_components(const Ctx& c, const VarSet& e, const RefMap& rm) {
    Builder b(c, q_sentence(c, e, rm));
    if (observable_blocks_of(c.g, e).size() == 1) return b.finish();
    const Peel p = peel(c, e);
    const VarSet xs{p.x};

    // P(h, x | do y) = P(x | h, do y) · P(h | do y)
    b.forward(chain_step(ChainForm::kSplit, xs, {}));
    // P(h | do y) = P(h | do y, do x)
    const Expr q_h = q_sentence(c, p.h, rm);
    b.backward(rule_step(Rule::kAction, p.y, p.h, xs, {}, {1}), replace_at(b.current(), {1}, q_h));

    // Q[H] = Q[H_1..H_m] · Π_{j>m} Q[H_j]
    Builder lb(c, q_h);
    lb.append(factor_by_components(c, p.h, rm));
    if (p.in_b.size() >= 2) {
        std::vector<std::size_t> idx;
        const auto& kids = lb.current().children();
        for (const auto& hb : p.in_b) {
            const Expr q = q_sentence(c, hb, rm);
            for (std::size_t i = 0; i < kids.size(); ++i) {
                if (kids[i] == q) idx.push_back(i);
            }
        }
        lb.substitute({}, reversed(factor_by_components(c, p.h_in, rm)), idx);
    }
    b.substitute(require_path(b.current(), q_h), lb.finish());

    const Expr x_given_h = Expr::term(Term{RefList{rm[p.x]}, map_refs(p.y, rm), map_refs(p.h, rm)});
    if (!p.in_b.empty()) {
        // P(h_1..h_m | do(h_{m+1}.., y, x)) = P(h_1..h_m | do(h_{m+1}.., y))
        b.forward(rule_step(Rule::kAction, p.y.unite(p.h_out), p.h_in, xs, {},
                            require_path(b.current(), q_sentence(c, p.h_in, rm))));
    }
    if (!p.out_b.empty()) {
        // P(x | h, do y) = P(x | h_1..h_m, do(h_{m+1}.., y))
        const Path at = require_path(b.current(), x_given_h);
        const Expr moved = Expr::term(Term{RefList{rm[p.x]}, map_refs(p.y.unite(p.h_out), rm), map_refs(p.h_in, rm)});
        b.backward(rule_step(Rule::kExchange, p.y, xs, p.h_out, p.h_in, at), replace_at(b.current(), at, moved));
    }
    if (!p.in_b.empty()) {
        // P(x | h_1..h_m, do z) · P(h_1..h_m | do z) = Q[B]
        const VarSet z = p.y.unite(p.h_out);
        const Expr fx = Expr::term(Term{RefList{rm[p.x]}, map_refs(z, rm), map_refs(p.h_in, rm)});
        const Expr fh = Expr::term(Term{map_refs(p.h_in, rm), map_refs(z, rm), {}});
        const Expr& prod = b.current();
        std::vector<Expr> rest;
        for (const auto& k : prod.children()) {
            if (!(k == fx) && !(k == fh)) rest.push_back(k);
        }
        rest.push_back(q_sentence(c, p.b, rm));
        Expr after = Expr::product(rest);
        const Path at = after.kind() == ExprKind::kProduct ? Path{rest.size() - 1} : Path{};
        b.backward(chain_step(ChainForm::kSplit, xs, at), after);
    }
    return b.finish();
}

// Q[K] -> Π_{j: v_j ∈ K} Q[E^(j)] / Q[E^(j-1)] for a c-component K of G_E.
Derivation component_quotients(const Ctx& c, const VarSet& e, const VarSet& k, const RefMap& rm) {
    if (e.size() == 1) return Derivation{c.input, {}, {}, q_sentence(c, k, rm), {}};
    const Peel p = peel(c, e);
    if (!k.contains(p.x)) return component_quotients(c, p.h, k, rm);

    const VarSet xs{p.x};
    Builder b(c, q_sentence(c, k, rm));
    Path x_path;
    if (!p.in_b.empty()) {
        b.forward(chain_step(ChainForm::kSplit, xs, {}));
        const Expr q_in = q_sentence(c, p.h_in, rm);
        b.backward(rule_step(Rule::kAction, p.y.unite(p.h_out), p.h_in, xs, {}, {1}),
                   replace_at(b.current(), {1}, q_in));
        if (!p.out_b.empty()) b.forward(rule_step(Rule::kExchange, p.y, xs, p.h_out, p.h_in, {0}));
        x_path = {0};
    } else {
        b.forward(rule_step(Rule::kExchange, p.y, xs, p.h, {}, {}));
    }
    // P(x | h, do y) = P(h, x | do y) / P(h | do y), then do(x) joins the denominator.
    b.forward(chain_step(ChainForm::kConditional, p.h, x_path));
    const Path den = child(x_path, 1);
    b.backward(rule_step(Rule::kAction, p.y, p.h, xs, {}, den), replace_at(b.current(), den, q_sentence(c, p.h, rm)));

    if (!p.in_b.empty()) {
        Builder lb(c, q_sentence(c, p.h_in, rm));
        lb.append(factor_by_components(c, p.h_in, rm));
        for (const auto& hb : p.in_b) {
            lb.substitute(require_path(lb.current(), q_sentence(c, hb, rm)), component_quotients(c, p.h, hb, rm));
        }
        b.substitute({1}, lb.finish());
    }
    return b.finish();
}

// Ancestral-set expansion of Q[W] as Σ_{E\W} Q[E]; Σ P(n) collapses to a marginal.
Derivation prefix_as_sum(const Ctx& c, const VarSet& e, const VarSet& w, const RefMap& rm) {
    Derivation d = reversed(sum_to_ancestral(c, e, w, rm));
    if (e == c.n) {
        Builder b(c, d.start);
        b.append(d);
        b.forward(sum_step(StepKind::kMarginalize, e.minus(w), 0, {}));
        return b.finish();
    }
    return d;
}

// Q[K] -> prefix-sum quotient form, each Q[E^(j)] (j < |E|) written as Σ Q[E].
Derivation component_from_prefix_sums(const Ctx& c, const VarSet& e, const VarSet& k, const RefMap& rm) {
    Builder b(c, q_sentence(c, k, rm));
    b.append(component_quotients(c, e, k, rm));
    const auto order = topo_order(latent_subgraph(c.g, e), e);
    VarSet prefix;
    for (std::size_t j = 0; j + 1 < order.size(); ++j) {
        prefix.insert(order[j]);
        const Expr target = q_sentence(c, prefix, rm);
        while (auto at = find_subexpr(b.current(), target)) {
            b.substitute(*at, prefix_as_sum(c, e, prefix, rm));
        }
    }
    return b.finish();
}

// Q[C] in terms of Q[T] sentences.
Derivation identify_chain(const Ctx& c, const VarSet& cset, const VarSet& t, const RefMap& rm) {
    const VarSet a = ancestors(latent_subgraph(c.g, t), cset).intersect(t);
    if (a == cset) return reversed(sum_to_ancestral(c, t, cset, rm));
    if (a == t) throw StructuralError("identify_chain reached a failing pair");

    const auto a_blocks = observable_blocks_of(c.g, a);
    const VarSet t1 = a_blocks[block_containing(a_blocks, cset)];
    Builder b(c, q_sentence(c, cset, rm));
    b.append(identify_chain(c, cset, t1, rm));
    while (auto at = find_if(b.current(), [&](const Expr& e) { return is_q_sentence(c, e, t1); })) {
        b.substitute(*at, component_from_prefix_sums(c, a, t1, ref_map_of(c, expr_at(b.current(), *at).term())));
    }
    while (auto at = find_if(b.current(), [&](const Expr& e) { return is_q_sentence(c, e, a); })) {
        b.substitute(*at, reversed(sum_to_ancestral(c, t, a, ref_map_of(c, expr_at(b.current(), *at).term()))));
    }
    return b.finish();
}

}  // namespace

DeriveResult derive_effect(const VarSet& t, const VarSet& s, const CausalGraph& input) {
    if (t.empty()) throw InputError("derive_effect: the intervention set is empty");
    const IdentResult verdict = causal_effect(t, s, input);
    if (!verdict.identifiable()) {
        return DeriveResult{std::nullopt, std::make_pair(verdict.failure->c, verdict.failure->t)};
    }

    const CausalGraph g = remove_barren_latents(input);
    AliasSource aliases;
    const Ctx c{g, input, g.observables(), aliases};
    const VarSet d = effect_ancestors(g, t, s);
    const VarSet cset = c.n.minus(t);
    const VarSet extra = cset.minus(d);

    RefMap rm(g.universe_size());
    for (NodeIndex v = 0; v < rm.size(); ++v) rm[v] = VarRef{v, 0};

    Builder b(c, query_sentence(t, s));
    Path at;
    if (!extra.empty()) {
        // P(s | do t) = Σ_e P(e) · P(s | do t)
        RefList e_refs;
        for (NodeIndex v : extra) e_refs.push_back(rm[v] = VarRef{v, aliases.fresh()});
        Expr after = Expr::sum(e_refs, Expr::product({Expr::marginal(e_refs), b.current()}));
        b.backward(sum_step(StepKind::kNormalizeToOne, extra, 0, {}), after);
        at = {0, 1};
    }
    if (d != s) {
        // P(s | do t) = Σ_{d \ s} P(d | do t)
        RefList d_refs;
        for (NodeIndex v : d.minus(s)) d_refs.push_back(rm[v] = VarRef{v, aliases.fresh()});
        Expr summed = Expr::sum(d_refs, Expr::term(Term{map_refs(d, rm), refs_of(t), {}}));
        b.backward(sum_step(StepKind::kMarginalize, d.minus(s), 0, at), replace_at(b.current(), at, summed));
        at = child(at, 0);
    }
    if (!extra.empty()) {
        // P(d | do t) = Σ_e P(d, e | do t) = Q[D]
        Derivation sum_d = sum_to_ancestral(c, cset, d, rm);
        b.backward(sum_step(StepKind::kMarginalize, extra, 0, at), replace_at(b.current(), at, sum_d.start));
        b.substitute(at, std::move(sum_d));
    }

    b.substitute(require_path(b.current(), q_sentence(c, d, rm)), factor_by_components(c, d, rm));

    const auto n_blocks = observable_blocks_of(g, c.n);
    for (const auto& sj : observable_blocks_of(g, d)) {
        const VarSet& nj = n_blocks[block_containing(n_blocks, sj)];
        b.substitute(require_path(b.current(), q_sentence(c, sj, rm)), identify_chain(c, sj, nj, rm));
    }
    if (n_blocks.size() > 1) {
        auto is_block_factor = [&](const Expr& e) {
            if (e.kind() != ExprKind::kTerm || e.term().intervened.empty()) return false;
            return std::any_of(n_blocks.begin(), n_blocks.end(),
                               [&](const VarSet& nb) { return is_q_sentence(c, e, nb); });
        };
        while (auto p = find_if(b.current(), is_block_factor)) {
            const Term& term = expr_at(b.current(), *p).term();
            b.substitute(*p, component_from_prefix_sums(c, c.n, nodes_of(term.outcome), ref_map_of(c, term)));
        }
    }
    if (!is_observational(b.current())) throw StructuralError("derivation did not reach an observational expression");

    Derivation out = b.finish();
    out.t = t;
    out.s = s;
    return DeriveResult{std::move(out), std::nullopt};
}

// Verification -------------------------------------------------------------------------

namespace {

struct Checker {
    const CausalGraph& graph;
    const VerifyOptions& opt;
    std::vector<DiscreteModel> models;
    std::vector<std::unique_ptr<InterventionalSource>> sources;

    std::optional<std::string> check(const Derivation& d) {
        Expr prev = d.start;
        for (std::size_t i = 0; i < d.steps.size(); ++i) {
            if (auto why = check_step(d.steps[i], prev)) {
                return "step " + std::to_string(i) + " (" + step_kind_name(d.steps[i].kind) + "): " + *why;
            }
            prev = d.steps[i].after;
        }
        return std::nullopt;
    }

    std::optional<std::string> check_step(const DerivationStep& s, const Expr& prev) {
        if (!equivalent(s.before, prev)) return "does not continue from the previous expression";
        const Expr& source = s.reversed ? s.after : s.before;
        const Expr& target = s.reversed ? s.before : s.after;
        try {
            const Expr& sub = expr_at(source, s.path);
            if (s.kind == StepKind::kRule1 || s.kind == StepKind::kRule2 || s.kind == StepKind::kRule3) {
                const RuleEvidence ev = rule_applicable(graph, s.rule);
                if (!ev.holds) return "separation does not hold in the mutilated graph";
            }
            if (s.kind == StepKind::kFactorSubstitute && s.lemma) {
                if (auto why = check(*s.lemma)) return "lemma " + *why;
            }
            const Expr rewritten = forward_rewrite(s, sub);
            if (!equivalent(replace_at(source, s.path, rewritten), target)) {
                return "result is not the rewrite of the addressed sub-expression";
            }
            if (opt.numeric) {
                for (std::size_t m = 0; m < models.size(); ++m) {
                    const double gap = max_discrepancy(sub, rewritten, models[m].arity, *sources[m]);
                    if (!(gap <= opt.tolerance)) {
                        return "numeric mismatch " + std::to_string(gap) + " on model " + std::to_string(m);
                    }
                }
            }
        } catch (const PositivityError& e) {
            return std::string("positivity: ") + e.what();
        } catch (const InputError& e) {
            return e.what();
        } catch (const StructuralError& e) {
            return e.what();
        }
        return std::nullopt;
    }
};

}  // namespace

Verdict verify_derivation(const Derivation& d, const VerifyOptions& opt) {
    Verdict v;
    auto reject = [&](std::optional<std::size_t> step, std::string why) {
        v.accepted = false;
        v.bad_step = step;
        v.reason = std::move(why);
        return v;
    };
    if (!d.s.empty()) {
        if (!equivalent(d.start, query_sentence(d.t, d.s))) return reject(std::nullopt, "start is not the query sentence");
    }

    Checker checker{d.graph, opt, {}, {}};
    if (opt.numeric) {
        for (int i = 0; i < opt.models; ++i) {
            checker.models.push_back(random_model(d.graph, opt.arity, opt.seed + static_cast<std::uint64_t>(i)));
        }
        for (const auto& m : checker.models) checker.sources.push_back(std::make_unique<InterventionalSource>(m));
    }

    Expr prev = d.start;
    for (std::size_t i = 0; i < d.steps.size(); ++i) {
        if (auto why = checker.check_step(d.steps[i], prev)) return reject(i, *why);
        prev = d.steps[i].after;
    }
    if (!d.s.empty() && !is_observational(d.result())) {
        return reject(d.steps.empty() ? std::nullopt : std::optional<std::size_t>(d.steps.size() - 1),
                      "final expression still contains interventions");
    }
    return v;
}

}  // namespace cid
