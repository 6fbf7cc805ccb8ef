#include "cid/ident.hpp"

#include <algorithm>

#include "cid/ccomp.hpp"

namespace cid {

namespace {

std::size_t block_containing(const std::vector<VarSet>& blocks, const VarSet& c) {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (c.subset_of(blocks[i])) return i;
    }
    throw StructuralError("set " + std::to_string(c.size()) + " nodes spans several c-components");
}

void require_single_component(const CausalGraph& g, const VarSet& s, const char* what) {
    if (observable_blocks_of(g, s).size() != 1) {
        throw StructuralError(std::string("identify: ") + what + " is not a single c-component");
    }
}

}  // namespace

Expr sum_out(const VarSet& bound, const Expr& e) {
    if (bound.empty()) return e;
    if (e.kind() == ExprKind::kTerm && e.term().is_marginal()) {
        const VarSet vars = nodes_of(e.term().outcome);
        if (bound.subset_of(vars)) {
            RefList rest = remove_nodes(e.term().outcome, bound);
            if (rest.empty()) return Expr::one();
            return Expr::marginal(std::move(rest));
        }
    }
    return Expr::sum(refs_of(bound), e);
}

QFactor lemma1_sum(const QFactor& q, const VarSet& w, const CausalGraph& g) {
    if (!w.subset_of(q.scope)) throw InputError("lemma1_sum: W is not a subset of C");
    if (!is_ancestral(g, w, q.scope)) throw StructuralError("lemma1_sum: W is not ancestral in G_C");
    const VarSet drop = q.scope.minus(w);
    if (!drop.subset_of(free_vars(q.estimand))) {
        throw StructuralError("lemma1_sum: estimand does not depend on every variable of C");
    }
    return {w, sum_out(drop, q.estimand)};
}

std::vector<QFactor> lemma2_decompose(const VarSet& h, const QFactor& q_h, const CausalGraph& g) {
    if (q_h.scope != h) throw InputError("lemma2_decompose: factor scope differs from H");
    const auto blocks = observable_blocks_of(g, h);
    const auto order = topo_order(latent_subgraph(g, h), h);

    // prefix[j] = Q[H^(j)] = Σ_{H \ H^(j)} Q[H], prefix[0] = 1.
    std::vector<Expr> prefix(order.size() + 1);
    VarSet seen;
    prefix[0] = Expr::one();
    for (std::size_t j = 0; j < order.size(); ++j) {
        seen.insert(order[j]);
        prefix[j + 1] = j + 1 == order.size() ? q_h.estimand : sum_out(h.minus(seen), q_h.estimand);
    }

    std::vector<QFactor> out;
    for (const auto& b : blocks) {
        std::vector<Expr> factors;
        for (std::size_t j = 0; j < order.size(); ++j) {
            if (b.contains(order[j])) factors.push_back(Expr::quotient(prefix[j + 1], prefix[j]));
        }
        out.push_back({b, Expr::product(std::move(factors))});
    }
    return out;
}

IdentResult identify(const VarSet& c, const VarSet& t, const QFactor& q_t, const CausalGraph& g) {
    if (!c.subset_of(t)) throw InputError("identify: C is not a subset of T");
    if (q_t.scope != t) throw InputError("identify: factor scope differs from T");
    require_single_component(g, t, "T");
    require_single_component(g, c, "C");

    const VarSet a = ancestors(latent_subgraph(g, t), c).intersect(t);
    if (a == c) return IdentResult::ok(sum_out(t.minus(c), q_t.estimand));
    if (a == t) return IdentResult::fail(c, t);

    const QFactor q_a = lemma1_sum(q_t, a, g);
    const auto parts = lemma2_decompose(a, q_a, g);
    std::vector<VarSet> scopes;
    for (const auto& p : parts) scopes.push_back(p.scope);
    const QFactor& q_t1 = parts[block_containing(scopes, c)];
    return identify(c, q_t1.scope, q_t1, g);
}

IdentResult compute_q(const VarSet& s, const CausalGraph& g) {
    const VarSet n = g.observables();
    if (!s.subset_of(n)) throw InputError("compute_q: S must contain observable nodes only");
    const QFactor q_n{n, Expr::marginal(n)};
    if (s == n) return IdentResult::ok(q_n.estimand);

    const auto n_parts = lemma2_decompose(n, q_n, g);
    std::vector<VarSet> n_scopes;
    for (const auto& p : n_parts) n_scopes.push_back(p.scope);

    std::vector<Expr> factors;
    for (const auto& s_j : observable_blocks_of(g, s)) {
        const QFactor& q_nj = n_parts[block_containing(n_scopes, s_j)];
        IdentResult r = identify(s_j, q_nj.scope, q_nj, g);
        if (!r.identifiable()) return r;
        factors.push_back(*r.estimand);
    }
    return IdentResult::ok(Expr::product(std::move(factors)));
}

VarSet effect_ancestors(const CausalGraph& g, const VarSet& t, const VarSet& s) {
    const VarSet n = g.observables();
    return ancestors(latent_subgraph(g, n.minus(t)), s).intersect(n);
}

IdentResult causal_effect(const VarSet& t, const VarSet& s, const CausalGraph& input) {
    const VarSet n = input.observables();
    if (s.empty()) throw InputError("causal_effect: the outcome set is empty");
    if (!s.disjoint(t)) throw InputError("causal_effect: outcome and intervention sets overlap");
    if (!s.subset_of(n) || !t.subset_of(n)) {
        throw InputError("causal_effect: outcome and intervention sets must be observable");
    }
    const CausalGraph g = remove_barren_latents(input);
    const VarSet d = effect_ancestors(g, t, s);

    IdentResult q_d = compute_q(d, g);
    if (!q_d.identifiable()) return q_d;

    AliasSource aliases;
    Expr e = rename_apart(sum_out(d.minus(s), *q_d.estimand), aliases);

    // Q[D] may still mention observables outside S ∪ T that are not ancestors
    // of D once T is cut; its value does not depend on them, so average them out.
    const VarSet extra = free_vars(e).minus(s.unite(t));
    if (!extra.empty()) {
        e = Expr::sum(refs_of(extra), Expr::product({Expr::marginal(extra), e}));
    }
    return IdentResult::ok(canonicalize(e));
}

}  // namespace cid
