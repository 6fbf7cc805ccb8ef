#pragma once

#include <optional>
#include <vector>

#include "cid/expr.hpp"
#include "cid/graph.hpp"

namespace cid {

/// Q[H] = P_{N\H}(H) together with its estimand over the observational joint.
struct QFactor {
    VarSet scope;
    Expr estimand;
};

/// The innermost (C, T) pair on which Identify failed.
struct IdentFailure {
    VarSet c;
    VarSet t;
};

struct IdentResult {
    std::optional<Expr> estimand;
    std::optional<IdentFailure> failure;

    bool identifiable() const { return estimand.has_value(); }

    static IdentResult ok(Expr e) { return {std::move(e), std::nullopt}; }
    static IdentResult fail(VarSet c, VarSet t) { return {std::nullopt, IdentFailure{std::move(c), std::move(t)}}; }
};

/// Σ_{bound} e, folding marginals: Σ_B P(v) = P(v \ B).
Expr sum_out(const VarSet& bound, const Expr& e);

/// Q[W] = Σ_{C\W} Q[C]; w must be ancestral in G_C.
QFactor lemma1_sum(const QFactor& q, const VarSet& w, const CausalGraph& g);

/// Q[H_1], ..., Q[H_n] for the observable c-components of G_H, each built as
/// a product of prefix-sum quotients along topo_order(G_H, H).
std::vector<QFactor> lemma2_decompose(const VarSet& h, const QFactor& q_h, const CausalGraph& g);

/// Q[C] from Q[T], where G_C and G_T each form a single c-component.
IdentResult identify(const VarSet& c, const VarSet& t, const QFactor& q_t, const CausalGraph& g);

/// Q[S] from P(n).
IdentResult compute_q(const VarSet& s, const CausalGraph& g);

/// P_t(s). The estimand's free variables are within s ∪ t and its bound
/// variables are renamed apart.
IdentResult causal_effect(const VarSet& t, const VarSet& s, const CausalGraph& g);

/// D = An(S) in G_{N\T}, restricted to N.
VarSet effect_ancestors(const CausalGraph& g, const VarSet& t, const VarSet& s);

}  // namespace cid
