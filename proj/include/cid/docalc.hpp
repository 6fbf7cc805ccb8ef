#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cid/expr.hpp"
#include "cid/graph.hpp"
#include "cid/separation.hpp"

namespace cid {

enum class StepKind { kRule1, kRule2, kRule3, kChainRule, kMarginalize, kNormalizeToOne, kFactorSubstitute };

/// kSplit:       P(A ∪ B | W, do X) -> P(A | B, W, do X) · P(B | W, do X)        (vars = A)
/// kConditional: P(A | B, W, do X)  -> P(A, B | W, do X) / P(B | W, do X)        (vars = B)
enum class ChainForm { kSplit, kConditional };

struct Derivation;

/// One rewrite. The forward rewrite maps the sub-expression at `path` of the
/// source to the corresponding part of the target; the source is `before`
/// unless `reversed` is set, in which case the step is read right to left.
///
///   Rule1/2/3       the term at path, per `rule`
///   ChainRule       the term at path, per `chain` and `vars`
///   Marginalize     Σ_B F · P(Y ∪ A | ...) -> Σ_{B\A} F · P(Y | ...), A = vars ⊆ B
///   NormalizeToOne  Σ_B F · P(A | ...) -> Σ_{B\A} F, A = vars ⊆ B
///   FactorSubstitute  the node at path (or the listed factors of the product
///                   at path) is replaced by the result of `lemma`, whose start
///                   must match it
///
/// For Marginalize and NormalizeToOne, `factor` picks the term when the sum's
/// body is a product.
struct DerivationStep {
    StepKind kind = StepKind::kRule3;
    Expr before;
    Expr after;
    Path path;
    bool reversed = false;

    RuleInstance rule;
    std::optional<RuleEvidence> evidence;
    ChainForm chain = ChainForm::kSplit;
    VarSet vars;
    std::size_t factor = 0;
    std::vector<std::size_t> factors;
    std::shared_ptr<const Derivation> lemma;
};

/// A chain of steps from `start`. Top-level derivations carry the query
/// (t, s); nested lemmas leave both empty.
struct Derivation {
    CausalGraph graph;
    VarSet t;
    VarSet s;
    Expr start;
    std::vector<DerivationStep> steps;

    const Expr& result() const { return steps.empty() ? start : steps.back().after; }
};

/// The same equality read backwards: steps swapped and flagged reversed.
Derivation reversed(const Derivation& d);

/// The sentence P(s | do(t)).
Expr query_sentence(const VarSet& t, const VarSet& s);

struct DeriveResult {
    std::optional<Derivation> derivation;
    std::optional<std::pair<VarSet, VarSet>> failure;  // the failing (C, T) pair

    bool identifiable() const { return derivation.has_value(); }
};

/// Compiles the identification recursion into rule 2 / rule 3 steps plus
/// probability manipulations.
DeriveResult derive_effect(const VarSet& t, const VarSet& s, const CausalGraph& g);

/// Rule 1 as rule 2 followed by rule 3 on the same sets.
std::pair<RuleInstance, RuleInstance> expand_rule1(const CausalGraph& g, const RuleInstance& r);

/// Applies the forward rewrite of `step` to `sub`; throws InputError when the
/// step does not fit the sub-expression.
Expr forward_rewrite(const DerivationStep& step, const Expr& sub);

struct VerifyOptions {
    int models = 5;
    std::uint64_t seed = 0;
    double tolerance = 1e-9;
    int arity = 2;
    bool numeric = true;
};

struct Verdict {
    bool accepted = true;
    std::optional<std::size_t> bad_step;
    std::string reason;
};

Verdict verify_derivation(const Derivation& d, const VerifyOptions& opt = {});

std::string step_kind_name(StepKind k);
StepKind step_kind_from_name(const std::string& name);

/// Counts steps of a kind, nested lemmas included.
std::size_t count_steps(const Derivation& d, StepKind k);
std::size_t total_steps(const Derivation& d);

}  // namespace cid
