#pragma once

#include <string>

#include "cid/graph.hpp"

namespace cid {

struct SeparationQuery {
    VarSet x;
    VarSet y;
    VarSet z;
};

/// True iff x and y are d-separated given z in g. Sets must be pairwise disjoint.
bool d_separated(const CausalGraph& g, const SeparationQuery& q);

/// Z(W): members of z that are not ancestors of any w-node in G_overline(x).
VarSet z_w(const CausalGraph& g, const VarSet& x, const VarSet& z, const VarSet& w);

enum class Rule { kObservation = 1, kExchange = 2, kAction = 3 };

/// One do-calculus rule application:
///   rule 1: P(y | do(x), z, w)    = P(y | do(x), w)
///   rule 2: P(y | do(x), do(z), w) = P(y | do(x), z, w)
///   rule 3: P(y | do(x), do(z), w) = P(y | do(x), w)
struct RuleInstance {
    Rule rule = Rule::kObservation;
    VarSet x;
    VarSet y;
    VarSet z;
    VarSet w;

    friend bool operator==(const RuleInstance&, const RuleInstance&) = default;
};

/// The exact separation test that licenses a rule instance.
struct RuleEvidence {
    RuleInstance instance;
    VarSet cut_incoming;
    VarSet cut_outgoing;
    SeparationQuery query;
    bool holds = false;
};

RuleEvidence rule_applicable(const CausalGraph& g, const RuleInstance& r);

int rule_number(Rule r);
Rule rule_from_number(int n);

}  // namespace cid
