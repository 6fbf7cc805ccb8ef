#pragma once

#include <json.hpp>

#include "cid/ccomp.hpp"
#include "cid/docalc.hpp"
#include "cid/expr.hpp"
#include "cid/graph.hpp"
#include "cid/ident.hpp"
#include "cid/oracle.hpp"
#include "cid/separation.hpp"

namespace cid {

using Json = nlohmann::ordered_json;

Json to_json(const CausalGraph& g);
CausalGraph graph_from_json(const Json& j);

Json names_json(const CausalGraph& g, const VarSet& s);
VarSet names_from_json(const CausalGraph& g, const Json& j);

/// Bound copies are written as name'k (k = alias).
Json to_json(const Expr& e, const CausalGraph& g);
Expr expr_from_json(const Json& j, const CausalGraph& g);

Json to_json(const RuleEvidence& ev, const CausalGraph& g);
Json to_json(const Derivation& d);
Derivation derivation_from_json(const Json& j);

Json to_json(const CComponentPartition& p, const CausalGraph& g);
Json to_json(const EstimandReport& r);
Json to_json(const DiscreteModel& m);

}  // namespace cid
