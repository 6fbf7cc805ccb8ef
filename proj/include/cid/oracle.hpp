#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "cid/expr.hpp"
#include "cid/graph.hpp"
#include "cid/separation.hpp"
#include "cid/table.hpp"

namespace cid {

/// Finite-domain parametrisation of a causal graph. `cpt[v]` is laid out as
/// parent configuration (mixed radix over parents(v), first most significant)
/// times arity[v] plus the value of v.
struct DiscreteModel {
    CausalGraph graph;
    std::vector<int> arity;  // indexed by NodeIndex, 0 for absent nodes
    std::vector<std::vector<double>> cpt;

    std::size_t parent_config(NodeIndex v, std::span<const int> values) const;
    /// P(v = value | pa(v)) with parent values read from `values` (indexed by NodeIndex).
    double conditional(NodeIndex v, std::span<const int> values) const;
};

inline constexpr double kDefaultEpsilon = 0.01;

/// Reproducible random model with every CPT entry ≥ epsilon.
DiscreteModel random_model(const CausalGraph& g, int arity, std::uint64_t seed,
                           double epsilon = kDefaultEpsilon);
DiscreteModel random_model(const CausalGraph& g, const std::vector<int>& arity, std::uint64_t seed,
                           double epsilon = kDefaultEpsilon);

/// Distribution over all present nodes under do(intervention) (empty = observational).
JointTable full_joint(const DiscreteModel& m, const Assignment& intervention = {});
/// P(n), the latent variables summed out.
JointTable observational_joint(const DiscreteModel& m);
/// P_t(s) by truncated factorisation; assignments of s inconsistent with t get 0.
JointTable interventional_truth(const DiscreteModel& m, const Assignment& t, const VarSet& s);

/// Interventional probabilities of a fixed model, cached per intervention.
class InterventionalSource : public TermSource {
public:
    explicit InterventionalSource(const DiscreteModel& m) : model_(m) {}
    double probability(const VarSet& vars, std::span<const int> values, const VarSet& do_vars,
                       std::span<const int> do_values) override;

private:
    struct Cache {
        JointTable joint;
        std::map<VarSet, JointTable> marginals;
    };
    const DiscreteModel& model_;
    std::map<std::pair<VarSet, std::vector<int>>, Cache> cache_;
};

struct EstimandReport {
    double max_error = 0.0;
    std::vector<double> model_error;
    bool pass = false;
};

inline constexpr double kCheckTolerance = 1e-9;

/// Compares the estimand with P_t(s) on `trials` random positive models,
/// at every assignment of t and s.
EstimandReport check_estimand(const Expr& e, const CausalGraph& g, const VarSet& t, const VarSet& s,
                              int trials, std::uint64_t seed, int arity = 2, int threads = 1);

/// Max |lhs - rhs| over all assignments of the union of both free variable
/// sets, evaluated against one model (observational or interventional terms).
double max_discrepancy(const Expr& lhs, const Expr& rhs, const DiscreteModel& m);
double max_discrepancy(const Expr& lhs, const Expr& rhs, const std::vector<int>& arity, TermSource& source);

struct Witness {
    DiscreteModel m1;
    DiscreteModel m2;
    double observational_gap = 0.0;
    double causal_gap = 0.0;
};

struct WitnessOptions {
    int budget = 20;  // random restarts of M1
    std::uint64_t seed = 0;
    int arity = 2;
    double max_observational_gap = 1e-6;
    double min_causal_gap = 1e-2;
};

/// Best-effort search for two positive models agreeing on P(n) but not on P_t(s).
std::optional<Witness> witness_search(const CausalGraph& g, const VarSet& t, const VarSet& s,
                                      const WitnessOptions& opt = {});

/// Max |P(x,y|z) - P(x|z)P(y|z)| over assignments with P(z) > 0.
double ci_deviation(const DiscreteModel& m, const SeparationQuery& q);
bool ci_check(const DiscreteModel& m, const SeparationQuery& q, double tolerance = kCheckTolerance);

/// Every assignment of `vars` under `arity` (indexed by NodeIndex).
std::vector<Assignment> all_assignments(const VarSet& vars, const std::vector<int>& arity);

}  // namespace cid
