#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cid/graph.hpp"
#include "cid/table.hpp"

namespace cid {

/// A variable occurrence: the node plus an alias distinguishing bound copies
/// (alias 0 is the free/query copy, printed x; alias k > 0 prints as x', x'' ...).
struct VarRef {
    NodeIndex node = 0;
    std::uint32_t alias = 0;

    friend auto operator<=>(const VarRef&, const VarRef&) = default;
};

/// Refs sorted by node, at most one ref per node.
using RefList = std::vector<VarRef>;

RefList refs_of(const VarSet& s, std::uint32_t alias = 0);
VarSet nodes_of(const RefList& refs);
RefList merge_refs(const RefList& a, const RefList& b);
RefList remove_nodes(const RefList& refs, const VarSet& nodes);
RefList select_nodes(const RefList& refs, const VarSet& nodes);

/// P(outcome | do(intervened), observed). With both conditioning lists empty
/// this is the observational marginal P(outcome).
struct Term {
    RefList outcome;
    RefList intervened;
    RefList observed;

    bool is_marginal() const { return intervened.empty() && observed.empty(); }
    friend bool operator==(const Term&, const Term&) = default;
};

enum class ExprKind { kOne, kTerm, kSum, kProduct, kQuotient };

/// Immutable expression tree over terms. Used both for observational
/// estimands (only marginal terms) and for do-calculus expressions.
///
/// The factory functions normalise locally: Sum over nothing is its body,
/// products are flattened and drop One factors, x / One is x.
class Expr {
public:
    Expr();

    static Expr one();
    static Expr term(Term t);
    static Expr marginal(RefList vars);
    static Expr marginal(const VarSet& vars) { return marginal(refs_of(vars)); }
    static Expr sum(RefList bound, Expr body);
    static Expr product(std::vector<Expr> factors);
    static Expr quotient(Expr numerator, Expr denominator);

    ExprKind kind() const;
    bool is_one() const { return kind() == ExprKind::kOne; }
    const Term& term() const;
    const RefList& bound() const;
    const std::vector<Expr>& children() const;
    const Expr& body() const;
    const Expr& numerator() const;
    const Expr& denominator() const;

    /// Rebuilds this node with new children through the normalising factories.
    Expr with_children(std::vector<Expr> children) const;

    const void* id() const { return node_.get(); }

    friend bool operator==(const Expr& a, const Expr& b);

private:
    struct Node;
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

RefList free_refs(const Expr& e);
VarSet free_vars(const Expr& e);
/// Every ref mentioned anywhere, bound or free.
RefList all_refs(const Expr& e);
std::uint32_t max_alias(const Expr& e);

/// No term carries an intervention.
bool is_observational(const Expr& e);
/// Only marginal terms (no do, no conditioning bars).
bool is_pure_estimand(const Expr& e);
/// Nested sums never rebind a ref bound by an enclosing sum.
bool bound_vars_hygienic(const Expr& e);

class AliasSource {
public:
    explicit AliasSource(std::uint32_t start = 1) : next_(start) {}
    std::uint32_t fresh() { return next_++; }
    void reserve_above(std::uint32_t used) {
        if (next_ <= used) next_ = used + 1;
    }

private:
    std::uint32_t next_;
};

/// Gives every Sum fresh aliases for its bound variables (substituted through
/// its body), removing all shadowing.
Expr rename_apart(const Expr& e, AliasSource& aliases);

/// Deterministic normal form: flattened products without One factors sorted
/// by a structural key, bound aliases renumbered per node in traversal order.
Expr canonicalize(const Expr& e);

/// Structural equality with product factor lists compared as multisets.
bool equivalent(const Expr& a, const Expr& b);

/// Ordering/hash key (structure + refs, no names).
std::string structural_key(const Expr& e);

// Paths address sub-expressions by child indices from the root.
using Path = std::vector<std::size_t>;

const Expr& expr_at(const Expr& root, const Path& path);
/// Replaces the node at `path`; ancestors are rebuilt through the factories,
/// so a Product replacement inside a Product is spliced into it.
Expr replace_at(const Expr& root, const Path& path, const Expr& replacement);
/// First occurrence (pre-order) of a sub-expression structurally equal to target.
std::optional<Path> find_subexpr(const Expr& root, const Expr& target);

std::string format_ref(const CausalGraph& g, const VarRef& r);
/// Textbook rendering, e.g. Σ_{z} P(x, z) / P(x) · Σ_{x'} P(x') · P(x', z, y) / P(x', z).
std::string to_pretty(const Expr& e, const CausalGraph& g);

// Evaluation --------------------------------------------------------------------

/// Supplies probabilities of events, optionally under an intervention.
class TermSource {
public:
    virtual ~TermSource() = default;
    /// P_{do = do_values}(vars = values); value lists follow VarSet order.
    virtual double probability(const VarSet& vars, std::span<const int> values,
                               const VarSet& do_vars, std::span<const int> do_values) = 0;
};

/// Observational probabilities read from a joint table over N.
class ObservationalSource : public TermSource {
public:
    explicit ObservationalSource(const JointTable& joint) : joint_(joint) {}
    double probability(const VarSet& vars, std::span<const int> values, const VarSet& do_vars,
                       std::span<const int> do_values) override;

private:
    const JointTable& joint_;
    std::map<VarSet, JointTable> marginals_;
};

/// Compiled, memoising evaluator for one expression against one source.
class Evaluator {
public:
    /// `arity` is indexed by NodeIndex. `names` (optional) labels error messages.
    Evaluator(const Expr& e, std::vector<int> arity, TermSource& source,
              const CausalGraph* names = nullptr);
    ~Evaluator();
    Evaluator(const Evaluator&) = delete;
    Evaluator& operator=(const Evaluator&) = delete;

    const RefList& free() const;
    /// Values for free() in order.
    double value(std::span<const int> free_values);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

using Assignment = std::map<NodeIndex, int>;

/// Evaluates an observational expression at an assignment covering its free variables.
double evaluate(const Expr& e, const JointTable& joint, const Assignment& a);

/// Calls fn(values) for every point of the product domain of `refs`.
template <typename Fn>
void for_each_assignment(const RefList& refs, const std::vector<int>& arity, Fn&& fn) {
    std::vector<int> values(refs.size(), 0);
    while (true) {
        fn(std::span<const int>(values));
        std::size_t i = refs.size();
        while (i > 0) {
            --i;
            if (++values[i] < arity[refs[i].node]) break;
            values[i] = 0;
            if (i == 0) return;
        }
        if (refs.empty()) return;
    }
}

}  // namespace cid
