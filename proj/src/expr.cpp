#include "cid/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

namespace cid {

// Ref lists ---------------------------------------------------------------------

RefList refs_of(const VarSet& s, std::uint32_t alias) {
    RefList out;
    out.reserve(s.size());
    for (NodeIndex v : s) out.push_back({v, alias});
    return out;
}

VarSet nodes_of(const RefList& refs) {
    std::vector<NodeIndex> out;
    out.reserve(refs.size());
    for (const auto& r : refs) out.push_back(r.node);
    return VarSet(std::move(out));
}

RefList merge_refs(const RefList& a, const RefList& b) {
    RefList out;
    out.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

RefList remove_nodes(const RefList& refs, const VarSet& nodes) {
    RefList out;
    for (const auto& r : refs) {
        if (!nodes.contains(r.node)) out.push_back(r);
    }
    return out;
}

RefList select_nodes(const RefList& refs, const VarSet& nodes) {
    RefList out;
    for (const auto& r : refs) {
        if (nodes.contains(r.node)) out.push_back(r);
    }
    return out;
}

namespace {

void sort_refs(RefList& refs, const char* what) {
    std::sort(refs.begin(), refs.end());
    for (std::size_t i = 1; i < refs.size(); ++i) {
        if (refs[i].node == refs[i - 1].node) {
            throw InputError(std::string(what) + ": node " + std::to_string(refs[i].node) +
                             " listed twice");
        }
    }
}

}  // namespace

// Expr ----------------------------------------------------------------------------

struct Expr::Node {
    ExprKind kind = ExprKind::kOne;
    Term term;
    RefList bound;
    std::vector<Expr> children;
};

Expr::Expr() : Expr(one()) {}

Expr Expr::one() {
    static const auto node = std::make_shared<const Node>();
    return Expr(node);
}

Expr Expr::term(Term t) {
    sort_refs(t.outcome, "term outcome");
    sort_refs(t.intervened, "term interventions");
    sort_refs(t.observed, "term observations");
    if (t.outcome.empty()) throw InputError("term needs a non-empty outcome");
    RefList all = merge_refs(merge_refs(t.outcome, t.intervened), t.observed);
    for (std::size_t i = 1; i < all.size(); ++i) {
        if (all[i].node == all[i - 1].node) {
            throw InputError("term mentions node " + std::to_string(all[i].node) + " twice");
        }
    }
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::kTerm;
    n->term = std::move(t);
    return Expr(std::move(n));
}

Expr Expr::marginal(RefList vars) { return term(Term{std::move(vars), {}, {}}); }

Expr Expr::sum(RefList bound, Expr body) {
    if (bound.empty()) return body;
    sort_refs(bound, "sum bound variables");
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::kSum;
    n->bound = std::move(bound);
    n->children.push_back(std::move(body));
    return Expr(std::move(n));
}

Expr Expr::product(std::vector<Expr> factors) {
    std::vector<Expr> flat;
    for (auto& f : factors) {
        if (f.kind() == ExprKind::kOne) continue;
        if (f.kind() == ExprKind::kProduct) {
            for (const auto& g : f.children()) flat.push_back(g);
        } else {
            flat.push_back(std::move(f));
        }
    }
    if (flat.empty()) return one();
    if (flat.size() == 1) return flat.front();
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::kProduct;
    n->children = std::move(flat);
    return Expr(std::move(n));
}

Expr Expr::quotient(Expr numerator, Expr denominator) {
    if (denominator.kind() == ExprKind::kOne) return numerator;
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::kQuotient;
    n->children = {std::move(numerator), std::move(denominator)};
    return Expr(std::move(n));
}

ExprKind Expr::kind() const { return node_->kind; }

const Term& Expr::term() const {
    if (kind() != ExprKind::kTerm) throw StructuralError("expression is not a term");
    return node_->term;
}

const RefList& Expr::bound() const {
    if (kind() != ExprKind::kSum) throw StructuralError("expression is not a sum");
    return node_->bound;
}

const std::vector<Expr>& Expr::children() const { return node_->children; }

const Expr& Expr::body() const {
    if (kind() != ExprKind::kSum) throw StructuralError("expression is not a sum");
    return node_->children[0];
}

const Expr& Expr::numerator() const {
    if (kind() != ExprKind::kQuotient) throw StructuralError("expression is not a quotient");
    return node_->children[0];
}

const Expr& Expr::denominator() const {
    if (kind() != ExprKind::kQuotient) throw StructuralError("expression is not a quotient");
    return node_->children[1];
}

Expr Expr::with_children(std::vector<Expr> children) const {
    switch (kind()) {
        case ExprKind::kOne:
        case ExprKind::kTerm:
            return *this;
        case ExprKind::kSum:
            return sum(node_->bound, std::move(children.at(0)));
        case ExprKind::kProduct:
            return product(std::move(children));
        case ExprKind::kQuotient:
            return quotient(std::move(children.at(0)), std::move(children.at(1)));
    }
    return *this;
}

bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return true;
    if (a.kind() != b.kind()) return false;
    if (a.node_->term != b.node_->term) return false;
    if (a.node_->bound != b.node_->bound) return false;
    return a.node_->children == b.node_->children;
}

// Queries ---------------------------------------------------------------------------

namespace {

void collect_free(const Expr& e, std::set<VarRef>& out) {
    switch (e.kind()) {
        case ExprKind::kOne:
            return;
        case ExprKind::kTerm: {
            const auto& t = e.term();
            out.insert(t.outcome.begin(), t.outcome.end());
            out.insert(t.intervened.begin(), t.intervened.end());
            out.insert(t.observed.begin(), t.observed.end());
            return;
        }
        case ExprKind::kSum: {
            std::set<VarRef> inner;
            collect_free(e.body(), inner);
            for (const auto& r : e.bound()) inner.erase(r);
            out.insert(inner.begin(), inner.end());
            return;
        }
        default:
            for (const auto& c : e.children()) collect_free(c, out);
    }
}

void collect_all(const Expr& e, std::set<VarRef>& out) {
    if (e.kind() == ExprKind::kTerm) {
        collect_free(e, out);
        return;
    }
    if (e.kind() == ExprKind::kSum) out.insert(e.bound().begin(), e.bound().end());
    for (const auto& c : e.children()) collect_all(c, out);
}

template <typename Pred>
bool all_terms(const Expr& e, Pred pred) {
    if (e.kind() == ExprKind::kTerm) return pred(e.term());
    for (const auto& c : e.children()) {
        if (!all_terms(c, pred)) return false;
    }
    return true;
}

}  // namespace

RefList free_refs(const Expr& e) {
    std::set<VarRef> s;
    collect_free(e, s);
    return RefList(s.begin(), s.end());
}

VarSet free_vars(const Expr& e) { return nodes_of(free_refs(e)); }

RefList all_refs(const Expr& e) {
    std::set<VarRef> s;
    collect_all(e, s);
    return RefList(s.begin(), s.end());
}

std::uint32_t max_alias(const Expr& e) {
    std::uint32_t m = 0;
    for (const auto& r : all_refs(e)) m = std::max(m, r.alias);
    return m;
}

bool is_observational(const Expr& e) {
    return all_terms(e, [](const Term& t) { return t.intervened.empty(); });
}

bool is_pure_estimand(const Expr& e) {
    return all_terms(e, [](const Term& t) { return t.is_marginal(); });
}

bool bound_vars_hygienic(const Expr& e) {
    auto walk = [](auto&& self, const Expr& x, std::set<VarRef>& scope) -> bool {
        if (x.kind() == ExprKind::kSum) {
            for (const auto& r : x.bound()) {
                if (scope.count(r)) return false;
            }
            for (const auto& r : x.bound()) scope.insert(r);
            bool ok = self(self, x.body(), scope);
            for (const auto& r : x.bound()) scope.erase(r);
            return ok;
        }
        for (const auto& c : x.children()) {
            if (!self(self, c, scope)) return false;
        }
        return true;
    };
    std::set<VarRef> scope;
    return walk(walk, e, scope);
}

// Renaming --------------------------------------------------------------------------

namespace {

using Substitution = std::map<VarRef, VarRef>;

RefList substitute(const RefList& refs, const Substitution& sub) {
    RefList out;
    out.reserve(refs.size());
    for (const auto& r : refs) {
        auto it = sub.find(r);
        out.push_back(it == sub.end() ? r : it->second);
    }
    return out;
}

template <typename FreshFor>
Expr rename_bound(const Expr& e, Substitution& sub, FreshFor&& fresh_for) {
    switch (e.kind()) {
        case ExprKind::kOne:
            return e;
        case ExprKind::kTerm: {
            const auto& t = e.term();
            return Expr::term(Term{substitute(t.outcome, sub), substitute(t.intervened, sub),
                                   substitute(t.observed, sub)});
        }
        case ExprKind::kSum: {
            Substitution saved = sub;
            RefList bound;
            for (const auto& r : e.bound()) {
                VarRef fresh{r.node, fresh_for(r.node)};
                sub[r] = fresh;
                bound.push_back(fresh);
            }
            Expr body = rename_bound(e.body(), sub, fresh_for);
            sub = std::move(saved);
            return Expr::sum(std::move(bound), std::move(body));
        }
        default: {
            std::vector<Expr> kids;
            for (const auto& c : e.children()) kids.push_back(rename_bound(c, sub, fresh_for));
            return e.with_children(std::move(kids));
        }
    }
}

// Key where refs bound inside the expression print without their alias.
std::string scoped_key(const Expr& e, std::set<VarRef>& scope) {
    auto refs = [&](const RefList& rs) {
        std::string s;
        for (const auto& r : rs) {
            s += std::to_string(r.node);
            s += scope.count(r) ? ".#" : "." + std::to_string(r.alias);
            s += ' ';
        }
        return s;
    };
    switch (e.kind()) {
        case ExprKind::kOne:
            return "1";
        case ExprKind::kTerm: {
            const auto& t = e.term();
            return "P(" + refs(t.outcome) + "|do " + refs(t.intervened) + "|" + refs(t.observed) + ")";
        }
        case ExprKind::kSum: {
            std::string head = "S[" + std::to_string(e.bound().size()) + ":";
            for (const auto& r : e.bound()) head += std::to_string(r.node) + " ";
            for (const auto& r : e.bound()) scope.insert(r);
            std::string k = head + "](" + scoped_key(e.body(), scope) + ")";
            for (const auto& r : e.bound()) scope.erase(r);
            return k;
        }
        case ExprKind::kProduct: {
            std::string k = "*(";
            for (const auto& c : e.children()) k += scoped_key(c, scope) + ",";
            return k + ")";
        }
        case ExprKind::kQuotient:
            return "/(" + scoped_key(e.numerator(), scope) + "," + scoped_key(e.denominator(), scope) + ")";
    }
    return "";
}

Expr sort_factors(const Expr& e, std::set<VarRef>& scope) {
    switch (e.kind()) {
        case ExprKind::kOne:
        case ExprKind::kTerm:
            return e;
        case ExprKind::kSum: {
            for (const auto& r : e.bound()) scope.insert(r);
            Expr body = sort_factors(e.body(), scope);
            for (const auto& r : e.bound()) scope.erase(r);
            return Expr::sum(e.bound(), std::move(body));
        }
        case ExprKind::kProduct: {
            std::vector<std::pair<std::string, Expr>> keyed;
            for (const auto& c : e.children()) {
                Expr s = sort_factors(c, scope);
                keyed.emplace_back(scoped_key(s, scope), std::move(s));
            }
            std::stable_sort(keyed.begin(), keyed.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
            std::vector<Expr> kids;
            for (auto& [k, x] : keyed) kids.push_back(std::move(x));
            return Expr::product(std::move(kids));
        }
        case ExprKind::kQuotient:
            return Expr::quotient(sort_factors(e.numerator(), scope),
                                  sort_factors(e.denominator(), scope));
    }
    return e;
}

}  // namespace

Expr rename_apart(const Expr& e, AliasSource& aliases) {
    aliases.reserve_above(max_alias(e));
    Substitution sub;
    return rename_bound(e, sub, [&](NodeIndex) { return aliases.fresh(); });
}

Expr canonicalize(const Expr& e) {
    // Rebuild through the factories first (flattening, unit laws).
    auto rebuild = [](auto&& self, const Expr& x) -> Expr {
        if (x.kind() == ExprKind::kOne || x.kind() == ExprKind::kTerm) return x;
        std::vector<Expr> kids;
        for (const auto& c : x.children()) kids.push_back(self(self, c));
        return x.with_children(std::move(kids));
    };
    Expr flat = rebuild(rebuild, e);
    std::set<VarRef> scope;
    Expr sorted = sort_factors(flat, scope);

    // Renumber bound aliases per node, above any alias used by a free ref.
    std::map<NodeIndex, std::uint32_t> next;
    for (const auto& r : free_refs(sorted)) next[r.node] = std::max(next[r.node], r.alias);
    Substitution sub;
    return rename_bound(sorted, sub, [&](NodeIndex v) { return ++next[v]; });
}

bool equivalent(const Expr& a, const Expr& b) {
    if (a.id() == b.id()) return true;
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
        case ExprKind::kOne:
            return true;
        case ExprKind::kTerm:
            return a.term() == b.term();
        case ExprKind::kSum:
            return a.bound() == b.bound() && equivalent(a.body(), b.body());
        case ExprKind::kQuotient:
            return equivalent(a.numerator(), b.numerator()) &&
                   equivalent(a.denominator(), b.denominator());
        case ExprKind::kProduct: {
            const auto& fa = a.children();
            const auto& fb = b.children();
            if (fa.size() != fb.size()) return false;
            std::vector<bool> used(fb.size(), false);
            for (const auto& f : fa) {
                bool matched = false;
                for (std::size_t j = 0; j < fb.size(); ++j) {
                    if (!used[j] && equivalent(f, fb[j])) {
                        used[j] = matched = true;
                        break;
                    }
                }
                if (!matched) return false;
            }
            return true;
        }
    }
    return false;
}

std::string structural_key(const Expr& e) {
    auto refs = [](const RefList& rs) {
        std::string s;
        for (const auto& r : rs) s += std::to_string(r.node) + "." + std::to_string(r.alias) + " ";
        return s;
    };
    switch (e.kind()) {
        case ExprKind::kOne:
            return "1";
        case ExprKind::kTerm: {
            const auto& t = e.term();
            return "P(" + refs(t.outcome) + "|do " + refs(t.intervened) + "|" + refs(t.observed) + ")";
        }
        case ExprKind::kSum:
            return "S[" + refs(e.bound()) + "](" + structural_key(e.body()) + ")";
        case ExprKind::kProduct: {
            std::string k = "*(";
            for (const auto& c : e.children()) k += structural_key(c) + ",";
            return k + ")";
        }
        case ExprKind::kQuotient:
            return "/(" + structural_key(e.numerator()) + "," + structural_key(e.denominator()) + ")";
    }
    return "";
}

// Paths -------------------------------------------------------------------------------

const Expr& expr_at(const Expr& root, const Path& path) {
    const Expr* cur = &root;
    for (std::size_t i : path) {
        if (i >= cur->children().size()) throw InputError("path does not address a sub-expression");
        cur = &cur->children()[i];
    }
    return *cur;
}

namespace {

Expr replace_rec(const Expr& node, const Path& path, std::size_t depth, const Expr& replacement) {
    if (depth == path.size()) return replacement;
    const auto& kids = node.children();
    if (path[depth] >= kids.size()) throw InputError("path does not address a sub-expression");
    std::vector<Expr> next = kids;
    next[path[depth]] = replace_rec(kids[path[depth]], path, depth + 1, replacement);
    return node.with_children(std::move(next));
}

bool find_rec(const Expr& node, const Expr& target, Path& path) {
    if (node == target) return true;
    for (std::size_t i = 0; i < node.children().size(); ++i) {
        path.push_back(i);
        if (find_rec(node.children()[i], target, path)) return true;
        path.pop_back();
    }
    return false;
}

}  // namespace

Expr replace_at(const Expr& root, const Path& path, const Expr& replacement) {
    return replace_rec(root, path, 0, replacement);
}

std::optional<Path> find_subexpr(const Expr& root, const Expr& target) {
    Path path;
    if (find_rec(root, target, path)) return path;
    return std::nullopt;
}

// Printing ------------------------------------------------------------------------------

std::string format_ref(const CausalGraph& g, const VarRef& r) {
    std::string s = g.name(r.node);
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (r.alias > 0 && r.alias <= 3) {
        s.append(r.alias, '\'');
    } else if (r.alias > 3) {
        s += "_" + std::to_string(r.alias);
    }
    return s;
}

namespace {

std::string join_refs(const CausalGraph& g, const RefList& refs) {
    std::string s;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (i) s += ", ";
        s += format_ref(g, refs[i]);
    }
    return s;
}

}  // namespace

std::string to_pretty(const Expr& e, const CausalGraph& g) {
    switch (e.kind()) {
        case ExprKind::kOne:
            return "1";
        case ExprKind::kTerm: {
            const auto& t = e.term();
            std::string s = "P(" + join_refs(g, t.outcome);
            if (!t.is_marginal()) {
                s += " | ";
                if (!t.intervened.empty()) {
                    s += "do(" + join_refs(g, t.intervened) + ")";
                    if (!t.observed.empty()) s += ", ";
                }
                s += join_refs(g, t.observed);
            }
            return s + ")";
        }
        case ExprKind::kSum: {
            std::string body = to_pretty(e.body(), g);
            const auto k = e.body().kind();
            if (k == ExprKind::kProduct || k == ExprKind::kQuotient) body = "[" + body + "]";
            return "Σ_{" + join_refs(g, e.bound()) + "} " + body;
        }
        case ExprKind::kProduct: {
            std::string s;
            for (std::size_t i = 0; i < e.children().size(); ++i) {
                if (i) s += " · ";
                s += to_pretty(e.children()[i], g);
            }
            return s;
        }
        case ExprKind::kQuotient: {
            std::string num = to_pretty(e.numerator(), g);
            std::string den = to_pretty(e.denominator(), g);
            if (e.numerator().kind() == ExprKind::kSum) num = "(" + num + ")";
            const auto k = e.denominator().kind();
            if (k != ExprKind::kTerm && k != ExprKind::kOne) den = "(" + den + ")";
            return num + " / " + den;
        }
    }
    return "";
}

// Evaluation -------------------------------------------------------------------------------

double ObservationalSource::probability(const VarSet& vars, std::span<const int> values,
                                        const VarSet& do_vars, std::span<const int>) {
    if (!do_vars.empty()) throw InputError("observational source cannot evaluate an interventional term");
    if (vars.empty()) return 1.0;
    auto it = marginals_.find(vars);
    if (it == marginals_.end()) it = marginals_.emplace(vars, joint_.marginal(vars)).first;
    return it->second.at(values);
}

struct Evaluator::Impl {
    struct CNode {
        ExprKind kind = ExprKind::kOne;
        std::vector<int> children;
        std::vector<int> bound_slots;
        VarSet joint_nodes, given_nodes, do_nodes;
        std::vector<int> joint_slots, given_slots, do_slots;
        std::vector<int> free_slots;  // sorted
        std::vector<std::size_t> radix;
        std::size_t memo_size = 0;
        std::vector<double> dense;
        std::unordered_map<std::size_t, double> sparse;
    };

    TermSource& source;
    const CausalGraph* names;
    std::map<VarRef, int> slot_of;
    std::vector<VarRef> slot_ref;
    std::vector<int> slot_arity;
    std::vector<int> env;
    std::vector<CNode> nodes;
    int root = 0;
    RefList top_free;
    std::vector<int> top_slots;
    std::vector<int> scratch_a, scratch_b;

    Impl(TermSource& src, const CausalGraph* g) : source(src), names(g) {}

    int slot(const VarRef& r, const std::vector<int>& arity) {
        auto it = slot_of.find(r);
        if (it != slot_of.end()) return it->second;
        if (r.node >= arity.size() || arity[r.node] < 1) {
            throw InputError("no domain for node " + std::to_string(r.node));
        }
        const int s = static_cast<int>(slot_ref.size());
        slot_of.emplace(r, s);
        slot_ref.push_back(r);
        slot_arity.push_back(arity[r.node]);
        return s;
    }

    int compile(const Expr& e, const std::vector<int>& arity) {
        CNode c;
        c.kind = e.kind();
        std::set<int> free;
        switch (e.kind()) {
            case ExprKind::kOne:
                break;
            case ExprKind::kTerm: {
                const auto& t = e.term();
                RefList joint = merge_refs(t.outcome, t.observed);
                c.joint_nodes = nodes_of(joint);
                c.given_nodes = nodes_of(t.observed);
                c.do_nodes = nodes_of(t.intervened);
                for (const auto& r : joint) c.joint_slots.push_back(slot(r, arity));
                for (const auto& r : t.observed) c.given_slots.push_back(slot(r, arity));
                for (const auto& r : t.intervened) c.do_slots.push_back(slot(r, arity));
                free.insert(c.joint_slots.begin(), c.joint_slots.end());
                free.insert(c.do_slots.begin(), c.do_slots.end());
                break;
            }
            case ExprKind::kSum: {
                for (const auto& r : e.bound()) c.bound_slots.push_back(slot(r, arity));
                int child = compile(e.body(), arity);
                c.children.push_back(child);
                free.insert(nodes[child].free_slots.begin(), nodes[child].free_slots.end());
                for (int s : c.bound_slots) free.erase(s);
                break;
            }
            default:
                for (const auto& k : e.children()) {
                    int child = compile(k, arity);
                    c.children.push_back(child);
                    free.insert(nodes[child].free_slots.begin(), nodes[child].free_slots.end());
                }
        }
        c.free_slots.assign(free.begin(), free.end());
        std::size_t size = 1;
        bool overflow = false;
        for (int s : c.free_slots) {
            c.radix.push_back(static_cast<std::size_t>(slot_arity[s]));
            if (size > (std::size_t{1} << 40) / c.radix.back()) overflow = true;
            size *= c.radix.back();
        }
        c.memo_size = overflow ? 0 : size;
        if (!overflow && size <= (std::size_t{1} << 16)) {
            c.dense.assign(size, std::numeric_limits<double>::quiet_NaN());
        }
        nodes.push_back(std::move(c));
        return static_cast<int>(nodes.size()) - 1;
    }

    std::string describe(const std::vector<int>& slots) const {
        std::string s = "{";
        for (std::size_t i = 0; i < slots.size(); ++i) {
            if (i) s += ", ";
            const VarRef& r = slot_ref[slots[i]];
            s += names ? format_ref(*names, r) : std::to_string(r.node) + "." + std::to_string(r.alias);
            s += "=" + std::to_string(env[slots[i]]);
        }
        return s + "}";
    }

    double term_value(const CNode& c) {
        scratch_a.resize(c.joint_slots.size());
        for (std::size_t i = 0; i < c.joint_slots.size(); ++i) scratch_a[i] = env[c.joint_slots[i]];
        scratch_b.resize(c.do_slots.size());
        for (std::size_t i = 0; i < c.do_slots.size(); ++i) scratch_b[i] = env[c.do_slots[i]];
        std::vector<int> do_vals = scratch_b;
        const double joint = source.probability(c.joint_nodes, scratch_a, c.do_nodes, do_vals);
        if (c.given_nodes.empty()) return joint;
        std::vector<int> given(c.given_slots.size());
        for (std::size_t i = 0; i < given.size(); ++i) given[i] = env[c.given_slots[i]];
        const double denom = source.probability(c.given_nodes, given, c.do_nodes, do_vals);
        if (denom == 0.0) throw PositivityError("zero-probability conditioning event", describe(c.free_slots));
        return joint / denom;
    }

    double eval(int id) {
        CNode& c = nodes[id];
        std::size_t key = 0;
        const bool memo = c.memo_size > 0;
        if (memo) {
            for (std::size_t i = 0; i < c.free_slots.size(); ++i) {
                key = key * c.radix[i] + static_cast<std::size_t>(env[c.free_slots[i]]);
            }
            if (!c.dense.empty()) {
                if (!std::isnan(c.dense[key])) return c.dense[key];
            } else if (auto it = c.sparse.find(key); it != c.sparse.end()) {
                return it->second;
            }
        }
        double v = 0.0;
        switch (c.kind) {
            case ExprKind::kOne:
                v = 1.0;
                break;
            case ExprKind::kTerm:
                v = term_value(c);
                break;
            case ExprKind::kProduct:
                v = 1.0;
                for (int k : c.children) {
                    v *= eval(k);
                    if (v == 0.0) break;
                }
                break;
            case ExprKind::kQuotient: {
                const double den = eval(c.children[1]);
                if (den == 0.0) {
                    throw PositivityError("zero denominator", describe(nodes[c.children[1]].free_slots));
                }
                v = eval(c.children[0]) / den;
                break;
            }
            case ExprKind::kSum: {
                const std::vector<int> bound = c.bound_slots;
                const int child = c.children[0];
                std::vector<int> saved(bound.size());
                for (std::size_t i = 0; i < bound.size(); ++i) {
                    saved[i] = env[bound[i]];
                    env[bound[i]] = 0;
                }
                while (true) {
                    v += eval(child);
                    std::size_t i = bound.size();
                    bool done = true;
                    while (i > 0) {
                        --i;
                        if (++env[bound[i]] < slot_arity[bound[i]]) {
                            done = false;
                            break;
                        }
                        env[bound[i]] = 0;
                    }
                    if (done) break;
                }
                for (std::size_t i = 0; i < bound.size(); ++i) env[bound[i]] = saved[i];
                break;
            }
        }
        CNode& after = nodes[id];
        if (memo) {
            if (!after.dense.empty()) {
                after.dense[key] = v;
            } else {
                after.sparse.emplace(key, v);
            }
        }
        return v;
    }
};

Evaluator::Evaluator(const Expr& e, std::vector<int> arity, TermSource& source, const CausalGraph* names)
    : impl_(std::make_unique<Impl>(source, names)) {
    impl_->root = impl_->compile(e, arity);
    impl_->env.assign(impl_->slot_ref.size(), 0);
    for (int s : impl_->nodes[impl_->root].free_slots) {
        impl_->top_free.push_back(impl_->slot_ref[s]);
        impl_->top_slots.push_back(s);
    }
    // free slots are sorted by slot id; present them in ref order.
    std::vector<std::size_t> order(impl_->top_free.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return impl_->top_free[a] < impl_->top_free[b]; });
    RefList refs;
    std::vector<int> slots;
    for (std::size_t i : order) {
        refs.push_back(impl_->top_free[i]);
        slots.push_back(impl_->top_slots[i]);
    }
    impl_->top_free = std::move(refs);
    impl_->top_slots = std::move(slots);
}

Evaluator::~Evaluator() = default;

const RefList& Evaluator::free() const { return impl_->top_free; }

double Evaluator::value(std::span<const int> free_values) {
    if (free_values.size() != impl_->top_slots.size()) {
        throw InputError("evaluator: wrong number of free values");
    }
    for (std::size_t i = 0; i < free_values.size(); ++i) {
        const int s = impl_->top_slots[i];
        if (free_values[i] < 0 || free_values[i] >= impl_->slot_arity[s]) {
            throw InputError("evaluator: value out of domain");
        }
        impl_->env[s] = free_values[i];
    }
    return impl_->eval(impl_->root);
}

double evaluate(const Expr& e, const JointTable& joint, const Assignment& a) {
    NodeIndex max_node = 0;
    for (NodeIndex v : joint.vars()) max_node = std::max(max_node, v);
    std::vector<int> arity(max_node + 1, 0);
    for (std::size_t i = 0; i < joint.vars().size(); ++i) arity[joint.vars()[i]] = joint.arity()[i];

    ObservationalSource source(joint);
    Evaluator ev(e, arity, source);
    std::vector<int> values;
    for (const auto& r : ev.free()) {
        if (r.alias != 0) throw InputError("evaluate: free variable is an alias copy");
        auto it = a.find(r.node);
        if (it == a.end()) throw InputError("evaluate: assignment misses a free variable");
        values.push_back(it->second);
    }
    return ev.value(values);
}

}  // namespace cid
