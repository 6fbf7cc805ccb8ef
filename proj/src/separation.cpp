#include "cid/separation.hpp"

#include <array>
#include <vector>

namespace cid {

namespace {

void require_disjoint(const VarSet& a, const VarSet& b, const char* what) {
    if (!a.disjoint(b)) throw InputError(std::string(what) + ": sets overlap");
}

}  // namespace

// Reachability over active trails. A visit state is (node, direction) where
// direction says whether we arrived from a child (moving up) or from a parent
// (moving down).
bool d_separated(const CausalGraph& g, const SeparationQuery& q) {
    g.require_nodes(q.x, "d_separated");
    g.require_nodes(q.y, "d_separated");
    g.require_nodes(q.z, "d_separated");
    require_disjoint(q.x, q.y, "d_separated");
    require_disjoint(q.x, q.z, "d_separated");
    require_disjoint(q.y, q.z, "d_separated");
    if (q.x.empty() || q.y.empty()) return true;

    const VarSet z_anc = ancestors(g, q.z);
    const std::size_t n = g.universe_size();
    enum Dir { kUp = 0, kDown = 1 };
    std::vector<std::array<bool, 2>> visited(n, {false, false});
    std::vector<std::pair<NodeIndex, Dir>> stack;
    for (NodeIndex v : q.x) stack.emplace_back(v, kUp);

    while (!stack.empty()) {
        auto [v, dir] = stack.back();
        stack.pop_back();
        if (visited[v][dir]) continue;
        visited[v][dir] = true;
        const bool observed = q.z.contains(v);
        if (!observed && q.y.contains(v)) return false;

        if (dir == kUp && !observed) {
            for (NodeIndex p : g.parents(v)) stack.emplace_back(p, kUp);
            for (NodeIndex c : g.children(v)) stack.emplace_back(c, kDown);
        } else if (dir == kDown) {
            if (!observed) {
                for (NodeIndex c : g.children(v)) stack.emplace_back(c, kDown);
            }
            // v is a collider on this trail: open iff v or a descendant is observed.
            if (z_anc.contains(v)) {
                for (NodeIndex p : g.parents(v)) stack.emplace_back(p, kUp);
            }
        }
    }
    return true;
}

VarSet z_w(const CausalGraph& g, const VarSet& x, const VarSet& z, const VarSet& w) {
    require_disjoint(x, z, "z_w");
    require_disjoint(x, w, "z_w");
    require_disjoint(z, w, "z_w");
    const VarSet w_anc = ancestors(cut_incoming(g, x), w);
    return z.minus(w_anc);
}

RuleEvidence rule_applicable(const CausalGraph& g, const RuleInstance& r) {
    const VarSet* sets[] = {&r.x, &r.y, &r.z, &r.w};
    for (const VarSet* s : sets) g.require_nodes(*s, "rule_applicable");
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) require_disjoint(*sets[i], *sets[j], "rule_applicable");
    }

    RuleEvidence ev;
    ev.instance = r;
    ev.query = {r.y, r.z, r.x.unite(r.w)};
    switch (r.rule) {
        case Rule::kObservation:
            ev.cut_incoming = r.x;
            break;
        case Rule::kExchange:
            ev.cut_incoming = r.x;
            ev.cut_outgoing = r.z;
            break;
        case Rule::kAction:
            ev.cut_incoming = r.x.unite(z_w(g, r.x, r.z, r.w));
            break;
    }
    const CausalGraph mutilated = cut_outgoing(cut_incoming(g, ev.cut_incoming), ev.cut_outgoing);
    ev.holds = d_separated(mutilated, ev.query);
    return ev;
}

int rule_number(Rule r) { return static_cast<int>(r); }

Rule rule_from_number(int n) {
    if (n < 1 || n > 3) throw InputError("rule must be 1, 2 or 3");
    return static_cast<Rule>(n);
}

}  // namespace cid
