#include "cid/oracle.hpp"

#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include <algorithm>
#include <cmath>
#include <future>
#include <random>
#include <set>

namespace cid {

std::size_t DiscreteModel::parent_config(NodeIndex v, std::span<const int> values) const {
    std::size_t cfg = 0;
    for (NodeIndex p : graph.parents(v)) cfg = cfg * static_cast<std::size_t>(arity[p]) + values[p];
    return cfg;
}

double DiscreteModel::conditional(NodeIndex v, std::span<const int> values) const {
    return cpt[v][parent_config(v, values) * static_cast<std::size_t>(arity[v]) + values[v]];
}

namespace {

std::size_t config_count(const CausalGraph& g, const std::vector<int>& arity, NodeIndex v) {
    std::size_t n = 1;
    for (NodeIndex p : g.parents(v)) n *= static_cast<std::size_t>(arity[p]);
    return n;
}

// Maps a probability vector p (sums to 1) into [eps, 1] while keeping the sum.
void apply_floor(std::span<double> p, double eps) {
    const double k = static_cast<double>(p.size());
    for (double& x : p) x = eps + (1.0 - k * eps) * x;
}

}  // namespace

DiscreteModel random_model(const CausalGraph& g, int arity, std::uint64_t seed, double epsilon) {
    std::vector<int> a(g.universe_size(), 0);
    for (NodeIndex v : g.nodes()) a[v] = arity;
    return random_model(g, a, seed, epsilon);
}

DiscreteModel random_model(const CausalGraph& g, const std::vector<int>& arity, std::uint64_t seed,
                           double epsilon) {
    DiscreteModel m;
    m.graph = g;
    m.arity.assign(g.universe_size(), 0);
    m.cpt.assign(g.universe_size(), {});
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (NodeIndex v : g.nodes()) {
        if (arity.at(v) < 2) throw InputError("random_model: arity must be at least 2");
        if (epsilon * arity[v] >= 1.0) throw InputError("random_model: epsilon too large for the arity");
        m.arity[v] = arity[v];
    }
    for (NodeIndex v : g.nodes()) {
        const std::size_t k = static_cast<std::size_t>(m.arity[v]);
        const std::size_t configs = config_count(g, m.arity, v);
        auto& table = m.cpt[v];
        table.resize(configs * k);
        for (std::size_t c = 0; c < configs; ++c) {
            std::span<double> row(table.data() + c * k, k);
            double total = 0.0;
            for (double& x : row) total += (x = unit(rng));
            for (double& x : row) x /= total;
            apply_floor(row, epsilon);
        }
    }
    return m;
}

JointTable full_joint(const DiscreteModel& m, const Assignment& intervention) {
    const CausalGraph& g = m.graph;
    const VarSet vars = g.nodes();
    std::vector<int> ar;
    for (NodeIndex v : vars) ar.push_back(m.arity[v]);
    for (const auto& [v, x] : intervention) {
        if (!g.contains(v)) throw InputError("intervention on a node outside the model");
        if (x < 0 || x >= m.arity[v]) throw InputError("intervention value out of domain");
    }
    JointTable out(vars, ar);
    std::vector<int> local(vars.size());
    std::vector<int> values(g.universe_size(), 0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.decode(i, local);
        for (std::size_t k = 0; k < vars.size(); ++k) values[vars[k]] = local[k];
        double p = 1.0;
        for (NodeIndex v : vars) {
            auto it = intervention.find(v);
            if (it != intervention.end()) {
                if (values[v] != it->second) {
                    p = 0.0;
                    break;
                }
                continue;
            }
            p *= m.conditional(v, values);
        }
        out[i] = p;
    }
    return out;
}

JointTable observational_joint(const DiscreteModel& m) {
    return full_joint(m).marginal(m.graph.observables());
}

JointTable interventional_truth(const DiscreteModel& m, const Assignment& t, const VarSet& s) {
    return full_joint(m, t).marginal(s);
}

double InterventionalSource::probability(const VarSet& vars, std::span<const int> values,
                                         const VarSet& do_vars, std::span<const int> do_values) {
    if (vars.empty()) return 1.0;
    std::pair<VarSet, std::vector<int>> key{do_vars, std::vector<int>(do_values.begin(), do_values.end())};
    auto it = cache_.find(key);
    if (it == cache_.end()) {
        Assignment a;
        for (std::size_t i = 0; i < do_vars.size(); ++i) a[do_vars[i]] = do_values[i];
        it = cache_.emplace(std::move(key), Cache{full_joint(model_, a), {}}).first;
    }
    Cache& c = it->second;
    auto mit = c.marginals.find(vars);
    if (mit == c.marginals.end()) mit = c.marginals.emplace(vars, c.joint.marginal(vars)).first;
    return mit->second.at(values);
}

std::vector<Assignment> all_assignments(const VarSet& vars, const std::vector<int>& arity) {
    std::vector<Assignment> out;
    RefList refs = refs_of(vars);
    for_each_assignment(refs, arity, [&](std::span<const int> values) {
        Assignment a;
        for (std::size_t i = 0; i < refs.size(); ++i) a[refs[i].node] = values[i];
        out.push_back(std::move(a));
    });
    return out;
}

namespace {

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

double estimand_error(const Expr& e, const DiscreteModel& m, const VarSet& t, const VarSet& s) {
    const JointTable joint = observational_joint(m);
    ObservationalSource source(joint);
    Evaluator ev(e, m.arity, source, &m.graph);
    for (const auto& r : ev.free()) {
        if (r.alias != 0 || !(t.contains(r.node) || s.contains(r.node))) {
            throw InputError("check_estimand: estimand has free variables outside s and t");
        }
    }
    double worst = 0.0;
    std::vector<int> values(ev.free().size());
    std::vector<int> s_values(s.size());
    for (const auto& ta : all_assignments(t, m.arity)) {
        const JointTable truth = interventional_truth(m, ta, s);
        for (std::size_t i = 0; i < truth.size(); ++i) {
            truth.decode(i, s_values);
            for (std::size_t k = 0; k < values.size(); ++k) {
                const NodeIndex v = ev.free()[k].node;
                values[k] = t.contains(v) ? ta.at(v) : s_values[std::find(s.begin(), s.end(), v) - s.begin()];
            }
            worst = std::max(worst, std::abs(ev.value(values) - truth[i]));
        }
    }
    return worst;
}

}  // namespace

EstimandReport check_estimand(const Expr& e, const CausalGraph& g, const VarSet& t, const VarSet& s,
                              int trials, std::uint64_t seed, int arity, int threads) {
    EstimandReport report;
    report.model_error.assign(static_cast<std::size_t>(std::max(trials, 0)), 0.0);
    auto run = [&](int begin, int stride) {
        for (int i = begin; i < trials; i += stride) {
            const DiscreteModel m = random_model(g, arity, trial_seed(seed, static_cast<std::uint64_t>(i)));
            report.model_error[i] = estimand_error(e, m, t, s);
        }
    };
    threads = std::max(1, threads);
    if (threads == 1) {
        run(0, 1);
    } else {
        std::vector<std::future<void>> jobs;
        for (int k = 0; k < threads; ++k) jobs.push_back(std::async(std::launch::async, run, k, threads));
        for (auto& j : jobs) j.get();
    }
    for (double err : report.model_error) report.max_error = std::max(report.max_error, err);
    report.pass = report.max_error <= kCheckTolerance;
    return report;
}

double max_discrepancy(const Expr& lhs, const Expr& rhs, const DiscreteModel& m) {
    InterventionalSource source(m);
    return max_discrepancy(lhs, rhs, m.arity, source);
}

double max_discrepancy(const Expr& lhs, const Expr& rhs, const std::vector<int>& arity, TermSource& source) {
    Evaluator a(lhs, arity, source);
    Evaluator b(rhs, arity, source);
    std::set<VarRef> all(a.free().begin(), a.free().end());
    all.insert(b.free().begin(), b.free().end());
    const RefList refs(all.begin(), all.end());
    double worst = 0.0;
    std::vector<int> va(a.free().size()), vb(b.free().size());
    auto pick = [&](const RefList& want, std::span<const int> values, std::vector<int>& out) {
        std::size_t j = 0;
        for (std::size_t i = 0; i < refs.size() && j < want.size(); ++i) {
            if (refs[i] == want[j]) out[j++] = values[i];
        }
    };
    for_each_assignment(refs, arity, [&](std::span<const int> values) {
        pick(a.free(), values, va);
        pick(b.free(), values, vb);
        worst = std::max(worst, std::abs(a.value(va) - b.value(vb)));
    });
    return worst;
}

// Witness search -------------------------------------------------------------------

namespace {

struct WitnessProblem {
    const DiscreteModel* m1 = nullptr;
    JointTable p1;
    std::vector<Assignment> t_points;
    std::vector<JointTable> truth1;
    VarSet s;
    double target_gap = 0.0;
    std::size_t dims = 0;
    double epsilon = kDefaultEpsilon;

    // One logit per non-reference value of every CPT row.
    DiscreteModel decode(const gsl_vector* x) const {
        DiscreteModel m = *m1;
        std::size_t k = 0;
        for (NodeIndex v : m.graph.nodes()) {
            const std::size_t a = static_cast<std::size_t>(m.arity[v]);
            auto& table = m.cpt[v];
            for (std::size_t row = 0; row < table.size() / a; ++row) {
                std::span<double> p(table.data() + row * a, a);
                double total = 1.0;
                p[a - 1] = 1.0;
                for (std::size_t j = 0; j + 1 < a; ++j) total += (p[j] = std::exp(gsl_vector_get(x, k++)));
                for (double& y : p) y /= total;
                apply_floor(p, epsilon);
            }
        }
        return m;
    }

    void encode(const DiscreteModel& m, gsl_vector* x) const {
        std::size_t k = 0;
        for (NodeIndex v : m.graph.nodes()) {
            const std::size_t a = static_cast<std::size_t>(m.arity[v]);
            const auto& table = m.cpt[v];
            for (std::size_t row = 0; row < table.size() / a; ++row) {
                // invert the floor map, then the softmax
                auto raw = [&](std::size_t j) {
                    const double q = (table[row * a + j] - epsilon) / (1.0 - a * epsilon);
                    return std::max(q, 1e-12);
                };
                for (std::size_t j = 0; j + 1 < a; ++j) {
                    gsl_vector_set(x, k++, std::log(raw(j) / raw(a - 1)));
                }
            }
        }
    }

    std::pair<double, double> gaps(const DiscreteModel& m2) const {
        const JointTable p2 = observational_joint(m2);
        double obs = 0.0;
        for (std::size_t i = 0; i < p2.size(); ++i) obs = std::max(obs, std::abs(p2[i] - p1[i]));
        double causal = 0.0;
        for (std::size_t k = 0; k < t_points.size(); ++k) {
            const JointTable q = interventional_truth(m2, t_points[k], s);
            for (std::size_t i = 0; i < q.size(); ++i) causal = std::max(causal, std::abs(q[i] - truth1[k][i]));
        }
        return {obs, causal};
    }

    double objective(const gsl_vector* x) const {
        const DiscreteModel m2 = decode(x);
        const JointTable p2 = observational_joint(m2);
        double obs = 0.0;
        for (std::size_t i = 0; i < p2.size(); ++i) obs += (p2[i] - p1[i]) * (p2[i] - p1[i]);
        double causal = 0.0;
        for (std::size_t k = 0; k < t_points.size(); ++k) {
            const JointTable q = interventional_truth(m2, t_points[k], s);
            for (std::size_t i = 0; i < q.size(); ++i) causal = std::max(causal, std::abs(q[i] - truth1[k][i]));
        }
        const double shortfall = std::max(0.0, target_gap - causal);
        return obs + shortfall * shortfall;
    }
};

double witness_objective(const gsl_vector* x, void* params) {
    return static_cast<const WitnessProblem*>(params)->objective(x);
}

// Nelder-Mead from x, restarted from its own optimum a few times; x is updated.
void minimise(WitnessProblem& p, gsl_vector* x, int rounds, int iterations) {
    gsl_multimin_function f{&witness_objective, p.dims, &p};
    gsl_vector* step = gsl_vector_alloc(p.dims);
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, p.dims);
    double size = 0.5;
    for (int r = 0; r < rounds; ++r) {
        gsl_vector_set_all(step, size);
        gsl_multimin_fminimizer_set(s, &f, x, step);
        for (int it = 0; it < iterations; ++it) {
            if (gsl_multimin_fminimizer_iterate(s)) break;
            if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-12) == GSL_SUCCESS) break;
        }
        gsl_vector_memcpy(x, gsl_multimin_fminimizer_x(s));
        if (gsl_multimin_fminimizer_minimum(s) < 1e-20) break;
        size = std::max(size * 0.3, 1e-4);
    }
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(step);
}

}  // namespace

std::optional<Witness> witness_search(const CausalGraph& input, const VarSet& t, const VarSet& s,
                                      const WitnessOptions& opt) {
    if (opt.budget <= 0) return std::nullopt;
    const CausalGraph g = remove_barren_latents(input);
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    for (int attempt = 0; attempt < opt.budget; ++attempt) {
        const DiscreteModel m1 = random_model(g, opt.arity, trial_seed(opt.seed, static_cast<std::uint64_t>(attempt)));
        WitnessProblem p;
        p.m1 = &m1;
        p.p1 = observational_joint(m1);
        p.t_points = all_assignments(t, m1.arity);
        for (const auto& a : p.t_points) p.truth1.push_back(interventional_truth(m1, a, s));
        p.s = s;
        p.target_gap = 4.0 * opt.min_causal_gap;
        for (NodeIndex v : g.nodes()) {
            p.dims += config_count(g, m1.arity, v) * static_cast<std::size_t>(m1.arity[v] - 1);
        }
        if (p.dims == 0) continue;

        gsl_vector* x = gsl_vector_alloc(p.dims);
        p.encode(m1, x);
        for (std::size_t i = 0; i < p.dims; ++i) gsl_vector_set(x, i, gsl_vector_get(x, i) + noise(rng));
        minimise(p, x, 12, 4000);
        DiscreteModel m2 = p.decode(x);
        gsl_vector_free(x);

        const auto [obs, causal] = p.gaps(m2);
        if (obs <= opt.max_observational_gap && causal >= opt.min_causal_gap) {
            return Witness{m1, std::move(m2), obs, causal};
        }
    }
    return std::nullopt;
}

// Conditional independence -------------------------------------------------------------

double ci_deviation(const DiscreteModel& m, const SeparationQuery& q) {
    if (!q.x.disjoint(q.y) || !q.x.disjoint(q.z) || !q.y.disjoint(q.z)) {
        throw InputError("ci_check: x, y and z must be pairwise disjoint");
    }
    const VarSet xyz = q.x.unite(q.y).unite(q.z);
    const JointTable joint = full_joint(m).marginal(xyz);
    const JointTable pxz = joint.marginal(q.x.unite(q.z));
    const JointTable pyz = joint.marginal(q.y.unite(q.z));
    const JointTable pz = joint.marginal(q.z);

    auto project = [](const JointTable& tab, std::span<const int> full, const VarSet& all) {
        std::vector<int> out;
        for (NodeIndex v : tab.vars()) out.push_back(full[std::find(all.begin(), all.end(), v) - all.begin()]);
        return out;
    };
    double worst = 0.0;
    std::vector<int> values(xyz.size());
    for (std::size_t i = 0; i < joint.size(); ++i) {
        joint.decode(i, values);
        const double z = pz.at(project(pz, values, xyz));
        if (z <= 0.0) continue;
        const double lhs = joint[i] / z;
        const double rhs = (pxz.at(project(pxz, values, xyz)) / z) * (pyz.at(project(pyz, values, xyz)) / z);
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
}

bool ci_check(const DiscreteModel& m, const SeparationQuery& q, double tolerance) {
    return ci_deviation(m, q) <= tolerance;
}

}  // namespace cid
