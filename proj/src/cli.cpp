#include "cid/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "cid/ccomp.hpp"
#include "cid/docalc.hpp"
#include "cid/errors.hpp"
#include "cid/ident.hpp"
#include "cid/json.hpp"
#include "cid/oracle.hpp"
#include "cid/separation.hpp"

namespace cid {
namespace {

struct Options {
    std::string graph;
    std::vector<std::string> t;
    std::vector<std::string> s;
    bool json = false;
    std::uint64_t seed = 0;
    int threads = 1;

    std::string out_file;
    std::string derivation_file;
    std::string estimand_file;
    int models = 5;
    int trials = 100;
    int budget = WitnessOptions{}.budget;
    int arity = 2;

    std::vector<std::string> x, y, z, w;
    int rule = 0;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json read_json(const std::string& path) {
    try {
        return Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw InputError("'" + path + "' is not valid JSON: " + e.what());
    }
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

CausalGraph load_graph(const std::string& path) {
    if (path.empty()) throw InputError("--graph is required");
    if (ends_with(path, ".json")) return graph_from_json(read_json(path));
    return load_graph_file(path);
}

std::string sci(double v) {
    std::ostringstream ss;
    ss << std::scientific << std::setprecision(3) << v;
    return ss.str();
}

std::string effect_label(const CausalGraph& g, const VarSet& t, const VarSet& s) {
    return to_pretty(query_sentence(t, s), g);
}

struct Query {
    VarSet t;
    VarSet s;
};

Query resolve_query(const CausalGraph& g, const Options& o) {
    if (o.s.empty()) throw InputError("--on needs at least one variable");
    return {g.resolve(o.t), g.resolve(o.s)};
}

int cmd_identify(const Options& o, std::ostream& out) {
    const CausalGraph g = load_graph(o.graph);
    const Query q = resolve_query(g, o);
    const IdentResult r = causal_effect(q.t, q.s, g);
    if (o.json) {
        Json j = {{"do", names_json(g, q.t)}, {"on", names_json(g, q.s)}};
        if (r.identifiable()) {
            j["status"] = "identifiable";
            j["pretty"] = to_pretty(*r.estimand, g);
            j["estimand"] = to_json(*r.estimand, g);
        } else {
            j["status"] = "not_identifiable";
            j["failure"] = {{"c", names_json(g, r.failure->c)}, {"t", names_json(g, r.failure->t)}};
        }
        out << j.dump(2) << '\n';
    } else if (r.identifiable()) {
        out << "identifiable\n" << effect_label(g, q.t, q.s) << " = " << to_pretty(*r.estimand, g) << '\n';
    } else {
        out << "not identifiable: Identify fails on C = " << format_set(g, r.failure->c)
            << ", T = " << format_set(g, r.failure->t) << '\n';
    }
    return r.identifiable() ? kExitOk : kExitNotIdentifiable;
}

void print_steps(const Derivation& d, std::ostream& out) {
    for (std::size_t i = 0; i < d.steps.size(); ++i) {
        const auto& st = d.steps[i];
        out << std::setw(4) << i << "  " << std::left << std::setw(17) << step_kind_name(st.kind) << std::right;
        if (st.reversed) out << "(reversed) ";
        out << to_pretty(st.after, d.graph) << '\n';
    }
}

int cmd_derive(const Options& o, std::ostream& out) {
    const CausalGraph g = load_graph(o.graph);
    const Query q = resolve_query(g, o);
    const DeriveResult r = derive_effect(q.t, q.s, g);
    if (!r.identifiable()) {
        if (o.json) {
            Json j = {{"status", "not_identifiable"},
                      {"failure", {{"c", names_json(g, r.failure->first)}, {"t", names_json(g, r.failure->second)}}}};
            out << j.dump(2) << '\n';
        } else {
            out << "not identifiable: Identify fails on C = " << format_set(g, r.failure->first)
                << ", T = " << format_set(g, r.failure->second) << '\n';
        }
        return kExitNotIdentifiable;
    }
    const Derivation& d = *r.derivation;
    const Json dj = to_json(d);
    if (!o.out_file.empty()) {
        std::ofstream f(o.out_file, std::ios::binary);
        if (!f) throw InputError("cannot write '" + o.out_file + "'");
        f << dj.dump(2) << '\n';
    }
    if (o.json) {
        out << dj.dump(2) << '\n';
        return kExitOk;
    }
    out << "derivation of " << to_pretty(d.start, g) << ": " << d.steps.size() << " steps, " << total_steps(d)
        << " including lemmas\n";
    print_steps(d, out);
    out << "result: " << to_pretty(d.result(), g) << '\n';
    if (!o.out_file.empty()) out << "written to " << o.out_file << '\n';
    return kExitOk;
}

int cmd_check(const Options& o, std::ostream& out) {
    if (o.derivation_file.empty()) throw InputError("--derivation is required");
    const Derivation d = derivation_from_json(read_json(o.derivation_file));
    VerifyOptions vo;
    vo.models = o.models;
    vo.seed = o.seed;
    const Verdict v = verify_derivation(d, vo);
    if (o.json) {
        Json j = {{"accepted", v.accepted}, {"steps", d.steps.size()}};
        if (!v.accepted) {
            j["bad_step"] = v.bad_step ? Json(*v.bad_step) : Json(nullptr);
            j["reason"] = v.reason;
        }
        out << j.dump(2) << '\n';
    } else if (v.accepted) {
        out << "accepted: " << d.steps.size() << " steps, " << total_steps(d) << " including lemmas\n";
    } else {
        out << "rejected";
        if (v.bad_step) {
            out << " at step " << *v.bad_step;
            if (*v.bad_step < d.steps.size()) out << " (" << step_kind_name(d.steps[*v.bad_step].kind) << ")";
        }
        out << ": " << v.reason << '\n';
    }
    return v.accepted ? kExitOk : kExitRejected;
}

int cmd_dsep(const Options& o, std::ostream& out) {
    const CausalGraph g = load_graph(o.graph);
    const VarSet x = g.resolve(o.x), y = g.resolve(o.y), z = g.resolve(o.z), w = g.resolve(o.w);
    if (o.rule == 0) {
        if (!w.empty()) throw InputError("--w is only meaningful with --rule");
        const bool sep = d_separated(g, {x, y, z});
        if (o.json) {
            out << Json{{"x", names_json(g, x)}, {"y", names_json(g, y)}, {"given", names_json(g, z)},
                        {"separated", sep}}
                       .dump(2)
                << '\n';
        } else {
            out << format_set(g, x) << (sep ? " is d-separated from " : " is d-connected to ") << format_set(g, y)
                << " given " << format_set(g, z) << '\n';
        }
        return kExitOk;
    }
    const RuleEvidence ev = rule_applicable(g, RuleInstance{rule_from_number(o.rule), x, y, z, w});
    if (o.json) {
        out << to_json(ev, g).dump(2) << '\n';
    } else {
        out << "rule " << o.rule << (ev.holds ? " applies" : " does not apply") << ": ("
            << format_set(g, ev.query.x) << " _||_ " << format_set(g, ev.query.y) << " | "
            << format_set(g, ev.query.z) << ") in G with incoming edges of " << format_set(g, ev.cut_incoming)
            << " and outgoing edges of " << format_set(g, ev.cut_outgoing) << " removed\n";
    }
    return kExitOk;
}

int cmd_ccomp(const Options& o, std::ostream& out) {
    const CausalGraph g = load_graph(o.graph);
    const CComponentPartition p = c_components(g);
    if (o.json) {
        out << to_json(p, g).dump(2) << '\n';
    } else {
        for (const auto& b : p.blocks) out << names_json(g, b).dump() << '\n';
    }
    return kExitOk;
}

int cmd_oracle_verify(const Options& o, std::ostream& out) {
    const CausalGraph g = load_graph(o.graph);
    const Query q = resolve_query(g, o);
    Expr e;
    if (!o.estimand_file.empty()) {
        e = expr_from_json(read_json(o.estimand_file), g);
    } else {
        const IdentResult r = causal_effect(q.t, q.s, g);
        if (!r.identifiable()) {
            out << (o.json ? Json{{"status", "not_identifiable"}}.dump(2) : std::string("not identifiable")) << '\n';
            return kExitNotIdentifiable;
        }
        e = *r.estimand;
    }
    const EstimandReport rep = check_estimand(e, g, q.t, q.s, o.trials, o.seed, o.arity, o.threads);
    if (o.json) {
        Json j = to_json(rep);
        j["estimand"] = to_pretty(e, g);
        j["seed"] = o.seed;
        out << j.dump(2) << '\n';
    } else {
        const auto passed = std::count_if(rep.model_error.begin(), rep.model_error.end(),
                                          [](double v) { return v <= kCheckTolerance; });
        out << (rep.pass ? "pass" : "FAIL") << ": " << passed << "/" << rep.model_error.size()
            << " models within " << sci(kCheckTolerance) << ", max error " << sci(rep.max_error) << '\n';
    }
    return rep.pass ? kExitOk : kExitRejected;
}

int cmd_oracle_witness(const Options& o, std::ostream& out) {
    const CausalGraph g = load_graph(o.graph);
    const Query q = resolve_query(g, o);
    WitnessOptions wo;
    wo.budget = o.budget;
    wo.seed = o.seed;
    wo.arity = o.arity;
    const auto w = witness_search(g, q.t, q.s, wo);
    if (o.json) {
        Json j = {{"found", w.has_value()}, {"budget", o.budget}, {"seed", o.seed}};
        if (w) {
            j["observational_gap"] = w->observational_gap;
            j["causal_gap"] = w->causal_gap;
            j["m1"] = to_json(w->m1);
            j["m2"] = to_json(w->m2);
        }
        out << j.dump(2) << '\n';
    } else if (w) {
        out << "witness found: observational gap " << sci(w->observational_gap) << ", causal gap "
            << sci(w->causal_gap) << '\n';
    } else {
        out << "no witness within budget " << o.budget << '\n';
    }
    return kExitOk;
}

int cmd_export_dot(const Options& o, std::ostream& out) {
    const CausalGraph g = load_graph(o.graph);
    const std::string dot = to_dot(g);
    if (o.out_file.empty()) {
        out << dot;
    } else {
        std::ofstream f(o.out_file, std::ios::binary);
        if (!f) throw InputError("cannot write '" + o.out_file + "'");
        f << dot;
    }
    return kExitOk;
}

void add_graph(CLI::App* c, Options& o) {
    c->add_option("--graph", o.graph, "graph file (.cg text format or .json)")->required();
}

void add_query(CLI::App* c, Options& o) {
    c->add_option("--do", o.t, "intervened variables")->delimiter(',');
    c->add_option("--on", o.s, "outcome variables")->delimiter(',')->required();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"causal effect identification via do-calculus", "cid"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "help for every subcommand");
    app.add_flag("--json", o.json, "machine-readable output");
    app.add_option("--seed", o.seed, "random seed")->capture_default_str();
    app.add_option("--threads", o.threads, "worker threads for oracle trials")->check(CLI::PositiveNumber);
    // Global flags are also accepted after the subcommand.
    app.fallthrough();

    auto* identify = app.add_subcommand("identify", "identify P_t(s) as an observational estimand");
    add_graph(identify, o);
    add_query(identify, o);

    auto* derive = app.add_subcommand("derive", "compile the identification into a do-calculus derivation");
    add_graph(derive, o);
    add_query(derive, o);
    derive->add_option("--out", o.out_file, "write the derivation JSON here");

    auto* check = app.add_subcommand("check", "verify a derivation JSON step by step");
    check->add_option("--derivation", o.derivation_file, "derivation JSON")->required();
    check->add_option("--models", o.models, "random models for numeric spot checks")->check(CLI::NonNegativeNumber);

    auto* dsep = app.add_subcommand("dsep", "d-separation or do-calculus rule applicability");
    add_graph(dsep, o);
    dsep->add_option("--x", o.x, "first set (rule: held interventions)")->delimiter(',');
    dsep->add_option("--y", o.y, "second set (rule: outcome)")->delimiter(',');
    dsep->add_option("--z", o.z, "conditioning set (rule: moved set)")->delimiter(',');
    dsep->add_option("--w", o.w, "rule observations")->delimiter(',');
    dsep->add_option("--rule", o.rule, "do-calculus rule 1, 2 or 3")->check(CLI::Range(1, 3));

    auto* ccomp = app.add_subcommand("ccomp", "c-component partition");
    add_graph(ccomp, o);

    auto* oracle = app.add_subcommand("oracle", "numeric checks on random discrete models");
    oracle->require_subcommand(1);
    auto* verify = oracle->add_subcommand("verify", "compare an estimand with the interventional truth");
    add_graph(verify, o);
    add_query(verify, o);
    verify->add_option("--trials", o.trials, "random models")->check(CLI::PositiveNumber)->capture_default_str();
    verify->add_option("--estimand", o.estimand_file, "estimand JSON (default: the identified one)");
    verify->add_option("--arity", o.arity, "values per variable")->check(CLI::Range(2, 8));
    auto* witness = oracle->add_subcommand("witness", "search for two models that differ only causally");
    add_graph(witness, o);
    add_query(witness, o);
    witness->add_option("--budget", o.budget, "random restarts")->check(CLI::NonNegativeNumber)->capture_default_str();
    witness->add_option("--arity", o.arity, "values per variable")->check(CLI::Range(2, 8));

    auto* dot = app.add_subcommand("export-dot", "write the graph in DOT format");
    add_graph(dot, o);
    dot->add_option("--out", o.out_file, "output file (default: stdout)");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (identify->parsed()) return cmd_identify(o, out);
        if (derive->parsed()) return cmd_derive(o, out);
        if (check->parsed()) return cmd_check(o, out);
        if (dsep->parsed()) return cmd_dsep(o, out);
        if (ccomp->parsed()) return cmd_ccomp(o, out);
        if (verify->parsed()) return cmd_oracle_verify(o, out);
        if (witness->parsed()) return cmd_oracle_witness(o, out);
        if (dot->parsed()) return cmd_export_dot(o, out);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        err << "error: " << msg << '\n';
        return kExitError;
    }
    return kExitError;
}

}  // namespace cid
