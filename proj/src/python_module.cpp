#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cid/ccomp.hpp"
#include "cid/cli.hpp"
#include "cid/docalc.hpp"
#include "cid/ident.hpp"
#include "cid/json.hpp"
#include "cid/oracle.hpp"
#include "cid/separation.hpp"

namespace py = pybind11;
using namespace cid;

namespace {

using Names = std::vector<std::string>;

// Structured results cross the boundary as JSON text; the Python package decodes them.
std::string identify_json(const CausalGraph& g, const Names& t, const Names& s) {
    const VarSet tv = g.resolve(t), sv = g.resolve(s);
    const IdentResult r = causal_effect(tv, sv, g);
    Json j = {{"do", names_json(g, tv)}, {"on", names_json(g, sv)}};
    if (r.identifiable()) {
        j["status"] = "identifiable";
        j["pretty"] = to_pretty(*r.estimand, g);
        j["estimand"] = to_json(*r.estimand, g);
    } else {
        j["status"] = "not_identifiable";
        j["failure"] = {{"c", names_json(g, r.failure->c)}, {"t", names_json(g, r.failure->t)}};
    }
    return j.dump();
}

std::optional<std::string> derive_json(const CausalGraph& g, const Names& t, const Names& s) {
    const DeriveResult r = derive_effect(g.resolve(t), g.resolve(s), g);
    if (!r.identifiable()) return std::nullopt;
    return to_json(*r.derivation).dump();
}

std::string check_json(const std::string& derivation, int models, std::uint64_t seed) {
    const Derivation d = derivation_from_json(Json::parse(derivation));
    VerifyOptions vo;
    vo.models = models;
    vo.seed = seed;
    const Verdict v = verify_derivation(d, vo);
    Json j = {{"accepted", v.accepted}, {"bad_step", v.bad_step ? Json(*v.bad_step) : Json(nullptr)}, {"reason", v.reason}};
    return j.dump();
}

std::string rule_json(const CausalGraph& g, int rule, const Names& x, const Names& y, const Names& z, const Names& w) {
    return to_json(rule_applicable(g, {rule_from_number(rule), g.resolve(x), g.resolve(y), g.resolve(z), g.resolve(w)}), g)
        .dump();
}

std::string verify_json(const CausalGraph& g, const Names& t, const Names& s, int trials, std::uint64_t seed) {
    const VarSet tv = g.resolve(t), sv = g.resolve(s);
    const IdentResult r = causal_effect(tv, sv, g);
    if (!r.identifiable()) throw InputError("the effect is not identifiable");
    return to_json(check_estimand(*r.estimand, g, tv, sv, trials, seed)).dump();
}

std::optional<std::string> witness_json(const CausalGraph& g, const Names& t, const Names& s, int budget,
                                        std::uint64_t seed) {
    WitnessOptions wo;
    wo.budget = budget;
    wo.seed = seed;
    const auto w = witness_search(g, g.resolve(t), g.resolve(s), wo);
    if (!w) return std::nullopt;
    return Json{{"observational_gap", w->observational_gap},
                {"causal_gap", w->causal_gap},
                {"m1", to_json(w->m1)},
                {"m2", to_json(w->m2)}}
        .dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "causal effect identification and do-calculus derivations";

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<StructuralError>(m, "StructuralError", PyExc_RuntimeError);

    py::class_<CausalGraph>(m, "Graph")
        .def_static("parse", [](const std::string& text) { return parse_graph_text(text); }, py::arg("text"))
        .def_static("load", &load_graph_file, py::arg("path"))
        .def_static("from_json", [](const std::string& s) { return graph_from_json(Json::parse(s)); }, py::arg("text"))
        .def_property_readonly("nodes", [](const CausalGraph& g) { return g.names_of(g.nodes()); })
        .def_property_readonly("observables", [](const CausalGraph& g) { return g.names_of(g.observables()); })
        .def_property_readonly("latents", [](const CausalGraph& g) { return g.names_of(g.latents()); })
        .def_property_readonly("edges",
                               [](const CausalGraph& g) {
                                   std::vector<std::pair<std::string, std::string>> out;
                                   for (const auto& [p, c] : g.edges()) out.emplace_back(g.name(p), g.name(c));
                                   return out;
                               })
        .def("to_json", [](const CausalGraph& g) { return to_json(g).dump(); })
        .def("to_text", &to_graph_text)
        .def("to_dot", &to_dot)
        .def("__eq__", [](const CausalGraph& a, const CausalGraph& b) { return a == b; })
        .def("__repr__", [](const CausalGraph& g) {
            return "Graph(" + std::to_string(g.nodes().size()) + " nodes, " + std::to_string(g.edge_count()) + " edges)";
        });

    m.def("d_separated",
          [](const CausalGraph& g, const Names& x, const Names& y, const Names& z) {
              return d_separated(g, {g.resolve(x), g.resolve(y), g.resolve(z)});
          },
          py::arg("graph"), py::arg("x"), py::arg("y"), py::arg("z") = Names{});
    m.def("_rule_applicable", &rule_json, py::arg("graph"), py::arg("rule"), py::arg("x"), py::arg("y"), py::arg("z"),
          py::arg("w"));
    m.def("c_components",
          [](const CausalGraph& g) {
              std::vector<Names> out;
              for (const auto& b : c_components(g).blocks) out.push_back(g.names_of(b));
              return out;
          },
          py::arg("graph"));
    m.def("_identify", &identify_json, py::arg("graph"), py::arg("do"), py::arg("on"));
    m.def("_derive", &derive_json, py::arg("graph"), py::arg("do"), py::arg("on"));
    m.def("_check", &check_json, py::arg("derivation"), py::arg("models") = 5, py::arg("seed") = 0);
    m.def("_verify", &verify_json, py::arg("graph"), py::arg("do"), py::arg("on"), py::arg("trials") = 100,
          py::arg("seed") = 0);
    m.def("_witness", &witness_json, py::arg("graph"), py::arg("do"), py::arg("on"), py::arg("budget") = 20,
          py::arg("seed") = 0);
    m.def("run_cli",
          [](const Names& args) {
              std::ostringstream out, err;
              const int code = run_cli(args, out, err);
              return py::make_tuple(code, out.str(), err.str());
          },
          py::arg("args"));
}
