import json
import os
import subprocess

import pytest

import causalid

FIXTURES = os.environ.get("CID_FIXTURE_DIR", os.path.join(os.path.dirname(__file__), "..", "fixtures"))


def graph(name):
    return causalid.Graph.load(os.path.join(FIXTURES, name + ".cg"))


def test_graph_basics():
    fd = graph("fd")
    assert fd.observables == ["X", "Z", "Y"]
    assert fd.latents == ["U"]
    assert ("U", "Y") in fd.edges
    assert causalid.Graph.from_json(fd.to_json()) == fd
    assert causalid.Graph.parse(fd.to_text()) == fd
    assert "style=dashed" in fd.to_dot()


def test_parse_errors():
    with pytest.raises(ValueError, match="line 2"):
        causalid.Graph.parse("node X obs\nedge X Y\n")
    with pytest.raises(causalid.InputError, match="self-loop"):
        causalid.Graph.parse("node X obs\nedge X X\n")


def test_identify_front_door():
    r = causalid.identify(graph("fd"), ["X"], ["Y"])
    assert r["status"] == "identifiable"
    assert r["pretty"].startswith("Σ_{z'}")
    assert r["estimand"]["kind"] == "sum"


def test_identify_bow():
    r = causalid.identify(graph("bow"), ["X"], ["Y"])
    assert r["status"] == "not_identifiable"
    assert r["failure"] == {"c": ["Y"], "t": ["X", "Y"]}


def test_separation_and_components():
    chain, coll, bd, bow = graph("chain"), graph("coll"), graph("bd"), graph("bow")
    assert causalid.d_separated(chain, ["X"], ["Y"], ["Z"])
    assert not causalid.d_separated(coll, ["X"], ["Y"], ["Z"])
    ev = causalid.rule_applicable(bd, 2, y=["Y"], z=["X"], w=["Z"])
    assert ev["holds"] and ev["cut_outgoing"] == ["X"]
    assert not causalid.rule_applicable(bow, 3, y=["Y"], z=["X"])["holds"]
    assert causalid.c_components(graph("fd")) == [["X", "Y", "U"], ["Z"]]


def test_derive_and_check():
    d = causalid.derive(graph("fd"), ["X"], ["Y"])
    assert d is not None
    kinds = {s["kind"] for s in d["steps"]}
    assert "FactorSubstitute" in kinds
    assert causalid.check(d)["accepted"]
    assert causalid.derive(graph("bow"), ["X"], ["Y"]) is None

    with open(os.path.join(FIXTURES, "tampered.json")) as f:
        verdict = causalid.check(f.read())
    assert not verdict["accepted"]
    assert verdict["bad_step"] == 0


def test_oracle():
    report = causalid.verify(graph("bd"), ["X"], ["Y"], trials=20, seed=1)
    assert report["pass"] and report["max_error"] <= 1e-9
    w = causalid.witness(graph("bow"), ["X"], ["Y"])
    assert w is not None
    assert w["observational_gap"] <= 1e-6 and w["causal_gap"] >= 1e-2
    assert causalid.witness(graph("bow"), ["X"], ["Y"], budget=0) is None
    with pytest.raises(ValueError):
        causalid.verify(graph("bow"), ["X"], ["Y"])


def test_run_cli_matches_binary():
    args = ["--json", "identify", "--graph", os.path.join(FIXTURES, "fd.cg"), "--do", "X", "--on", "Y"]
    code, out, err = causalid.run_cli(args)
    assert code == 0 and err == ""
    assert json.loads(out)["status"] == "identifiable"
    binary = os.environ.get("CID_CLI")
    if binary:
        proc = subprocess.run([binary] + args, capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout == out
    code, _, _ = causalid.run_cli(["identify", "--graph", os.path.join(FIXTURES, "bow.cg"), "--do", "X", "--on", "Y"])
    assert code == 2
