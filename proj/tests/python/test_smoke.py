# Copyright (c) mnverify contributors.
# SPDX-License-Identifier: Apache-2.0
import json
from pathlib import Path

import jsonschema
import pytest
from referencing import Registry, Resource

import mnverify

SCHEMAS = Path(__file__).resolve().parents[2] / "schemas"


@pytest.fixture(scope="module")
def registry():
    docs = [json.loads(p.read_text()) for p in SCHEMAS.glob("*.schema.json")]
    return Registry().with_resources((d["$id"], Resource.from_contents(d)) for d in docs)


def validate(doc, name, registry):
    schema = json.loads((SCHEMAS / name).read_text())
    jsonschema.Draft202012Validator(schema, registry=registry).validate(doc)


def test_builtins_listed():
    names = mnverify.builtin_names()
    assert {"fig1", "pendulum", "cartpole", "doubling"} <= set(names)
    assert mnverify.schema_version == 1


def test_fig1_queries(registry):
    rep = mnverify.verify("fig1", "X^3 (z <= 2)")
    assert rep["result"]["verdict"] == "true"
    assert rep["result"]["engine"] == "rmilp"
    validate(rep, "report.schema.json", registry)

    rep = mnverify.verify("fig1", "X^2 (z <= 2)", engine="bpt-only")
    assert rep["result"]["verdict"] == "true"
    assert rep["result"]["engine"] == "bpt"
    assert rep["config"]["engine"] == "bpt-only"

    rep = mnverify.verify("fig1", "X^3 (z <= 2)", engine="bpt-only")
    assert rep["result"]["verdict"] == "unknown"


def test_false_with_witness():
    rep = mnverify.verify("doubling", "X^2 (x <= 3)", node_limit=5000)
    assert rep["result"]["verdict"] == "false"
    assert rep["config"]["solver"]["node_limit"] == 5000
    witness = rep["result"]["witness"]
    assert len(witness) == 3
    assert witness[2]["x"][0] > 3


def test_bounds_and_simulate(registry):
    b = mnverify.bounds("fig1", 3)
    z = b["state_names"].index("z")
    assert [s["x"]["upper"][z] for s in b["boxes"]] == [0, 1, 2, 3]
    validate(b, "bounds.schema.json", registry)

    p = mnverify.simulate("pendulum:n=8", 5, seed=1)
    assert len(p["path"]) == 6
    assert p == mnverify.simulate("pendulum:n=8", 5, seed=1)
    validate(p, "path.schema.json", registry)


def test_model_documents(registry, tmp_path):
    doc = mnverify.load_system("doubling")
    validate(doc, "model.schema.json", registry)
    assert mnverify.verify(doc, "X^2 (x <= 3)")["result"]["verdict"] == "false"
    f = tmp_path / "doubling.json"
    f.write_text(json.dumps(doc))
    assert mnverify.load_system(str(f)) == doc


def test_export_lp():
    text = mnverify.export_lp("fig1", 3, maximize="z")
    assert text.splitlines()[1] == "Maximize"
    assert "Binaries" in text and text.rstrip().endswith("End")
    assert len(mnverify.export_lp("fig1", 3, split=False)) > len(mnverify.export_lp("fig1", 3))


def test_errors():
    with pytest.raises(mnverify.ParseError):
        mnverify.verify("fig1", "X^3 (z <= ")
    with pytest.raises(ValueError):
        mnverify.verify("fig1", "X (nope <= 1)")
    with pytest.raises(ValueError):
        mnverify.verify("no-such-system", "x <= 1")
    with pytest.raises(ValueError):
        mnverify.verify("fig1", "z <= 1", engine="fast")
    with pytest.raises(mnverify.ModelError):
        mnverify.load_system({"name": "broken"})
    assert mnverify.normalize_formula("X^2(z<=2)") == mnverify.normalize_formula("X X (z <= 2)")
