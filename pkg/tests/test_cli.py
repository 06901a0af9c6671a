import json
import subprocess
import sys

import pytest

from artifact import cli, fixtures
from artifact.dynamics import polynomial_from_doc, polynomial_to_doc
from artifact.lamination import lamination_from_doc, tower_from_doc, tower_to_doc
from artifact.schema import schema_from_doc, schema_to_doc


def run(*argv):
    return cli.run(list(argv))


def text(res):
    return "\n".join(res.report)


def test_verify_linked_chords_names_witness():
    res = run("verify", "linked-chords")
    assert res.code == cli.INVALID
    assert "linked classes: {0,1/2}; {1/4,3/4}" in text(res)


def test_verify_valid_towers():
    for name in fixtures.GENERATOR_TOWERS:
        assert run("verify", name).code == cli.OK


def test_verify_document_file(tmp_path):
    p = tmp_path / "t.json"
    p.write_text(json.dumps(fixtures.emit("rabbit")))
    assert run("verify", str(p)).code == cli.OK


def test_markings_z4():
    res = run("markings", "z4-1-schema", "--check")
    assert res.code == cli.OK
    assert text(res).splitlines()[0] == "3 markings"
    assert "agrees" in text(res)


@pytest.mark.parametrize("name,count", [("t-adj", 2), ("t-bit", 3), ("t-dis", 1)])
def test_markings_named_schemata(name, count):
    res = run("markings", name, "--json")
    assert len(res.document["markings"]) == count


def test_trace_basilica():
    res = run("trace", "basilica-poly", "--angle", "1/3")
    assert res.code == cli.OK
    assert "landed at -0.6180339" in text(res)


def test_trace_nonconvergence_exit_code():
    # the 1/4 ray of z^2 - 2 lands on the critical point 0
    res = run("trace", "chebyshev", "--angle", "1/4")
    assert res.code == cli.NONCONVERGENCE
    assert "max-iter" in text(res)


def test_trace_csv(tmp_path):
    p = tmp_path / "ray.csv"
    assert run("trace", "z2", "--angle", "1/3", "--csv", str(p)).code == cli.OK
    rows = p.read_text().splitlines()
    assert len(rows) > 10


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["trace", "z2", "--angle", "0.5"],
    ["trace", "z2"],
    ["pieces", "basilica"],
    ["render-lam", "basilica"],
    ["fixtures", "emit"],
    ["trace", "z2", "--angle", "1/3", "--levels", "0"],
])
def test_usage_errors(argv):
    assert cli.run(argv).code == cli.USAGE


def test_unknown_fixture_is_usage_error():
    res = run("verify", "no-such-thing")
    assert res.code == cli.USAGE
    assert "no-such-thing" in text(res)


def test_pieces_and_schema():
    res = run("pieces", "basilica", "--depth", "1", "--json")
    assert res.code == cli.OK and res.document
    res = run("schema", "capture-a1")
    assert res.code == cli.OK
    assert "obstruction" in text(res)
    res = run("schema", "airplane")
    assert "primitive" in text(res)


def test_tune_and_straighten(tmp_path):
    res = run("tune", "basilica", "--insert", "v0=rabbit", "--budget", "12", "--json")
    assert res.code == cli.OK
    tuned = tmp_path / "tuned.json"
    tuned.write_text(json.dumps(res.document))
    res = run("straighten", str(tuned), "--base", "basilica", "--json")
    assert res.code == cli.OK
    levels = res.document["laminations"]["v0"]["levels"]
    assert any(["1/7", "2/7", "4/7"] in lv["classes"] for lv in levels)


def test_sample(tmp_path):
    p = tmp_path / "angles.txt"
    p.write_text("1/3\n2/3\n1/6\n5/6\n")
    res = run("sample", "basilica-poly", "--angles", str(p), "--json")
    assert res.code == cli.OK
    got = {tuple(c) for c in res.document["levels"][0]["classes"]}
    assert res.document["unresolved"] == []
    assert ("1/3", "2/3") in got and ("1/6", "5/6") in got


def test_render_commands(tmp_path):
    svg = tmp_path / "b.svg"
    assert run("render-lam", "basilica", "--out", str(svg)).code == cli.OK
    assert svg.read_text().startswith("<?xml")
    png = tmp_path / "j.png"
    res = run("render-julia", "basilica-poly", "--out", str(png), "--size", "32x32",
              "--max-iter", "40", "--rays", "1/3,2/3", "--level", "0.05")
    assert res.code == cli.OK
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_fixtures_list_covers_registry():
    res = run("fixtures", "list")
    listed = [line.split()[0] for line in res.report]
    assert listed == fixtures.names()


_PARSERS = {
    "tower": (tower_from_doc, tower_to_doc),
    "polynomial": (polynomial_from_doc, polynomial_to_doc),
    "schema": (schema_from_doc, schema_to_doc),
}


@pytest.mark.parametrize("name", fixtures.names())
def test_emit_parse_round_trip(name):
    fx = fixtures.get(name)
    res = run("fixtures", "emit", name, "--json")
    assert res.code == cli.OK
    doc = res.document
    assert json.loads(json.dumps(doc)) == doc
    if fx.kind == "lamination":
        assert lamination_from_doc(doc).nontrivial
        return
    parse, emit = _PARSERS[fx.kind]
    value = parse(doc)
    again = emit(value)
    if fx.kind == "polynomial":
        again["name"] = name
        assert parse(again).coefficients == value.coefficients
    assert again == doc


def _stdout(argv):
    proc = subprocess.run([sys.executable, "-m", "artifact", *argv], capture_output=True)
    return proc.returncode, proc.stdout


@pytest.mark.parametrize("argv", [
    ["verify", "linked-chords"],
    ["schema", "rabbit", "--json"],
    ["trace", "basilica-poly", "--angle", "1/3", "--json"],
    ["fixtures", "emit", "airplane", "--json"],
])
def test_identical_argv_identical_bytes(argv):
    first = _stdout(argv)
    assert first == _stdout(argv)
    assert first[1]


def test_main_writes_out(tmp_path, capsys):
    p = tmp_path / "doc.json"
    assert cli.main(["fixtures", "emit", "basilica", "--json", "--out", str(p)]) == cli.OK
    assert json.loads(p.read_text()) == fixtures.emit("basilica")
    assert capsys.readouterr().out == ""
