from __future__ import annotations

import json
from fractions import Fraction
from importlib import resources

import jsonschema
import pytest

from freedense.cli import NEGATIVE, OK, UNDECIDED, USAGE, canonical_dumps, main, strip_timing
from freedense.congruence import standard_generators


@pytest.fixture(scope="module")
def schema():
    return json.loads(resources.files("freedense").joinpath("schema/report-v1.json").read_text())


@pytest.fixture
def cert_file(tmp_path, ab_power):
    path = tmp_path / "cert.json"
    path.write_text(json.dumps(ab_power[1].to_json()))
    return path


def _run(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = main(list(argv) + ["--out", str(out)])
    return code, json.loads(out.read_text())


def test_certify_valid_and_tampered(cert_file, tmp_path, capsys, schema):
    code, body = _run(["certify", "--in", str(cert_file)], tmp_path)
    assert code == OK and body["exit_code"] == "0"
    jsonschema.validate(body, schema)
    data = json.loads(cert_file.read_text())
    data["balls"][0]["plus"]["radius"] = str(Fraction(data["balls"][0]["plus"]["radius"]) * 3)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    capsys.readouterr()
    code, body = _run(["certify", "--in", str(bad)], tmp_path, "bad-out.json")
    assert code == NEGATIVE
    printed = capsys.readouterr().out
    assert printed.startswith("failed: balls not disjoint") and '"margin": "-' in printed
    jsonschema.validate(body, schema)


def test_density_with_gens_file(tmp_path, capsys, schema):
    gens = tmp_path / "standard.json"
    gens.write_text(json.dumps([g.to_json() for g in standard_generators(3)]))
    code, body = _run(["density", "--n", "3", "--mmax", "5", "--gens", str(gens)], tmp_path)
    assert code == OK
    table = capsys.readouterr().out.splitlines()
    assert [ln.split()[0] for ln in table[1:]] == ["2", "3", "4", "5"]
    jsonschema.validate(body, schema)


def test_density_negative(tmp_path):
    gens = tmp_path / "g2.json"
    gens.write_text(json.dumps([[["1", "2"], ["0", "1"]], [["1", "0"], ["2", "1"]]]))
    assert main(["density", "--n", "2", "--mmax", "4", "--gens", str(gens)]) == NEGATIVE


def test_usage_errors(tmp_path):
    assert main(["density", "--bogus"]) == USAGE
    assert main(["density", "--n", "3"]) == USAGE
    assert main(["certify", "--in", str(tmp_path / "missing.json")]) == USAGE
    assert main(["enumerate", "--k", "0", "--n", "2"]) == USAGE
    assert main(["kernel-structure", "--n", "2", "--p", "4"]) == USAGE


def test_membership_exit_codes(cert_file, tmp_path, ab_power, schema):
    cert = ab_power[1]
    member = tmp_path / "member.json"
    member.write_text(json.dumps([cert.generators[0].to_json()]))
    code, body = _run(["membership", "--n", "2", "--in", str(cert_file), "--gens", str(member)], tmp_path)
    assert code == OK and body["membership"][0]["status"] == "member"
    jsonschema.validate(body, schema)
    outside = tmp_path / "outside.json"
    outside.write_text(json.dumps([[["1", "1"], ["0", "1"]]]))
    assert main(["membership", "--n", "2", "--in", str(cert_file), "--gens", str(outside)]) == NEGATIVE


def test_kernel_structure_command(tmp_path, capsys):
    code, body = _run(["kernel-structure", "--n", "2", "--p", "3"], tmp_path)
    assert code == OK
    assert body["kernel"] == {"n": "2", "p": "3", "order": "27", "elementary_abelian": True, "rank": "3"}


def test_exit_code_constants():
    assert (OK, NEGATIVE, UNDECIDED, USAGE) == (0, 1, 2, 3)


def test_pipeline_replay_and_schema(tmp_path, schema):
    argv = ["pipeline", "--n", "2", "--mmax", "6", "--seed", "1"]
    code1, one = _run(argv, tmp_path, "one.json")
    code2, two = _run(argv, tmp_path, "one.json")
    assert code1 == code2 == OK
    assert canonical_dumps(strip_timing(one)) == canonical_dumps(strip_timing(two))
    assert one["run_record"]["output_digest"] == two["run_record"]["output_digest"]
    jsonschema.validate(one, schema)
    # the report feeds straight back into certify
    code, _ = _run(["certify", "--in", str(tmp_path / "one.json")], tmp_path, "re.json")
    assert code == OK


def test_transversal_and_extend(tmp_path, cert_file, schema):
    code, body = _run(["transversal", "--n", "2"], tmp_path, "t.json")
    assert code == OK and body["result"]["status"] == "found"
    jsonschema.validate(body, schema)
    code, body = _run(["extend", "--n", "2", "--cert", str(cert_file), "--coset", "2:1,0;0,1"], tmp_path, "e.json")
    assert code == OK and len(body["certificate"]["generators"]) == 3
    jsonschema.validate(body, schema)
