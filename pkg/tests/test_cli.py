import json

import numpy as np
import pytest

from chebyquad.cli import main


@pytest.fixture
def uniform_file(tmp_path):
    path = tmp_path / "uniform.json"
    path.write_text('{"builtin": "uniform"}\n')
    return str(path)


def test_bounds_command(uniform_file, tmp_path, capsys):
    out = str(tmp_path / "report.json")
    assert main(["bounds", "-m", uniform_file, "-k", "3", "--out", out]) == 0
    doc = json.loads(open(out).read())
    assert doc["upper"]["n_guaranteed"] == 1034232
    assert doc["lower"]["moment_bound"] == pytest.approx(27 / 16)
    manifest = json.loads(open(out + ".manifest.json").read())
    assert manifest["subcommand"] == "bounds"
    assert out in manifest["outputs"]
    assert uniform_file in manifest["input_hashes"]


def test_construct_and_verify_roundtrip(uniform_file, tmp_path):
    nodes = str(tmp_path / "nodes.txt")
    code = main(
        ["construct", "-m", uniform_file, "-k", "5", "-n", "1000",
         "--best-effort", "--out", nodes]
    )
    assert code == 0
    vals = np.loadtxt(nodes)
    assert len(vals) == 1000
    report = json.loads(open(nodes + ".residuals.json").read())
    assert report["max_residual"] <= 1e-9
    out = str(tmp_path / "resid.json")
    assert main(
        ["verify", "-m", uniform_file, "--nodes", nodes, "-k", "5", "--out", out]
    ) == 0


def test_verify_detects_violation(uniform_file, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0.1\n0.2\n0.3\n")
    out = str(tmp_path / "resid.json")
    code = main(
        ["verify", "-m", uniform_file, "--nodes", str(bad), "-k", "2", "--out", out]
    )
    assert code == 2


def test_missing_measure_is_usage_error(tmp_path):
    assert main(["bounds", "-m", str(tmp_path / "nope.json"), "-k", "3"]) == 1


def test_sphere_command(tmp_path):
    out = str(tmp_path / "sphere.json")
    code = main(
        ["sphere", "-d", "1", "-k", "1", "--tau", "1", "--delta", "0.2",
         "--verify", "--out", out]
    )
    assert code == 0
    doc = json.loads(open(out).read())
    assert len(doc["boxes"]) == 7


def test_randcube_command(tmp_path):
    config = tmp_path / "rc.json"
    config.write_text(
        json.dumps({"n": 1, "k": 1, "d": 1, "eps": 0.3, "reps": 5000, "seed": 7})
    )
    log = str(tmp_path / "results.log")
    assert main(["randcube", "-c", str(config), "--log", log]) == 0
    assert main(["randcube", "-c", str(config), "--log", log]) == 0
    lines = open(log).read().splitlines()
    assert len(lines) == 2
    assert lines[0] == lines[1]  # fixed seed, identical record
    record = json.loads(lines[0])
    assert record["rng_algorithm"] == "philox"


def test_randcube_config_validation(tmp_path):
    config = tmp_path / "rc.json"
    config.write_text(json.dumps({"n": 1, "k": 1}))
    assert main(["randcube", "-c", str(config)]) == 1
