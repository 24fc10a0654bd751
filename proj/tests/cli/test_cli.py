import csv
import json
import os
import subprocess

import pytest

BIN = os.environ.get("PFORGE_BIN", "pforge")


def run(*args, cwd=None, env=None):
    return subprocess.run([BIN, *args], capture_output=True, text=True, cwd=cwd, env=env)


def load(path):
    with open(path) as f:
        return json.load(f)


def test_catalog_list():
    r = run("catalog", "list")
    assert r.returncode == 0
    assert r.stdout.split() == ["dazord", "cotangent-sl2", "cotangent-sl3", "conjugation-sl2", "conjugation-sl3"]


def test_catalog_verify_dazord(tmp_path):
    r = run("catalog", "verify", "dazord", "--samples", "1000", "--tol", "1e-9", "--seed", "42", "--out", str(tmp_path))
    assert r.returncode == 0, r.stdout + r.stderr
    rep = load(tmp_path / "catalog-verify-dazord.json")
    assert rep["status"] == "PASS"
    assert rep["seed"] == "42"
    axioms = {"associativity", "left_unit", "right_unit", "left_inverse", "right_inverse",
              "inverse_swaps_source_target", "inverse_of_product", "source_of_product", "target_of_product"}
    sampled = {c["name"] for c in rep["checks"] if c["samples_used"] == 1000}
    assert axioms <= sampled
    assert all(c["max_residual"] <= 1e-9 for c in rep["checks"] if c["name"] in axioms)


def test_mutation_exits_one(tmp_path):
    r = run("catalog", "verify", "dazord", "--samples", "50", "--mutate", "product-sign", "--out", str(tmp_path))
    assert r.returncode == 1
    assert "report:" in r.stdout
    rep = load(tmp_path / "catalog-verify-dazord-mutant.json")
    failing = [c for c in rep["checks"] if c["status"] == "FAIL"]
    assert failing
    assert all(1 <= len(c["witnesses"]) <= 3 for c in failing)


def test_resolution_verify_r2_k1(tmp_path):
    r = run("resolution", "verify", "r2", "--k", "1", "--out", str(tmp_path))
    assert r.returncode == 0, r.stdout + r.stderr
    rep = load(tmp_path / "resolution-verify-r2-k1.json")
    push = next(c for c in rep["checks"] if c["name"] == "pushforward")
    assert push["status"] == "PROVEN"


def test_unsupported_l():
    r = run("kleinian", "--l", "5")
    assert r.returncode == 2
    assert "unsupported l" in r.stderr


@pytest.mark.parametrize("args", [
    ["catalog", "verify"],
    ["catalog", "verify", "dazord", "--tol", "2"],
    ["catalog", "verify", "dazord", "--samples", "0"],
    ["catalog", "verify", "dazord", "--bogus"],
    ["resolution", "verify", "nosuch"],
    ["frobnicate"],
])
def test_bad_usage_exits_two(args, tmp_path):
    r = run(*args, cwd=tmp_path)
    assert r.returncode == 2


def strip_wall(path):
    rep = load(path)
    rep.pop("wall_time_s")
    return rep


def test_deterministic_reports(tmp_path):
    for threads, sub in ((1, "a"), (4, "b")):
        r = run("resolution", "verify", "springer", "--n", "2", "--samples", "40", "--seed", "7",
                "--threads", str(threads), "--out", str(tmp_path / sub))
        assert r.returncode == 0, r.stdout + r.stderr
    name = "resolution-verify-springer-leviborel-n2.json"
    a = (tmp_path / "a" / name).read_text().splitlines()
    b = (tmp_path / "b" / name).read_text().splitlines()
    assert [x for x in a if "wall_time_s" not in x] == [x for x in b if "wall_time_s" not in x]


def test_threads_env_fallback(tmp_path):
    env = dict(os.environ, POISSON_FORGE_THREADS="2")
    r = run("catalog", "verify", "cotangent-sl2", "--samples", "20", "--out", str(tmp_path), env=env)
    assert r.returncode == 0


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"samples": 37, "seed": 9, "params": {"k": 1}}))
    r = run("resolution", "verify", "r2", "--config", str(cfg), "--seed", "5", "--out", str(tmp_path))
    assert r.returncode == 0, r.stdout + r.stderr
    rep = load(tmp_path / "resolution-verify-r2-k1.json")
    assert rep["seed"] == "5"
    assert any(c["samples_used"] == 37 for c in rep["checks"])


def test_report_show(tmp_path):
    run("catalog", "verify", "dazord", "--samples", "20", "--out", str(tmp_path))
    r = run("report", "show", str(tmp_path / "catalog-verify-dazord.json"))
    assert r.returncode == 0
    assert "associativity" in r.stdout
    run("catalog", "verify", "dazord", "--samples", "20", "--mutate", "product-sign", "--out", str(tmp_path))
    assert run("report", "show", str(tmp_path / "catalog-verify-dazord-mutant.json")).returncode == 1


def test_apath(tmp_path):
    trace = tmp_path / "trace.csv"
    r = run("apath", "--k", "0", "--samples", "10", "--out", str(tmp_path), "--file", str(trace))
    assert r.returncode == 0, r.stdout + r.stderr
    with open(trace) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["u", "a", "b", "drift"]
    assert float(rows[-1][1]) == pytest.approx(6.283185307179586, abs=1e-5)
    r = run("apath", "--k", "1", "--samples", "10", "--out", str(tmp_path))
    assert r.returncode == 0


def read_csv(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def test_csv_phi_grid(tmp_path):
    assert run("csv", "phi-grid", "--out", str(tmp_path)).returncode == 0
    rows = read_csv(tmp_path / "phi-grid.csv")
    assert len(rows) == 100
    assert list(rows[0].keys()) == ["a", "b", "x", "y"]


def test_csv_fiber(tmp_path):
    assert run("csv", "fiber", "--x", "1", "--y", "0", "--count", "5", "--out", str(tmp_path)).returncode == 0
    rows = read_csv(tmp_path / "fiber.csv")
    assert len(rows) == 5
    assert all(float(r["residual"]) <= 1e-10 for r in rows)


def test_csv_unit_trace_is_constant(tmp_path):
    assert run("csv", "path-trace", "--out", str(tmp_path)).returncode == 0
    rows = read_csv(tmp_path / "path-trace.csv")
    assert len(rows) == 65
    assert {(r["a"], r["b"]) for r in rows} == {(rows[0]["a"], rows[0]["b"])}


def test_r2_k0_is_not_injective(tmp_path):
    r = run("resolution", "verify", "r2", "--k", "0", "--samples", "20", "--out", str(tmp_path))
    assert r.returncode == 1
    rep = load(tmp_path / "resolution-verify-r2-k0.json")
    inj = next(c for c in rep["checks"] if c["name"] == "injectivity")
    assert inj["status"] == "FAIL" and inj["witnesses"]
    r = run("resolution", "verify", "r2", "--k", "0", "--samples", "20", "--checks", "push,etale",
            "--out", str(tmp_path))
    assert r.returncode == 0
