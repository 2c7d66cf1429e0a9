"""Command line round trips, exit codes, and output determinism."""

import csv
import json
from pathlib import Path

import jsonschema
import pytest
from click.testing import CliRunner

import sparseot.cli as cli
from sparseot.cli import main

SCHEMA = json.loads(
    (Path(__file__).resolve().parents[1] / "docs" /
     "report.schema.json").read_text())


@pytest.fixture()
def runner():
    return CliRunner()


def gen(runner, path, size="8x8", seed=0, extra=()):
    args = ["gen", "--size", size, "--seed", str(seed),
            "--out", str(path), *extra]
    res = runner.invoke(main, args)
    assert res.exit_code == 0, res.output
    return path


def test_gen_is_byte_deterministic(runner, tmp_path):
    a = gen(runner, tmp_path / "a.dgrid", seed=3)
    b = gen(runner, tmp_path / "b.dgrid", seed=3)
    assert a.read_bytes() == b.read_bytes()
    c = gen(runner, tmp_path / "c.dgrid", seed=4)
    assert a.read_bytes() != c.read_bytes()


def test_gen_solve_verify_round_trip(runner, tmp_path):
    mu = gen(runner, tmp_path / "mu.dgrid", seed=1)
    nu = gen(runner, tmp_path / "nu.dgrid", seed=2)
    cpl = tmp_path / "plan.cpl"
    rep = tmp_path / "report.json"
    res = runner.invoke(main, ["solve", str(mu), str(nu), "--certify",
                               "--out", str(cpl), "--report", str(rep)])
    assert res.exit_code == 0, res.output
    report = json.loads(rep.read_text())
    jsonschema.validate(report, SCHEMA)
    assert report["certified"] is True
    assert report["problem"]["shield"] == "grid"
    res = runner.invoke(main, ["verify", str(mu), str(nu), str(cpl)])
    assert res.exit_code == 0, res.output
    cert = json.loads(res.output)
    assert cert["kind"] == "globally_optimal"
    assert cert["objective"] == report["final_objective"]


def test_solve_report_on_stdout(runner, tmp_path):
    mu = gen(runner, tmp_path / "mu.dgrid", seed=5)
    nu = gen(runner, tmp_path / "nu.dgrid", seed=6)
    res = runner.invoke(main, ["solve", str(mu), str(nu)])
    assert res.exit_code == 0, res.output
    report = json.loads(res.output)
    jsonschema.validate(report, SCHEMA)
    assert report["certified"] is None


def test_solve_dense_matches_sparse(runner, tmp_path):
    mu = gen(runner, tmp_path / "mu.dgrid", seed=7)
    nu = gen(runner, tmp_path / "nu.dgrid", seed=8)
    sparse = runner.invoke(main, ["solve", str(mu), str(nu)])
    dense = runner.invoke(main, ["solve", str(mu), str(nu), "--dense",
                                 "--certify"])
    assert dense.exit_code == 0, dense.output
    a = json.loads(sparse.output)
    b = json.loads(dense.output)
    jsonschema.validate(b, SCHEMA)
    assert a["final_objective"] == b["final_objective"]
    assert b["problem"]["shield"] == "dense"


def test_solve_no_timings_is_byte_deterministic(runner, tmp_path):
    mu = gen(runner, tmp_path / "mu.dgrid", seed=9)
    nu = gen(runner, tmp_path / "nu.dgrid", seed=10)
    outs = []
    for tag in ("one", "two"):
        cpl = tmp_path / f"{tag}.cpl"
        rep = tmp_path / f"{tag}.json"
        res = runner.invoke(main, ["solve", str(mu), str(nu), "--no-timings",
                                   "--out", str(cpl), "--report", str(rep)])
        assert res.exit_code == 0, res.output
        outs.append((cpl.read_bytes(), rep.read_bytes()))
    assert outs[0] == outs[1]


def test_sphere_round_trip(runner, tmp_path):
    mu = gen(runner, tmp_path / "mu.pts", size="64", seed=11,
             extra=["--cost", "sphere"])
    nu = gen(runner, tmp_path / "nu.pts", size="64", seed=12,
             extra=["--cost", "sphere"])
    cpl = tmp_path / "plan.cpl"
    res = runner.invoke(main, ["solve", str(mu), str(nu), "--cost", "sphere",
                               "--out", str(cpl)])
    assert res.exit_code == 0, res.output
    res = runner.invoke(main, ["verify", str(mu), str(nu), str(cpl),
                               "--cost", "sphere", "--shield-check"])
    assert res.exit_code == 0, res.output


def test_usage_errors_exit_2(runner, tmp_path):
    mu = gen(runner, tmp_path / "mu.dgrid", seed=13)
    nu = gen(runner, tmp_path / "nu.dgrid", seed=14)
    res = runner.invoke(main, ["solve", str(mu), str(nu), "--cost", "peucl",
                               "--eta", "5"])
    assert res.exit_code == 2
    res = runner.invoke(main, ["solve", str(mu), str(nu),
                               "--candidates", "voronoi"])
    assert res.exit_code == 2
    res = runner.invoke(main, ["gen", "--size", "8x", "--out",
                               str(tmp_path / "x.dgrid")])
    assert res.exit_code == 2


def test_io_errors_exit_3(runner, tmp_path):
    nu = gen(runner, tmp_path / "nu.dgrid", seed=15)
    res = runner.invoke(main, ["solve", str(tmp_path / "absent.dgrid"),
                               str(nu)])
    assert res.exit_code == 3
    bad = tmp_path / "bad.dgrid"
    bad.write_text("DGRID 2 2 2 nonsense\n")
    res = runner.invoke(main, ["solve", str(bad), str(nu)])
    assert res.exit_code == 3


def test_infeasible_exit_4(runner, tmp_path):
    mu = gen(runner, tmp_path / "mu.dgrid", seed=16)
    nu = gen(runner, tmp_path / "nu.dgrid", seed=17,
             extra=["--mass-scale", "1000000"])
    res = runner.invoke(main, ["solve", str(mu), str(nu)])
    assert res.exit_code == 4
    assert "mass_scale" in res.output


def test_tampered_coupling_exit_5(runner, tmp_path):
    mu = gen(runner, tmp_path / "mu.dgrid", seed=18)
    nu = gen(runner, tmp_path / "nu.dgrid", seed=19)
    cpl = tmp_path / "plan.cpl"
    res = runner.invoke(main, ["solve", str(mu), str(nu), "--out", str(cpl)])
    assert res.exit_code == 0, res.output
    lines = cpl.read_text().splitlines()
    head, first = lines[0], lines[1].split()
    # move one unit of mass between the first two entries: marginals
    # break, so verification must refuse the file
    second = lines[2].split()
    first[2] = str(int(first[2]) - 1)
    second[2] = str(int(second[2]) + 1)
    cpl.write_text("\n".join([head, " ".join(first), " ".join(second)]
                             + lines[3:]) + "\n")
    res = runner.invoke(main, ["verify", str(mu), str(nu), str(cpl)])
    assert res.exit_code == 5
    assert "marginal" in res.output


def test_custom_mass_scale_round_trip(runner, tmp_path):
    # the coupling file must inherit the measures' scale, not the default
    mu = gen(runner, tmp_path / "mu.dgrid", seed=20,
             extra=["--mass-scale", "1000000"])
    nu = gen(runner, tmp_path / "nu.dgrid", seed=21,
             extra=["--mass-scale", "1000000"])
    cpl = tmp_path / "plan.cpl"
    res = runner.invoke(main, ["solve", str(mu), str(nu), "--out", str(cpl)])
    assert res.exit_code == 0, res.output
    assert cpl.read_text().splitlines()[0].split()[-1] == "1000000"
    res = runner.invoke(main, ["verify", str(mu), str(nu), str(cpl)])
    assert res.exit_code == 0, res.output


def test_bench_writes_csv(runner, tmp_path, monkeypatch):
    tiny = cli.BenchmarkConfig(
        "scaling", sizes=[(8, 8)], seeds=1,
        modes=[("sparse-grid", "basis"), ("dense", "none")])
    monkeypatch.setattr(cli, "_presets", lambda seeds: {"scaling": [tiny]})
    out = tmp_path / "bench.csv"
    res = runner.invoke(main, ["bench", "--preset", "scaling",
                               "--out", str(out)])
    assert res.exit_code == 0, res.output
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2
    assert {r["mode"] for r in rows} == {"sparse-grid", "dense"}
    assert rows[0]["final_objective"] == rows[1]["final_objective"]
    assert int(rows[0]["n_x"]) == 64
