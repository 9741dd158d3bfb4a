"""End-to-end checks of the ccge executable: exit codes, determinism and schema validity."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

exe, schema_path = sys.argv[1], sys.argv[2]
schema = json.loads(Path(schema_path).read_text())
validator = jsonschema.Draft202012Validator(schema)
failures = []


def run(*args, ok=True):
    r = subprocess.run([exe, *map(str, args)], capture_output=True, text=True)
    if ok and r.returncode != 0:
        raise SystemExit(f"{args} failed ({r.returncode}): {r.stderr}")
    return r


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def valid(path, what):
    errors = list(validator.iter_errors(json.loads(Path(path).read_text())))
    check(not errors, f"{what} matches schema" + (f": {errors[0].message}" if errors else ""))


with tempfile.TemporaryDirectory() as tmp:
    t = Path(tmp)
    data = t / "data.csv"
    run("simulate", "--scenario", "base", "--n0", 300, "--n1", 300, "--seed", 11, "--out", data)
    again = t / "again.csv"
    run("simulate", "--scenario", "base", "--n0", 300, "--n1", 300, "--seed", 11, "--out", again)
    check(data.read_bytes() == again.read_bytes(), "simulate is deterministic")
    check(data.read_text().splitlines()[0] == "d,g1,g2,g3,g4,g5,x1", "simulated CSV header")

    a, b = t / "a.json", t / "b.json"
    run("fit", "--input", data, "--methods", "symmetric", "--rare", "--B", 40, "--seed", 7, "--workers", 1, "--out", a)
    run("fit", "--input", data, "--methods", "symmetric", "--rare", "--B", 40, "--seed", 7, "--workers", 4, "--out", b)
    check(a.read_bytes() == b.read_bytes(), "fit output identical across worker counts")
    valid(a, "fit report")

    full = t / "full.json"
    run("fit", "--input", data, "--methods", "logistic,spmle_x,spmle_g,composite,symmetric", "--pi1", 0.03,
        "--B", 40, "--seed", 3, "--percentile-ci", "--out", full)
    valid(full, "five-method fit report")
    res = json.loads(full.read_text())
    check([r["method"] for r in res["results"]] ==
          ["logistic", "spmle_x", "spmle_g", "composite", "symmetric"], "methods reported in order")
    check(res["parameter_names"][0] == "kappa" and res["parameter_names"][-1] == "beta_x1_g5", "parameter names")
    check(all(r["converged"] for r in res["results"]), "all methods converged")

    r = run("fit", "--input", data, "--pi1", 1.5, ok=False)
    check(r.returncode == 2 and "(0, 1)" in r.stderr, "--pi1 1.5 exits 2 naming the range")
    r = run("fit", "--input", data, ok=False)
    check(r.returncode == 2, "missing prevalence exits 2")
    r = run("fit", "--input", data, "--pi1", 0.03, "--rare", ok=False)
    check(r.returncode == 2, "both prevalence flags exit 2")
    r = run("simulate", "--scenario", "base", ok=False)
    check(r.returncode == 2, "simulate without seed exits 2")
    r = run("replicate", "--scenario", "base", "--rare", ok=False)
    check(r.returncode == 2, "replicate without seed exits 2")
    r = run("simulate", "--scenario", "nope", "--seed", 1, ok=False)
    check(r.returncode == 2, "unknown preset exits 2")

    bad = t / "bad.csv"
    bad.write_text("d,g1,x1\n1,0,1\n0,1,0\n2,1,1\n")
    r = run("fit", "--input", bad, "--rare", ok=False)
    check(r.returncode == 3 and "row 3" in r.stderr, "bad disease code exits 3 naming the row")

    rep1, rep2, est = t / "r1.json", t / "r2.json", t / "est.csv"
    args = ["replicate", "--scenario", "base", "--R", 3, "--n0", 200, "--n1", 200, "--B", 20, "--pi1", 0.03,
            "--seed", 5]
    run(*args, "--workers", 1, "--out", rep1, "--estimates", est)
    run(*args, "--workers", 3, "--out", rep2)
    check(rep1.read_bytes() == rep2.read_bytes(), "replicate output identical across worker counts")
    valid(rep1, "replication report")
    check(len(est.read_text().splitlines()) == 1 + 3 * 3, "estimates CSV has one row per replication and method")

    cfg = t / "scenario.json"
    cfg.write_text(json.dumps({"preset": "viol-G1", "dependence": {"snp": 2, "alpha": 0.5}}))
    sim2 = t / "viol.csv"
    run("simulate", "--config", cfg, "--n0", 400, "--n1", 100, "--seed", 2, "--out", sim2)
    check(len(sim2.read_text().splitlines()) == 501, "config-driven simulate")

    diag = t / "diag.json"
    run("diagnose", "--input", data, "--out", diag)
    valid(diag, "diagnose report")
    check(len(json.loads(diag.read_text())["tests"]) == 5, "diagnose tests each SNP")
    r = run("diagnose", "--input", data, "--prs", "plco21", ok=False)
    check(r.returncode != 0, "PRS with wrong column count is rejected")

print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
