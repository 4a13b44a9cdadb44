import json
import subprocess
import sys

import numpy as np
import pytest

from parakern.errors import ConfigError, DegenerateDenominator
from parakern.harness import (ExperimentConfig, REGISTRY, build_field,
                              build_grid, estimate_ratio, run_experiment)
from parakern.harness.cli import main as cli_main
from parakern.harness.families import ManufacturedSolution, random_forcing_family

TINY_AUDIT = {
    "experiment": "kernel-audit",
    "sample_counts": {"mass": 3, "adjoint": 8, "jets": 20, "cancellation": 6,
                      "additivity": 30, "bounds": 300, "cz_pairs": 200,
                      "cz_probes": 8, "trace_times": 6},
}


def test_config_defaults_and_overrides():
    cfg = ExperimentConfig.from_dict({"experiment": "classical"})
    assert cfg.seed == 0 and cfg.threads == 1
    cfg.override("grid.nx", "64")
    cfg.override("field.kind", "smooth-periodic")
    cfg.override("tolerances.mass", "1e-9")
    assert cfg.data["grid"]["nx"] == 64
    assert cfg.data["field"]["kind"] == "smooth-periodic"
    assert cfg.tolerance("mass", 0.0) == 1e-9


def test_unknown_experiment_rejected():
    cfg = ExperimentConfig.from_dict({"experiment": "nope"})
    with pytest.raises(ConfigError):
        cfg.validate(REGISTRY)


def test_build_field_kinds():
    assert build_field({"kind": "identity", "n": 2}).n == 2
    f = build_field({"kind": "piecewise", "n": 1, "first": [2.0],
                     "table": [[0.0, 0.5]], "lam": 0.5})
    import parakern.coeffs as coeffs

    assert coeffs.eval_coeff(f, -1.0)[0, 0] == 2.0
    assert coeffs.eval_coeff(f, 1.0)[0, 0] == 0.5
    with pytest.raises(ConfigError):
        build_field({"kind": "banana"})
    with pytest.raises(ConfigError):
        build_field({"kind": "constant", "matrix": [[1, 5], [5, 1]]})


def test_report_reproducibility(tmp_path):
    runs = []
    for _ in range(2):
        cfg = ExperimentConfig.from_dict(json.loads(json.dumps(TINY_AUDIT)))
        rep = run_experiment(cfg)
        runs.append(rep.to_dict(wall_clock=False))
    assert runs[0] == runs[1]
    # write side: report.json + tables appear
    cfg = ExperimentConfig.from_dict(json.loads(json.dumps(TINY_AUDIT)))
    rep = run_experiment(cfg)
    path = rep.write(tmp_path / "out")
    data = json.loads(path.read_text())
    assert data["experiment"] == "kernel-audit"
    assert (tmp_path / "out" / "tables" / "ap_blowup_sweep.csv").exists()


def test_seed_changes_report():
    cfg0 = ExperimentConfig.from_dict(json.loads(json.dumps(TINY_AUDIT)))
    rep0 = run_experiment(cfg0)
    bumped = json.loads(json.dumps(TINY_AUDIT))
    bumped["seed"] = 1
    rep1 = run_experiment(ExperimentConfig.from_dict(bumped))
    assert rep0.to_dict(wall_clock=False) != rep1.to_dict(wall_clock=False)


def test_estimate_ratio_degenerate():
    with pytest.raises(DegenerateDenominator):
        estimate_ratio(lambda b: 1.0, lambda b: 0.0, [object()])
    with pytest.raises(DegenerateDenominator):
        estimate_ratio(lambda b: 1.0, lambda b: 1.0, [])


def test_estimate_ratio_basic_and_threads():
    fam = list(range(1, 9))
    out = estimate_ratio(lambda k: k * 2.0, lambda k: float(k), fam)
    assert out["constant"] == 2.0
    assert out["stability"] == 1.0
    out2 = estimate_ratio(lambda k: k * 2.0, lambda k: float(k), fam, threads=3)
    assert out2["ratios"] == out["ratios"]


def test_family_generator_properties():
    grid = build_grid({"nx": 48, "nt": 48, "time_window": [-4, 4]})
    fam = random_forcing_family(grid, seed=5, count=4)
    assert len(fam) == 4
    for f in fam:
        f.require_padding()
        assert np.max(np.abs(f.values)) == pytest.approx(1.0)
    again = random_forcing_family(grid, seed=5, count=4)
    assert np.array_equal(fam[2].values, again[2].values)


def test_manufactured_solution_forcing():
    field = build_field({"kind": "smooth-periodic", "n": 1})
    grid = build_grid({"nx": 33, "nt": 33, "time_window": [-4, 4]})
    ms = ManufacturedSolution(field, grid)
    # forcing must agree with a finite-difference application of the operator
    from parakern.operators import pde_residual

    res = pde_residual(field, ms.u, ms.f)
    assert np.max(np.abs(res.values)) <= 0.1  # stencil error only


def test_cli_list_and_run(tmp_path, capsys):
    assert cli_main(["list"]) == 0
    out = capsys.readouterr().out
    assert "kernel-audit" in out and "cauchy" in out

    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(TINY_AUDIT))
    # tiny sample streams have not saturated the fitted maxima; loosen the
    # statistical stability gates (this test exercises CLI plumbing)
    code = cli_main(["run", str(cfg_path), "--out", str(tmp_path / "run1"),
                     "--override", "sample_counts.mass=2",
                     "--override", "tolerances.envelope_stability=2.0",
                     "--override", "tolerances.cz_stability=2.0"])
    out = capsys.readouterr().out
    assert code == 0
    assert (tmp_path / "run1" / "report.json").exists()
    assert "[PASS]" in out


def test_cli_bad_config(tmp_path, capsys):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text(json.dumps({"experiment": "nope"}))
    assert cli_main(["run", str(cfg_path)]) == 2
    assert cli_main(["run", str(tmp_path / "missing.json")]) == 2


def test_cli_entrypoint_subprocess(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "parakern.harness.cli", "list"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "mixed-holder" in proc.stdout
