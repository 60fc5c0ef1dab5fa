import json

import numpy as np
import pytest

from nematicmin import bench
from nematicmin.cli import main
from nematicmin.energy import deviation_stats, frank_energy
from nematicmin.problems import get_problem


def _row(**kw):
    base = dict(method="lagrangian:damped", zeta=None, energy=0.370110123, l2_error=1.2e-9,
                min_dev=-3.1e-6, max_dev=2.0e-7, wu=1.3456789, time_s=0.25, converged=True,
                problem="twist", functional=0.74022, iterations=[3, 1, 1], mg_cycles=[])
    base.update(kw)
    return bench.ReportRow(**base)


def test_csv_layout_and_round_trip():
    rows = [_row(), _row(method="penalty:damped", zeta=1e9, energy=None, l2_error=None, min_dev=None,
                         max_dev=None, wu=12.5, converged=False)]
    text = bench.rows_to_csv(rows)
    lines = text.splitlines()
    assert lines[0] == ",".join(bench.CSV_COLUMNS)
    assert lines[1].split(",")[2] == "0.37011"
    assert lines[2].split(",")[2] == "-"
    assert bench.rows_from_csv(text) == [bench.round_row(r) for r in rows]


def test_json_round_trip_exact():
    rows = [_row(), _row(zeta=1e3, method="penalty:tr_simple")]
    back, meta = bench.rows_from_json(bench.rows_to_json(rows, {"table": 3}))
    assert back == rows and meta == {"table": 3}


def test_run_config_label_and_perturb():
    cfg = bench.RunConfig(method="penalty", stepping="tr_2d", zeta=10.0, nested=False, solver="mg")
    assert cfg.label == "penalty:tr_2d:no-ni:mg"
    assert bench.RunConfig(problem="tilt-twist").effective_perturb() == 1e-2
    assert bench.RunConfig(problem="tilt-twist", perturb=0.0).effective_perturb() == 0.0
    with pytest.raises(ValueError):
        bench.RunConfig(method="penalty").newton_config()


def test_emitted_energy_matches_recomputation():
    row, rep = bench.run(bench.RunConfig(levels=2, stepping="tr_simple"))
    prob = get_problem("twist")
    assert row.converged
    assert row.energy == pytest.approx(frank_energy(rep.state.n, prob.fc, rep.state.space),
                                       rel=1e-12, abs=0)
    lo, hi = deviation_stats(rep.state.n, rep.state.space)
    assert (row.min_dev, row.max_dev) == (pytest.approx(lo, abs=1e-15), pytest.approx(hi, abs=1e-15))
    assert row.iterations == rep.iterations


def test_divergent_row_has_no_numbers():
    row, _ = bench.run(bench.RunConfig(problem="nano", method="penalty", zeta=1e6, levels=2))
    assert not row.converged
    assert row.energy is row.l2_error is row.min_dev is row.max_dev is None


def test_penalty_energies_increase_with_zeta():
    cfg = bench.RunConfig(method="penalty", stepping="tr_simple", zeta=1.0, levels=3)
    rows = bench.sweep_zeta(cfg, [1e1, 1e2, 1e3, 1e4])
    lag, _ = bench.run(bench.RunConfig(stepping="tr_simple", levels=3))
    energies = [r.energy for r in rows if r.converged]
    assert len(energies) == 4
    assert all(a < b for a, b in zip(energies, energies[1:]))
    assert energies[-1] < lag.energy + 1e-6


def test_empty_sweeps():
    assert bench.sweep_zeta(bench.RunConfig(method="penalty", zeta=1.0), []) == []
    assert bench.sweep_gamma([]) == []


def test_table_configs():
    t3 = bench.table_configs(3)
    assert len(t3) == 2 + 2 * len(bench.ZETAS)
    assert {c.problem for c in t3} == {"twist"}
    t10 = bench.table_configs(10)
    assert {c.solver for c in t10} == {"direct", "mg"}
    assert any(not c.nested for c in bench.table_configs(5))
    with pytest.raises(ValueError):
        bench.table_configs(2)


# command line ------------------------------------------------------------------

def test_cli_run_csv(capsys):
    assert main(["run", "--levels", "2", "--stepping", "tr-simple"]) == 0
    out = capsys.readouterr().out
    rows = bench.rows_from_csv(out)
    assert rows[0]["method"] == "lagrangian:tr_simple"
    assert rows[0]["energy"] == pytest.approx(0.37011, abs=1e-4)


def test_cli_run_json(tmp_path):
    out = tmp_path / "run.json"
    assert main(["run", "--levels", "2", "--stepping", "tr_simple", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["meta"]["config"]["stepping"] == "tr_simple"
    assert len(data["meta"]["solve"]["levels"]) == 2
    assert data["rows"][0]["converged"] is True


def test_cli_divergence_exit_code(capsys):
    code = main(["run", "--problem", "nano", "--method", "penalty", "--zeta", "1e6", "--levels", "2"])
    assert code == 2
    assert capsys.readouterr().out.splitlines()[1].split(",")[2] == "-"


def test_cli_errors_exit_one(capsys):
    assert main(["run", "--method", "penalty"]) == 1
    assert main(["run", "--problem", "smectic"]) == 1
    assert main([]) == 1
    assert main(["reproduce", "--table", "2"]) == 1
    assert "error" in capsys.readouterr().err


def test_cli_sweep_zeta_empty(capsys):
    assert main(["sweep-zeta", "--method", "penalty", "--values", ""]) == 0
    assert capsys.readouterr().out.strip() == ",".join(bench.CSV_COLUMNS)


def test_cli_sweep_gamma(tmp_path):
    out = tmp_path / "gamma.csv"
    assert main(["sweep-gamma", "--problem", "twist", "--levels", "2", "--values", "1.2,1.5",
                 "--out", str(out)]) == 0
    rows = bench.rows_from_csv(out.read_text())
    assert [r["gamma_b"] for r in rows] == [1.2, 1.5]
    assert all(r["avg_cycles"] > 0 for r in rows)


def test_module_entry_point():
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "nematicmin", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "sweep-gamma" in proc.stdout
