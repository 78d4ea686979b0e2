import csv

import numpy as np
import pytest
import yaml

from mtrsvd.cli import main
from mtrsvd.experiments import (
    RESULT_FIELDS,
    SUMMARY_FIELDS,
    ConfigError,
    ExperimentConfig,
    format_cell,
    read_results,
    run,
    summarize,
)
from mtrsvd.problems import generate, write_matrix, write_vector

SCAN = {"problems": ["shaw", "deriv2"], "n": 64, "L_kind": "L1", "epsilons": [1e-2],
        "q": {"shaw": 6, "deriv2": 5}, "k_max": 8, "seeds": [1, 2]}


def _write(tmp_path, cfg, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


def test_empty_problems_exit_nonzero_without_files(tmp_path):
    cfg = _write(tmp_path, {"problems": [], "n": 64})
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) != 0
    assert not out.exists()


@pytest.mark.parametrize("bad", [
    {"problems": ["shaw"], "n": 64, "q": 3},
    {"problems": ["shaw"], "n": 64, "k_max": 60},
    {"problems": ["nope"]},
    {"problems": ["shaw"], "n": 63},
    {"problems": ["shaw"], "L_kind": "L9"},
    {"problems": ["shaw"], "epsilons": [-1.0]},
    {"problems": ["shaw"], "mode": "fit"},
    {"problems": ["shaw"], "colour": "red"},
    {"problems": ["shaw", "heat"], "q": {"shaw": 6}},
])
def test_validation_rejects(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


def test_unreadable_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path / "o")]) == 2


def test_scan_outputs_and_determinism(tmp_path):
    cfg = _write(tmp_path, SCAN)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(b), "--threads", "2"]) == 0
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()
    header = (a / "results.csv").read_text().splitlines()[0]
    assert header == ",".join(RESULT_FIELDS)
    rows = read_results(a / "results.csv")
    assert len(rows) == 2 * 2 * 8
    assert sum(r["is_k0"] for r in rows) == 4
    curves = sorted(p.name for p in (a / "curves").iterdir())
    assert len(curves) == 8 and curves[0].endswith("_error.dat")
    data = np.loadtxt(a / "curves" / curves[0])
    assert data.shape == (8, 2)
    assert (a / "timings.csv").exists()


def test_env_var_default_out(tmp_path, monkeypatch):
    monkeypatch.setenv("MTRSVD_OUT", str(tmp_path / "envout"))
    cfg = _write(tmp_path, dict(SCAN, problems=["shaw"], seeds=[1], k_max=4))
    assert main(["run", "--config", str(cfg)]) == 0
    assert (tmp_path / "envout" / "results.csv").exists()


def test_seed_override(tmp_path):
    cfg = _write(tmp_path, dict(SCAN, problems=["shaw"], k_max=4))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seed-override", "7"]) == 0
    assert {r["seed"] for r in read_results(tmp_path / "o" / "results.csv")} == {7}


def test_rows_roundtrip_losslessly(tmp_path):
    cfg = ExperimentConfig.from_dict(dict(SCAN, problems=["shaw"], seeds=[3], k_max=5))
    out = run(cfg, tmp_path / "o")
    rows = read_results(out / "results.csv")
    with open(out / "results.csv") as fh:
        raw = list(csv.DictReader(fh))
    for parsed, text in zip(rows, raw):
        for f in ("relative_L_error", "residual", "seminorm"):
            assert repr(parsed[f]) == text[f]


def test_oracle_compare_mode(tmp_path):
    cfg = ExperimentConfig.from_dict({"problems": ["shaw"], "n": 64, "L_kind": "L3", "q": 4,
                                      "k_max": 40, "tol": 1e-12, "seeds": [1],
                                      "epsilons": [1e-3], "mode": "oracle-compare"})
    out = run(cfg, tmp_path / "o")
    with open(out / "oracle.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 40
    assert max(float(r["dev_same_sketch"]) for r in rows) <= 1e-8


def test_file_problem(tmp_path):
    p = generate("gravity", 48)
    write_matrix(tmp_path / "A.mtx", p.A)
    write_vector(tmp_path / "x.txt", p.x_true)
    cfg = ExperimentConfig.from_dict({
        "problems": [{"matrix": str(tmp_path / "A.mtx"), "x_true": str(tmp_path / "x.txt"), "name": "grav"}],
        "n": 48, "q": 5, "k_max": 6, "seeds": [1]})
    rows = read_results(run(cfg, tmp_path / "o") / "results.csv")
    assert {r["problem"] for r in rows} == {"grav"}
    assert len(rows) == 6 and all(r["residual"] > 0 for r in rows)


def _fake_results(path, per_seed):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_FIELDS)
        for seed, (err, k0) in enumerate(per_seed):
            for k in (1, 2, 3):
                e = err if k == k0 else err + 0.5
                w.writerow(["shaw", 1024, "L1", 0.01, 9, seed, k, repr(e), 1.0, 2.0, 10, 1, int(k == k0)])


def test_summarize_median(tmp_path):
    _fake_results(tmp_path / "results.csv", [(0.20, 2), (0.21, 2), (0.19, 3), (0.22, 2), (0.20, 1)])
    assert main(["summarize", str(tmp_path / "results.csv")]) == 0
    with open(tmp_path / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == SUMMARY_FIELDS
    assert float(rows[0]["median_best_error"]) == 0.20
    assert float(rows[0]["min_best_error"]) == 0.19
    assert float(rows[0]["max_best_error"]) == 0.22
    assert float(rows[0]["median_k0"]) == 2.0
    assert float(rows[0]["median_total_inner_iterations"]) == 30.0


def test_summarize_single_row_identity(tmp_path):
    _fake_results(tmp_path / "results.csv", [(0.2043, 3)])
    out = summarize(tmp_path / "results.csv", tmp_path / "s.csv")
    first = out.read_bytes()
    summarize(tmp_path / "results.csv", tmp_path / "s.csv")
    assert out.read_bytes() == first
    with open(out) as fh:
        row = next(csv.DictReader(fh))
    assert float(row["median_best_error"]) == 0.2043 and float(row["median_k0"]) == 3


def test_malformed_csv_reports_line(tmp_path):
    _fake_results(tmp_path / "results.csv", [(0.2, 2)])
    with open(tmp_path / "results.csv", "a") as fh:
        fh.write("shaw,1024,L1,0.01,9,0,4,notanumber,1,2,3,1,0\n")
    with pytest.raises(ValueError, match="line 5"):
        read_results(tmp_path / "results.csv")
    assert main(["summarize", str(tmp_path / "results.csv")]) == 2


def test_bounds_and_sharpness_verbs(tmp_path):
    cfg = _write(tmp_path, {"n": 48, "trials": 5, "ks": [4], "qs": [4],
                            "spectra": [{"kind": "geometric", "rho": 2}, {"kind": "algebraic", "alpha": 1}],
                            "bounds": ["basic_expq", "severe_refined", "trsvd_improved"]})
    assert main(["bounds", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    with open(tmp_path / "b" / "bounds.csv") as fh:
        rows = list(csv.DictReader(fh))
    # severe_refined applies to the geometric spectrum only
    assert len(rows) == 5 * 3 + 5 * 2
    assert main(["sharpness", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 0
    assert sorted(p.name for p in (tmp_path / "s").iterdir()) == [
        "sharpness_0_geometric.csv", "sharpness_1_algebraic.csv"]


def test_format_cell():
    assert format_cell(0.20431, 7) == "0.2043(7)"
    assert format_cell(0.1681, 9.0) == "0.1681(9)"
