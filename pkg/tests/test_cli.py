import csv
import json
from pathlib import Path

import numpy as np
import pytest

from pseudolattice.cli import EXIT_COCYCLE, EXIT_COMPARE, EXIT_CONFIG, EXIT_FIT, build_parser, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write_config(path: Path, base: str, **changes) -> Path:
    cfg = json.loads((CONFIGS / base).read_text())
    cfg.update(changes)
    path.write_text(json.dumps(cfg))
    return path


def run_pipeline(cfg: Path, out: Path) -> dict:
    codes = {}
    codes["generate"] = main(["generate", "--config", str(cfg), "--out", str(out)])
    codes["fit"] = main(["fit", "--config", str(cfg), "--out", str(out), str(out / "spectrum.csv")])
    charts = sorted(str(p) for p in out.glob("chart_*.json"))
    codes["holonomy"] = main(["holonomy", "--config", str(cfg), "--out", str(out), *charts])
    codes["classical"] = main(["classical", "--config", str(cfg), "--out", str(out)])
    codes["compare"] = main(["compare", str(out / "spectral.json"), str(out / "classical.json"), "-o", str(out / "compare.json")])
    return codes


@pytest.fixture(scope="module")
def flat_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("flat")
    cfg = CONFIGS / "flat_disk.json"
    return out, run_pipeline(cfg, out)


@pytest.fixture(scope="module")
def champagne_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("champagne")
    cfg = CONFIGS / "champagne_annulus.json"
    return out, run_pipeline(cfg, out)


def test_parser_lists_subcommands():
    text = build_parser().format_help()
    for name in ("generate", "fit", "holonomy", "classical", "compare", "diophantine-measure"):
        assert name in text


def test_flat_pipeline_closes(flat_run):
    out, codes = flat_run
    assert set(codes.values()) == {0}
    spectral = json.loads((out / "spectral.json").read_text())
    assert spectral["holonomy"]["representative"] == [[1, 0], [0, 1]]
    classical = json.loads((out / "classical.json").read_text())
    assert classical["holonomy"]["representative"] == [[1, 0], [0, 1]]
    assert json.loads((out / "compare.json").read_text())["adjoint"] is True


def test_flat_csv_is_exact_lattice(flat_run):
    out, _ = flat_run
    meta = json.loads((out / "spectrum.json").read_text())
    h, eps = meta["spectrum"]["h"], meta["spectrum"]["eps"]
    S = np.array([[1.0, 0.3], [0.2, 1.0]])
    with open(out / "spectrum.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["re", "im", "k1", "k2", "anchor_E", "anchor_G"]
    x = np.array([[float(r["re"]), float(r["im"]) / eps] for r in rows])
    k = np.array([[int(r["k1"]), int(r["k2"])] for r in rows])
    assert np.max(np.abs(x - (h * k) @ np.linalg.inv(S).T)) < 1e-14


def test_flat_residuals_table(flat_run):
    out, _ = flat_run
    with open(out / "residuals.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and {r["open"] for r in rows} == {"P", "Q", "R", "S"}
    assert max(float(r["relative_residual"]) for r in rows) <= 1e-12
    assert (out / "overlay.svg").read_text().lstrip().startswith("<?xml")


def test_seed_recorded_everywhere(flat_run):
    out, _ = flat_run
    for name in ("spectrum.json", "chart_P.json", "spectral.json", "classical.json"):
        assert json.loads((out / name).read_text())["seed"] == 0


def test_determinism(flat_run, tmp_path):
    out, _ = flat_run
    again = tmp_path / "again"
    cfg = CONFIGS / "flat_disk.json"
    assert main(["generate", "--config", str(cfg), "--out", str(again)]) == 0
    assert main(["fit", "--config", str(cfg), "--out", str(again), str(again / "spectrum.csv")]) == 0
    for name in ("spectrum.csv", "spectrum.json", "chart_P.json", "chart_S.json", "residuals.csv", "overlay.svg"):
        assert (out / name).read_bytes() == (again / name).read_bytes(), name


def test_seed_override_changes_jitter(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", "flat_disk.json", jitter_exponent=4, grid=4)
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "7"]) == 0
    a = (tmp_path / "a" / "spectrum.csv").read_text()
    b = (tmp_path / "b" / "spectrum.csv").read_text()
    assert a != b
    assert json.loads((tmp_path / "b" / "spectrum.json").read_text())["seed"] == 7


def test_jittered_residual_bound(tmp_path):
    h, eps, N = 1e-3, 1e-2, 4
    cfg = write_config(tmp_path / "cfg.json", "flat_disk.json", jitter_exponent=N, grid=6)
    out = tmp_path / "out"
    assert main(["generate", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["fit", "--config", str(cfg), "--out", str(out), "--no-plot", str(out / "spectrum.csv")]) == 0
    with open(out / "residuals.csv") as fh:
        residuals = [float(r["residual"]) for r in csv.DictReader(fh)]
    assert max(residuals) <= 3 * h**N / eps
    assert not (out / "overlay.svg").exists()


def test_champagne_pipeline_adjoint(champagne_run):
    out, codes = champagne_run
    assert set(codes.values()) == {0}
    spectral = json.loads((out / "spectral.json").read_text())
    assert spectral["holonomy"]["trace"] == 2 and spectral["holonomy"]["determinant"] == 1
    assert spectral["holonomy"]["representative"] != [[1, 0], [0, 1]]
    with open(out / "spectrum.csv") as fh:
        assert sum(1 for _ in fh) - 1 >= 1000
    assert json.loads((out / "compare.json").read_text())["adjoint"] is True


def test_broken_covering_exits_4(champagne_run, tmp_path, capsys):
    out, _ = champagne_run
    cfg = json.loads((CONFIGS / "champagne_annulus.json").read_text())
    # declare a triple overlap that does not exist: the cocycle identity cannot hold on it
    cfg["covering"]["edges"] = [["A", "B"], ["A", "C"], ["A", "D"], ["B", "C"], ["C", "D"]]
    cfg["covering"]["triples"] = [["A", "C", "D"]]
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(cfg))
    charts = sorted(str(p) for p in out.glob("chart_*.json"))
    assert main(["holonomy", "--config", str(path), "--out", str(tmp_path), *charts]) == EXIT_COCYCLE
    assert "CocycleViolation" in capsys.readouterr().err


def test_missing_chart_exits_4(flat_run, tmp_path):
    out, _ = flat_run
    cfg = CONFIGS / "flat_disk.json"
    assert main(["holonomy", "--config", str(cfg), "--out", str(tmp_path), str(out / "chart_P.json")]) == EXIT_COCYCLE
    assert main(["holonomy", "--config", str(cfg), "--out", str(tmp_path), str(tmp_path / "nope.json")]) == EXIT_COCYCLE


def test_regime_violation_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path / "bad.json", "flat_disk.json", h=0.01, eps=0.01)
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "regime violation" in capsys.readouterr().err
    good = CONFIGS / "flat_disk.json"
    assert main(["generate", "--config", str(good), "--out", str(tmp_path), "--h", "0.01"]) == EXIT_CONFIG
    assert not (tmp_path / "spectrum.csv").exists()


def test_unknown_config_key_exits_2(tmp_path):
    cfg = write_config(tmp_path / "bad.json", "flat_disk.json", colour="blue")
    assert main(["generate", "--config", str(cfg)]) == EXIT_CONFIG


def test_truncated_csv_exits_3(flat_run, tmp_path, capsys):
    out, _ = flat_run
    text = (out / "spectrum.csv").read_text()
    cut = tmp_path / "spectrum.csv"
    cut.write_text(text[: len(text) // 20])
    cfg = CONFIGS / "flat_disk.json"
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path), str(cut)]) == EXIT_FIT
    assert "error" in capsys.readouterr().err
    garbage = tmp_path / "garbage.csv"
    garbage.write_text("re,im\n0.5,abc\n")
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path), str(garbage)]) == EXIT_FIT


def test_fit_failure_names_rectangle(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json", "flat_disk.json", jitter_exponent=1, grid=4)
    out = tmp_path / "out"
    assert main(["generate", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["fit", "--config", str(cfg), "--out", str(out), str(out / "spectrum.csv")]) == EXIT_FIT
    assert "rectangle at anchor" in capsys.readouterr().err


def test_compare_mismatch_exits_5(tmp_path):
    ident = {"holonomy": {"representative": [[1, 0], [0, 1]]}}
    parabolic = {"holonomy": {"representative": [[1, 1], [0, 1]]}}
    (tmp_path / "a.json").write_text(json.dumps(ident))
    (tmp_path / "b.json").write_text(json.dumps(parabolic))
    assert main(["compare", str(tmp_path / "a.json"), str(tmp_path / "b.json")]) == EXIT_COMPARE
    assert main(["compare", str(tmp_path / "b.json"), str(tmp_path / "b.json")]) == 0
    (tmp_path / "c.json").write_text("{}")
    assert main(["compare", str(tmp_path / "a.json"), str(tmp_path / "c.json")]) == EXIT_COMPARE


def test_diophantine_measure_command(tmp_path):
    cfg = CONFIGS / "diophantine_measure.json"
    assert main(["diophantine-measure", "--config", str(cfg), "--out", str(tmp_path), "--samples", "2000"]) == 0
    report = json.loads((tmp_path / "diophantine.json").read_text())
    assert [r["alpha"] for r in report["results"]] == [0.1, 0.05, 0.025]
    assert all(r["samples"] == 2000 for r in report["results"])
    assert len(report["ratios"]) == 2
