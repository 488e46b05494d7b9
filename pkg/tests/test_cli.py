import csv
import json

import numpy as np
import pytest

from adann.cli import FNO_PLACEHOLDER, REPORT_COLUMNS, main
from adann.dataset_io import load, load_checkpoint, load_dataset

FAST = ["--base-steps", "20", "--diff-steps", "20", "--eval-every", "10"]


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh, delimiter=";"))


@pytest.fixture(scope="module")
def rd1d_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "rd1d.adann"
    assert main(["gen-data", "--problem", "rd1d", "--n", "256", "--seed", "7", "--out", str(path)]) == 0
    return path


@pytest.mark.parametrize("problem,n,shapes", [("rd1d", 16, ((16, 287), (16, 35))),
                                              ("sg1d", 16, ((16, 420), (16, 30))),
                                              ("heat2d", 4, ((4, 6400), (4, 1600)))])
def test_gen_data_shapes(tmp_path, problem, n, shapes, capsys):
    out = tmp_path / "d.adann"
    assert main(["gen-data", "--problem", problem, "--n", str(n), "--seed", "7", "--out", str(out)]) == 0
    d = load_dataset(out)
    assert (d.inputs.shape, d.targets.shape) == shapes
    cfg = json.loads((tmp_path / "d.adann.config.json").read_text())
    assert cfg["seed"] == 7 and cfg["problem"] == problem
    assert "generated" in capsys.readouterr().out


def test_gen_data_default_size_is_desk_scale(tmp_path):
    from adann.cli import _effective, build_parser

    args = build_parser().parse_args(["gen-data", "--problem", "rd1d", "--out", str(tmp_path / "x")])
    cfg = _effective(args, "gen-data")
    assert cfg["n"] == 2**14 and cfg["base_steps"] == 2000
    args = build_parser().parse_args(["gen-data", "--problem", "rd1d", "--full", "--out", str(tmp_path / "x")])
    cfg = _effective(args, "gen-data")
    assert cfg["n"] == 2**19 and cfg["base_steps"] == 16000


def test_gen_data_errors(tmp_path, capsys):
    with pytest.raises(SystemExit):
        main(["gen-data", "--problem", "burgers", "--out", str(tmp_path / "x")])
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["gen-data", "--problem", "rd1d", "--n", "2", "--out", str(blocker / "x.adann")]) == 2


def test_config_file(tmp_path, rd1d_file):
    cfg = tmp_path / "c.toml"
    cfg.write_text('problem = "rd1d"\nn = 3\nseed = 4\n')
    out = tmp_path / "d.adann"
    assert main(["gen-data", "--config", str(cfg), "--out", str(out)]) == 0
    assert len(load_dataset(out)) == 3
    assert main(["gen-data", "--config", str(cfg), "--n", "2", "--out", str(out)]) == 0
    assert len(load_dataset(out)) == 2
    cfg.write_text('problem = "rd1d"\nbogus = 1\n')
    assert main(["gen-data", "--config", str(cfg), "--out", str(out)]) == 2


def test_sweep_grid(tmp_path, rd1d_file):
    out = tmp_path / "grid"
    assert main(["sweep", "--problem", "rd1d", "--mode", "grid", "--data", str(rd1d_file), "--out", str(out)] + FAST) == 0
    heat = read(out / "heatmap.csv")
    assert len(heat) == 63
    runs = read(out / "runs.csv")
    assert tuple(runs[0]) == ("run", "p1", "p2", "init_L2", "base_L2", "full_L2", "epsilon", "status")
    report = read(out / "report.csv")
    assert [r["method"] for r in report] == ["ADANN grid: base model", "ADANN grid: full model"]
    assert report[0]["trainable_params"] == "30625"
    W, theta, eps, meta = load_checkpoint(out / "selected.adann")
    assert W.n_params == 30625 and theta.widths == (35, 50, 150, 35) and meta["problem"] == "rd1d"
    assert json.loads((out / "config.json").read_text())["mode"] == "grid"


def test_sweep_adaptive_rows(tmp_path, rd1d_file):
    out = tmp_path / "ad"
    assert main(["sweep", "--problem", "rd1d", "--mode", "adaptive", "--runs", "4", "--data", str(rd1d_file),
                 "--out", str(out)] + FAST) == 0
    assert len(read(out / "runs.csv")) == 4
    assert [r["method"] for r in read(out / "report.csv")] == ["ADANN adaptive: full model"]


def test_sweep_sg1d_grid_has_20_rows(tmp_path):
    data = tmp_path / "sg.adann"
    assert main(["gen-data", "--problem", "sg1d", "--n", "64", "--out", str(data)]) == 0
    out = tmp_path / "sg"
    assert main(["sweep", "--problem", "sg1d", "--mode", "grid", "--data", str(data), "--out", str(out),
                 "--base-steps", "2", "--diff-steps", "2", "--eval-every", "1"]) == 0
    heat = read(out / "heatmap.csv")
    assert len(heat) == 20
    assert {(round(float(r["p1"]) * 10), round(float(r["p2"]) * 30)) for r in heat} == {
        (a, b) for a in (1, 3, 5, 7, 9) for b in (6, 13, 20, 27)}


def test_sweep_errors(tmp_path, rd1d_file):
    assert main(["sweep", "--problem", "rd1d", "--data", str(tmp_path / "missing"), "--out", str(tmp_path / "o")]) == 2
    assert main(["sweep", "--problem", "sg1d", "--data", str(rd1d_file), "--out", str(tmp_path / "o")]) == 2
    assert main(["sweep", "--problem", "rd1d", "--out", str(tmp_path / "o")]) == 2


def test_baseline_cn(tmp_path, rd1d_file):
    out = tmp_path / "cn"
    assert main(["baseline", "--problem", "rd1d", "--method", "cn", "--data", str(rd1d_file), "--out", str(out)]) == 0
    rows = read(out / "report.csv")
    assert [r["method"] for r in rows] == [f"CN explicit midpoint M={m}" for m in range(15, 21)]
    assert all(r["trainable_params"] == "0" for r in rows)
    again = tmp_path / "cn2"
    main(["baseline", "--problem", "rd1d", "--method", "cn", "--data", str(rd1d_file), "--out", str(again)])
    strip = lambda rows: [{k: r[k] for k in REPORT_COLUMNS[:4]} for r in rows]
    assert strip(read(again / "report.csv")) == strip(rows)
    assert main(["baseline", "--problem", "rd1d", "--method", "cn", "--steps", "7", "--data", str(rd1d_file),
                 "--out", str(tmp_path / "cn7")]) == 0
    assert len(read(tmp_path / "cn7" / "report.csv")) == 1
    with pytest.raises(SystemExit):
        main(["baseline", "--problem", "rd1d", "--method", "fem", "--data", str(rd1d_file), "--out", str(out)])


def test_report_merge(tmp_path, rd1d_file):
    grid, ad, cn, ann = (tmp_path / k for k in ("grid", "ad", "cn", "ann"))
    main(["sweep", "--problem", "rd1d", "--mode", "grid", "--data", str(rd1d_file), "--out", str(grid),
          "--base-steps", "2", "--diff-steps", "2", "--eval-every", "1"])
    main(["sweep", "--problem", "rd1d", "--mode", "adaptive", "--runs", "2", "--data", str(rd1d_file),
          "--out", str(ad)] + FAST)
    main(["baseline", "--problem", "rd1d", "--method", "cn", "--data", str(rd1d_file), "--out", str(cn)])
    main(["baseline", "--problem", "rd1d", "--method", "ann", "--ann-steps", "20", "--ann-runs", "2",
          "--eval-every", "10", "--data", str(rd1d_file), "--out", str(ann)])
    out = tmp_path / "table1.csv"
    assert main(["report", "--runs", str(grid), str(ad), "--baselines", str(ann), str(cn), "--out", str(out)]) == 0
    with open(out) as fh:
        assert fh.readline().strip() == ";".join(REPORT_COLUMNS)
    rows = read(out)
    methods = [r["method"] for r in rows]
    assert len(rows) == 11
    assert methods[0].startswith("ANN (35, 100, 220, 150, 35)")
    assert methods[1] == FNO_PLACEHOLDER
    assert methods[2:8] == [f"CN explicit midpoint M={m}" for m in range(15, 21)]
    assert methods[8:] == ["ADANN grid: base model", "ADANN grid: full model", "ADANN adaptive: full model"]
    only_runs = tmp_path / "runs_only.csv"
    assert main(["report", "--runs", str(grid), "--out", str(only_runs)]) == 0
    assert [r["method"] for r in read(only_runs)] == methods[8:10]
    bad = tmp_path / "bad.csv"
    bad.write_text("method;L1;L2\nx;1;2\n")
    assert main(["report", "--baselines", str(bad), "--out", str(tmp_path / "r.csv")]) == 2


def test_sweep_is_bitwise_reproducible(tmp_path, rd1d_file):
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        main(["sweep", "--problem", "rd1d", "--mode", "adaptive", "--runs", "3", "--seed", "2",
              "--data", str(rd1d_file), "--out", str(out)] + FAST)
        outs.append(out)
    a, b = outs
    assert (a / "selected.adann").read_bytes() == (b / "selected.adann").read_bytes()
    assert (a / "runs.csv").read_bytes() == (b / "runs.csv").read_bytes()
    cols = REPORT_COLUMNS[:4]
    assert [[r[c] for c in cols] for r in read(a / "report.csv")] == [[r[c] for c in cols] for r in read(b / "report.csv")]
