import csv
import json

import pytest

from droptune import cli

GRID_2X2 = {"params": [{"name": "a", "kind": "tile", "values": [1, 2]},
                       {"name": "b", "kind": "tile", "values": [1, 2]}]}


def write_config(tmp_path, name="cfg.json", **doc):
    doc.setdefault("output_dir", "out")
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def combined_config(tmp_path, **extra):
    doc = dict(workloads=[{"op": "matmul", "M": 32, "N": 32, "K": 32, "layer": "mm"},
                          {"op": "elementwise", "length": 2, "extent": 64,
                           "layer": "ew", "weight": 2}],
               backend={"kind": "synthetic", "family": "rugged", "seed": 3},
               strategy="combined", budgets={"K": 120, "N": 40, "droplet_budget": 30},
               rng_seed=3)
    doc.update(extra)
    return write_config(tmp_path, **doc)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_grid_on_two_by_two_space(tmp_path):
    cfg = write_config(tmp_path, space=GRID_2X2, strategy="grid", budgets={"K": 4})
    assert cli.main(["tune", cfg]) == 0
    recs = [json.loads(x) for x in (tmp_path / "out" / "trials.jsonl").read_text().splitlines()]
    assert [r["coord"] for r in recs] == [[0, 0], [0, 1], [1, 0], [1, 1]]
    assert [r["trial"] for r in recs] == [0, 1, 2, 3]


def test_tune_writes_all_outputs_and_embeds_config(tmp_path):
    cfg = combined_config(tmp_path)
    assert cli.main(["tune", cfg]) == 0
    out = tmp_path / "out"
    report = json.loads((out / "report.json").read_text())
    assert report["config"] == json.loads((tmp_path / "cfg.json").read_text())
    assert {"explore", "exploit", "total"} <= set(report["wall_s"])
    assert report["model"]["total_trials"] <= 120
    rows = read_csv(out / "summary.csv")
    assert [r["layer"] for r in rows] == ["mm", "ew"]


def test_combined_run_is_byte_identical(tmp_path):
    cfg = combined_config(tmp_path)
    assert cli.main(["tune", cfg, "-o", str(tmp_path / "r1")]) == 0
    assert cli.main(["tune", cfg, "-o", str(tmp_path / "r2")]) == 0
    a = (tmp_path / "r1" / "trials.jsonl").read_bytes()
    b = (tmp_path / "r2" / "trials.jsonl").read_bytes()
    assert a == b and len(a) > 0


def test_report_regenerates_identical_summary(tmp_path):
    cfg = combined_config(tmp_path)
    cli.main(["tune", cfg])
    out = tmp_path / "out"
    first = (out / "summary.csv").read_bytes()
    log = (out / "trials.jsonl").read_bytes()
    for _ in range(2):
        assert cli.main(["report", str(out)]) == 0
        assert (out / "summary.csv").read_bytes() == first
    assert (out / "trials.jsonl").read_bytes() == log
    conv = read_csv(out / "convergence.csv")
    assert len(conv) == len(log.splitlines())
    best = [float(r["layer_best_ns"]) for r in conv if r["layer"] == "mm" and r["layer_best_ns"]]
    assert best == sorted(best, reverse=True)


@pytest.mark.parametrize("doc,field", [
    (dict(space=GRID_2X2, strategy="grid", budgets={"K": 0}), "budgets.K"),
    (dict(space=GRID_2X2, strategy="combined", budgets={"K": 10, "N": 3}), "strategy"),
    (dict(workloads=[{"op": "matmul", "M": 4, "N": 4, "K": 4}],
          strategy="combined", budgets={"K": 10, "N": 10}), "budgets.N"),
    (dict(workloads=[{"op": "matmul", "M": 4, "N": 4, "K": 4}],
          strategy="annealing"), "strategy"),
    (dict(workloads=[{"op": "matmul", "M": 4, "N": 4, "K": 4, "weight": 0}]),
     "workloads[0].weight"),
    (dict(workloads=[{"op": "fft"}]), "workloads[0]"),
    (dict(space=GRID_2X2, backend={"family": "bumpy"}, strategy="grid"), "backend.family"),
    (dict(space=GRID_2X2, strategy="grid", measure={"repeats": 1}), "measure"),
    (dict(space=GRID_2X2, strategy="grid", measure={"reps": 5}), "measure.reps"),
    (dict(strategy="grid"), "workloads"),
])
def test_invalid_config_exits_2_naming_field(tmp_path, capsys, doc, field):
    assert cli.main(["tune", write_config(tmp_path, **doc)]) == 2
    assert repr(field) in capsys.readouterr().err


def test_bad_json_and_missing_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert cli.main(["tune", str(p)]) == 2
    assert cli.main(["tune", str(tmp_path / "nope.json")]) == 2


def test_backend_failure_exits_3(tmp_path):
    cfg = write_config(tmp_path, workloads=[{"op": "matmul", "M": 4, "N": 4, "K": 4}],
                       backend={"kind": "native", "cc": str(tmp_path / "no-such-cc")},
                       strategy="grid", budgets={"K": 2})
    assert cli.main(["tune", cfg]) == 3


def test_report_errors_exit_4(tmp_path, capsys):
    d = tmp_path / "run"
    d.mkdir()
    assert cli.main(["report", str(d)]) == 4
    (d / "trials.jsonl").write_text("")
    assert cli.main(["report", str(d)]) == 4
    cfg = write_config(tmp_path, space=GRID_2X2, strategy="grid", budgets={"K": 4})
    cli.main(["tune", cfg, "-o", str(d)])
    text = (d / "trials.jsonl").read_text()
    (d / "trials.jsonl").write_text(text[:-20])
    capsys.readouterr()
    assert cli.main(["report", str(d)]) == 4
    assert "trials.jsonl:4" in capsys.readouterr().err
    (d / "trials.jsonl").write_text(text.replace('"status"', '"stat"', 1))
    assert cli.main(["report", str(d)]) == 4
    assert "trials.jsonl:1" in capsys.readouterr().err


def test_compare_single_strategy(tmp_path):
    cfg = write_config(tmp_path, space={"params": [{"name": "a", "values": list(range(8))},
                                                   {"name": "b", "values": list(range(8))}]},
                       strategy="droplet", budgets={"K": 30})
    assert cli.main(["compare", cfg, "--strategies", "droplet"]) == 0
    rows = read_csv(tmp_path / "out" / "compare.csv")
    assert len(rows) == 1 and rows[0]["strategy"] == "droplet"
    assert (tmp_path / "out" / "droplet" / "trials.jsonl").exists()


def test_compare_random_and_grid_tie_on_exhaustive_budget(tmp_path):
    cfg = write_config(tmp_path, space=GRID_2X2, strategy="grid", budgets={"K": 4},
                       backend={"kind": "synthetic", "family": "rugged", "seed": 1,
                                "noise_rel": 0.05})
    assert cli.main(["compare", cfg, "--strategies", "random,grid"]) == 0
    rows = {r["strategy"]: r for r in read_csv(tmp_path / "out" / "compare.csv")}
    assert rows["random"]["best_cost_ns"] == rows["grid"]["best_cost_ns"]
    assert {rows["random"]["significance"], rows["grid"]["significance"]} == {"best", "tie"}


def test_compare_unknown_strategy(tmp_path):
    cfg = write_config(tmp_path, space=GRID_2X2, strategy="grid")
    assert cli.main(["compare", cfg, "--strategies", "grid,annealing"]) == 2


def test_compare_model_strategies(tmp_path):
    cfg = combined_config(tmp_path)
    assert cli.main(["compare", cfg, "--strategies", "combined,explore,random"]) == 0
    rows = read_csv(tmp_path / "out" / "compare.csv")
    assert [r["strategy"] for r in rows] == ["combined", "explore", "random"]
    assert sum(r["significance"] == "best" for r in rows) == 1
