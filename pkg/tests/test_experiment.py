import json

import pytest

from antgrid.errors import ConfigInvalid, TreasureAtNest, Underdetermined
from antgrid.experiment import (
    dump_row,
    parse_config,
    place_treasure,
    placement_candidates,
    read_jsonl,
    run_experiment,
    summarize,
    worst_case_samples,
)
from antgrid.metrics import RunMetrics, metrics_from_trace
from antgrid.scheduler import RunConfig
from antgrid.world import Position, manhattan_distance


def write(tmp_path, obj, name="spec.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def test_flags_single_run():
    spec = parse_config(None, {"program": "async-fsm", "k": 4, "treasure": "3,-2"})
    (cfg,) = spec.cells()
    assert cfg.D == 5
    assert cfg.k == 4


def test_treasure_at_nest_is_config_error():
    with pytest.raises(ConfigInvalid):
        parse_config(None, {"treasure": "0,0"})
    with pytest.raises(TreasureAtNest):
        parse_config(None, {"treasure": "0,0"})


def test_sweep_file_expands_to_cells(tmp_path):
    p = write(tmp_path, {"program": "async-fsm", "sweep": {"distance": [10, 20, 40], "k": [1, 4]}})
    cells = parse_config(p).cells()
    assert len(cells) == 6
    assert [(c.D, c.k) for c in cells] == [(10, 1), (10, 4), (20, 1), (20, 4), (40, 1), (40, 4)]


def test_flags_override_file(tmp_path):
    p = write(tmp_path, {"program": "async-fsm", "k": 2, "treasure": [5, 5]})
    (cfg,) = parse_config(p, {"k": 3, "distance": 4}).cells()
    assert cfg.k == 3 and cfg.D == 4


@pytest.mark.parametrize(
    "obj,field",
    [
        ({"program": "nope", "k": 1, "distance": 3}, "program"),
        ({"k": 1}, "treasure"),
        ({"k": 1, "distance": 0}, "distance"),
        ({"k": "two", "distance": 3}, "k"),
        ({"k": 1, "distance": 3, "colour": "red"}, "colour"),
        ({"k": 1, "distance": 3, "sweep": {"speed": [1]}}, "sweep.speed"),
        ({"k": 1, "sweep": {"distance": [3, 0]}}, "cell[1].distance"),
        ({"k": 1, "distance": 3, "scheduler": "fastest"}, "scheduler"),
        ({"k": 1, "distance": 3, "repetitions": 0}, "repetitions"),
    ],
)
def test_config_errors_carry_field_path(tmp_path, obj, field):
    with pytest.raises(ConfigInvalid) as exc:
        parse_config(write(tmp_path, obj))
    assert exc.value.field == field


def test_script_and_fault_files(tmp_path):
    (tmp_path / "order.json").write_text("[1, 2, 2, 1]")
    (tmp_path / "kills.json").write_text("[[2, 7]]")
    p = write(tmp_path, {"program": "async-fsm", "k": 2, "distance": 3, "scheduler": "script:order.json", "faults": "kills.json"})
    (cfg,) = parse_config(p).cells()
    assert cfg.strategy.script == (1, 2, 2, 1)
    assert cfg.faults.kills == ((2, 7),)


def test_random_faults_flag():
    (cfg,) = parse_config(None, {"program": "async-ft-fsm", "k": 4, "distance": 6, "faults": "random:2", "seed": 9}).cells()
    assert cfg.faults.random_f == 2 and cfg.faults.random_seed == 9


def test_placement_covers_axis_near_axis_and_diagonal():
    for D in (1, 2, 5, 10):
        cands = placement_candidates(D)
        assert all(manhattan_distance(c) == D for c in cands)
        assert len(set(cands)) == len(cands)
    cands = placement_candidates(10)
    assert Position(10, 0) in cands and Position(0, -10) in cands
    assert Position(9, 1) in cands and Position(-1, 9) in cands
    assert Position(5, 5) in cands and Position(-5, -5) in cands
    assert [place_treasure(10, s) for s in range(12)] == cands


def test_six_cell_sweep_all_found(tmp_path):
    p = write(tmp_path, {"program": "async-fsm", "sweep": {"distance": [10, 20, 40], "k": [1, 4]}})
    rows = list(run_experiment(parse_config(p), tmp_path / "r.jsonl"))
    assert len(rows) == 6
    assert all(r["metrics"]["found"] for r in rows)
    assert read_jsonl(tmp_path / "r.jsonl") == rows


def test_all_dead_row_is_recorded_not_raised(tmp_path):
    p = write(tmp_path, {"program": "async-ft-fsm", "k": 2, "distance": 5, "sweep": {"f": [1, 2]}})
    rows = list(run_experiment(parse_config(p)))
    assert rows[0]["error"] is None and rows[0]["metrics"]["found"]
    assert rows[1]["error"]["error"] == "AllDead"
    assert rows[1]["metrics"] is None


def test_identical_seed_rows_are_byte_identical():
    spec = parse_config(None, {"program": "async-ft-fsm", "k": 3, "distance": 7, "scheduler": "random", "faults": "random:1", "seed": 77})
    a = [dump_row(r) for r in run_experiment(spec)]
    b = [dump_row(r) for r in run_experiment(spec)]
    assert a == b


def test_row_config_echo_replays(tmp_path):
    spec = parse_config(None, {"program": "sync-ft-fsm", "k": 4, "distance": 9, "faults": "random:2", "seed": 5})
    (row,) = run_experiment(spec)
    p = write(tmp_path, row["config"], "echo.json")
    (again,) = run_experiment(parse_config(p))
    assert dump_row(again) == dump_row(row)


def test_trace_files_match_metrics(tmp_path):
    p = write(tmp_path, {"program": "tm", "k": 3, "trace_dir": str(tmp_path / "traces"), "sweep": {"distance": [4, 7]}})
    rows = list(run_experiment(parse_config(p)))
    for i, row in enumerate(rows):
        trace = read_jsonl(tmp_path / "traces" / f"cell-{i:05d}.jsonl")
        cfg = RunConfig.from_dict(row["config"])
        assert metrics_from_trace(trace, cfg.treasure, cfg.k) == RunMetrics.from_dict(row["metrics"])


def test_parallel_rows_keep_cell_order(tmp_path):
    obj = {"program": "async-fsm", "sweep": {"distance": [3, 6, 9], "k": [1, 2]}}
    serial = list(run_experiment(parse_config(write(tmp_path, obj))))
    obj["workers"] = 2
    parallel = list(run_experiment(parse_config(write(tmp_path, obj, "p.json"))))
    assert parallel == serial


def test_summarize_fsm_report(tmp_path):
    obj = {"program": "async-fsm", "repetitions": 12, "sweep": {"distance": [10, 20, 30], "k": [1, 2, 4]}}
    report = tmp_path / "r.jsonl"
    list(run_experiment(parse_config(write(tmp_path, obj)), report))
    out = summarize(report)
    entry = out["programs"]["async-fsm"]
    assert entry["pheromone_audit_pass"]
    assert entry["fit_pass"]
    assert out["passed"]


def test_summarize_tm_emissions_le_k(tmp_path):
    obj = {"program": "tm", "repetitions": 4, "sweep": {"distance": [8, 16, 24], "k": [1, 3, 5]}}
    rows = list(run_experiment(parse_config(write(tmp_path, obj))))
    entry = summarize(rows)["programs"]["tm"]
    assert entry["emissions_le_k"]


def test_summarize_underdetermined(tmp_path):
    rows = list(run_experiment(parse_config(None, {"program": "async-fsm", "k": 2, "distance": 5})))
    with pytest.raises(Underdetermined):
        summarize(rows)


def test_worst_case_samples_take_max_per_cell():
    rows = [
        {"config": RunConfig(program="async-fsm", k=2, treasure=t).to_dict(), "metrics": {"found": True, "rounds": r}, "error": None}
        for t, r in [((3, 0), 10), ((0, 3), 14), ((4, 0), 20)]
    ]
    assert worst_case_samples(rows) == [(3, 2, 0, 14), (4, 2, 0, 20)]
