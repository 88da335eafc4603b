import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from klocal import harness
from klocal.harness import (
    ExperimentConfig, ResultRecord, TableRow, check_table1, check_table2, concentration_coverage, emit_outputs,
    five_number, parse_config_text, pooled_coverage, read_csv, records_to_csv, reference_values, run_sweep,
    run_table1, summarize,
)
from klocal.instances import generate_Ff
from _oracles import expected_coverage


def test_resolve_m():
    assert ExperimentConfig("fig_qs_density", (12,), m_spec="n^2").resolve_m(12, 4) == 576
    assert ExperimentConfig("fig_aqs_density", (16,), m_spec="n").resolve_m(16, 2.5) == 40
    assert ExperimentConfig("concentration", (10,), m_spec="10000").resolve_m(10) == 10_000
    with pytest.raises(ValueError):
        ExperimentConfig("solve", (10,), m_spec="lots")
    with pytest.raises(ValueError):
        ExperimentConfig("solve", (10,), m_spec="n", c_list=(0.01,))
    with pytest.raises(ValueError):
        ExperimentConfig("nope")


def test_parse_config_text():
    text = """
    # density sweep
    kind = fig_aqs_density
    n_list = 14, 16
    c_list = 2.5 4
    m_spec = n
    steps = none
    record_timing = yes
    """
    fields = parse_config_text(text)
    assert fields["n_list"] == (14, 16) and fields["c_list"] == (2.5, 4.0)
    assert fields["steps"] is None and fields["record_timing"] is True
    assert ExperimentConfig(**fields).resolve_m(16, 4) == 64
    with pytest.raises(ValueError):
        parse_config_text("colour = blue")
    with pytest.raises(ValueError):
        parse_config_text("n_list 10")


def test_fingerprint_ignores_output_location():
    a = ExperimentConfig("solve", (8,), out_dir="a", jobs=1)
    b = ExperimentConfig("solve", (8,), out_dir="b", jobs=3)
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != ExperimentConfig("solve", (8,), seed=1).fingerprint()


def _small_qs(tmp_path, **kw):
    fields = dict(kind="fig_qs_density", n_list=(6,), c_list=(1, 2), instance_count=4, seed=3,
                  out_dir=str(tmp_path), steps=3)
    fields.update(kw)
    return ExperimentConfig(**fields)


def test_sweep_records_and_csv_round_trip(tmp_path):
    recs = run_sweep(_small_qs(tmp_path), resume=False)
    assert len(recs) == 2 * 4 * 2
    assert all(0 <= r.value <= 1 for r in recs if r.metric == "p_t")
    path = emit_outputs(recs, "csv", tmp_path, "qs")
    assert read_csv(path) == recs


def test_sweep_is_reproducible_byte_for_byte(tmp_path):
    a = records_to_csv(run_sweep(_small_qs(tmp_path / "a"), resume=False))
    b = records_to_csv(run_sweep(_small_qs(tmp_path / "b"), resume=False))
    assert a == b


def test_cells_do_not_depend_on_other_cells(tmp_path):
    both = run_sweep(_small_qs(tmp_path / "a"), resume=False)
    only = run_sweep(_small_qs(tmp_path / "b", c_list=(2,)), resume=False)
    assert [r for r in both if r.m == 72] == only


def test_resume_skips_finished_instances(tmp_path, monkeypatch):
    cfg = _small_qs(tmp_path)
    full = run_sweep(cfg, resume=False)
    log_path = tmp_path / "fig_qs_density.log.jsonl"
    lines = log_path.read_text().splitlines()
    # drop the last instance as if the run had been interrupted
    log_path.write_text("\n".join(lines[:-2]) + "\n")
    calls = []
    real = harness._run_task
    monkeypatch.setattr(harness, "_run_task", lambda *a: calls.append(a[1]) or real(*a))
    assert run_sweep(cfg) == full
    assert len(calls) == 1
    with pytest.raises(ValueError, match="different configuration"):
        run_sweep(_small_qs(tmp_path, seed=4))


def test_parallel_matches_serial(tmp_path):
    serial = run_sweep(_small_qs(tmp_path / "s"), resume=False)
    parallel = run_sweep(_small_qs(tmp_path / "p", jobs=2), resume=False)
    assert serial == parallel


def test_failed_instance_is_recorded(tmp_path, monkeypatch):
    def boom(cfg, task, p=None):
        if task.instance == 1:
            raise RuntimeError("boom")
        return [ResultRecord(cfg.kind, task.n, cfg.k, task.m, cfg.seed, task.instance, "p_t", 0.5)]

    monkeypatch.setattr(harness, "_run_task", boom)
    recs = run_sweep(_small_qs(tmp_path, c_list=(1,)), resume=False)
    assert [r.instance for r in recs if r.metric == "failed"] == [1]
    assert sum(r.metric == "p_t" for r in recs) == 3


def test_svg_output_is_well_formed(tmp_path):
    recs = run_sweep(_small_qs(tmp_path), resume=False)
    path = emit_outputs(recs, "svg", tmp_path, "qs")
    root = ET.parse(path).getroot()
    assert root.tag.endswith("svg") and root.get("viewBox")
    again = emit_outputs(recs, "svg", tmp_path / "x", "qs")
    assert again.read_bytes() == path.read_bytes()


def test_json_output(tmp_path):
    recs = [ResultRecord("solve", 6, 3, 36, 0, 0, "satisfied", 1.0)]
    data = json.loads(emit_outputs(recs, "json", tmp_path, "s").read_text())
    assert data == [recs[0]._asdict()]


def test_emit_rejects_empty_and_nonfinite(tmp_path):
    with pytest.raises(ValueError):
        emit_outputs([], "csv", tmp_path, "x")
    with pytest.raises(ValueError):
        emit_outputs([ResultRecord("solve", 6, 3, 36, 0, 0, "p_t", math.nan)], "csv", tmp_path, "x")
    with pytest.raises(ValueError):
        emit_outputs([ResultRecord("solve", 6, 3, 36, 0, 0, "p_t", 0.1)], "xlsx", tmp_path, "x")


def test_five_number_and_summary():
    s = five_number([1, 2, 3, 4, 5])
    assert (s.low, s.q1, s.median, s.q3, s.high, s.count) == (1, 2, 3, 4, 5, 5)
    recs = [ResultRecord("fig_qs_density", 6, 3, m, 0, i, "p_t", float(i + m)) for m in (36, 72) for i in range(3)]
    out = summarize(recs)
    assert out[(6, 36)].median == 37 and out[(6, 72)].median == 73
    with pytest.raises(ValueError):
        five_number([])


def test_reference_values_shape():
    ref = reference_values()
    assert sum(len(v) for v in ref["table1"].values()) == 33
    T = [ref["table2"][str(n)]["T"] for n in range(10, 21)]
    assert T == sorted(T) and T[0] == 98 and T[-1] == 276


def test_table1_subset_and_checker():
    recs, rows = run_table1(ExperimentConfig("table1", (10, 11, 12)), ks=(3,))
    assert len(recs) == 6
    assert check_table1(rows).ok and check_table1(rows).exact == 3
    off = [r._replace(steps=r.steps + 2) for r in rows]
    assert not check_table1(off).ok


def test_table2_checker_tolerance():
    rows = [TableRow(3, 10, 100, 0.991, 98, 0.99), TableRow(3, 20, 281, 0.99, 276, 0.99)]
    assert check_table2(rows).ok
    assert not check_table2([rows[0]._replace(steps=102)]).ok
    assert not check_table2([rows[0]._replace(prob=0.98)]).ok


def test_concentration_coverage_matches_binomial_expectation():
    n, k, m = 8, 3, 2000
    covs = [concentration_coverage(generate_Ff(n, m, k, harness.cell_rng(9, n, m, i))) for i in range(60)]
    for c in (1, 2):
        got = np.mean([cv[f"coverage_c{c}"] for cv in covs])
        assert got == pytest.approx(expected_coverage(n, k, m, c), abs=0.02)
        wide = np.mean([cv[f"bound_c{c}"] for cv in covs])
        assert wide >= got - 1e-12


def test_pooled_coverage_is_instance_mean():
    recs = [ResultRecord("concentration", 10, 3, 100, 0, i, "coverage_c1", v) for i, v in enumerate([0.6, 0.7])]
    assert pooled_coverage(recs) == {"coverage_c1": pytest.approx(0.65)}


def test_erf_target():
    assert harness.erf_target(2) == pytest.approx(0.9545, abs=1e-4)
