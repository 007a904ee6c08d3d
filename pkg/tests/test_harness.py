import dataclasses
import json
import random

import numpy as np
import pytest

from rsma_urllc.harness import (
    MethodSpec,
    SweepResult,
    SweepSpec,
    apply_swept_parameter,
    emit_outputs,
    read_sweep_csv,
    run_sweep,
    run_trial,
    sample_trial_realization,
)
from rsma_urllc.scenario import ScenarioConfig


def smoke_config(**kw):
    base = dict(num_users=3, num_subcarriers=2, num_antennas=8, master_seed=77)
    base.update(kw)
    return ScenarioConfig.defaults(**base)


def tiny_spec(**kw):
    base = dict(
        swept_parameter="P_max",
        values=[24.0, 30.0],
        methods=[MethodSpec("heuristic", "lba")],
        trials=3,
        master_seed=77,
    )
    base.update(kw)
    return SweepSpec(**base)


class TestSpecs:
    def test_method_parse(self):
        m = MethodSpec.parse("greedy+cccp+sdma")
        assert (m.grouping, m.solver, m.mode) == ("greedy", "cccp", "sdma")
        assert MethodSpec.parse("random+lba").mode == "rsma"
        with pytest.raises(ValueError):
            MethodSpec.parse("nope+lba")

    def test_sweep_spec_validation(self):
        with pytest.raises(ValueError):
            tiny_spec(values=[])
        with pytest.raises(ValueError):
            tiny_spec(values=[1.0, 1.0])
        with pytest.raises(ValueError):
            tiny_spec(swept_parameter="bandwidth")
        with pytest.raises(ValueError):
            tiny_spec(trials=0)

    def test_sweep_spec_json(self, tmp_path):
        path = tmp_path / "sweep.json"
        path.write_text(json.dumps({
            "swept_parameter": "N_th",
            "values": [200, 600, 1000],
            "methods": ["heuristic+lba", {"grouping": "random", "solver": "cccp"}],
            "trials": 5,
            "master_seed": 3,
        }))
        spec = SweepSpec.from_json(path)
        assert spec.swept_parameter == "N_th"
        assert spec.methods[0].ident == "heuristic+lba+rsma"
        assert spec.methods[1].solver == "cccp"

    def test_apply_parameter(self):
        cfg = smoke_config()
        assert apply_swept_parameter(cfg, "P_max", 20.0).max_total_power_dbm == 20.0
        assert apply_swept_parameter(cfg, "K", 5).num_users == 5
        assert apply_swept_parameter(cfg, "M_t", 16).num_antennas == 16
        assert apply_swept_parameter(cfg, "sigma_e2", 0.1).estimation_error_var == 0.1
        assert apply_swept_parameter(cfg, "N_th", 500).total_blocklength == 500
        assert apply_swept_parameter(cfg, "J", 1).num_subcarriers == 1


class TestTrials:
    def test_determinism(self):
        cfg = smoke_config()
        method = MethodSpec("heuristic", "lba")
        a = run_trial(cfg, method, 0)
        b = run_trial(cfg, method, 0)
        assert a.sum_et_exact == b.sum_et_exact
        assert a.assignment == b.assignment

    def test_no_power_flags_infeasible(self):
        cfg = smoke_config(max_total_power_dbm=-90.0)
        rec = run_trial(cfg, MethodSpec("heuristic", "lba"), 0)
        assert not rec.feasible
        assert rec.sum_et_exact == 0.0

    def test_rsma_not_below_sdma(self):
        cfg = smoke_config()
        rs = run_trial(cfg, MethodSpec("heuristic", "cccp", "rsma"), 1)
        sd = run_trial(cfg, MethodSpec("heuristic", "cccp", "sdma"), 1)
        assert rs.sum_et_exact >= sd.sum_et_exact - 1e-6

    def test_fixed_positions_flag(self):
        cfg = smoke_config(resample_positions_each_trial=False)
        r0, _ = sample_trial_realization(cfg, 0)
        r1, _ = sample_trial_realization(cfg, 1)
        assert np.array_equal(r0.distances_m, r1.distances_m)
        assert not np.array_equal(r0.est_small_scale, r1.est_small_scale)
        cfg2 = smoke_config(resample_positions_each_trial=True)
        q0, _ = sample_trial_realization(cfg2, 0)
        q1, _ = sample_trial_realization(cfg2, 1)
        assert not np.array_equal(q0.distances_m, q1.distances_m)


class TestSweep:
    def test_aggregate_and_permutation_invariance(self):
        cfg = smoke_config()
        result = run_sweep(cfg, tiny_spec())
        rows = result.aggregate()
        assert len(rows) == 2
        assert all(r["n_trials"] == 3 for r in rows)
        shuffled = SweepResult(spec=result.spec, records=list(result.records))
        random.Random(0).shuffle(shuffled.records)
        rows2 = shuffled.aggregate()
        for r1, r2 in zip(rows, rows2):
            assert r1 == r2

    def test_infeasible_counts_as_zero(self):
        cfg = smoke_config(max_total_power_dbm=-90.0)
        spec = tiny_spec(values=[-90.0, -80.0], trials=2)
        result = run_sweep(cfg, spec)
        rows = result.aggregate()
        assert all(r["mean_et"] == 0.0 for r in rows)
        assert all(r["n_infeasible"] == 2 for r in rows)


class TestOutputs:
    def test_csv_round_trip_and_determinism(self, tmp_path):
        cfg = smoke_config()
        spec = tiny_spec()
        res = run_sweep(cfg, spec)
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        paths1 = emit_outputs(res, out1)
        res2 = run_sweep(cfg, spec)
        paths2 = emit_outputs(res2, out2)
        csv1 = paths1[0].read_bytes()
        csv2 = paths2[0].read_bytes()
        assert csv1 == csv2
        svg1 = paths1[1].read_bytes()
        svg2 = paths2[1].read_bytes()
        assert svg1 == svg2
        rows = read_sweep_csv(paths1[0])
        agg = res.aggregate()
        for file_row, mem_row in zip(rows, agg):
            assert file_row["mean_et"] == mem_row["mean_et"]
            assert file_row["stderr"] == mem_row["stderr"]

    def test_empty_methods_header_only(self, tmp_path):
        cfg = smoke_config()
        spec = dataclasses.replace(tiny_spec(), methods=[])
        res = run_sweep(cfg, spec)
        paths = emit_outputs(res, tmp_path)
        text = paths[0].read_text()
        assert text.splitlines() == [
            "swept_value,method,mean_et,stderr,n_infeasible,n_failures"
        ]

    def test_svg_is_wellformed_xml(self, tmp_path):
        import xml.etree.ElementTree as ET

        cfg = smoke_config()
        res = run_sweep(cfg, tiny_spec())
        paths = emit_outputs(res, tmp_path)
        ET.fromstring(paths[1].read_text())
