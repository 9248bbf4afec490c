import dataclasses
import json
import math
import struct

import numpy as np
import pytest

from languidpso import harness
from languidpso.benchfuncs import build_suite
from languidpso.harness import (
    TABLE1,
    ExperimentPlan,
    RecordFormatError,
    RunConfig,
    RunRecord,
    derive_seed,
    execute_plan,
    execute_run,
    execute_runs,
    expand_grid,
    fnv1a_64,
    load_plan,
    load_records,
    persist_records,
    preset_config,
    select_best,
    seed_bytes,
)


@pytest.fixture(scope="module")
def suite10():
    return build_suite(10)


# ---------------------------------------------------------------------------
# plans and grids
# ---------------------------------------------------------------------------


class TestGrid:
    # Table 3 axes: 10 swarm sizes x 11 w0 x 7 c x 2 versions, restricted to the axes each variant uses
    @pytest.mark.parametrize("variant,count", [("ldiw", 1540), ("tvac", 220), ("cpso", 1540), ("dms", 770),
                                               ("clpso", 770)])
    def test_product_of_applicable_axes(self, variant, count):
        assert len(expand_grid(ExperimentPlan.table3(variant, 10, languid=False))) == count

    def test_both_arms_double_and_pure_first(self):
        configs = expand_grid(ExperimentPlan.table3("tvac", 20))
        assert len(configs) == 440
        assert not any(c.languid for c in configs[:220]) and all(c.languid for c in configs[220:])
        assert [c.key for c in configs[:220]] == [c.key for c in configs[220:]]

    def test_unused_axes_are_none(self):
        tvac = expand_grid(ExperimentPlan.table3("tvac", 10, languid=False))
        assert {c.c for c in tvac} == {None}
        clpso = expand_grid(ExperimentPlan.table3("clpso", 10, languid=False))
        assert {c.version for c in clpso} == {None}

    def test_lexicographic_order(self):
        configs = expand_grid(ExperimentPlan.table3("ldiw", 50, languid=True))
        keys = [c.sort_key() for c in configs]
        assert keys == sorted(keys)

    def test_singleton(self):
        plan = ExperimentPlan("ldiw", languid=False, grid={"n": [30], "w0": [0.7], "c": [1.0], "version": ["gbest"]})
        assert expand_grid(plan) == [RunConfig("ldiw", False, 30, 0.7, 1.0, "gbest")]

    def test_invalid_axes(self):
        with pytest.raises(ValueError, match="empty"):
            expand_grid(ExperimentPlan("ldiw", grid={"n": []}))
        with pytest.raises(ValueError, match="duplicate"):
            expand_grid(ExperimentPlan("ldiw", grid={"n": [10, 10]}))
        with pytest.raises(ValueError, match="versions"):
            expand_grid(ExperimentPlan("ldiw", grid={"version": ["ring"]}))
        with pytest.raises(ValueError, match="axes"):
            ExperimentPlan("ldiw", grid={"K": [3]})

    def test_plan_validation(self):
        for bad in (dict(variant="pso"), dict(variant="ldiw", languid="maybe"), dict(variant="ldiw", D=1),
                    dict(variant="ldiw", runs_per_config=0), dict(variant="ldiw", preset="table9"),
                    dict(variant="ldiw", preset="table1", D=30), dict(variant="ldiw", eval_max=0)):
            with pytest.raises(ValueError):
                ExperimentPlan(**bad)
        with pytest.raises(ValueError, match="unknown plan fields"):
            ExperimentPlan.from_dict({"variant": "ldiw", "budget": 5})

    def test_budget_rule(self):
        assert ExperimentPlan("ldiw", D=20).budget == 200_000
        assert ExperimentPlan("ldiw", D=20, eval_max=500).budget == 500

    def test_plan_round_trip(self, tmp_path):
        plan = ExperimentPlan.table3("clpso", 10, master_seed=9, functions=["F1", "F4"])
        path = tmp_path / "plan.json"
        path.write_text(json.dumps(plan.to_dict()))
        assert load_plan(path) == plan


class TestPreset:
    def test_table1_rows(self):
        assert set(TABLE1) == {10, 20, 50}
        for D, rows in TABLE1.items():
            assert sorted(rows, key=lambda s: int(s[1:])) == [f"F{i}" for i in range(1, 31)]
        assert TABLE1[10]["F1"] == (30, 0.65, 1.00, "gbest")

    def test_preset_config_drops_unused(self):
        plan = ExperimentPlan("clpso", D=10, preset="table1")
        cfg = preset_config(plan, "F1", True)
        assert cfg == RunConfig("clpso", True, 30, 0.65, 1.0, None)
        cfg = preset_config(ExperimentPlan("tvac", D=10, preset="table1"), "F1", False)
        assert cfg.c is None and cfg.version == "gbest"


# ---------------------------------------------------------------------------
# seeds
# ---------------------------------------------------------------------------


class TestSeeds:
    def test_fnv_reference_vectors(self):
        assert fnv1a_64(b"") == 0xCBF29CE484222325
        assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
        assert fnv1a_64(b"foobar") == 0x85944171F73967E8

    def test_worked_example(self):
        data = seed_bytes(0, "F1", 0, 0)
        assert data == b"F1" + struct.pack("<QQQ", 0, 0, 0)
        assert derive_seed(0, "F1", 0, 0) == 0x505B50E1F10D4998 == 5790310677256948120

    def test_stable_and_distinct(self):
        assert derive_seed(7, "F3", 2, 5) == derive_seed(7, "F3", 2, 5)
        seeds = {derive_seed(0, f"F{f}", c, r) for f in range(1, 31) for c in range(20) for r in range(100)}
        assert len(seeds) == 30 * 20 * 100


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------


def _record(**kw):
    base = dict(function="F1", variant="ldiw", languid=False, n=30, w0=0.7, c=1.0, version="gbest",
                config_index=0, run=0, seed=123, best=100.1, error=0.1, evals=100, wall_ms=1.5)
    base.update(kw)
    return RunRecord(**base)


class TestRecords:
    def test_round_trip(self, tmp_path):
        records = [_record(best=100.0 + 1 / 3, error=1 / 3), _record(run=1, c=None, version=None, seed=2**64 - 1),
                   _record(run=2, best=None, error=None, valid=False, message="ZeroDivisionError: x", wall_ms=None)]
        path = tmp_path / "r.jsonl"
        persist_records(path, records)
        assert load_records(path) == records
        assert all(json.loads(line) for line in path.read_text().splitlines())

    def test_lossless_floats(self, tmp_path):
        values = np.random.default_rng(0).random(50) * 10.0 ** np.arange(-25, 25)
        records = [_record(run=i, best=float(v), error=float(v)) for i, v in enumerate(values)]
        path = tmp_path / "r.jsonl"
        persist_records(path, records)
        assert [r.best for r in load_records(path)] == [float(v) for v in values]

    def test_rejects_nan(self, tmp_path):
        with pytest.raises(ValueError, match="best"):
            persist_records(tmp_path / "r.jsonl", [_record(best=math.nan)])

    def test_append(self, tmp_path):
        path = tmp_path / "r.jsonl"
        persist_records(path, [_record()])
        persist_records(path, [_record(run=1)], append=True)
        assert [r.run for r in load_records(path)] == [0, 1]

    def test_without_timing(self, tmp_path):
        path = tmp_path / "r.jsonl"
        persist_records(path, [_record()], timing=False)
        assert load_records(path)[0].wall_ms is None

    def test_malformed_line_reports_position(self, tmp_path):
        path = tmp_path / "r.jsonl"
        persist_records(path, [_record()])
        with open(path, "a") as fh:
            fh.write("{not json\n")
        with pytest.raises(RecordFormatError, match=r"r.jsonl:2"):
            load_records(path)
        path.write_text(json.dumps({"function": "F1"}) + "\n")
        with pytest.raises(RecordFormatError, match=r":1"):
            load_records(path)


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------


class TestExecution:
    def test_table1_f1_run(self, suite10):
        cfg = RunConfig("ldiw", False, 30, 0.65, 1.0, "gbest")
        rec = execute_run(cfg, suite10[0], derive_seed(0, "F1", 0, 0))
        assert rec.valid and rec.error >= 0 and 10**5 - 30 < rec.evals <= 10**5
        assert rec.error == pytest.approx(rec.best - 100.0, abs=1e-9)

    def test_replay(self, suite10):
        cfg = RunConfig("cpso", True, 20, 0.7, 1.2, "lbest")
        a = execute_run(cfg, suite10[5], 42, eval_max=3000)
        b = execute_run(cfg, suite10[5], 42, eval_max=3000)
        assert a.without_timing() == b.without_timing()

    def test_batch_matches_single(self, suite10):
        cfg = RunConfig("clpso", False, 15, 0.6, 1.5, None)
        seeds = [derive_seed(1, "F7", 0, r) for r in range(4)]
        batch = execute_runs(cfg, suite10[6], seeds, eval_max=2000)
        for r, s in enumerate(seeds):
            solo = execute_run(cfg, suite10[6], s, eval_max=2000, run=r)
            assert batch[r].without_timing() == solo.without_timing()

    def test_failing_objective_is_poisoned(self, suite10):
        def boom(X):
            raise FloatingPointError("overflow")

        fn = dataclasses.replace(suite10[0], evaluate_batch=boom)
        recs = execute_runs(RunConfig("ldiw", False, 10, 0.7, 1.0, "gbest"), fn, [1, 2], eval_max=100)
        assert [r.valid for r in recs] == [False, False]
        assert recs[0].message == "FloatingPointError: overflow" and recs[0].best is None

    def test_batch_failure_retries_runs_alone(self, suite10):
        good = suite10[2]

        def picky(X):
            if len(X) > 10:
                raise RuntimeError("batch too large")
            return good.evaluate_batch(X)

        fn = dataclasses.replace(good, evaluate_batch=picky)
        cfg = RunConfig("ldiw", False, 10, 0.7, 1.0, "gbest")
        retried = execute_runs(cfg, fn, [1, 2, 3], eval_max=500)
        direct = execute_runs(cfg, good, [1, 2, 3], eval_max=500)
        assert [r.without_timing() for r in retried] == [r.without_timing() for r in direct]

    def test_plan_is_independent_of_workers(self):
        plan = ExperimentPlan("dms", languid="both", D=10, functions=["F9", "F2"],
                              grid={"n": [10, 20]}, runs_per_config=3, master_seed=5, eval_max=600)
        one = execute_plan(plan, 1)
        three = execute_plan(plan, 3)
        assert [r.without_timing() for r in one] == [r.without_timing() for r in three]
        assert len(one) == 2 * 4 * 3
        keys = [(int(r.function[1:]), r.config_index, r.run) for r in one]
        assert keys == sorted(keys)

    def test_runs_per_config_and_seeds(self):
        plan = ExperimentPlan("tvac", languid=True, D=10, functions=["F4"], runs_per_config=7, eval_max=100)
        recs = execute_plan(plan)
        assert len(recs) == 7
        assert [r.seed for r in recs] == [derive_seed(0, "F4", 0, r) for r in range(7)]

    def test_arms_get_disjoint_seeds(self):
        plan = ExperimentPlan("clpso", D=10, functions=["F4"], preset="table1", runs_per_config=3, eval_max=300)
        recs = execute_plan(plan)
        pure = {r.seed for r in recs if not r.languid}
        lang = {r.seed for r in recs if r.languid}
        assert len(pure) == len(lang) == 3 and not pure & lang

    def test_empty_filter(self):
        assert execute_plan(ExperimentPlan("ldiw", functions=[]), 2) == []

    def test_unknown_function(self):
        with pytest.raises(ValueError, match="F31"):
            execute_plan(ExperimentPlan("ldiw", functions=["F31"]))

    def test_bad_workers(self):
        with pytest.raises(ValueError):
            execute_plan(ExperimentPlan("ldiw", functions=[]), 0)


# ---------------------------------------------------------------------------
# selection
# ---------------------------------------------------------------------------


class TestSelectBest:
    def _records(self, means_by_n, languid=False, function="F1"):
        out = []
        for ci, (n, errors) in enumerate(means_by_n.items()):
            for r, e in enumerate(errors):
                out.append(_record(function=function, languid=languid, n=n, config_index=ci, run=r,
                                   best=100 + e, error=e))
        return out

    def test_single_config(self):
        best = select_best(self._records({30: [1.0, 2.0]}))
        assert best[("F1", False)].config.n == 30
        assert best[("F1", False)].summary.mean == 1.5

    def test_lower_mean_wins(self):
        best = select_best(self._records({30: [1.0, 1.0], 40: [2.0, 2.0]}))
        assert best[("F1", False)].config.n == 30
        best = select_best(self._records({30: [3.0, 3.0], 40: [2.0, 2.0]}))
        assert best[("F1", False)].config.n == 40

    def test_tie_goes_to_smallest_config(self):
        best = select_best(self._records({40: [1.0, 3.0], 30: [2.0, 2.0]}))
        assert best[("F1", False)].config.n == 30

    def test_groups_and_invalid_skipped(self):
        recs = self._records({30: [1.0]}) + self._records({30: [0.5]}, languid=True)
        recs.append(_record(n=50, config_index=7, best=None, error=None, valid=False))
        best = select_best(recs)
        assert set(best) == {("F1", False), ("F1", True)}
        assert best[("F1", True)].summary.mean == 0.5

    def test_function_order(self):
        recs = [_record(function=f) for f in ("F10", "F2", "F1")]
        assert harness.function_order(recs) == ["F1", "F2", "F10"]
