"""Experiment plans, grid expansion, seeded execution and record persistence.

A plan names a variant, the arms (pure, languid or both), the dimension,
the suite and a parameter grid (or the embedded Table 1 preset). Every run
is identified by ``(function id, config index, run index)`` and seeded by
:func:`derive_seed`, so results depend only on the plan and the master
seed, never on worker count or scheduling.

Runs of one (function, config) pair are simulated together as one batch;
each run keeps its own random stream, so a record is identical to what a
solo run with the same seed produces.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import re
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np

from .benchfuncs import BenchmarkFunction, build_suite, load_official_data
from .stats import SampleSummary
from .variants import VARIANTS, VariantSpec, optimize_many

__all__ = [
    "ExperimentPlan",
    "RecordFormatError",
    "RunConfig",
    "RunRecord",
    "TABLE1",
    "TABLE3_N",
    "TABLE3_W0",
    "TABLE3_C",
    "derive_seed",
    "execute_plan",
    "execute_run",
    "expand_grid",
    "load_plan",
    "load_records",
    "persist_records",
    "plan_units",
    "select_best",
]

# ---------------------------------------------------------------------------
# preset data
# ---------------------------------------------------------------------------

TABLE3_N = {
    10: (10, 15, 20, 25, 30, 40, 50, 60, 80, 100),
    20: (20, 25, 30, 40, 50, 60, 80, 100, 120, 140),
    50: (30, 40, 50, 60, 80, 100, 120, 140, 170, 200),
}
TABLE3_W0 = tuple(round(0.50 + 0.05 * i, 2) for i in range(11))
TABLE3_C = (0.50, 0.75, 1.00, 1.25, 1.50, 1.75, 2.00)
VERSIONS = ("gbest", "lbest")

# best standard-PSO parameters per function: (n, w0, c, version)
TABLE1 = {
    10: {
        "F1": (30, 0.65, 1.00, "gbest"), "F2": (100, 0.75, 0.50, "lbest"), "F3": (80, 0.60, 1.00, "gbest"),
        "F4": (10, 0.70, 1.25, "gbest"), "F5": (25, 0.50, 1.00, "lbest"), "F6": (60, 0.60, 1.00, "lbest"),
        "F7": (80, 0.55, 0.75, "lbest"), "F8": (40, 0.55, 1.25, "lbest"), "F9": (40, 0.60, 1.00, "lbest"),
        "F10": (20, 0.55, 1.50, "lbest"), "F11": (30, 0.65, 0.75, "lbest"), "F12": (25, 0.60, 1.50, "gbest"),
        "F13": (100, 0.50, 1.00, "lbest"), "F14": (100, 0.50, 1.50, "lbest"), "F15": (100, 0.60, 1.25, "gbest"),
        "F16": (25, 0.85, 0.50, "lbest"), "F17": (30, 0.80, 0.50, "gbest"), "F18": (100, 0.50, 1.25, "lbest"),
        "F19": (60, 0.55, 1.00, "lbest"), "F20": (100, 0.55, 1.25, "lbest"), "F21": (30, 0.70, 1.25, "lbest"),
        "F22": (30, 0.55, 1.50, "lbest"), "F23": (40, 0.50, 1.00, "gbest"), "F24": (60, 0.70, 0.75, "lbest"),
        "F25": (25, 0.90, 0.50, "lbest"), "F26": (80, 0.55, 0.75, "lbest"), "F27": (100, 0.85, 1.25, "lbest"),
        "F28": (100, 0.85, 0.75, "lbest"), "F29": (100, 0.55, 0.50, "lbest"), "F30": (40, 0.50, 1.75, "lbest"),
    },
    20: {
        "F1": (40, 0.80, 0.75, "gbest"), "F2": (20, 0.50, 1.25, "lbest"), "F3": (60, 0.65, 1.00, "gbest"),
        "F4": (30, 0.85, 0.75, "gbest"), "F5": (30, 0.55, 1.00, "gbest"), "F6": (120, 0.65, 1.00, "lbest"),
        "F7": (120, 0.65, 1.00, "lbest"), "F8": (60, 0.55, 1.25, "lbest"), "F9": (60, 0.70, 0.75, "lbest"),
        "F10": (120, 0.55, 1.75, "gbest"), "F11": (120, 0.60, 1.75, "gbest"), "F12": (80, 0.50, 1.75, "gbest"),
        "F13": (120, 0.55, 1.00, "lbest"), "F14": (140, 0.60, 1.00, "lbest"), "F15": (100, 0.65, 1.50, "gbest"),
        "F16": (25, 0.65, 1.75, "gbest"), "F17": (50, 0.85, 0.50, "gbest"), "F18": (40, 0.70, 0.75, "lbest"),
        "F19": (100, 0.75, 0.75, "lbest"), "F20": (60, 0.65, 1.00, "lbest"), "F21": (120, 0.65, 1.00, "lbest"),
        "F22": (60, 0.60, 1.00, "lbest"), "F23": (40, 0.50, 1.25, "lbest"), "F24": (140, 0.60, 1.00, "lbest"),
        "F25": (140, 0.70, 0.50, "lbest"), "F26": (140, 0.50, 1.00, "lbest"), "F27": (140, 0.65, 1.00, "lbest"),
        "F28": (120, 0.65, 1.25, "lbest"), "F29": (120, 0.50, 1.25, "lbest"), "F30": (30, 0.75, 0.75, "lbest"),
    },
    50: {
        "F1": (30, 0.70, 1.00, "lbest"), "F2": (100, 0.80, 0.75, "lbest"), "F3": (30, 0.65, 0.75, "lbest"),
        "F4": (120, 0.55, 1.25, "gbest"), "F5": (60, 0.50, 1.25, "gbest"), "F6": (170, 0.55, 1.25, "lbest"),
        "F7": (80, 0.60, 1.25, "lbest"), "F8": (120, 0.50, 1.25, "lbest"), "F9": (60, 0.50, 1.25, "lbest"),
        "F10": (200, 0.60, 1.75, "gbest"), "F11": (200, 0.75, 1.25, "gbest"), "F12": (60, 0.50, 1.75, "gbest"),
        "F13": (200, 0.50, 1.25, "lbest"), "F14": (200, 0.55, 1.25, "lbest"), "F15": (200, 0.60, 1.50, "gbest"),
        "F16": (200, 0.85, 0.50, "gbest"), "F17": (40, 0.80, 0.50, "lbest"), "F18": (200, 0.75, 0.75, "lbest"),
        "F19": (60, 0.70, 1.25, "gbest"), "F20": (30, 0.80, 0.75, "lbest"), "F21": (30, 0.80, 0.50, "lbest"),
        "F22": (80, 0.70, 0.75, "lbest"), "F23": (100, 0.50, 1.00, "lbest"), "F24": (200, 0.85, 0.50, "lbest"),
        "F25": (170, 0.80, 0.50, "lbest"), "F26": (200, 0.75, 1.25, "lbest"), "F27": (200, 0.55, 1.25, "lbest"),
        "F28": (140, 0.50, 1.50, "lbest"), "F29": (120, 0.50, 0.75, "lbest"), "F30": (100, 0.80, 0.75, "lbest"),
    },
}

# which grid axes each variant actually uses
_AXES = {
    "ldiw": ("n", "w0", "c", "version"),
    "tvac": ("n", "w0", "version"),
    "cpso": ("n", "w0", "c", "version"),
    "dms": ("n", "w0", "c"),
    "clpso": ("n", "w0", "c"),
}


# ---------------------------------------------------------------------------
# plans and configs
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class RunConfig:
    """One parameter setting of one arm; unused axes are ``None``."""

    variant: str
    languid: bool
    n: int
    w0: float
    c: float | None = None
    version: str | None = None

    @property
    def key(self) -> tuple:
        return (self.n, self.w0, self.c, self.version)

    def sort_key(self) -> tuple:
        return (self.n, self.w0, -math.inf if self.c is None else self.c, self.version or "")

    def spec(self) -> VariantSpec:
        return VariantSpec(
            self.variant,
            self.languid,
            n=self.n,
            w0=self.w0,
            c=1.0 if self.c is None else self.c,
            version=self.version or "gbest",
        )


@dataclass
class ExperimentPlan:
    """What to run.

    ``languid`` is ``True``, ``False`` or ``"both"``. ``functions`` lists
    suite ids (``None`` = all 30). ``grid`` maps ``n``, ``w0``, ``c`` and
    ``version`` to value lists; axes a variant does not use are ignored.
    ``preset="table1"`` replaces the grid with the per-function Table 1
    parameters. ``eval_max`` overrides the ``10**4 * D`` budget (shorter budgets are
    for smoke tests). ``official_data`` points to CEC shift/rotation files.
    """

    variant: str
    languid: bool | str = "both"
    D: int = 10
    suite_seed: int = 0
    functions: list[str] | None = None
    grid: dict = field(default_factory=dict)
    runs_per_config: int = 100
    master_seed: int = 0
    eval_max: int | None = None
    preset: str | None = None
    official_data: str | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.languid not in (True, False, "both"):
            raise ValueError("languid must be true, false or \"both\"")
        if self.D < 2:
            raise ValueError("D must be >= 2")
        if self.runs_per_config < 1:
            raise ValueError("runs_per_config must be >= 1")
        if self.preset not in (None, "table1"):
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.preset == "table1" and self.D not in TABLE1:
            raise ValueError(f"Table 1 preset exists only for D in {sorted(TABLE1)}")
        if self.eval_max is not None and self.eval_max < 1:
            raise ValueError("eval_max must be positive")
        unknown = set(self.grid) - {"n", "w0", "c", "version"}
        if unknown:
            raise ValueError(f"unknown grid axes {sorted(unknown)}")

    @property
    def budget(self) -> int:
        return self.eval_max if self.eval_max is not None else 10_000 * self.D

    @property
    def arms(self) -> tuple[bool, ...]:
        return (False, True) if self.languid == "both" else (bool(self.languid),)

    @classmethod
    def table3(cls, variant: str, D: int, **kwargs) -> "ExperimentPlan":
        """Plan over the full detailed-testing grid for ``D``."""
        grid = {"n": list(TABLE3_N[D]), "w0": list(TABLE3_W0), "c": list(TABLE3_C), "version": list(VERSIONS)}
        return cls(variant, D=D, grid=grid, **kwargs)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentPlan":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown plan fields {sorted(unknown)}")
        return cls(**data)


def load_plan(path) -> ExperimentPlan:
    with open(path, encoding="utf-8") as fh:
        return ExperimentPlan.from_dict(json.load(fh))


def _axis(plan: ExperimentPlan, name: str) -> list:
    values = plan.grid.get(name)
    if values is None:
        defaults = {"n": [30], "w0": [0.7], "c": [1.0], "version": ["gbest"]}
        values = defaults[name]
    values = list(values)
    if not values:
        raise ValueError(f"grid axis {name!r} is empty")
    if len(set(values)) != len(values):
        raise ValueError(f"grid axis {name!r} has duplicate values")
    if name == "version":
        bad = set(values) - set(VERSIONS)
        if bad:
            raise ValueError(f"unknown versions {sorted(bad)}")
        return sorted(values)
    if name == "n":
        return sorted(int(v) for v in values)
    return sorted(float(v) for v in values)


def expand_grid(plan: ExperimentPlan) -> list[RunConfig]:
    """Cartesian product of the variant's axes, for every arm.

    Arms vary slowest (pure first), then ``n``, ``w0``, ``c``, ``version``,
    each axis in ascending order. The position in this list is the config
    index used for seeding.
    """
    axes = _AXES[plan.variant]
    values = [_axis(plan, a) if a in axes else [None] for a in ("n", "w0", "c", "version")]
    configs = []
    for arm in plan.arms:
        for n, w0, c, version in itertools.product(*values):
            configs.append(RunConfig(plan.variant, arm, n, w0, c, version))
    return configs


def preset_config(plan: ExperimentPlan, function_id: str, languid: bool) -> RunConfig:
    n, w0, c, version = TABLE1[plan.D][function_id]
    axes = _AXES[plan.variant]
    return RunConfig(
        plan.variant, languid, n, w0,
        c if "c" in axes else None,
        version if "version" in axes else None,
    )


# ---------------------------------------------------------------------------
# seeds
# ---------------------------------------------------------------------------

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def seed_bytes(master: int, function_id: str, config_index: int, run_index: int) -> bytes:
    """UTF-8 function id followed by master, config and run as little-endian u64."""
    return function_id.encode("utf-8") + struct.pack(
        "<QQQ", master & _MASK64, config_index & _MASK64, run_index & _MASK64
    )


def derive_seed(master: int, function_id: str, config_index: int, run_index: int) -> int:
    """64-bit FNV-1a digest identifying one run."""
    return fnv1a_64(seed_bytes(master, function_id, config_index, run_index))


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunRecord:
    """One finished run. ``best``/``error`` are ``None`` for invalid runs."""

    function: str
    variant: str
    languid: bool
    n: int
    w0: float
    c: float | None
    version: str | None
    config_index: int
    run: int
    seed: int
    best: float | None
    error: float | None
    evals: int
    wall_ms: float | None = None
    valid: bool = True
    message: str = ""

    @property
    def config(self) -> RunConfig:
        return RunConfig(self.variant, self.languid, self.n, self.w0, self.c, self.version)

    def without_timing(self) -> "RunRecord":
        return replace(self, wall_ms=None)


_RECORD_FIELDS = [f.name for f in fields(RunRecord)]
_FLOAT_FIELDS = {"w0", "c", "best", "error", "wall_ms"}
_INT_FIELDS = {"n", "config_index", "run", "seed", "evals"}


class RecordFormatError(ValueError):
    pass


def _encode(name: str, value) -> str:
    if value is None:
        return "null"
    if name in _FLOAT_FIELDS:
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"cannot persist non-finite {name}={value!r}")
        text = format(value, ".17g")
        return text if any(ch in text for ch in ".en") else text + ".0"
    return json.dumps(value)


def record_line(record: RunRecord, timing: bool = True) -> str:
    """One JSON object with a fixed key order and 17 significant digits per float."""
    parts = []
    for name in _RECORD_FIELDS:
        if name == "wall_ms" and not timing:
            continue
        parts.append(f"{json.dumps(name)}: {_encode(name, getattr(record, name))}")
    return "{" + ", ".join(parts) + "}"


def persist_records(path, records: Iterable[RunRecord], timing: bool = True, append: bool = False) -> None:
    lines = [record_line(r, timing) for r in records]
    with open(path, "a" if append else "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")


def parse_record(line: str) -> RunRecord:
    data = json.loads(line)
    if not isinstance(data, dict):
        raise ValueError("record is not a JSON object")
    missing = set(_RECORD_FIELDS) - set(data) - {"wall_ms", "message", "valid"}
    if missing:
        raise ValueError(f"missing fields {sorted(missing)}")
    unknown = set(data) - set(_RECORD_FIELDS)
    if unknown:
        raise ValueError(f"unknown fields {sorted(unknown)}")
    values = {}
    for name in _RECORD_FIELDS:
        v = data.get(name)
        if v is not None:
            if name in _FLOAT_FIELDS:
                v = float(v)
            elif name in _INT_FIELDS:
                if isinstance(v, bool) or not isinstance(v, int):
                    raise ValueError(f"{name} must be an integer")
        values[name] = v
    values["valid"] = True if values["valid"] is None else bool(values["valid"])
    values["message"] = values["message"] or ""
    return RunRecord(**values)


def load_records(path) -> list[RunRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(parse_record(line))
            except (ValueError, TypeError) as exc:
                raise RecordFormatError(f"{path}:{lineno}: {exc}") from None
    return out


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------


def _error(best: float, f_star: float) -> float:
    err = best - f_star
    if err < -1e-9:
        raise ValueError(f"final best {best!r} below the known optimum {f_star!r}")
    return max(err, 0.0)


def _records_for(fn, config, config_index, runs, seeds, results, wall_ms):
    out = []
    for run, seed, res in zip(runs, seeds, results):
        try:
            err = _error(res.best_f, fn.f_star)
            out.append(RunRecord(fn.id, config.variant, config.languid, config.n, config.w0, config.c,
                                 config.version, config_index, run, seed, res.best_f, err,
                                 res.evaluations, wall_ms))
        except ValueError as exc:
            out.append(_invalid(fn, config, config_index, run, seed, str(exc)))
    return out


def _invalid(fn, config, config_index, run, seed, message):
    return RunRecord(fn.id, config.variant, config.languid, config.n, config.w0, config.c, config.version,
                     config_index, run, seed, None, None, 0, None, False, message)


def execute_runs(config: RunConfig, fn: BenchmarkFunction, seeds: Sequence[int], eval_max: int | None = None,
                 runs: Sequence[int] | None = None, config_index: int = 0) -> list[RunRecord]:
    """Independent runs of one config on one function, simulated as a batch.

    If the objective fails, each run is retried alone so that only the
    failing runs become invalid records. ``wall_ms`` is the batch time
    divided by the number of runs.
    """
    eval_max = eval_max if eval_max is not None else 10_000 * fn.D
    runs = list(range(len(seeds))) if runs is None else list(runs)
    spec = config.spec()
    start = time.perf_counter()
    try:
        results = optimize_many(spec, fn.evaluate, fn.D, eval_max, [np.random.default_rng(s) for s in seeds],
                                fn.lower, fn.upper)
    except Exception:
        if len(seeds) == 1:
            return [_invalid(fn, config, config_index, runs[0], seeds[0], _failure_message())]
        out = []
        for run, seed in zip(runs, seeds):
            out.extend(execute_runs(config, fn, [seed], eval_max, [run], config_index))
        return out
    wall_ms = (time.perf_counter() - start) * 1000.0 / len(seeds)
    return _records_for(fn, config, config_index, runs, seeds, results, wall_ms)


def _failure_message() -> str:
    import sys

    exc = sys.exc_info()[1]
    return f"{type(exc).__name__}: {exc}"


def execute_run(config: RunConfig, fn: BenchmarkFunction, seed: int, eval_max: int | None = None,
                run: int = 0, config_index: int = 0) -> RunRecord:
    """One run of ``config`` on ``fn`` with the given seed."""
    return execute_runs(config, fn, [seed], eval_max, [run], config_index)[0]


@dataclass(frozen=True)
class WorkUnit:
    """All runs of one (function, config) pair; plain values only."""

    D: int
    suite_seed: int
    official_data: str | None
    function_index: int
    config: RunConfig
    config_index: int
    runs: tuple[int, ...]
    seeds: tuple[int, ...]
    eval_max: int


_SUITE_CACHE: dict = {}


def _suite(D: int, seed: int, official_data: str | None):
    key = (D, seed, official_data)
    if key not in _SUITE_CACHE:
        official = load_official_data(official_data, D) if official_data else None
        _SUITE_CACHE[key] = build_suite(D, seed, official)
    return _SUITE_CACHE[key]


def run_unit(unit: WorkUnit) -> list[RunRecord]:
    fn = _suite(unit.D, unit.suite_seed, unit.official_data)[unit.function_index]
    return execute_runs(unit.config, fn, unit.seeds, unit.eval_max, unit.runs, unit.config_index)


def plan_units(plan: ExperimentPlan) -> list[WorkUnit]:
    """Work units in output order: function, then config index."""
    suite = _suite(plan.D, plan.suite_seed, plan.official_data)
    ids = [fn.id for fn in suite]
    wanted = ids if plan.functions is None else list(plan.functions)
    unknown = [f for f in wanted if f not in ids]
    if unknown:
        raise ValueError(f"unknown function ids {unknown}")
    grid = None if plan.preset else expand_grid(plan)
    runs = tuple(range(plan.runs_per_config))
    units = []
    for fid in sorted(set(wanted), key=ids.index):
        if grid is None:
            configs = [preset_config(plan, fid, arm) for arm in plan.arms]
        else:
            configs = grid
        for ci, config in enumerate(configs):
            seeds = tuple(derive_seed(plan.master_seed, fid, ci, r) for r in runs)
            units.append(WorkUnit(plan.D, plan.suite_seed, plan.official_data, ids.index(fid), config, ci,
                                  runs, seeds, plan.budget))
    return units


def execute_plan(plan: ExperimentPlan, workers: int = 1) -> list[RunRecord]:
    """Every run of the plan, sorted by (function, config index, run index).

    Failed runs come back as records with ``valid=False``; they never stop
    the rest of the plan. The output does not depend on ``workers``.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    units = plan_units(plan)
    if workers == 1 or len(units) <= 1:
        chunks = [run_unit(u) for u in units]
    else:
        # longest units first keeps the pool busy; order is restored below
        order = sorted(range(len(units)), key=lambda i: -_cost(units[i]))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(run_unit, [units[i] for i in order]))
        chunks = [None] * len(units)
        for i, recs in zip(order, done):
            chunks[i] = recs
    records = [r for chunk in chunks for r in chunk]
    index = {fn.id: i for i, fn in enumerate(_suite(plan.D, plan.suite_seed, plan.official_data))}
    records.sort(key=lambda r: (index[r.function], r.config_index, r.run))
    return records


def _cost(unit: WorkUnit) -> int:
    return unit.eval_max * len(unit.runs)


# ---------------------------------------------------------------------------
# selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BestConfig:
    config: RunConfig
    config_index: int
    summary: SampleSummary


def group_errors(records: Iterable[RunRecord]) -> dict:
    """``{(function, languid): {config: [errors...]}}`` over valid records."""
    groups: dict = {}
    for r in records:
        if not r.valid:
            continue
        groups.setdefault((r.function, r.languid), {}).setdefault((r.config, r.config_index), []).append(r.error)
    return groups


def select_best(records: Iterable[RunRecord]) -> dict:
    """Best config per ``(function, languid)`` group by mean error.

    Exact ties go to the lexicographically smallest ``(n, w0, c, version)``.
    Returns ``{(function, languid): BestConfig}``.
    """
    best = {}
    for group, configs in group_errors(records).items():
        candidates = []
        for (config, ci), errors in configs.items():
            summary = SampleSummary.from_errors(errors)
            candidates.append((summary.mean, config.sort_key(), ci, config, summary))
        mean, _, ci, config, summary = min(candidates, key=lambda c: (c[0], c[1], c[2]))
        best[group] = BestConfig(config, ci, summary)
    return best


def function_order(records: Iterable[RunRecord]) -> list[str]:
    """Function ids in natural order (F2 before F10)."""
    return sorted({r.function for r in records}, key=natural_key)


def natural_key(text: str) -> tuple:
    return tuple(int(part) if part.isdigit() else part for part in re.split(r"(\d+)", text))
