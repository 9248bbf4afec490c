"""The five PSO variants as hook bundles over :mod:`languidpso.swarm`.

Every variant uses the linearly decreasing inertia schedule and can be
combined with either inertia policy (standard or languid).

=======  =====================================================
id       variant
=======  =====================================================
ldiw     linearly decreasing inertia weight
tvac     time-varying acceleration coefficients
cpso     chaotic local search on the best + regeneration
dms      dynamic multiswarm, regrouped when the best stalls
clpso    comprehensive learning with size-2 tournaments
=======  =====================================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .swarm import (
    StepHooks,
    Swarm,
    SwarmConfig,
    Topology,
    inertial_velocity,
    init_swarm,
    policy_for,
    step,
)

VARIANTS = ("ldiw", "tvac", "cpso", "dms", "clpso")

CLS_FORBIDDEN = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class LdiwSchedule:
    w_min: float
    w_max: float
    t_max: int

    def __post_init__(self):
        if self.w_min > self.w_max:
            raise ValueError("w_min must not exceed w_max")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")


@dataclass(frozen=True)
class TvacSchedule:
    c1_i: float = 2.5
    c1_f: float = 0.5
    c2_i: float = 0.5
    c2_f: float = 2.5


@dataclass(frozen=True)
class ClsParams:
    mu: float = 4.0
    iters: int = 10
    elite_fraction: float = 0.2


@dataclass(frozen=True)
class VariantSpec:
    """Variant id, languid toggle and method parameters.

    ``w0`` sets the top of the inertia schedule (``w_max = w0 + 0.2``).
    ``c`` is used as ``c1 = c2 = c`` (ignored by TVAC). ``version`` picks
    gbest/lbest where the variant has one (ignored by DMS and CL-PSO).
    """

    variant: str
    languid: bool = False
    n: int = 30
    w0: float = 0.7
    c: float = 1.0
    version: str = "gbest"
    K: int = 3
    w_min: float = 0.4
    w_max_offset: float = 0.2
    tvac: TvacSchedule = field(default_factory=TvacSchedule)
    cls: ClsParams = field(default_factory=ClsParams)
    refresh_gap: int = 7

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.version not in ("gbest", "lbest"):
            raise ValueError(f"unknown version {self.version!r}")


def ldiw_weight(t: int, sched: LdiwSchedule) -> float:
    """``w_max`` at ``t = 0`` falling linearly to ``w_min`` at ``t_max``."""
    t = min(t, sched.t_max)
    return sched.w_max - (sched.w_max - sched.w_min) * t / sched.t_max


def tvac_coefficients(t: int, sched: TvacSchedule, t_max: int) -> tuple[float, float]:
    t = min(t, t_max)
    frac = t / t_max
    return (
        sched.c1_i + (sched.c1_f - sched.c1_i) * frac,
        sched.c2_i + (sched.c2_f - sched.c2_i) * frac,
    )


def cls_encode(x, lo, hi):
    return (x - lo) / (hi - lo)


def cls_decode(xi, lo, hi):
    return lo + xi * (hi - lo)


def logistic_step(xi, mu: float = 4.0):
    return mu * xi * (1.0 - xi)


def _nudge(xi: np.ndarray) -> np.ndarray:
    """Move starts off the logistic map's non-chaotic points."""
    xi = np.array(xi, dtype=float)
    hit = np.zeros(xi.shape, dtype=bool)
    for bad in CLS_FORBIDDEN:
        hit |= np.abs(xi - bad) < 1e-12
    xi[hit] += 1e-7
    xi[xi >= 1.0] -= 1.0
    return xi


def chaotic_local_search(g, f_g: float, lower, upper, f, cls: ClsParams = ClsParams(), budget: int | None = None):
    """Logistic-map probing around ``g``.

    Returns ``(position, fitness, evaluations)``. Stops at the first
    candidate that strictly beats ``f_g``; never uses more than ``budget``
    evaluations.
    """
    g = np.asarray(g, dtype=float)
    limit = cls.iters if budget is None else min(cls.iters, budget)
    xi = _nudge(cls_encode(g, lower, upper))
    used = 0
    for _ in range(limit):
        xi = logistic_step(xi, cls.mu)
        candidate = cls_decode(xi, lower, upper)
        value = float(np.asarray(f(candidate[None, :]), dtype=float).reshape(-1)[0])
        used += 1
        if value < f_g:
            return candidate, value, used
    return g, f_g, used


def dms_subswarm_size(n: int) -> int:
    return max(5, n // 10)


def dms_partition(n: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffle ``0..n-1`` and cut into groups of ``max(5, n // 10)``.

    A short trailing group is merged into the previous one.
    """
    if n < 5:
        raise ValueError("multiswarm partition needs n >= 5")
    s = dms_subswarm_size(n)
    perm = rng.permutation(n)
    count = n // s
    groups = [perm[i * s : (i + 1) * s] for i in range(count)]
    if count * s < n:
        groups[-1] = np.concatenate([groups[-1], perm[count * s :]])
    return groups


def multiswarm_topology(n: int, rng: np.random.Generator) -> Topology:
    return Topology("multiswarm", n, groups=dms_partition(n, rng))


def clpso_learning_probability(k: int, n: int) -> float:
    """Learning probability of the ``k``-th particle (1-based)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}]")
    return 0.05 + 0.45 * math.expm1(10.0 * (k - 1) / (n - 1)) / math.expm1(10.0)


def _exemplar_sources(ks, f_p_rows, u, P) -> np.ndarray:
    """Source indices for particles ``ks`` from their uniform rows.

    Row ``i`` of ``u`` holds ``3 * D + 1`` uniforms for particle ``ks[i]``:
    ``D`` learning draws, ``D`` first tournament members, ``D`` second
    tournament members and one forced-dimension draw (used only when no
    dimension learned). ``f_p_rows[i]`` are the personal-best fitnesses seen
    by that particle and ``P[i]`` its learning probability. Uniforms map to
    integers as ``floor(u * m)``.
    """
    n = f_p_rows.shape[1]
    D = (u.shape[1] - 1) // 3
    k = np.asarray(ks)[:, None]
    learn = u[:, :D] < np.asarray(P)[:, None]
    a = (u[:, D : 2 * D] * (n - 1)).astype(np.intp)
    b = (u[:, 2 * D : 3 * D] * (n - 2)).astype(np.intp)
    a += a >= k
    lo, hi = np.minimum(a, k), np.maximum(a, k)
    b += b >= lo
    b += b >= hi
    fa = np.take_along_axis(f_p_rows, a, axis=1)
    fb = np.take_along_axis(f_p_rows, b, axis=1)
    winners = np.where(fb < fa, b, a)
    source = np.where(learn, winners, k)
    none = np.flatnonzero(~learn.any(axis=1))
    if none.size:
        d = (u[none, 3 * D] * D).astype(np.intp)
        source[none, d] = winners[none, d]
    return source


def clpso_exemplar_indices(ks, f_p, D: int, P, rng) -> np.ndarray:
    """Per-dimension source particles of the exemplars of particles ``ks``.

    Each dimension learns, with probability ``P``, from the better of two
    distinct other particles (ties keep the first); otherwise it uses the
    particle's own personal best. A particle that would learn from nobody
    has one random dimension forced to learn. ``ks`` may be a single index
    (returns ``(D,)``) or an array (returns ``(len(ks), D)``).

    Each particle consumes one row of ``3 * D + 1`` uniforms, so refreshing
    a block of particles draws exactly what refreshing them one at a time
    in the same order would.
    """
    f_p = np.asarray(f_p, dtype=float)
    n = f_p.size
    if n < 3:
        raise ValueError("tournament needs n >= 3")
    scalar = np.ndim(ks) == 0
    ks = np.atleast_1d(np.asarray(ks, dtype=np.intp))
    P = np.broadcast_to(np.asarray(P, dtype=float), ks.shape)
    u = rng.random((ks.size, 3 * D + 1))
    src = _exemplar_sources(ks, np.broadcast_to(f_p, (ks.size, n)), u, P)
    return src[0] if scalar else src


def clpso_exemplar(k: int, personal_bests, P_k: float, rng) -> np.ndarray:
    """Exemplar ``q_k`` assembled from personal bests ``[(p, f_p), ...]``."""
    p = np.array([pb[0] for pb in personal_bests], dtype=float)
    f_p = np.array([pb[1] for pb in personal_bests], dtype=float)
    src = clpso_exemplar_indices(k, f_p, p.shape[1], P_k, rng)
    return p[src, np.arange(p.shape[1])]


def clpso_velocity_update(state, q, c: float, w: float, policy, t: int, rng) -> np.ndarray:
    r = rng.random(state.x.size)
    v_i = inertial_velocity(policy, w, state.v, state.improved, t)
    return v_i + c * r * (np.asarray(q) - state.x)


def _cls_batch(swarm: Swarm, runs: np.ndarray, f, cls: ClsParams) -> None:
    """Chaotic local search on the best of each run in ``runs``, all runs probed together.

    Per run this is :func:`chaotic_local_search` with the remaining budget;
    an accepted point replaces the run's best and the personal best of its
    best particle.
    """
    limit = np.minimum(cls.iters, swarm.remaining[runs])
    xi = _nudge(cls_encode(swarm.best_x[runs], swarm.lower, swarm.upper))
    f_g = swarm.best_f[runs]
    live = limit > 0
    for i in range(cls.iters):
        live &= i < limit
        if not live.any():
            break
        idx = np.flatnonzero(live)
        xi[idx] = logistic_step(xi[idx], cls.mu)
        cand = cls_decode(xi[idx], swarm.lower, swarm.upper)
        counts = np.zeros(swarm.R, dtype=np.int64)
        counts[runs[idx]] = 1
        values = swarm.evaluate(f, cand, counts)
        win = values < f_g[idx]
        for j in np.flatnonzero(win):
            r = runs[idx[j]]
            swarm.best_f[r] = values[j]
            swarm.best_x[r] = cand[j]
            k = int(np.argmin(swarm.f_p[r]))
            swarm.p[r, k] = cand[j]
            swarm.f_p[r, k] = values[j]
        live[idx[win]] = False


def cpso_regenerate(swarm: Swarm, f, runs=None, keep_fraction: float = 0.2) -> int:
    """Keep the best ``ceil(n * keep_fraction)`` particles by current fitness, reinitialize the rest.

    Reinitialized particles get fresh uniform positions, velocities
    ``(U - x) / 2`` and personal bests, and are evaluated in index order
    while the run's budget lasts. Returns the evaluations consumed.
    """
    n, D = swarm.n, swarm.D
    if n < 5:
        raise ValueError("regeneration needs n >= 5")
    runs = swarm.runs if runs is None else np.asarray(runs)
    keep = math.ceil(n * keep_fraction - 1e-12)
    order = np.argsort(swarm.f_curr[runs], axis=1, kind="stable")
    fresh_rows = np.sort(order[:, keep:], axis=1)
    span = swarm.upper - swarm.lower
    counts = np.zeros(swarm.R, dtype=np.int64)
    rows, cols, xs, vs = [], [], [], []
    for r, fresh in zip(runs, fresh_rows):
        fresh = fresh[: max(int(swarm.remaining[r]), 0)]
        m = fresh.size
        if m == 0:
            continue
        rng = swarm.rngs[r]
        x = swarm.lower + span * rng.random((m, D))
        v = (swarm.lower + span * rng.random((m, D)) - x) / 2.0
        counts[r] = m
        rows.append(np.full(m, r))
        cols.append(fresh)
        xs.append(x)
        vs.append(v)
    if not rows:
        return 0
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    x = np.concatenate(xs)
    values = swarm.evaluate(f, x, counts)
    swarm.x[rows, cols] = x
    swarm.v[rows, cols] = np.concatenate(vs)
    swarm.p[rows, cols] = x
    swarm.f_p[rows, cols] = values
    swarm.f_curr[rows, cols] = values
    swarm.f_prev[rows, cols] = np.inf
    grid = np.full((swarm.R, n), np.inf)
    grid[rows, cols] = values
    swarm.note_best(grid, swarm.x)
    return int(counts.sum())


class LdiwHooks(StepHooks):
    def __init__(self, spec: VariantSpec, t_max: int):
        super().__init__(spec.w0, spec.c, spec.c)
        self.spec = spec
        self.schedule = LdiwSchedule(spec.w_min, spec.w0 + spec.w_max_offset, t_max)

    def weight(self, t):
        return ldiw_weight(t, self.schedule)


class TvacHooks(LdiwHooks):
    def coefficients(self, t):
        return tvac_coefficients(t, self.spec.tvac, self.schedule.t_max)


class CpsoHooks(LdiwHooks):
    """After each iteration: local search on the best, then regeneration."""

    def after_iteration(self, swarm, f, improved, active):
        best_before = swarm.best_f.copy()
        runs = np.flatnonzero(active & (swarm.remaining > 0))
        if runs.size:
            _cls_batch(swarm, runs, f, self.spec.cls)
        runs = np.flatnonzero(active & (swarm.remaining > 0))
        if runs.size:
            cpso_regenerate(swarm, f, runs, self.spec.cls.elite_fraction)
        super().after_iteration(swarm, f, improved | (swarm.best_f < best_before), active)


def dms_regroup_if_stalled(best_prev: float, best_now: float, swarm: Swarm, rng=None, run: int = 0) -> Swarm:
    """Re-partition run ``run`` into fresh subswarms unless its best improved.

    ``rng`` defaults to the run's own generator.
    """
    if not best_now < best_prev:
        rng = swarm.rngs[run] if rng is None else rng
        swarm.set_topology(run, multiswarm_topology(swarm.n, rng))
    return swarm


class DmsHooks(LdiwHooks):
    def after_iteration(self, swarm, f, improved, active):
        for r in np.flatnonzero(active & ~improved):
            swarm.set_topology(r, multiswarm_topology(swarm.n, swarm.rngs[r]))


class ClpsoHooks(LdiwHooks):
    """Velocity towards a per-particle exemplar; no neighborhood best.

    The exemplar of particle ``k`` is stored as ``sources[r, k, d]``, the
    particle whose personal best supplies dimension ``d``, so it follows
    later improvements of those personal bests. A particle's sources are
    re-drawn after ``refresh_gap`` consecutive iterations without personal
    best improvement.
    """

    def setup(self, swarm, f):
        n = swarm.n
        self.probability = np.array([clpso_learning_probability(k + 1, n) for k in range(n)])
        self.stall = np.zeros((swarm.R, n), dtype=np.int64)
        self.sources = np.empty((swarm.R, n, swarm.D), dtype=np.intp)
        # flat offsets into p for the exemplar gather
        self._base = (swarm.runs[:, None, None] * n) * swarm.D + np.arange(swarm.D)
        self._flat = np.empty_like(self.sources)
        self._refresh(swarm, np.ones((swarm.R, n), dtype=bool))
        self._f_p = swarm.f_p.copy()

    def _refresh(self, swarm, due):
        run_ids, ks = np.nonzero(due)
        counts = np.bincount(run_ids, minlength=swarm.R)
        width = 3 * swarm.D + 1
        u = np.concatenate([swarm.rngs[r].random((counts[r], width)) for r in np.flatnonzero(counts)])
        src = _exemplar_sources(ks, swarm.f_p[run_ids], u, self.probability[ks])
        self.sources[run_ids, ks] = src
        self._flat[run_ids, ks] = self._base[run_ids, 0] + src * swarm.D

    def exemplars(self, swarm):
        return np.take(swarm.p, self._flat)

    def attraction(self, swarm, m, t):
        q = self.exemplars(swarm)
        r = swarm.uniforms(m, (swarm.D,))
        return self.spec.c * r * (q - swarm.x)

    def after_iteration(self, swarm, f, improved, active):
        moved = swarm.f_p < self._f_p
        self.stall = np.where(moved, 0, self.stall + active[:, None])
        self._f_p = swarm.f_p.copy()
        due = self.stall >= self.spec.refresh_gap
        if due.any():
            self._refresh(swarm, due)
            self.stall[due] = 0


_HOOKS = {
    "ldiw": LdiwHooks,
    "tvac": TvacHooks,
    "cpso": CpsoHooks,
    "dms": DmsHooks,
    "clpso": ClpsoHooks,
}


def make_hooks(spec: VariantSpec, t_max: int) -> StepHooks:
    return _HOOKS[spec.variant](spec, t_max)


def swarm_config(spec: VariantSpec, D: int, eval_max: int, lower=-100.0, upper=100.0) -> SwarmConfig:
    if spec.variant == "dms":
        topology = "multiswarm"
    elif spec.variant == "clpso":
        topology = "none"
    else:
        topology = spec.version
    return SwarmConfig(
        n=spec.n, D=D, w0=spec.w0, c1=spec.c, c2=spec.c, topology=topology,
        policy=policy_for(spec.languid), eval_max=eval_max, lower=lower, upper=upper, K=spec.K,
    )


@dataclass
class OptimizeResult:
    best_x: np.ndarray
    best_f: float
    evaluations: int
    iterations: int


def _generators(seeds) -> list[np.random.Generator]:
    if isinstance(seeds, np.random.Generator):
        return [seeds]
    if seeds is None or isinstance(seeds, (int, np.integer)):
        return [np.random.default_rng(seeds)]
    return [s if isinstance(s, np.random.Generator) else np.random.default_rng(s) for s in seeds]


class Optimizer:
    """Runs of a variant on a batch objective ``f(X) -> values``.

    ``seeds`` is a seed or generator (one run) or a sequence of them (one
    run each, simulated together). Every run's result is independent of
    which other runs share the batch.

    ``hooks`` is exposed so callers can swap schedules, e.g. to compare a
    languid run with a standard run at an offset inertia weight.
    """

    def __init__(self, spec: VariantSpec, f, D: int, eval_max: int, seeds=None, lower=-100.0, upper=100.0):
        self.spec = spec
        self.f = f
        self.rngs = _generators(seeds)
        self.config = swarm_config(spec, D, eval_max, lower, upper)
        self.t_max = max(1, eval_max // spec.n)
        self.hooks = make_hooks(spec, self.t_max)
        self.swarm: Swarm | None = None

    def initialize(self) -> Swarm:
        make_topology = None
        if self.config.topology == "multiswarm":
            n = self.config.n

            def make_topology(rng):
                return multiswarm_topology(n, rng)

        swarm = init_swarm(self.config, self.f, self.rngs, make_topology)
        self.hooks.setup(swarm, self.f)
        self.swarm = swarm
        return swarm

    def step(self) -> int:
        if self.swarm is None:
            self.initialize()
        return step(self.swarm, self.hooks, self.f)

    def run(self):
        """Run to exhaustion; one :class:`OptimizeResult` (single run) or a list."""
        if self.swarm is None:
            self.initialize()
        while np.any(self.swarm.remaining > 0):
            self.step()
        results = self.results()
        return results[0] if len(results) == 1 else results

    def results(self) -> list[OptimizeResult]:
        s = self.swarm
        return [
            OptimizeResult(s.best_x[r].copy(), float(s.best_f[r]), int(s.evals[r]), int(s.iterations[r]))
            for r in range(s.R)
        ]

    def result(self) -> OptimizeResult:
        return self.results()[0]


def optimize(spec: VariantSpec, f, D: int, eval_max: int, seed=None, lower=-100.0, upper=100.0) -> OptimizeResult:
    """Single run of ``spec`` on ``f`` seeded by ``seed``."""
    return Optimizer(spec, f, D, eval_max, _generators(seed)[:1], lower, upper).run()


def optimize_many(spec: VariantSpec, f, D: int, eval_max: int, seeds, lower=-100.0, upper=100.0) -> list[OptimizeResult]:
    """Independent runs, one per seed, simulated as one batch."""
    opt = Optimizer(spec, f, D, eval_max, list(seeds), lower, upper)
    opt.run()
    return opt.results()
