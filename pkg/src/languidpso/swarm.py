"""Particle/swarm state, topologies and the shared velocity/position kernel.

A :class:`Swarm` holds ``R`` independent runs of the same configuration,
stored as arrays of shape ``(R, n, D)`` and advanced in lockstep. Each run
owns its random generator, so a run's trajectory depends only on its own
seed and is identical whether it is simulated alone (``R = 1``) or inside a
batch. Within an iteration every particle reads the personal bests from the
start of the iteration (synchronous update).

Random-number consumption of one run, in order:

* initialization: positions ``n*D`` uniforms, velocity targets ``n*D``
  uniforms, then the topology draw (lbest / multiswarm only);
* every iteration: ``r1`` then ``r2`` (``D`` uniforms each) for every moving
  particle in index order, i.e. one ``(m, 2, D)`` block (CL-PSO draws one
  ``(m, D)`` block), followed by whatever the variant consumes after the
  iteration (topology re-draws, local search, regeneration, exemplars).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

LANGUID_BONUS = 0.05


@dataclass(frozen=True)
class InertiaPolicy:
    mode: str = "standard"
    languid_bonus: float = LANGUID_BONUS

    def __post_init__(self):
        if self.mode not in ("standard", "languid"):
            raise ValueError(f"unknown inertia mode {self.mode!r}")
        if self.languid_bonus != LANGUID_BONUS:
            raise ValueError("languid_bonus is fixed at 0.05")

    @property
    def languid(self) -> bool:
        return self.mode == "languid"


STANDARD = InertiaPolicy("standard")
LANGUID = InertiaPolicy("languid")


def policy_for(languid: bool) -> InertiaPolicy:
    return LANGUID if languid else STANDARD


@dataclass
class ParticleState:
    x: np.ndarray
    v: np.ndarray
    p: np.ndarray
    f_p: float
    f_curr: float
    f_prev: float = np.inf

    @property
    def improved(self) -> bool:
        return self.f_curr < self.f_prev


@dataclass
class Topology:
    """Who informs whom in one run.

    ``kind`` is ``"gbest"``, ``"lbest-random"`` (``informers`` is ``(n, K)``)
    or ``"multiswarm"`` (``groups`` is a list of index arrays).
    """

    kind: str
    n: int
    K: int = 0
    informers: np.ndarray | None = None
    groups: list[np.ndarray] | None = None
    _candidates: np.ndarray | None = field(default=None, repr=False)

    def candidates(self) -> np.ndarray:
        """``(n, m)`` neighborhood matrix including self, rows ascending.

        Short multiswarm rows are padded with their largest member, which
        keeps "first minimum = lowest index" when taking an argmin.
        """
        if self._candidates is None:
            if self.kind == "lbest-random":
                own = np.arange(self.n)[:, None]
                self._candidates = np.sort(np.hstack([own, self.informers]), axis=1)
            elif self.kind == "multiswarm":
                width = max(len(g) for g in self.groups)
                cand = np.empty((self.n, width), dtype=np.intp)
                for group in self.groups:
                    row = np.sort(group)
                    cand[group] = np.concatenate([row, np.full(width - row.size, row[-1])])
                self._candidates = cand
            else:
                self._candidates = np.tile(np.arange(self.n), (self.n, 1))
        return self._candidates

    def neighbors(self, k: int) -> np.ndarray:
        return np.unique(self.candidates()[k])


def gbest_topology(n: int) -> Topology:
    return Topology("gbest", n)


def randomize_topology(n: int, K: int, rng: np.random.Generator) -> Topology:
    """Random lbest topology: ``K`` distinct informers per particle, never itself.

    Draws an ``(n, K)`` integer block; rows with a repeated informer are
    redrawn (in index order) without replacement.
    """
    if not 1 <= K <= n - 1:
        raise ValueError(f"need 1 <= K <= n-1, got K={K}, n={n}")
    own = np.arange(n)[:, None]
    informers = rng.integers(0, n - 1, size=(n, K))
    informers += informers >= own
    if K > 1:
        srt = np.sort(informers, axis=1)
        for k in np.flatnonzero(np.any(srt[:, 1:] == srt[:, :-1], axis=1)):
            row = rng.choice(n - 1, size=K, replace=False)
            informers[k] = row + (row >= k)
    return Topology("lbest-random", n, K, informers)


def best_informers(neighborhoods: np.ndarray | None, f_p: np.ndarray) -> np.ndarray:
    """Index of the best personal best visible to each particle.

    ``f_p`` has shape ``(..., n)``; ``neighborhoods`` is ``None`` (gbest) or
    a matching ``(..., n, m)`` candidate array. Ties go to the lowest index.
    """
    if neighborhoods is None:
        best = np.argmin(f_p, axis=-1)
        return np.broadcast_to(best[..., None], f_p.shape)
    vals = np.take_along_axis(f_p[..., None, :], neighborhoods, axis=-1) if f_p.ndim > 1 else f_p[neighborhoods]
    j = np.argmin(vals, axis=-1)
    return np.take_along_axis(neighborhoods, j[..., None], axis=-1)[..., 0]


def neighborhood_best_indices(topo: Topology, f_p) -> np.ndarray:
    f_p = np.asarray(f_p, dtype=float)
    return best_informers(None if topo.kind == "gbest" else topo.candidates(), f_p)


def neighborhood_best(k: int, topo: Topology, personal_bests) -> np.ndarray:
    """Best ``p`` among particle ``k`` and its informers; ``personal_bests`` is ``[(p, f_p), ...]``."""
    members = topo.neighbors(k)
    best = min(members, key=lambda j: (personal_bests[j][1], j))
    return np.asarray(personal_bests[best][0])


def inertial_velocity(policy: InertiaPolicy, w: float, v_prev, improved, t: int) -> np.ndarray:
    """Inertia term for one velocity ``(D,)`` or a batch ``(..., D)``.

    Languid particles keep ``(w + 0.05) * v_prev`` only if their fitness
    strictly improved in the previous iteration (always while ``t < 2``)
    and get exactly zero inertia otherwise.
    """
    v_prev = np.asarray(v_prev, dtype=float)
    if not policy.languid:
        return w * v_prev
    scaled = (w + policy.languid_bonus) * v_prev
    if t < 2:
        return scaled
    keep = np.asarray(improved, dtype=bool)
    return np.where(keep[..., None] if v_prev.ndim > keep.ndim else keep, scaled, 0.0)


def velocity_update(state: ParticleState, g, w, c1, c2, policy: InertiaPolicy, t: int, rng) -> np.ndarray:
    """New velocity of one particle; draws ``r1`` then ``r2`` (``D`` uniforms each)."""
    r = rng.random((2, state.x.size))
    v_i = inertial_velocity(policy, w, state.v, state.improved, t)
    return v_i + c1 * r[0] * (state.p - state.x) + c2 * r[1] * (np.asarray(g) - state.x)


def position_update(x, v) -> np.ndarray:
    x, v = np.asarray(x, dtype=float), np.asarray(v, dtype=float)
    if x.shape != v.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {v.shape}")
    return x + v


def enforce_bounds(x, v, lower, upper):
    """Clamp positions to the box and zero the velocity of every clamped component."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    out = (x < lower) | (x > upper)
    if not out.any():
        return x, v
    return np.clip(x, lower, upper), np.where(out, 0.0, v)


@dataclass
class SwarmConfig:
    n: int
    D: int
    w0: float
    c1: float
    c2: float
    topology: str = "gbest"
    policy: InertiaPolicy = STANDARD
    eval_max: int = 10_000
    lower: np.ndarray | float = -100.0
    upper: np.ndarray | float = 100.0
    K: int = 3

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("swarm needs n >= 2")
        if self.D < 1:
            raise ValueError("D must be >= 1")
        if self.eval_max < self.n:
            raise ValueError("eval_max must be >= n")
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.D,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.D,)).copy()
        if np.any(self.lower >= self.upper):
            raise ValueError("lower bound must be below upper bound in every dimension")
        if self.topology not in ("gbest", "lbest", "multiswarm", "none"):
            raise ValueError(f"unknown topology {self.topology!r}")


class Swarm:
    """``R`` runs of one configuration advanced in lockstep."""

    def __init__(self, config: SwarmConfig, x, v, values, rngs, neighborhoods=None):
        self.config = config
        self.policy = config.policy
        self.lower = config.lower
        self.upper = config.upper
        self.rngs = list(rngs)
        R, n, _ = x.shape
        self.x = x
        self.v = v
        self.p = x.copy()
        self.f_p = values.copy()
        self.f_curr = values.copy()
        self.f_prev = np.full((R, n), np.inf)
        self.neighborhoods = neighborhoods
        self.t = 0
        self.evals = np.full(R, n, dtype=np.int64)
        self.iterations = np.zeros(R, dtype=np.int64)
        k = np.argmin(values, axis=1)
        self.best_f = values[np.arange(R), k].copy()
        self.best_x = x[np.arange(R), k].copy()
        self.last_inertial = np.zeros_like(v)

    @property
    def R(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def D(self) -> int:
        return self.x.shape[2]

    @property
    def remaining(self) -> np.ndarray:
        return self.config.eval_max - self.evals

    @property
    def runs(self) -> np.ndarray:
        return np.arange(self.R)

    def particle(self, k: int, run: int = 0) -> ParticleState:
        return ParticleState(
            self.x[run, k].copy(),
            self.v[run, k].copy(),
            self.p[run, k].copy(),
            float(self.f_p[run, k]),
            float(self.f_curr[run, k]),
            float(self.f_prev[run, k]),
        )

    def personal_bests(self, run: int = 0):
        return [(self.p[run, k], float(self.f_p[run, k])) for k in range(self.n)]

    def set_topology(self, run: int, topo: Topology) -> None:
        self.neighborhoods[run] = topo.candidates()

    def evaluate(self, f, X: np.ndarray, counts) -> np.ndarray:
        """Evaluate a row batch and charge ``counts`` (per run) to the budget."""
        values = np.asarray(f(X), dtype=float).reshape(-1)
        if values.shape[0] != X.shape[0]:
            raise ValueError(f"objective returned {values.shape[0]} values for {X.shape[0]} points")
        self.evals += counts
        return values

    def note_best(self, values: np.ndarray, X: np.ndarray) -> None:
        """Update best-so-far from ``values (R, k)`` at positions ``X (R, k, D)``."""
        k = np.argmin(values, axis=1)
        vals = values[self.runs, k]
        upd = vals < self.best_f
        if upd.any():
            self.best_f[upd] = vals[upd]
            self.best_x[upd] = X[upd, k[upd]]

    def uniforms(self, m: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
        """``(R, n, *shape)`` block; run ``r`` draws its first ``m[r]`` rows from its own stream."""
        n = self.n
        if np.all(m == n):
            return np.stack([rng.random((n,) + shape) for rng in self.rngs])
        out = np.zeros((self.R, n) + shape)
        for r in np.flatnonzero(m):
            out[r, : m[r]] = self.rngs[r].random((int(m[r]),) + shape)
        return out


def _as_rngs(rngs) -> list[np.random.Generator]:
    if isinstance(rngs, np.random.Generator):
        return [rngs]
    return list(rngs)


def init_swarm(config: SwarmConfig, f, rngs, make_topology: Callable | None = None) -> Swarm:
    """Uniform positions, ``v = (U(lb, ub) - x) / 2``, ``n`` evaluations per run.

    ``rngs`` is one generator or a sequence (one run each). ``make_topology``
    maps a run's generator to its :class:`Topology`; by default lbest draws a
    random topology and everything else is gbest.
    """
    rngs = _as_rngs(rngs)
    R, n, D = len(rngs), config.n, config.D
    if make_topology is None and config.topology == "lbest":
        def make_topology(rng):
            return randomize_topology(n, config.K, rng)
    span = config.upper - config.lower
    x = np.empty((R, n, D))
    v = np.empty((R, n, D))
    neighborhoods = None
    for r, rng in enumerate(rngs):
        x[r] = config.lower + span * rng.random((n, D))
        v[r] = (config.lower + span * rng.random((n, D)) - x[r]) / 2.0
        if make_topology is not None:
            cand = make_topology(rng).candidates()
            if neighborhoods is None:
                neighborhoods = np.empty((R,) + cand.shape, dtype=np.intp)
            neighborhoods[r] = cand
    values = np.asarray(f(x.reshape(R * n, D)), dtype=float).reshape(-1)
    if values.shape[0] != R * n:
        raise ValueError(f"objective returned {values.shape[0]} values for {R * n} points")
    return Swarm(config, x, v, values.reshape(R, n), rngs, neighborhoods)


class StepHooks:
    """Constant-parameter standard PSO; variants override pieces of this."""

    def __init__(self, w: float, c1: float, c2: float):
        self.w = w
        self.c1 = c1
        self.c2 = c2

    def weight(self, t: int) -> float:
        return self.w

    def coefficients(self, t: int) -> tuple[float, float]:
        return self.c1, self.c2

    def setup(self, swarm: Swarm, f) -> None:
        pass

    def attraction(self, swarm: Swarm, m: np.ndarray, t: int) -> np.ndarray:
        c1, c2 = self.coefficients(t)
        g_idx = best_informers(swarm.neighborhoods, swarm.f_p)
        g = swarm.p[swarm.runs[:, None], g_idx]
        r = swarm.uniforms(m, (2, swarm.D))
        return c1 * r[:, :, 0] * (swarm.p - swarm.x) + c2 * r[:, :, 1] * (g - swarm.x)

    def after_iteration(self, swarm: Swarm, f, improved: np.ndarray, active: np.ndarray) -> None:
        """Default: re-draw the lbest topology of every run whose best stalled."""
        if swarm.config.topology == "lbest":
            for r in np.flatnonzero(active & ~improved):
                swarm.set_topology(r, randomize_topology(swarm.n, swarm.config.K, swarm.rngs[r]))


def step(swarm: Swarm, hooks: StepHooks, f) -> int:
    """Advance every run with budget left by one iteration.

    Returns the evaluations consumed. A run with fewer than ``n``
    evaluations left moves only its first ``remaining`` particles.
    """
    n = swarm.n
    m = np.minimum(n, np.maximum(swarm.remaining, 0))
    active = m > 0
    if not active.any():
        return 0
    start = int(swarm.evals.sum())
    swarm.t += 1
    t = swarm.t
    swarm.iterations[active] += 1
    best_before = swarm.best_f.copy()

    improved = swarm.f_curr < swarm.f_prev
    v_i = inertial_velocity(swarm.policy, hooks.weight(t), swarm.v, improved, t)
    v_new = v_i + hooks.attraction(swarm, m, t)
    x_new, v_new = enforce_bounds(position_update(swarm.x, v_new), v_new, swarm.lower, swarm.upper)

    if np.all(m == n):
        values = swarm.evaluate(f, x_new.reshape(-1, swarm.D), m).reshape(swarm.R, n)
        swarm.x, swarm.v = x_new, v_new
        swarm.f_prev, swarm.f_curr = swarm.f_curr, values
    else:
        move = np.arange(n) < m[:, None]
        values = np.full((swarm.R, n), np.inf)
        values[move] = swarm.evaluate(f, x_new[move], m)
        swarm.x[move] = x_new[move]
        swarm.v[move] = v_new[move]
        swarm.f_prev[move] = swarm.f_curr[move]
        swarm.f_curr[move] = values[move]

    better = values < swarm.f_p
    swarm.p[better] = x_new[better]
    swarm.f_p[better] = values[better]
    swarm.note_best(values, x_new)
    swarm.last_inertial = v_i

    hooks.after_iteration(swarm, f, swarm.best_f < best_before, active)
    return int(swarm.evals.sum()) - start


def batched(fn: Callable[[np.ndarray], float]) -> Callable[[np.ndarray], np.ndarray]:
    """Wrap a point-wise objective so it accepts an ``(N, D)`` batch."""

    def f(X):
        return np.array([fn(row) for row in np.atleast_2d(X)], dtype=float)

    return f
