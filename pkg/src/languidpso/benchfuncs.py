"""CEC-2014-style test-function suite.

Base functions are vectorized over rows: every base takes ``z`` of shape
``(N, d)`` and returns ``N`` values, with its global minimum 0 at ``z = 0``.
Offsets used by the original definitions (Rosenbrock's optimum at 1,
Schwefel's at 420.97, HappyCat/HGBat at -1) are folded into the base body so
that every transformed function has its optimum exactly at the shift vector.

The suite mirrors the structure of CEC 2014 (3 unimodal, 13 multimodal,
6 hybrid, 8 composition functions) with seeded shift vectors and rotations.
Official shift/rotation data can be plugged in through
:func:`load_official_data`.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "BASE_FUNCTIONS",
    "BenchmarkFunction",
    "DataFileError",
    "TransformStack",
    "apply_transform",
    "build_suite",
    "eval_base",
    "load_official_data",
    "random_rotation",
    "suite_manifest",
]

DEFAULT_BOUNDS = (-100.0, 100.0)
STUDY_DIMENSIONS = (10, 20, 50)

_SCHWEFEL_OPT = 4.209687462275036e2
_SCHWEFEL_CONST = 4.189828872724338e2


def _elliptic(z):
    d = z.shape[1]
    if d == 1:
        return z[:, 0] ** 2
    weights = 1e6 ** (np.arange(d) / (d - 1))
    return np.sum(z**2 * weights, axis=1)


def _bent_cigar(z):
    return z[:, 0] ** 2 + 1e6 * np.sum(z[:, 1:] ** 2, axis=1)


def _discus(z):
    return 1e6 * z[:, 0] ** 2 + np.sum(z[:, 1:] ** 2, axis=1)


def _rosenbrock(z):
    z = z + 1.0
    return np.sum(100.0 * (z[:, :-1] ** 2 - z[:, 1:]) ** 2 + (z[:, :-1] - 1.0) ** 2, axis=1)


def _ackley(z):
    d = z.shape[1]
    s1 = np.sum(z**2, axis=1) / d
    s2 = np.sum(np.cos(2.0 * np.pi * z), axis=1) / d
    return -20.0 * np.exp(-0.2 * np.sqrt(s1)) - np.exp(s2) + 20.0 + math.e


def _rastrigin(z):
    return np.sum(z**2 - 10.0 * np.cos(2.0 * np.pi * z) + 10.0, axis=1)


def _griewank(z):
    d = z.shape[1]
    root = np.sqrt(np.arange(1, d + 1))
    return np.sum(z**2, axis=1) / 4000.0 - np.prod(np.cos(z / root), axis=1) + 1.0


_W_A = 0.5 ** np.arange(21)
_W_B = 3.0 ** np.arange(21)


def _weierstrass(z):
    d = z.shape[1]
    # cos/sin of 2*pi*3**k*(z + 0.5) by repeatedly cubing the unit complex
    # number (triple-angle formulas); one trig pair per coordinate instead of
    # 21 cosines, with rounding comparable to evaluating each term directly
    angle = 2.0 * np.pi * z
    c = -np.cos(angle)
    s = -np.sin(angle)
    acc = c.copy()
    c2, s2, tmp = np.empty_like(c), np.empty_like(c), np.empty_like(c)
    for a_k in _W_A[1:]:
        np.multiply(c, c, out=c2)
        np.multiply(s, s, out=s2)
        np.multiply(s2, -3.0, out=tmp)
        tmp += c2
        c *= tmp
        np.multiply(c2, 3.0, out=tmp)
        tmp -= s2
        s *= tmp
        np.multiply(c, a_k, out=tmp)
        acc += tmp
    return np.sum(acc, axis=1) + d * np.sum(_W_A)


def _schwefel(z):
    d = z.shape[1]
    z = z + _SCHWEFEL_OPT
    g = z * np.sin(np.sqrt(np.abs(z)))
    out = np.abs(z) > 500.0
    if out.any():
        # fold points beyond +-500 back inside and add a quadratic penalty
        zo = z[out]
        sign = np.sign(zo)
        folded = sign * (500.0 - np.fmod(np.abs(zo), 500.0))
        g[out] = folded * np.sin(np.sqrt(np.abs(folded))) - ((zo - sign * 500.0) / 100.0) ** 2 / d
    return _SCHWEFEL_CONST * d - np.sum(g, axis=1)


_K_POW = 2.0 ** np.arange(1, 33)


def _katsuura(z):
    d = z.shape[1]
    inner = np.zeros_like(z)
    t = np.empty_like(z)
    nearest = np.empty_like(z)
    for scale in _K_POW:
        np.multiply(z, scale, out=t)
        np.rint(t, out=nearest)
        t -= nearest
        np.abs(t, out=t)
        t /= scale
        inner += t
    exponent = 10.0 / d**1.2
    factors = (1.0 + np.arange(1, d + 1) * inner) ** exponent
    return 10.0 / d**2 * np.prod(factors, axis=1) - 10.0 / d**2


def _happycat(z):
    d = z.shape[1]
    z = z - 1.0
    r2 = np.sum(z**2, axis=1)
    sz = np.sum(z, axis=1)
    return np.abs(r2 - d) ** 0.25 + (0.5 * r2 + sz) / d + 0.5


def _hgbat(z):
    d = z.shape[1]
    z = z - 1.0
    r2 = np.sum(z**2, axis=1)
    sz = np.sum(z, axis=1)
    return np.abs(r2**2 - sz**2) ** 0.5 + (0.5 * r2 + sz) / d + 0.5


def _griewank_rosenbrock(z):
    z = z + 1.0
    nxt = np.roll(z, -1, axis=1)
    tmp = 100.0 * (z**2 - nxt) ** 2 + (z - 1.0) ** 2
    return np.sum(tmp**2 / 4000.0 - np.cos(tmp) + 1.0, axis=1)


def _scaffer_f6(z):
    nxt = np.roll(z, -1, axis=1)
    r2 = z**2 + nxt**2
    return np.sum(0.5 + (np.sin(np.sqrt(r2)) ** 2 - 0.5) / (1.0 + 0.001 * r2) ** 2, axis=1)


# name -> (body, input scale applied before rotation)
BASE_FUNCTIONS: dict[str, tuple[Callable[[np.ndarray], np.ndarray], float]] = {
    "elliptic": (_elliptic, 1.0),
    "bent-cigar": (_bent_cigar, 1.0),
    "discus": (_discus, 1.0),
    "rosenbrock": (_rosenbrock, 2.048 / 100.0),
    "ackley": (_ackley, 1.0),
    "weierstrass": (_weierstrass, 0.5 / 100.0),
    "griewank": (_griewank, 600.0 / 100.0),
    "rastrigin": (_rastrigin, 5.12 / 100.0),
    "schwefel": (_schwefel, 1000.0 / 100.0),
    "katsuura": (_katsuura, 5.0 / 100.0),
    "happycat": (_happycat, 5.0 / 100.0),
    "hgbat": (_hgbat, 5.0 / 100.0),
    "griewank-rosenbrock": (_griewank_rosenbrock, 5.0 / 100.0),
    "scaffer-f6": (_scaffer_f6, 1.0),
}


def _base(name: str):
    try:
        return BASE_FUNCTIONS[name]
    except KeyError:
        raise ValueError(f"unknown base function {name!r}") from None


def eval_base(name: str, z) -> float | np.ndarray:
    """Evaluate a named base function at ``z`` (1-D point or 2-D batch)."""
    body, _ = _base(name)
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        return float(body(z[None, :])[0])
    return body(z)


def random_rotation(D: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix from a QR of a standard-normal draw."""
    q, r = np.linalg.qr(rng.standard_normal((D, D)))
    return q * np.sign(np.diag(r))


@dataclass(frozen=True)
class TransformStack:
    """Shift ``o``, rotation ``M`` and input scale: ``z = M @ (scale * (x - o))``."""

    shift: np.ndarray
    rotation: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        shift = np.asarray(self.shift, dtype=float)
        rotation = np.asarray(self.rotation, dtype=float)
        if rotation.shape != (shift.size, shift.size):
            raise ValueError(
                f"rotation shape {rotation.shape} does not match shift length {shift.size}"
            )
        object.__setattr__(self, "shift", shift)
        object.__setattr__(self, "rotation", rotation)

    @property
    def D(self) -> int:
        return self.shift.size

    def apply(self, X: np.ndarray) -> np.ndarray:
        if X.shape[-1] != self.D:
            raise ValueError(f"dimension mismatch: got {X.shape[-1]}, expected {self.D}")
        # einsum keeps each row's result independent of the batch size (BLAS does not)
        return np.einsum("ij,kj->ik", self.scale * (X - self.shift), self.rotation)

    def with_scale(self, scale: float) -> "TransformStack":
        return TransformStack(self.shift, self.rotation, scale)


def apply_transform(stack: TransformStack, f_base, x) -> float | np.ndarray:
    """Evaluate ``f_base(M @ (scale * (x - o)))``.

    ``f_base`` is either a base-function name or a row-vectorized callable.
    """
    body = _base(f_base)[0] if isinstance(f_base, str) else f_base
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return float(body(stack.apply(x[None, :]))[0])
    return body(stack.apply(x))


@dataclass(frozen=True)
class BenchmarkFunction:
    """One suite member. Call with a point for a float, or use ``evaluate`` on a batch."""

    id: str
    category: str
    D: int
    f_star: float
    optimum: np.ndarray
    evaluate_batch: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    bounds: tuple[float, float] = DEFAULT_BOUNDS
    seed: int = 0
    rotations: tuple[np.ndarray, ...] = field(default=(), repr=False)
    weights: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def evaluate(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.D:
            raise ValueError(f"{self.id}: expected shape (N, {self.D}), got {X.shape}")
        return self.evaluate_batch(X) + self.f_star

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(self.evaluate(x[None, :])[0])

    @property
    def lower(self) -> np.ndarray:
        return np.full(self.D, self.bounds[0])

    @property
    def upper(self) -> np.ndarray:
        return np.full(self.D, self.bounds[1])

    def composition_weights(self, X) -> np.ndarray:
        if self.weights is None:
            raise TypeError(f"{self.id} is not a composition function")
        return self.weights(np.atleast_2d(np.asarray(X, dtype=float)))


def _simple(name: str, stack: TransformStack):
    body, scale = _base(name)
    stack = stack.with_scale(scale)

    def f(X):
        return body(stack.apply(X))

    return f


def _group_sizes(D: int, proportions: Sequence[float]) -> list[int]:
    sizes = [int(math.ceil(p * D - 1e-9)) for p in proportions[:-1]]
    sizes = [min(s, D - sum(sizes[:i])) for i, s in enumerate(sizes)]
    sizes.append(D - sum(sizes))
    return sizes


def _hybrid(parts: Sequence[tuple[str, float]], stack: TransformStack, perm: np.ndarray):
    sizes = _group_sizes(stack.D, [p for _, p in parts])
    groups = []
    start = 0
    for (name, _), size in zip(parts, sizes):
        if size:
            body, scale = _base(name)
            groups.append((body, scale, perm[start : start + size]))
        start += size

    def f(X):
        z = stack.apply(X)
        total = np.zeros(X.shape[0])
        for body, scale, idx in groups:
            # column gathers come back Fortran-ordered; row sums must run on C order
            total += body(np.ascontiguousarray(scale * z[:, idx]))
        return total

    f.groups = [idx for _, _, idx in groups]
    return f


def _composition_weights(shifts: np.ndarray):
    def weights(X):
        d2 = np.sum((X[:, None, :] - shifts[None, :, :]) ** 2, axis=2)
        w = np.zeros_like(d2)
        exact = d2 == 0.0
        hit = exact.any(axis=1)
        # one-hot on the first coinciding optimum
        w[hit, np.argmax(exact[hit], axis=1)] = 1.0
        rest = ~hit
        if rest.any():
            d = d2[rest]
            r = d.min(axis=1, keepdims=True) / d
            w[rest] = r / r.sum(axis=1, keepdims=True)
        return w

    return weights


def _composition(components, lambdas, biases, shifts):
    lambdas = np.asarray(lambdas, dtype=float)
    biases = np.asarray(biases, dtype=float)
    weights = _composition_weights(shifts)

    def f(X):
        values = np.stack([comp(X) for comp in components], axis=1)
        return np.sum(weights(X) * (lambdas * values + biases), axis=1)

    return f, weights


_UNIMODAL = ("elliptic", "bent-cigar", "discus")

# (base, rotated)
_MULTIMODAL = (
    ("rosenbrock", True),
    ("ackley", True),
    ("weierstrass", True),
    ("griewank", True),
    ("rastrigin", False),
    ("rastrigin", True),
    ("schwefel", False),
    ("schwefel", True),
    ("katsuura", True),
    ("happycat", True),
    ("hgbat", True),
    ("griewank-rosenbrock", True),
    ("scaffer-f6", True),
)

_HYBRID = (
    (("schwefel", 0.3), ("rastrigin", 0.3), ("elliptic", 0.4)),
    (("bent-cigar", 0.3), ("hgbat", 0.3), ("rastrigin", 0.4)),
    (("griewank", 0.2), ("weierstrass", 0.2), ("rosenbrock", 0.3), ("scaffer-f6", 0.3)),
    (("hgbat", 0.2), ("discus", 0.2), ("griewank-rosenbrock", 0.3), ("rastrigin", 0.3)),
    (
        ("scaffer-f6", 0.1),
        ("hgbat", 0.2),
        ("rosenbrock", 0.2),
        ("schwefel", 0.2),
        ("elliptic", 0.3),
    ),
    (
        ("katsuura", 0.1),
        ("happycat", 0.2),
        ("griewank-rosenbrock", 0.2),
        ("schwefel", 0.2),
        ("ackley", 0.3),
    ),
)

# components are base names, or integers selecting a hybrid layout above
_COMPOSITION = (
    (("rosenbrock", "elliptic", "bent-cigar", "discus", "elliptic"), (1, 1e-6, 1e-26, 1e-6, 1e-6)),
    (("schwefel", "rastrigin", "hgbat"), (1, 1, 1)),
    (("schwefel", "rastrigin", "elliptic"), (0.25, 1, 1e-7)),
    (("schwefel", "happycat", "elliptic", "weierstrass", "griewank"), (0.25, 1, 1e-7, 2.5, 10)),
    (("hgbat", "rastrigin", "schwefel", "weierstrass", "elliptic"), (10, 10, 2.5, 25, 1e-6)),
    (
        ("griewank-rosenbrock", "weierstrass", "schwefel", "scaffer-f6", "happycat"),
        (2.5, 10, 2.5, 5e-4, 1e-6),
    ),
    ((0, 1, 2), (1, 1, 1)),
    ((3, 4, 5), (1, 1, 1)),
)

CATEGORY_COUNTS = {
    "unimodal": len(_UNIMODAL),
    "multimodal": len(_MULTIMODAL),
    "hybrid": len(_HYBRID),
    "composition": len(_COMPOSITION),
}


def _draw_stack(D, rng, rotated=True):
    lo, hi = DEFAULT_BOUNDS
    margin = 0.1 * (hi - lo)
    shift = rng.uniform(lo + margin, hi - margin, D)
    rotation = random_rotation(D, rng) if rotated else np.eye(D)
    return TransformStack(shift, rotation)


def build_suite(D: int, seed: int = 0, official=None) -> list[BenchmarkFunction]:
    """Build the 30-function analog suite for dimension ``D``.

    Parameters
    ----------
    D : int
        Search-space dimension, at least 2.
    seed : int
        Seed for shifts, rotations and hybrid permutations.
    official : sequence of TransformStack or None, optional
        Stacks from :func:`load_official_data`. Entry ``i`` replaces the seeded
        shift/rotation of function ``F{i+1}``; ``None`` entries keep the
        seeded data. Compositions draw their components from the seed only.
    """
    if D < 2:
        raise ValueError(f"D must be >= 2, got {D}")
    official = list(official or [])
    suite = []

    def stack_for(index, rng, rotated=True):
        drawn = _draw_stack(D, rng, rotated)
        if index < len(official) and official[index] is not None:
            if official[index].D != D:
                raise ValueError(f"official stack for F{index + 1} has D={official[index].D}")
            return official[index]
        return drawn

    def rng_for(index):
        return np.random.default_rng(np.random.SeedSequence([seed, D, index]))

    def add(category, f, optimum, rotations, weights=None):
        index = len(suite)
        suite.append(
            BenchmarkFunction(
                id=f"F{index + 1}",
                category=category,
                D=D,
                f_star=100.0 * (index + 1),
                optimum=optimum,
                evaluate_batch=f,
                seed=seed,
                rotations=tuple(rotations),
                weights=weights,
            )
        )

    for name in _UNIMODAL:
        i = len(suite)
        stack = stack_for(i, rng_for(i))
        add("unimodal", _simple(name, stack), stack.shift, [stack.rotation])

    for name, rotated in _MULTIMODAL:
        i = len(suite)
        stack = stack_for(i, rng_for(i), rotated)
        add("multimodal", _simple(name, stack), stack.shift, [stack.rotation])

    hybrid_layouts = []
    for parts in _HYBRID:
        i = len(suite)
        rng = rng_for(i)
        stack = stack_for(i, rng)
        perm = rng.permutation(D)
        hybrid_layouts.append(parts)
        add("hybrid", _hybrid(parts, stack, perm), stack.shift, [stack.rotation])

    for members, lambdas in _COMPOSITION:
        i = len(suite)
        rng = rng_for(i)
        components, shifts, rotations = [], [], []
        for member in members:
            stack = _draw_stack(D, rng)
            if isinstance(member, int):
                comp = _hybrid(hybrid_layouts[member], stack, rng.permutation(D))
            else:
                comp = _simple(member, stack)
            components.append(comp)
            shifts.append(stack.shift)
            rotations.append(stack.rotation)
        shifts = np.array(shifts)
        biases = 100.0 * np.arange(len(members))
        f, weights = _composition(components, lambdas, biases, shifts)
        add("composition", f, shifts[0], rotations, weights)

    return suite


def suite_manifest(suite: Sequence[BenchmarkFunction]) -> list[dict]:
    return [
        {"id": fn.id, "category": fn.category, "D": fn.D, "f_star": fn.f_star, "seed": fn.seed}
        for fn in suite
    ]


def write_manifest(suite: Sequence[BenchmarkFunction], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(suite_manifest(suite), fh, indent=2)
        fh.write("\n")


class DataFileError(ValueError):
    """Malformed or inconsistent official-data file."""


def _read_stack(path: str, D: int) -> TransformStack:
    if not os.path.isfile(path):
        raise DataFileError(f"{path}: file not found")
    rows = []
    with open(path, encoding="ascii", errors="strict") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            try:
                rows.append((lineno, [float(tok) for tok in tokens]))
            except ValueError as exc:
                raise DataFileError(f"{path}:{lineno}: malformed number ({exc})") from None
    if not rows:
        raise DataFileError(f"{path}: empty file")
    lineno, shift = rows[0]
    if len(shift) != D:
        raise DataFileError(
            f"{path}:{lineno}: shift vector has length {len(shift)}, expected {D}"
        )
    matrix = rows[1:]
    if len(matrix) != D:
        raise DataFileError(
            f"{path}: dimension mismatch, found {len(matrix)} rotation rows, expected {D}"
        )
    for lineno, row in matrix:
        if len(row) != D:
            raise DataFileError(
                f"{path}:{lineno}: dimension mismatch, rotation row has {len(row)} values, expected {D}"
            )
    return TransformStack(np.array(shift), np.array([row for _, row in matrix]))


def load_official_data(path, D: int) -> list[TransformStack]:
    """Parse shift/rotation data files.

    Each file holds one stack: a line with the ``D`` shift values followed by
    ``D`` rotation rows, all whitespace-separated. ``path`` may be one file or
    a directory, in which case every ``*.txt`` file is read in natural
    ``F1, F2, ..., F10`` order.
    """
    path = os.fspath(path)
    if os.path.isdir(path):
        names = [n for n in os.listdir(path) if n.endswith(".txt")]
        names.sort(key=_natural_key)
        return [_read_stack(os.path.join(path, n), D) for n in names]
    return [_read_stack(path, D)]


def _natural_key(name: str):
    digits = "".join(ch if ch.isdigit() else " " for ch in name).split()
    return (int(digits[0]) if digits else -1, name)
