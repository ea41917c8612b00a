"""Points and frequency vectors on the d-torus.

Torus metric, Diophantine verification over a finite lattice window, orbit
phase generation x + n*omega with compensated arithmetic, and deterministic
phase sampling (grid / uniform-random / low-discrepancy).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

__all__ = [
    "Phase",
    "Frequency",
    "SamplePlan",
    "DiophantineReport",
    "torus_norm",
    "diophantine_check",
    "sample_phases",
    "orbit_phases",
]

# Veltkamp splitter: splits a double into a 26-bit head and a tail so that
# n * head is exact for |n| <= 2**26 (covers orbit lengths up to ~6.7e7).
_SPLITTER = 2.0**27 + 1.0


def torus_norm(t):
    """Distance from t to the nearest integer; result in [0, 1/2].

    Accepts scalars or arrays.
    """
    t = np.asarray(t, dtype=float)
    r = np.abs(t - np.round(t))
    return float(r) if r.ndim == 0 else r


def _as_coords(x) -> np.ndarray:
    if isinstance(x, (Phase, Frequency)):
        return np.asarray(x.coords, dtype=float)
    a = np.atleast_1d(np.asarray(x, dtype=float))
    return a


@dataclass(frozen=True)
class Phase:
    """A point on T^d, stored reduced to [0, 1)^d."""

    coords: tuple

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.coords))
        if len(c) < 1:
            raise ValueError("Phase needs dimension >= 1")
        if any(not (0.0 <= v < 1.0) for v in c):
            raise ValueError("Phase coordinates must lie in [0, 1)")
        object.__setattr__(self, "coords", c)

    @property
    def dimension(self) -> int:
        return len(self.coords)

    @staticmethod
    def reduce(values) -> "Phase":
        v = np.atleast_1d(np.asarray(values, dtype=float))
        return Phase(tuple(np.mod(v, 1.0)))


@dataclass(frozen=True)
class Frequency:
    """Frequency vector omega in [0,1)^d with Diophantine parameters (a, b).

    The condition ||k.omega|| >= a / |k|^b (sup-norm on k) is not validated at
    construction; use :func:`diophantine_check` against a finite lattice window.
    """

    coords: tuple
    diophantine_a: float
    diophantine_b: float

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.coords))
        if len(c) < 1:
            raise ValueError("Frequency needs dimension >= 1")
        if any(not (0.0 <= v < 1.0) for v in c):
            raise ValueError("Frequency coordinates must lie in [0, 1)")
        if not self.diophantine_a > 0:
            raise ValueError("diophantine_a must be positive")
        if not self.diophantine_b > len(c):
            raise ValueError("diophantine_b must exceed the dimension")
        object.__setattr__(self, "coords", c)

    @property
    def dimension(self) -> int:
        return len(self.coords)


@dataclass(frozen=True)
class DiophantineReport:
    ok: bool
    worst_k: tuple
    worst_margin: float  # min over 0<|k|<=N of ||k.omega|| * |k|^b


def diophantine_check(omega: Frequency, N: int) -> DiophantineReport:
    """Check ||k.omega|| >= a/|k|^b for all 0 < |k|_sup <= N.

    worst_k minimizes ||k.omega|| * |k|^b over the window; worst_margin is that
    minimum, so ok == (worst_margin >= a).  Only one of each {k, -k} pair is
    scanned (the torus norm is even).
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    w = np.asarray(omega.coords, dtype=float)
    b = float(omega.diophantine_b)
    d = w.size

    best_val = math.inf
    best_k = None
    if d == 1:
        k = np.arange(1, N + 1, dtype=float)
        vals = torus_norm(k * w[0]) * k**b
        i = int(np.argmin(vals))
        best_val = float(vals[i])
        best_k = (int(k[i]),)
    else:
        # Half-lattice: first nonzero coordinate positive.  Chunked over the
        # leading coordinate to bound memory for large N.
        rest_shape = [np.arange(-N, N + 1)] * (d - 1)
        rest = np.stack(np.meshgrid(*rest_shape, indexing="ij"), axis=-1).reshape(-1, d - 1)
        sup_rest = np.max(np.abs(rest), axis=1) if d > 1 else np.zeros(len(rest))
        for k1 in range(0, N + 1):
            if k1 == 0:
                # first coordinate zero: recurse on the remaining block via the
                # positivity of the first nonzero entry
                mask = np.zeros(len(rest), dtype=bool)
                for j in range(d - 1):
                    lead_zero = np.all(rest[:, :j] == 0, axis=1) if j > 0 else np.ones(len(rest), dtype=bool)
                    mask |= lead_zero & (rest[:, j] > 0)
                block = rest[mask]
            else:
                block = rest
            if len(block) == 0:
                continue
            ks = np.concatenate([np.full((len(block), 1), k1), block], axis=1)
            sup = np.maximum(k1, np.max(np.abs(block), axis=1))
            dots = ks @ w
            vals = torus_norm(dots) * sup.astype(float) ** b
            i = int(np.argmin(vals))
            if vals[i] < best_val:
                best_val = float(vals[i])
                best_k = tuple(int(v) for v in ks[i])

    return DiophantineReport(ok=best_val >= omega.diophantine_a, worst_k=best_k, worst_margin=best_val)


@dataclass(frozen=True)
class SamplePlan:
    """Deterministic plan for sampling M phases on T^d.

    Equal plans produce bitwise-equal sample sequences.  Schemes:

    - ``grid``: in d=1 the points {0, 1/M, ..., (M-1)/M}; in d>1 the first M
      points of the product grid with ceil(M^(1/d)) points per axis, in
      row-major order.
    - ``uniform-random``: numpy PCG64 stream seeded by ``seed``.
    - ``low-discrepancy``: scrambled Halton sequence seeded by ``seed``.
    """

    dimension: int
    count: int
    seed: int = 0
    scheme: str = "grid"

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.scheme not in ("grid", "uniform-random", "low-discrepancy"):
            raise ValueError(f"unknown sampling scheme {self.scheme!r}")


def sample_phases(plan: SamplePlan) -> np.ndarray:
    """Generate the plan's phases as an (M, d) array with entries in [0, 1)."""
    d, M = plan.dimension, plan.count
    if plan.scheme == "grid":
        if d == 1:
            return (np.arange(M, dtype=float) / M).reshape(M, 1)
        side = int(math.ceil(M ** (1.0 / d)))
        while side**d < M:
            side += 1
        axes = [np.arange(side, dtype=float) / side] * d
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        return pts[:M]
    if plan.scheme == "uniform-random":
        rng = np.random.default_rng(plan.seed)
        return rng.random((M, d))
    sampler = qmc.Halton(d=d, scramble=True, seed=plan.seed)
    return np.mod(sampler.random(M), 1.0)


def _split(w: float):
    t = _SPLITTER * w
    hi = t - (t - w)
    return hi, w - hi


def orbit_phases(x, omega, n) -> np.ndarray:
    """Phases x + n*omega reduced to [0,1)^d, for integer shifts n.

    n may be a scalar or 1-d integer array; the result has shape (len(n), d).
    Each coordinate of n*omega is evaluated through a Veltkamp head/tail split
    so the reduction stays accurate to ~1e-16 absolute for |n| up to 1e6
    (plain multiplication loses ~|n|*eps before reduction).
    """
    xs = _as_coords(x)
    ws = _as_coords(omega)
    if xs.size != ws.size:
        raise ValueError("phase/frequency dimension mismatch")
    n = np.atleast_1d(np.asarray(n))
    if np.max(np.abs(n)) > 2**26:
        raise ValueError("orbit shift too large for exact split arithmetic")
    nf = n.astype(float)
    out = np.empty((nf.size, xs.size))
    for j in range(xs.size):
        hi, lo = _split(ws[j])
        main = np.mod(nf * hi, 1.0)  # exact: the product is exact, fmod is exact
        out[:, j] = np.mod(main + (nf * lo + xs[j]), 1.0)
    return out
