"""Resonance diagnostics: NDR-interval detection over shift windows,
lacunary scale ladders, and empirical double-resonance statistics.

A "window determinant" below is the length-ell Dirichlet determinant of the
shifted volume: f_ell evaluated at x + (n-1) omega equals the determinant
over the lattice window [n, n + ell - 1].  Scans share one orbit buffer of
potential values; each window remains an independent O(ell) recurrence, so a
full recompute reproduces the sweep bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .lyapunov import lyapunov_finite
from .operator import Potential, logdet_window_sweep
from .torus import SamplePlan, sample_phases

__all__ = [
    "NDRReport",
    "LadderLevel",
    "LacunaryLadder",
    "DoubleResonanceScan",
    "ndr_scan",
    "ladder",
    "paper_regime_ladder",
    "double_resonance_scan",
    "resonant_frequency_fraction",
]


# ---------------------------------------------------------------------------
# NDR scan


@dataclass(frozen=True)
class NDRReport:
    ell: int
    shift_range: tuple  # [n_lo, n_hi]
    threshold: float
    under_raw: tuple  # shifts failing the threshold
    under: tuple  # after absorbing short runs between failures
    min_component: int  # shortest surviving run of good shifts (0 if none)
    C: float
    sigma: float
    L_ell: float
    log_dets: np.ndarray

    @property
    def K_raw(self) -> int:
        return len(self.under_raw)

    @property
    def K(self) -> int:
        return len(self.under)

    def is_ndr(self, K_target: int) -> bool:
        return self.K <= K_target and self.min_component > self.ell ** (2.0 / self.sigma)


def _absorb_short_runs(n_lo: int, n_hi: int, under: np.ndarray, min_len: float):
    """Enlarge the failure set minimally so every surviving run of good
    shifts is longer than ``min_len``."""
    bad = set(int(v) for v in under)
    runs = []
    start = None
    for n in range(n_lo, n_hi + 1):
        if n in bad:
            if start is not None:
                runs.append((start, n - 1))
                start = None
        elif start is None:
            start = n
    if start is not None:
        runs.append((start, n_hi))
    kept = []
    for lo, hi in runs:
        if hi - lo + 1 <= min_len:
            bad.update(range(lo, hi + 1))
        else:
            kept.append((lo, hi))
    min_comp = min((hi - lo + 1 for lo, hi in kept), default=0)
    return tuple(sorted(bad)), min_comp


def ndr_scan(
    V: Potential,
    x,
    omega,
    E: float,
    ell: int,
    shift_range,
    C: float = 1.0,
    L_ell: Optional[float] = None,
    plan: Optional[SamplePlan] = None,
    sigma: float = 0.25,
    tau: float = 0.25,
) -> NDRReport:
    """Classify every shift n in the range against the window-determinant
    threshold ell*L_ell - C*ell^(1-tau/3).

    The failure set is reported raw and after minimal absorption of short
    good runs (runs not longer than ell^(2/sigma) are folded into the
    failure set).
    """
    if ell < 2:
        raise ValueError("ell must be >= 2")
    n_lo, n_hi = int(shift_range[0]), int(shift_range[1])
    if n_hi < n_lo:
        raise ValueError("empty shift range")
    if L_ell is None:
        plan = plan or SamplePlan(V.dimension, 256, 0, "low-discrepancy")
        L_ell = lyapunov_finite(V, omega, E, ell, plan).value
    values = V.orbit_values(x, omega, n_lo, n_hi + ell - 1)
    _, log_dets = logdet_window_sweep(values, ell, E)
    threshold = ell * float(L_ell) - C * ell ** (1.0 - tau / 3.0)
    shifts = np.arange(n_lo, n_hi + 1)
    under_raw = tuple(int(v) for v in shifts[~(log_dets > threshold)])
    under, min_comp = _absorb_short_runs(n_lo, n_hi, np.asarray(under_raw), ell ** (2.0 / sigma))
    return NDRReport(
        ell=ell,
        shift_range=(n_lo, n_hi),
        threshold=threshold,
        under_raw=under_raw,
        under=under,
        min_component=min_comp,
        C=C,
        sigma=sigma,
        L_ell=float(L_ell),
        log_dets=log_dets,
    )


# ---------------------------------------------------------------------------
# lacunary ladders


@dataclass(frozen=True)
class LadderLevel:
    c_lo: float
    c_hi: float
    K: Optional[int]  # ceil(exp(c_lo * ell^(sigma/2))); None when it overflows
    scale: Optional[int]  # floor(exp(c_hi * ell^(sigma/2))); None when it overflows
    K_admissible: bool  # K <= scale^((1-tau)/10)
    reachable: bool


@dataclass(frozen=True)
class LacunaryLadder:
    ell: int
    sigma: float
    tau: float
    levels: tuple
    top_admissible: bool  # top scale < exp(c_top * ell^sigma)

    @property
    def scales(self) -> tuple:
        return tuple(lv.scale for lv in self.levels)

    @property
    def sizes(self) -> tuple:
        return tuple(lv.K for lv in self.levels)


def ladder(ell: int, sigma: float, tau: float, constants: Sequence, c_top: float = 1.0) -> LacunaryLadder:
    """Derived scales scale_k = floor(exp(c_hi_k ell^(sigma/2))) and failure
    budgets K_k = ceil(exp(c_lo_k ell^(sigma/2))) for interleaved constants
    c_lo_1 < c_hi_1 < c_lo_2 < ...

    Inadmissible or unreachable levels are flagged, not rejected.
    """
    seq = []
    for pair in constants:
        lo, hi = float(pair[0]), float(pair[1])
        seq.extend([lo, hi])
    if any(b <= a for a, b in zip(seq, seq[1:])):
        raise ValueError("ladder constants must be strictly increasing, interleaved")
    base = float(ell) ** (sigma / 2.0)
    levels = []
    for pair in constants:
        lo, hi = float(pair[0]), float(pair[1])
        e_lo = lo * base
        e_hi = hi * base
        K = int(math.ceil(math.exp(e_lo))) if e_lo < 700 else None
        scale = int(math.floor(math.exp(e_hi))) if e_hi < 700 else None
        if K is not None and scale is not None:
            admissible = K <= scale ** ((1.0 - tau) / 10.0)
        else:
            admissible = False
        levels.append(LadderLevel(c_lo=lo, c_hi=hi, K=K, scale=scale, K_admissible=admissible, reachable=scale is not None))
    top_exp = float(constants[-1][1]) * base
    top_ok = (top_exp < 700) and (top_exp < c_top * float(ell) ** sigma)
    return LacunaryLadder(ell=int(ell), sigma=sigma, tau=tau, levels=tuple(levels), top_admissible=top_ok)


def paper_regime_ladder(ell: int, sigma: float, tau: float, d: int = 2) -> LacunaryLadder:
    """The (q-1)^2-level ladder of the same-scale elimination argument,
    q = 2^(2d+1), generated with placeholder interleaved constants.  For
    d = 2 that is 49 levels; the upper ones are flagged unreachable."""
    q = 2 ** (2 * d + 1)
    count = (q - 1) ** 2
    constants = [(2 * k + 1.0, 2 * k + 2.0) for k in range(count)]
    return ladder(ell, sigma, tau, constants)


# ---------------------------------------------------------------------------
# double resonances


@dataclass(frozen=True)
class DoubleResonanceScan:
    ell: int
    N: int
    threshold: float
    positions: tuple  # shifts m in [1, N] whose window determinant deviates
    distance_counts: tuple  # histogram rows (bin_lo, bin_hi, count)
    bin_width: int

    def has_pair_at_separation(self, t0: float) -> bool:
        # positions are sorted: a pair at separation >= t0 exists iff the
        # extreme pair is that far apart
        ps = self.positions
        return len(ps) >= 2 and (ps[-1] - ps[0]) >= t0


def double_resonance_scan(
    V: Potential,
    x,
    omega,
    E: float,
    ell: int,
    N: int,
    exponent: Optional[float] = None,
    L_ell: Optional[float] = None,
    plan: Optional[SamplePlan] = None,
    tau: float = 0.25,
    bin_width: Optional[int] = None,
) -> DoubleResonanceScan:
    """Positions m in [1, N] where the length-ell window determinant drops
    below ell L_ell - ell^p (p defaults to 1 - tau/2), with the histogram of
    pairwise distances between resonant positions."""
    if ell < 2 or N < 1:
        raise ValueError("need ell >= 2 and N >= 1")
    p = (1.0 - tau / 2.0) if exponent is None else float(exponent)
    if L_ell is None:
        plan = plan or SamplePlan(V.dimension, 256, 0, "low-discrepancy")
        L_ell = lyapunov_finite(V, omega, E, ell, plan).value
    values = V.orbit_values(x, omega, 1, N + ell - 1)
    _, log_dets = logdet_window_sweep(values, ell, E)
    threshold = ell * float(L_ell) - float(ell) ** p
    positions = np.arange(1, N + 1)[~(log_dets > threshold)]
    width = int(bin_width) if bin_width else ell
    counts = []
    if len(positions) >= 2:
        dists = (positions[None, :] - positions[:, None])[np.triu_indices(len(positions), k=1)]
        edges = np.arange(0, int(np.max(dists)) + width + 1, width)
        hist, _ = np.histogram(dists, bins=edges)
        counts = [(int(edges[i]), int(edges[i + 1]), int(hist[i])) for i in range(len(hist)) if hist[i] > 0]
    return DoubleResonanceScan(
        ell=ell,
        N=N,
        threshold=threshold,
        positions=tuple(int(v) for v in positions),
        distance_counts=tuple(counts),
        bin_width=width,
    )


def max_separation(positions) -> float:
    ps = np.asarray(positions)
    return float(ps[-1] - ps[0]) if len(ps) >= 2 else 0.0


def resonant_frequency_fraction(
    V: Potential,
    E: float,
    ell: int,
    N: int,
    omega_plan: SamplePlan,
    x_plan: SamplePlan,
    t0,
    exponent: Optional[float] = None,
    tau: float = 0.25,
    L_plan: Optional[SamplePlan] = None,
) -> np.ndarray:
    """Fraction of sampled frequencies for which some sampled phase exhibits
    a resonant pair at separation >= t0.

    ``t0`` may be a scalar or an array of separations; the result matches its
    shape and is non-increasing in t0 by construction (nested events).
    """
    t0s = np.atleast_1d(np.asarray(t0, dtype=float))
    omegas = sample_phases(omega_plan)
    xs = sample_phases(x_plan)
    hits = np.zeros(len(t0s))
    for i in range(omegas.shape[0]):
        best = 0.0
        for k in range(xs.shape[0]):
            scan = double_resonance_scan(
                V, xs[k], omegas[i], E, ell, N, exponent=exponent, tau=tau, plan=L_plan
            )
            best = max(best, max_separation(scan.positions))
            if best > np.max(t0s):
                break
        hits += best >= t0s
    out = hits / omegas.shape[0]
    return out if np.ndim(t0) else float(out[0])
