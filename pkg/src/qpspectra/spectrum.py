"""Restricted spectrum sets, inclusion/excess reports, and homogeneity
profiles.

The restricted set intersects fattened finite-volume spectra over a ladder of
scales N^(s^k) (edge-localized eigenvalues fail to persist across scales and
drop out), then unions over sampled phases.  Scales are clamped to a hard cap;
the asymptotic depth 2^(2d+1) - 1 is recorded in documentation only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .intervals import IntervalSet
from .operator import Potential, eigs
from .torus import SamplePlan, sample_phases

__all__ = [
    "RestrictedSpectrumSpec",
    "ThmDReport",
    "default_rho",
    "finite_spectrum_set",
    "restricted_spectrum",
    "thmD_report",
    "homogeneity_profile",
]

_SCALE_CAP_DEFAULT = 4096


def finite_spectrum_set(V: Potential, omega, x, N: int) -> IntervalSet:
    """spec H_[-N, N](x, omega) as a degenerate interval set."""
    es = eigs(V, x, omega, (-N, N), want_vectors=False)
    return IntervalSet.from_points(es.eigenvalues.tolist())


@dataclass(frozen=True)
class RestrictedSpectrumSpec:
    """Parameters of the restricted set: base scale, ratio, depth, and the
    fattening radii rho (one per depth level)."""

    base: int
    ratio: int
    depth: int
    rho: tuple
    plan: SamplePlan
    cap: int = _SCALE_CAP_DEFAULT

    def __post_init__(self):
        if self.base < 1 or self.ratio <= 1 or self.depth < 0:
            raise ValueError("need base >= 1, ratio > 1, depth >= 0")
        rho = tuple(float(r) for r in self.rho)
        if len(rho) != self.depth + 1:
            raise ValueError("rho must have depth + 1 entries")
        if any(r <= 0 for r in rho):
            raise ValueError("rho entries must be positive")
        object.__setattr__(self, "rho", rho)

    @property
    def scales(self) -> tuple:
        out = []
        for k in range(self.depth + 1):
            exact = float(self.base) ** (self.ratio**k)
            out.append(int(min(exact, self.cap)))
        return tuple(out)

    @property
    def capped(self) -> bool:
        return any(float(self.base) ** (self.ratio**k) > self.cap for k in range(self.depth + 1))


def restricted_spectrum(spec: RestrictedSpectrumSpec, V: Potential, omega) -> IntervalSet:
    """Union over sampled phases of the intersection over scales of the
    rho_k-fattened finite-volume spectra."""
    xs = sample_phases(spec.plan)
    scales = spec.scales
    pieces = []
    for i in range(xs.shape[0]):
        acc: Optional[IntervalSet] = None
        for k, Nk in enumerate(scales):
            fat = finite_spectrum_set(V, omega, xs[i], Nk).fatten(spec.rho[k])
            acc = fat if acc is None else acc.intersect(fat)
            if acc.is_empty:
                break
        pieces.append(acc)
    return IntervalSet.union_all(pieces)


@dataclass(frozen=True)
class ThmDReport:
    inclusion_defect: float  # measure(reference \\ restricted) within the window
    excess: float  # measure(restricted \\ reference) within the window
    restricted: IntervalSet
    reference: IntervalSet
    window: tuple


def default_rho(N: int, gamma: float, depth: int) -> tuple:
    """Fattening radii: rho_0 = exp(-N^(1/4)), rho_k = exp(-gamma N / 10)."""
    r0 = math.exp(-(float(N) ** 0.25))
    rk = math.exp(-gamma * N / 10.0)
    return (r0,) + (rk,) * depth


def thmD_report(
    V: Potential,
    omega,
    N: int,
    s: int,
    depth: int,
    rho,
    window,
    plan: SamplePlan,
    reference: Optional[IntervalSet] = None,
    reference_plan: Optional[SamplePlan] = None,
    reference_cap: int = _SCALE_CAP_DEFAULT,
    cap: int = _SCALE_CAP_DEFAULT,
) -> ThmDReport:
    """Inclusion defect and excess of the restricted set against a reference
    approximation of the full spectrum.

    The default reference is the restricted set at base 4N, depth 1, with
    tight fattening 1e-8 and a dense phase plan; it is itself an
    approximation, so both defects are reported, never asserted.
    """
    lo, hi = float(window[0]), float(window[1])
    spec = RestrictedSpectrumSpec(base=N, ratio=s, depth=depth, rho=tuple(rho), plan=plan, cap=cap)
    sn = restricted_spectrum(spec, V, omega)
    if reference is None:
        rplan = reference_plan or SamplePlan(V.dimension, 2000, plan.seed + 1, "low-discrepancy")
        rspec = RestrictedSpectrumSpec(
            base=4 * N, ratio=s, depth=1, rho=(1e-8, 1e-8), plan=rplan, cap=reference_cap
        )
        reference = restricted_spectrum(rspec, V, omega)
    win = IntervalSet.interval(lo, hi)
    sn_w = sn.intersect(win)
    ref_w = reference.intersect(win)
    return ThmDReport(
        inclusion_defect=ref_w.difference(sn).measure(),
        excess=sn_w.difference(reference).measure(),
        restricted=sn,
        reference=reference,
        window=(lo, hi),
    )


def homogeneity_profile(S: IntervalSet, window, deltas, n_samples: int = 32) -> dict:
    """Ratios mes(S intersect (E - delta, E + delta)) / delta for energies
    sampled from S inside the window.

    Returns per-(E, delta) rows and the minimum ratio per delta (the
    homogeneity floor to compare against 1/2).
    """
    win = IntervalSet.interval(float(window[0]), float(window[1]))
    inside = S.intersect(win)
    energies = inside.sample_points(n_samples)
    rows = []
    summary = {}
    for d in deltas:
        d = float(d)
        ratios = []
        for E in energies:
            m = S.intersect(IntervalSet.interval(E - d, E + d)).measure()
            ratios.append(m / d)
            rows.append({"E": float(E), "delta": d, "ratio": m / d})
        summary[d] = min(ratios) if ratios else math.nan
    return {"rows": rows, "min_ratio": summary, "sample_count": len(energies)}
