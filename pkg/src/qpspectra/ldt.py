"""Empirical large-deviation measurements and Green's-function machinery.

Deviation fractions for transfer norms and window determinants, the spectral
form of the deviation estimate, Green's functions through the determinant
ratio of Cramer's rule, the Poisson identity and its covering criterion, and
Wegner fractions / eigenvalue-graph spread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .lyapunov import lyapunov_finite, step_values_on_orbit
from .operator import LogDet, Potential, eigs, logdet_from_values, transfer_batch
from .torus import SamplePlan, sample_phases

__all__ = [
    "LDTReport",
    "GreensEntry",
    "GreensSingularError",
    "CoveringSoundnessError",
    "ldt_measure",
    "spectral_form_check",
    "greens_entry",
    "poisson_residual",
    "covering_verdict",
    "wegner_fraction",
    "graph_spread",
    "line_path",
]


class GreensSingularError(ValueError):
    """E is (numerically) an eigenvalue of the requested finite volume."""


class CoveringSoundnessError(AssertionError):
    """The covering criterion held but E was found in the spectrum."""


# ---------------------------------------------------------------------------
# deviation fractions


@dataclass(frozen=True)
class LDTReport:
    N: int
    threshold_exponent: float
    L_N_ref: float
    deviation_fraction: float
    target: str
    sample_count: int
    L_stderr: float = 0.0


def ldt_measure(
    V: Potential,
    omega,
    E,
    N: int,
    p: float,
    plan: SamplePlan,
    target: str = "transfer-norm",
    L_ref: Optional[float] = None,
) -> LDTReport:
    """Fraction of sampled phases with |log(target) - N L_N| > N^p.

    The reference exponent is the same-sample average unless ``L_ref`` is
    supplied.  For the determinant target a vanishing determinant contributes
    log 0 = -inf and therefore always counts as a deviation.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    if not 0.0 < p < 1.0:
        raise ValueError("threshold exponent must lie in (0, 1)")
    if plan.dimension != V.dimension:
        raise ValueError("sampling-plan dimension mismatch")
    xs = sample_phases(plan)
    vals = step_values_on_orbit(V, xs, omega, 1, N)
    if target == "transfer-norm":
        _, logs = transfer_batch(vals, E)
    elif target == "determinant":
        from .operator import logdet_columns

        _, logs = logdet_columns(vals, E)
    else:
        raise ValueError("target must be 'transfer-norm' or 'determinant'")
    finite = logs[np.isfinite(logs)]
    ref = float(np.mean(finite)) / N if L_ref is None else float(L_ref)
    stderr = float(np.std(finite, ddof=1)) / math.sqrt(len(finite)) / N if len(finite) > 1 else 0.0
    with np.errstate(invalid="ignore"):
        deviations = ~(np.abs(logs - N * ref) <= N**p)  # -inf (vanished determinant) deviates
    return LDTReport(
        N=N,
        threshold_exponent=p,
        L_N_ref=ref,
        deviation_fraction=float(np.mean(deviations)),
        target=target,
        sample_count=len(logs),
        L_stderr=stderr,
    )


@dataclass(frozen=True)
class SpectralFormReport:
    resolvent_log: float
    det_gap: float
    consistent: bool
    sigma: float
    tau: float


def spectral_form_check(
    V: Potential,
    x,
    omega,
    E: float,
    N: int,
    sigma: float = 0.25,
    tau: float = 0.25,
    L_ref: Optional[float] = None,
    plan: Optional[SamplePlan] = None,
) -> SpectralFormReport:
    """Check the implication: moderate resolvent => non-deviant determinant.

    resolvent_log = log ||(H_N - E)^{-1}|| computed exactly from the
    eigenvalues; det_gap = log|f_N| - N L_N.  The configured implication is
    resolvent_log <= N^(sigma/2)  =>  det_gap > -N^(1-tau/2); when E is an
    eigenvalue the premise fails and the implication holds vacuously.
    """
    es = eigs(V, x, omega, (1, N), want_vectors=False)
    dist = float(np.min(np.abs(es.eigenvalues - E)))
    resolvent_log = math.inf if dist == 0.0 else -math.log(dist)
    if L_ref is None:
        plan = plan or SamplePlan(V.dimension, 256, 0, "low-discrepancy")
        L_ref = lyapunov_finite(V, omega, E, N, plan).value
    f = dirichlet_logdet(V, x, omega, E, (1, N))
    det_gap = f.log_mag - N * L_ref
    premise = resolvent_log <= N ** (sigma / 2.0)
    conclusion = det_gap > -(N ** (1.0 - tau / 2.0))
    return SpectralFormReport(
        resolvent_log=resolvent_log,
        det_gap=det_gap,
        consistent=(not premise) or conclusion,
        sigma=sigma,
        tau=tau,
    )


def dirichlet_logdet(V: Potential, x, omega, E, interval) -> LogDet:
    from .operator import dirichlet_det

    return dirichlet_det(V, x, omega, E, interval)


# ---------------------------------------------------------------------------
# Green's functions via Cramer's rule


@dataclass(frozen=True)
class GreensEntry:
    interval: tuple
    j: int
    k: int
    value: float
    sign: float
    log_left: float  # log |f_[a, j-1]|
    log_right: float  # log |f_[k+1, b]|
    log_den: float  # log |f_[a, b]|

    @property
    def log_abs(self) -> float:
        return self.log_left + self.log_right - self.log_den


def greens_entry(V: Potential, x, omega, E: float, interval, j: int, k: int) -> GreensEntry:
    """G_[a,b](x, omega, E; j, k) by the determinant ratio.

    With the off-diagonals all equal to -1 the signed identity is
    G(j, k) = f_[a,j-1] * f_[k+1,b] / f_[a,b] for j <= k (and symmetrically
    for j > k).  Raises GreensSingularError when f_[a,b] vanishes.
    """
    a, b = int(interval[0]), int(interval[1])
    lo, hi = min(j, k), max(j, k)
    if not (a <= lo and hi <= b):
        raise ValueError("sites must lie inside the interval")
    vals = V.orbit_values(x, omega, a, b)
    den = logdet_from_values(vals, E)
    if den.is_zero:
        raise GreensSingularError(f"E={E} is an eigenvalue of H_[{a},{b}]")
    left = logdet_from_values(vals[: lo - a], E)
    right = logdet_from_values(vals[hi - a + 1 :], E)
    sign = left.sign * right.sign * den.sign
    log_abs = left.log_mag + right.log_mag - den.log_mag
    value = 0.0 if sign == 0 else sign * math.exp(log_abs) if log_abs < 700 else sign * math.inf
    return GreensEntry(
        interval=(a, b),
        j=j,
        k=k,
        value=float(value),
        sign=float(sign),
        log_left=left.log_mag,
        log_right=right.log_mag,
        log_den=den.log_mag,
    )


def poisson_residual(
    V: Potential,
    x,
    omega,
    E: float,
    psi: np.ndarray,
    volume,
    sub,
    m: int,
) -> float:
    """|psi(m) - G_[a,b](m,a) psi(a-1) - G_[a,b](m,b) psi(b+1)|.

    ``psi`` solves the difference equation on ``volume`` = [A, B] at energy E
    (an eigenvector of that volume), with the Dirichlet convention
    psi(A-1) = psi(B+1) = 0.  ``sub`` = [a, b] must be contained in the
    volume; the sub-volume determinant must not vanish.
    """
    A, B = int(volume[0]), int(volume[1])
    a, b = int(sub[0]), int(sub[1])
    if not (A <= a <= m <= b <= B):
        raise ValueError("need A <= a <= m <= b <= B")
    psi = np.asarray(psi, dtype=float)
    if len(psi) != B - A + 1:
        raise ValueError("psi length does not match the volume")
    sub_es = eigs(V, x, omega, (a, b), want_vectors=False)
    scale = 2.0 + V.sup_norm_bound() + abs(E)
    if float(np.min(np.abs(sub_es.eigenvalues - E))) <= 1e-10 * scale:
        raise GreensSingularError(f"E={E} is numerically in spec H_[{a},{b}]")

    def psival(n):
        return 0.0 if n < A or n > B else float(psi[n - A])

    ga = greens_entry(V, x, omega, E, (a, b), m, a)
    gb = greens_entry(V, x, omega, E, (a, b), m, b)
    return abs(psival(m) - ga.value * psival(a - 1) - gb.value * psival(b + 1))


def covering_verdict(V: Potential, x, omega, E: float, interval, cover: dict) -> bool:
    """Covering criterion: every site m has a window I_m = (a_m, b_m) with

        (1 - delta_{a,a_m}) |G_{I_m}(m, a_m)| + (1 - delta_{b,b_m}) |G_{I_m}(m, b_m)| < 1.

    A window whose determinant vanishes fails the criterion.  When the
    verdict is true, E not in spec H_[a,b] is a theorem; the eigensolver
    confirms it (CoveringSoundnessError on a counterexample).
    """
    a, b = int(interval[0]), int(interval[1])
    for m in range(a, b + 1):
        if m not in cover:
            raise ValueError(f"cover is missing site {m}")
        am, bm = int(cover[m][0]), int(cover[m][1])
        if not (a <= am <= m <= bm <= b):
            raise ValueError(f"window for site {m} must contain it and lie in the interval")
        total = 0.0
        try:
            if am != a:
                total += abs(greens_entry(V, x, omega, E, (am, bm), m, am).value)
            if bm != b:
                total += abs(greens_entry(V, x, omega, E, (am, bm), m, bm).value)
        except GreensSingularError:
            return False
        if not total < 1.0:
            return False
    es = eigs(V, x, omega, (a, b), want_vectors=False)
    if float(np.min(np.abs(es.eigenvalues - E))) == 0.0:
        raise CoveringSoundnessError("covering criterion held at an exact eigenvalue")
    return True


# ---------------------------------------------------------------------------
# Wegner fraction and graph spread


def wegner_fraction(V: Potential, omega, E: float, N: int, ell: float, plan: SamplePlan) -> float:
    """Fraction of sampled phases with dist(E, spec H_N(x, omega)) < exp(-ell).

    The distance is computed exactly from the sorted eigenvalues.  (The
    asymptotic admissibility window (2 log N)^(1/sigma) <= ell <= N is not
    reachable at desk scales and is not enforced.)
    """
    if N < 1 or ell <= 0:
        raise ValueError("need N >= 1 and ell > 0")
    if plan.dimension != V.dimension:
        raise ValueError("sampling-plan dimension mismatch")
    xs = sample_phases(plan)
    thr = math.exp(-ell)
    hits = 0
    for i in range(xs.shape[0]):
        es = eigs(V, xs[i], omega, (1, N), want_vectors=False)
        if float(np.min(np.abs(es.eigenvalues - E))) < thr:
            hits += 1
    return hits / xs.shape[0]


def line_path(x0, direction) -> Callable[[float], np.ndarray]:
    """The segment t -> x0 + t*direction on the torus, t in [0, 1]."""
    x0 = np.atleast_1d(np.asarray(x0.coords if hasattr(x0, "coords") else x0, dtype=float))
    direction = np.atleast_1d(np.asarray(direction, dtype=float))

    def path(t: float) -> np.ndarray:
        return np.mod(x0 + t * direction, 1.0)

    return path


def graph_spread(
    V: Potential,
    omega,
    N: int,
    j: int,
    path: Callable[[float], np.ndarray],
    samples: int = 2048,
    rel_tol: float = 0.01,
    max_samples: int = 1 << 14,
) -> float:
    """Length of the interval swept by the j-th eigenvalue along a phase path.

    Eigenvalues are continuous in the phase, so the image of a connected path
    is an interval; sampling yields a lower bound on its length, refined by
    doubling until the change drops below ``rel_tol``.
    """
    if not 0 <= j < N:
        raise ValueError("eigenvalue index out of range")

    def spread_at(count: int) -> float:
        ts = np.linspace(0.0, 1.0, count)
        lo, hi = math.inf, -math.inf
        for t in ts:
            es = eigs(V, path(float(t)), omega, (1, N), want_vectors=False)
            v = float(es.eigenvalues[j])
            lo, hi = min(lo, v), max(hi, v)
        return hi - lo

    count = max(2, samples)
    value = spread_at(count)
    while count < max_samples:
        count *= 2
        new = spread_at(count)
        if new <= 0 or abs(new - value) <= rel_tol * max(new, 1e-300):
            value = new
            break
        value = new
    return value
