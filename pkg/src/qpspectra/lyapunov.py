"""Finite-volume Lyapunov exponents and avalanche-principle machinery.

The finite-scale exponent is the phase average of (1/N) log ||M_N||_F over a
deterministic sample plan; the Frobenius norm is used (smooth, cheap, within
a factor sqrt(2) of the operator norm, contributing at most log(sqrt 2)/N).
The avalanche-principle checker works in the operator norm, where the
commuting-diagonal telescoping is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .operator import Potential, TransferProduct, transfer_batch
from .torus import SamplePlan, orbit_phases, sample_phases

__all__ = [
    "LyapEstimate",
    "APReport",
    "APMultiscale",
    "ContinuityReport",
    "lyapunov_finite",
    "avalanche_check",
    "ap_multiscale_L",
    "continuity_probe",
    "lipschitz_in_y",
    "step_values_on_orbit",
]

_PHASE_CHUNK = 1 << 22  # max N*M elements per evaluation chunk


@dataclass(frozen=True)
class LyapEstimate:
    N: int
    y: Optional[tuple]
    value: float
    stderr: float
    sample_count: int


def step_values_on_orbit(V: Potential, xs: np.ndarray, omega, first: int, last: int, y=None) -> np.ndarray:
    """Array of V(x_i + n*omega (+iy)) with shape (last-first+1, M)."""
    steps = np.arange(first, last + 1)
    nw = orbit_phases(np.zeros(xs.shape[1]), omega, steps)  # (N, d)
    phases = np.mod(nw[:, None, :] + xs[None, :, :], 1.0)  # (N, M, d)
    return V.evaluate(phases, y=y)


def _norm_logs_over_plan(V, omega, E, N, xs, y):
    M = xs.shape[0]
    if N * M <= _PHASE_CHUNK:
        vals = step_values_on_orbit(V, xs, omega, 1, N, y=y)
        _, ls = transfer_batch(vals, E)
        return ls
    chunk = max(1, _PHASE_CHUNK // N)
    out = np.empty(M)
    for s in range(0, M, chunk):
        vals = step_values_on_orbit(V, xs[s : s + chunk], omega, 1, N, y=y)
        _, ls = transfer_batch(vals, E)
        out[s : s + chunk] = ls
    return out


def lyapunov_finite(
    V: Potential,
    omega,
    E,
    N: int,
    plan: SamplePlan,
    y=None,
    phase_offset=None,
) -> LyapEstimate:
    """Phase average of (1/N) log ||M_N(x + iy, omega, E)||_F over the plan.

    The per-phase reduction order is fixed by the plan, so results are
    independent of any outer parallelism.  ``phase_offset`` translates the
    whole sample set on the torus (used by the translation-invariance checks).
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if plan.dimension != V.dimension:
        raise ValueError("sampling-plan dimension mismatch")
    if y is not None:
        yv = np.zeros(V.dimension) + np.asarray(y, dtype=float)
        if math.sqrt(float(yv @ yv)) >= V.rho:
            raise ValueError("imaginary displacement outside |y| < rho")
    xs = sample_phases(plan)
    if phase_offset is not None:
        xs = np.mod(xs + np.asarray(phase_offset, dtype=float), 1.0)
    ls = _norm_logs_over_plan(V, omega, E, N, xs, y)
    M = len(ls)
    value = float(np.mean(ls)) / N
    stderr = float(np.std(ls, ddof=1)) / math.sqrt(M) / N if M > 1 else 0.0
    return LyapEstimate(N=N, y=None if y is None else tuple(np.atleast_1d(y)), value=value, stderr=stderr, sample_count=M)


# ---------------------------------------------------------------------------
# avalanche principle


@dataclass(frozen=True)
class APReport:
    n: int
    mu: float
    hypotheses_ok: bool
    det_ok: bool
    size_ok: bool
    gap_ok: bool
    lhs_residual: float
    bound: float  # n / mu


def _as_products(matrices) -> list:
    out = []
    for m in matrices:
        if isinstance(m, TransferProduct):
            out.append(m)
        else:
            a = np.asarray(m, dtype=float if not np.iscomplexobj(m) else complex)
            fro = float(np.sqrt((np.abs(a) ** 2).sum()))
            if fro == 0:
                raise ValueError("zero matrix in avalanche chain")
            out.append(TransferProduct(unit=a / fro, log_scale=math.log(fro)))
    return out


def _log_det_abs(tp: TransferProduct) -> float:
    u = tp.unit
    det = complex(u[0, 0] * u[1, 1] - u[0, 1] * u[1, 0])
    if det == 0:
        return -math.inf
    return 2.0 * tp.log_scale + math.log(abs(det))


def avalanche_check(matrices: Sequence, mu: float, det_tol: float = 1e-6, assume_unimodular: bool = False) -> APReport:
    """Evaluate the avalanche-principle hypotheses and its left-hand bracket.

    Hypotheses (all in log domain, operator norm):
      (i)   max_j |det A_j| <= 1 (up to det_tol in the log),
      (ii)  min_j ||A_j|| >= mu > n,
      (iii) max_j [log||A_{j+1}|| + log||A_j|| - log||A_{j+1} A_j||] < log(mu)/2.

    The residual is |log||A_n...A_1|| + sum_{j=2}^{n-1} log||A_j||
    - sum_{j=1}^{n-1} log||A_{j+1}A_j|||; when the hypotheses hold it is
    bounded by an absolute constant times n/mu.

    ``assume_unimodular`` skips (i); products of one-step cocycle matrices
    have determinant 1 exactly and their normalized representation cannot
    certify it once the contracting direction underflows.
    """
    chain = _as_products(matrices)
    n = len(chain)
    if n < 3:
        raise ValueError("avalanche chains need n >= 3")
    single_logs = np.array([tp.spectral_log for tp in chain])
    pair_logs = np.array([(chain[j + 1] @ chain[j]).spectral_log for j in range(n - 1)])

    if assume_unimodular:
        det_ok = True
    else:
        det_ok = all(_log_det_abs(tp) <= det_tol for tp in chain)
    # boundary case ||A_j|| == mu must pass; allow one ulp of slack in the log
    size_ok = bool(np.all(single_logs >= math.log(mu) - 1e-12)) and (mu > n)
    gaps = single_logs[1:] + single_logs[:-1] - pair_logs
    gap_ok = bool(np.max(gaps) < 0.5 * math.log(mu))

    full = chain[0]
    for tp in chain[1:]:
        full = tp @ full
    lhs = abs(float(full.spectral_log + single_logs[1:-1].sum() - pair_logs.sum()))
    return APReport(
        n=n,
        mu=float(mu),
        hypotheses_ok=det_ok and size_ok and gap_ok,
        det_ok=det_ok,
        size_ok=size_ok,
        gap_ok=gap_ok,
        lhs_residual=lhs,
        bound=n / float(mu),
    )


@dataclass(frozen=True)
class APMultiscale:
    value: float
    stderr: float
    mu: float
    block_length: int
    block_count: int
    failure_rate: float
    reliable: bool


def _sigma_max_batch(units: np.ndarray) -> np.ndarray:
    fro2 = (np.abs(units) ** 2).sum(axis=(1, 2))
    det = units[:, 0, 0] * units[:, 1, 1] - units[:, 0, 1] * units[:, 1, 0]
    disc = np.maximum(fro2 * fro2 - 4.0 * np.abs(det) ** 2, 0.0)
    return np.sqrt(0.5 * (fro2 + np.sqrt(disc)))


def ap_multiscale_L(
    V: Potential,
    omega,
    E,
    ell: int,
    n: int,
    plan: SamplePlan,
    mu: Optional[float] = None,
    y=None,
) -> APMultiscale:
    """Estimate the per-site exponent at scale n*ell through the AP bracket.

    Blocks are A_j = M_ell(x + (j-1) ell omega); the bracket
    sum_j log||A_{j+1}A_j|| - sum_j log||A_j|| approximates N log||M_N||,
    N = n*ell.  Hypothesis failures are counted per phase sample; the
    estimate is flagged unreliable when more than 10% of samples fail.
    """
    if n < 3:
        raise ValueError("need at least 3 blocks")
    if plan.dimension != V.dimension:
        raise ValueError("sampling-plan dimension mismatch")
    if mu is None:
        gamma = lyapunov_finite(V, omega, E, ell, SamplePlan(plan.dimension, 128, plan.seed, "low-discrepancy"), y=y).value
        mu = math.exp(0.5 * ell * gamma)
    xs = sample_phases(plan)
    M = xs.shape[0]
    vals = step_values_on_orbit(V, xs, omega, 1, n * ell, y=y)

    units = []
    scales = []
    for j in range(n):
        u, ls = transfer_batch(vals[j * ell : (j + 1) * ell], E)
        units.append(u)
        scales.append(ls)
    single = np.stack([ls + np.log(_sigma_max_batch(u)) for u, ls in zip(units, scales)])  # (n, M)

    pair = np.empty((n - 1, M))
    for j in range(n - 1):
        raw = units[j + 1] @ units[j]
        fro = np.sqrt((np.abs(raw) ** 2).sum(axis=(1, 2)))
        pair[j] = scales[j + 1] + scales[j] + np.log(_sigma_max_batch(raw / fro[:, None, None])) + np.log(fro)

    bracket = pair.sum(axis=0) - single[1:-1].sum(axis=0)  # per sample
    per_site = bracket / (n * ell)
    value = float(np.mean(per_site))
    stderr = float(np.std(per_site, ddof=1)) / math.sqrt(M) if M > 1 else 0.0

    log_mu = math.log(mu)
    size_fail = np.any(single < log_mu, axis=0) | (not mu > n)
    gap_fail = np.any(single[1:] + single[:-1] - pair >= 0.5 * log_mu, axis=0)
    failure_rate = float(np.mean(size_fail | gap_fail))
    return APMultiscale(
        value=value,
        stderr=stderr,
        mu=float(mu),
        block_length=ell,
        block_count=n,
        failure_rate=failure_rate,
        reliable=failure_rate <= 0.10,
    )


# ---------------------------------------------------------------------------
# continuity diagnostics


@dataclass(frozen=True)
class ContinuityChannel:
    delta: float
    measured: float
    bound: float
    bound_valid: bool  # the cited estimates require bound < 1/2

    @property
    def ok(self) -> bool:
        return self.measured <= self.bound

    @property
    def ratio(self) -> float:
        return self.measured / self.bound if self.bound > 0 else math.inf


@dataclass(frozen=True)
class ContinuityReport:
    channels: dict


def _coefficient_table(V: Potential) -> dict:
    table = {(0,) * V.dimension: complex(V.c0)}
    for k, c in zip(V.ks, V.cs):
        table[k] = complex(c)
        table[tuple(-v for v in k)] = complex(c).conjugate()
    return table


def potential_difference_bound(V: Potential, W: Potential) -> float:
    """Upper bound for sup |V - W| on the real torus."""
    if V.dimension != W.dimension:
        raise ValueError("dimension mismatch")
    tv, tw = _coefficient_table(V), _coefficient_table(W)
    keys = set(tv) | set(tw)
    return float(sum(abs(tv.get(k, 0.0) - tw.get(k, 0.0)) for k in keys))


def continuity_probe(
    V: Potential,
    x0,
    omega0,
    E0: float,
    N: int,
    dx: float = 0.0,
    domega: float = 0.0,
    dE: float = 0.0,
    V_perturbed: Optional[Potential] = None,
    tau: float = 0.25,
    margin_const: float = 3.0,
) -> ContinuityReport:
    """Measure |Δ log||M_N||| under small perturbations against its bounds.

    Phase/frequency/energy channels use the crude modulus of continuity
    (C + |E_1| + |E_2|)^N * δ with C = 2 + sup|V|; the potential channel uses
    ||V - V~||_inf * exp(N L + margin * N^(1-tau)) with the local exponent
    log||M_N(x0)||/N standing in for N L.  Perturbations are applied to the
    first coordinate.
    """
    from .operator import transfer  # local import to avoid cycle noise

    base = transfer(V, x0, omega0, E0, (1, N)).frobenius_log
    x0v = np.atleast_1d(np.asarray(x0.coords if hasattr(x0, "coords") else x0, dtype=float))
    w0v = np.atleast_1d(np.asarray(omega0.coords if hasattr(omega0, "coords") else omega0, dtype=float))
    C = 2.0 + V.sup_norm_bound()
    channels = {}

    def crude_bound(delta, E1):
        b = (C + abs(E0) + abs(E1)) ** N * abs(delta) if N * math.log(C + abs(E0) + abs(E1)) < 700 else math.inf
        return b

    if dx != 0.0:
        xp = np.mod(x0v + np.eye(len(x0v))[0] * dx, 1.0)
        measured = abs(transfer(V, xp, omega0, E0, (1, N)).frobenius_log - base)
        b = crude_bound(dx, E0)
        channels["x"] = ContinuityChannel(dx, measured, b, b < 0.5)
    if domega != 0.0:
        wp = np.mod(w0v + np.eye(len(w0v))[0] * domega, 1.0)
        measured = abs(transfer(V, x0v, wp, E0, (1, N)).frobenius_log - base)
        b = crude_bound(domega, E0)
        channels["omega"] = ContinuityChannel(domega, measured, b, b < 0.5)
    if dE != 0.0:
        measured = abs(transfer(V, x0v, w0v, E0 + dE, (1, N)).frobenius_log - base)
        b = crude_bound(dE, E0 + dE)
        channels["E"] = ContinuityChannel(dE, measured, b, b < 0.5)
    if V_perturbed is not None:
        diff = potential_difference_bound(V, V_perturbed)
        measured = abs(transfer(V_perturbed, x0v, w0v, E0, (1, N)).frobenius_log - base)
        exponent = base + margin_const * N ** (1.0 - tau)
        b = diff * math.exp(min(exponent, 700.0))
        channels["potential"] = ContinuityChannel(diff, measured, b, b < 0.5)
    if dx == 0.0 and domega == 0.0 and dE == 0.0 and V_perturbed is None:
        channels["null"] = ContinuityChannel(0.0, 0.0, 0.0, True)
    return ContinuityReport(channels=channels)


def lipschitz_in_y(
    V: Potential,
    omega,
    E,
    N: int,
    y_grid: Sequence[float],
    plan: SamplePlan,
) -> dict:
    """Finite-difference slopes of y -> L_N(y, omega, E) along each axis.

    The grid must stay inside |y| < rho/2.  Returns per-axis max |slope| and
    the overall max.
    """
    ts = np.asarray(sorted(float(t) for t in y_grid))
    if np.max(np.abs(ts)) >= V.rho / 2.0:
        raise ValueError("y grid must stay inside |y| < rho/2")
    per_axis = {}
    overall = 0.0
    for axis in range(V.dimension):
        vals = []
        for t in ts:
            y = np.zeros(V.dimension)
            y[axis] = t
            vals.append(lyapunov_finite(V, omega, E, N, plan, y=y).value)
        slopes = np.diff(np.asarray(vals)) / np.diff(ts)
        mx = float(np.max(np.abs(slopes))) if len(slopes) else 0.0
        per_axis[axis] = mx
        overall = max(overall, mx)
    return {"max_slope": overall, "per_axis": per_axis, "N": N}
