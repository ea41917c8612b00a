"""Zero counting, Weierstrass preparation, resultants, and annulus gaps.

Analytic data enters through a handle protocol: a handle is a callable
``z -> (log_abs, dlog)`` giving log|f(z)| (-inf at a zero) and the exact
logarithmic derivative f'(z)/f(z).  Window determinants provide this through
their derivative recurrence; plain functions can be wrapped with
:func:`handle_from_function`.  All contour work uses uniform trapezoid
quadrature on circles, which is spectrally accurate for analytic integrands.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .operator import Potential, logdet_from_values

__all__ = [
    "DiskSpec",
    "MonicLocal",
    "PrepResult",
    "ResultantResult",
    "SeparationFloorResult",
    "AnnulusGap",
    "ContourNearZeroError",
    "WindingNotIntegerError",
    "ResultantDisagreementError",
    "handle_from_function",
    "determinant_handle",
    "count_zeros",
    "weierstrass_prep",
    "resultant",
    "separation_floor",
    "annulus_gap",
]

_NEWTON_DEGREE_CAP = 32


class ContourNearZeroError(ArithmeticError):
    """|f| dips too close to zero on every retried contour radius."""


class WindingNotIntegerError(ArithmeticError):
    """The winding quadrature did not stabilize near an integer."""


class ResultantDisagreementError(ArithmeticError):
    """Sylvester and root-product resultants disagree beyond tolerance."""


@dataclass(frozen=True)
class DiskSpec:
    center: complex
    radius: float
    nodes: int = 64

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        q = int(self.nodes)
        if q < 64 or q & (q - 1):
            raise ValueError("node count must be a power of two, at least 64")


@dataclass(frozen=True)
class MonicLocal:
    """Monic polynomial with all roots inside its origin disk.

    Coefficients are in the absolute variable: P(z) = z^k + coeffs[k-1]
    z^(k-1) + ... + coeffs[0].
    """

    coeffs: tuple  # a_0 .. a_{k-1}
    disk: DiskSpec

    @property
    def degree(self) -> int:
        return len(self.coeffs)

    def __call__(self, z):
        zz = np.asarray(z, dtype=complex)
        acc = np.ones_like(zz)
        for a in reversed(self.coeffs):
            acc = acc * zz + a
        return acc if acc.ndim else complex(acc)

    def roots(self) -> np.ndarray:
        if self.degree == 0:
            return np.zeros(0, dtype=complex)
        return np.roots(np.concatenate(([1.0 + 0j], np.asarray(self.coeffs, dtype=complex)[::-1])))

    def validate(self, tol: float = 1e-6) -> None:
        r = self.roots()
        if len(r) and np.max(np.abs(r - self.disk.center)) > self.disk.radius * (1 + tol):
            raise AssertionError("a root escaped the origin disk")


# ---------------------------------------------------------------------------
# handles


def handle_from_function(f: Callable, df: Callable) -> Callable:
    """Wrap a plain analytic function and its derivative into a handle."""

    def handle(z):
        v = complex(f(z))
        d = complex(df(z))
        if v == 0:
            return -math.inf, 0.0j
        return math.log(abs(v)), d / v

    return handle


def determinant_handle(V: Potential, x, omega, interval) -> Callable:
    """Handle for E -> det(H_[a,b](x, omega) - E) with the exact derivative
    recurrence (no finite differences)."""
    a, b = int(interval[0]), int(interval[1])
    values = V.orbit_values(x, omega, a, b)

    def handle(E):
        ld = logdet_from_values(values, complex(E), derivative=True)
        return ld.log_mag, (ld.dlog if ld.dlog is not None else 0.0j)

    return handle


# ---------------------------------------------------------------------------
# contour quadrature


def _contour_samples(handle, center, radius, Q):
    theta = 2.0 * math.pi * np.arange(Q) / Q
    unit = np.exp(1j * theta)
    nodes = center + radius * unit
    logs = np.empty(Q)
    dlogs = np.empty(Q, dtype=complex)
    for i in range(Q):
        la, dl = handle(complex(nodes[i]))
        logs[i] = la
        dlogs[i] = dl
    return nodes, unit, logs, dlogs


def _power_sums_from_samples(radius, unit, dlogs, pmax):
    """(1/2 pi i) \\oint (z-c)^p f'/f dz for p = 0..pmax, trapezoid rule."""
    Q = len(unit)
    base = (radius / Q) * unit * dlogs
    out = np.empty(pmax + 1, dtype=complex)
    w = np.ones(Q, dtype=complex)
    for p in range(pmax + 1):
        out[p] = np.sum(base * w)
        w = w * (radius * unit)
    return out


def _grazes_zero(logs: np.ndarray, floor_gap: float) -> bool:
    """A zero near the contour shows as a sharp local dip of log|f| below the
    windowed baseline; the slow variation of distant zeros does not count."""
    Q = len(logs)
    w = max(2, Q // 16)
    base = np.empty(Q)
    for i in range(Q):
        lo = i - w
        hi = i + w + 1
        idx = np.arange(lo, hi) % Q
        base[i] = np.max(logs[idx])
    return bool(np.any(logs < base - floor_gap))


def _stable_power_sums(handle, disk: DiskSpec, pmax: int, max_nodes: int, rel_floor: float):
    """Power sums with node doubling until the winding settles and the sums
    move by < 1e-10 (capped), retrying perturbed radii when the contour
    grazes a zero.  Returns (sums, radius, Q, boundary samples)."""
    floor_gap = math.log(1.0 / rel_floor)
    tried = []
    for factor in (1.0, 0.97, 1.03, 0.94, 1.06, 0.9):
        radius = disk.radius * factor
        Q = disk.nodes
        prev = None
        grazing = False
        while True:
            nodes, unit, logs, dlogs = _contour_samples(handle, disk.center, radius, Q)
            if _grazes_zero(logs, floor_gap):
                grazing = True
                break
            sums = _power_sums_from_samples(radius, unit, dlogs, pmax)
            if prev is not None and abs(sums[0] - prev[0]) < 1e-6 and np.max(np.abs(sums - prev)) < 1e-10:
                break
            if Q >= max_nodes:
                break
            prev = sums
            Q *= 2
        if grazing:
            tried.append((factor, float(np.min(logs)), float(np.max(logs))))
            continue
        winding = sums[0]
        if abs(winding.real - round(winding.real)) > 0.1 or abs(winding.imag) > 0.1:
            raise WindingNotIntegerError(f"winding {winding} not near an integer (radius factor {factor})")
        return sums, radius, Q, (nodes, unit, logs, dlogs)
    raise ContourNearZeroError(f"contour grazes a zero at all retried radii: {tried}")


def count_zeros(handle, disk: DiskSpec, rel_floor: float = 1e-3, max_nodes: int = 1 << 14) -> int:
    """Number of zeros of f in the disk by the argument principle.

    Requires |f| >= rel_floor * max_contour |f| on the contour (the radius is
    perturbed automatically a few times otherwise); rejects a winding number
    further than 0.1 from an integer.
    """
    sums, _, _, _ = _stable_power_sums(handle, disk, 0, max_nodes, rel_floor)
    return int(round(sums[0].real))


# ---------------------------------------------------------------------------
# Weierstrass preparation


@dataclass(frozen=True)
class PrepResult:
    P: MonicLocal
    g_min_abs_scaled: float  # min |g| / max |f| over the certificate grid
    g_grid_logs: np.ndarray  # log|g| samples on the polar grid (0.9 x radius)
    residual: float  # max |f - P g_hat| / max |f| on the validation grid
    condition: float  # power-sum round-trip amplification estimate
    radius_used: float
    nodes_used: int
    newton_fallback: bool

    @property
    def nonvanishing(self) -> bool:
        return self.g_min_abs_scaled > 0.0


def _newton_coefficients(b: np.ndarray) -> np.ndarray:
    """Newton's identities: power sums b_1..b_k -> monic coefficients
    (a_0, ..., a_{k-1}) of w^k + a_{k-1} w^(k-1) + ... + a_0."""
    k = len(b)
    e = np.zeros(k + 1, dtype=complex)
    e[0] = 1.0
    for m in range(1, k + 1):
        acc = 0.0 + 0.0j
        for i in range(1, m + 1):
            acc += (-1) ** (i - 1) * e[m - i] * b[i - 1]
        e[m] = acc / m
    return np.array([(-1) ** (k - i) * e[k - i] for i in range(k)], dtype=complex)


def _prony_roots(handle, center, b: np.ndarray, k: int) -> np.ndarray:
    """Roots from power sums via the Hankel pencil, polished by Newton
    iteration on f'/f (fallback for degrees beyond the Newton cap)."""
    from scipy.linalg import eig

    m = np.concatenate(([complex(k)], b))
    h0 = np.empty((k, k), dtype=complex)
    h1 = np.empty((k, k), dtype=complex)
    for i in range(k):
        for j in range(k):
            h0[i, j] = m[i + j]
            h1[i, j] = m[i + j + 1]
    roots = eig(h1, h0, right=False)
    for _ in range(12):
        out = np.empty_like(roots)
        for i, w in enumerate(roots):
            _, dl = handle(complex(center + w))
            out[i] = w if dl == 0 else w - 1.0 / dl
        roots = out
    return roots


def _taylor_shift(coeffs_w: np.ndarray, new_origin_offset: complex) -> np.ndarray:
    """Rewrite the monic polynomial with ascending coefficients ``coeffs_w``
    in w into the variable z = w + offset; returns ascending coefficients
    (a_0..a_{k-1}) in z, dropping the leading 1."""
    k = len(coeffs_w)
    out = np.concatenate((np.asarray(coeffs_w, dtype=complex), [1.0 + 0j]))
    for i in range(k):
        for j in range(k - 1, i - 1, -1):
            out[j] = out[j] - new_origin_offset * out[j + 1]
    return out[:k]


def _boundary_values(radius_g, unit, logs, dlogs):
    """Boundary values of f on the circle, up to one global unit constant.

    Magnitudes come from the handle's logs; phases from spectral
    antidifferentiation of h(theta) = f'/f * dz/dtheta (the mean of h is
    i times the winding number and integrates to the winding phase).
    """
    Q = len(unit)
    h = dlogs * (1j * radius_g * unit)
    coeffs = np.fft.fft(h)
    ms = np.fft.fftfreq(Q, d=1.0 / Q)
    with np.errstate(divide="ignore", invalid="ignore"):
        anti_coeffs = np.where(ms != 0, coeffs / (1j * ms), 0.0)
    anti = np.fft.ifft(anti_coeffs)
    mean = coeffs[0] / Q
    theta = 2.0 * math.pi * np.arange(Q) / Q
    logf_rel = mean * theta + (anti - anti[0])
    phase = logf_rel.imag
    scale = float(np.max(logs))
    return np.exp(logs - scale + 1j * phase), scale


def weierstrass_prep(
    handle,
    disk: DiskSpec,
    rel_floor: float = 1e-3,
    max_nodes: int = 1 << 14,
) -> PrepResult:
    """Factor f = P g on the disk: P monic carrying the disk's zeros, g
    nonvanishing.

    Zero power sums come from contour quadrature with (z-c)^p weights;
    coefficients via Newton's identities (degrees above 32 fall back to
    Hankel-pencil roots polished on f'/f, with a conditioning warning).
    g is reconstructed independently of the pointwise quotient: its boundary
    values (phases integrated from f'/f) are Fourier-transformed into Taylor
    coefficients, and the residual compares |f| with |P g_hat| on an interior
    polar grid.  The nonvanishing certificate is the minimum of |f/P| over
    the 0.9-radius grid.
    """
    sums0, radius, Q, _ = _stable_power_sums(handle, disk, 0, max_nodes, rel_floor)
    k = int(round(sums0[0].real))
    newton_fallback = False
    condition = 1.0
    if k == 0:
        P = MonicLocal(coeffs=(), disk=DiskSpec(disk.center, radius, disk.nodes))
    else:
        pmax = k if k <= _NEWTON_DEGREE_CAP else 2 * k
        sums, radius, Q, _ = _stable_power_sums(handle, disk, pmax, max_nodes, rel_floor)
        b = sums[1:]
        if k <= _NEWTON_DEGREE_CAP:
            coeffs_w = _newton_coefficients(b[:k])
            roots_w = np.roots(np.concatenate(([1.0 + 0j], coeffs_w[::-1])))
        else:
            newton_fallback = True
            warnings.warn(
                f"degree {k} exceeds the Newton-identity cap; using Hankel-pencil roots",
                RuntimeWarning,
            )
            roots_w = _prony_roots(handle, disk.center, b, k)
            coeffs_w = np.poly(roots_w)[1:][::-1].astype(complex)
        b_back = np.array([np.sum(roots_w ** (p + 1)) for p in range(min(k, len(b)))])
        denom = np.maximum(np.abs(b[: len(b_back)]), 1.0)
        condition = float(np.max(np.abs(b_back - b[: len(b_back)]) / denom) / np.finfo(float).eps)
        coeffs_abs = _taylor_shift(coeffs_w, complex(disk.center))
        P = MonicLocal(coeffs=tuple(coeffs_abs), disk=DiskSpec(disk.center, radius, disk.nodes))
        P.validate(tol=1e-3)

    # boundary values of f on the 0.9 radius circle, phases from f'/f
    radius_g = 0.9 * radius
    Qg = max(256, Q)
    theta = 2.0 * math.pi * np.arange(Qg) / Qg
    unit_g = np.exp(1j * theta)
    nodes_g = disk.center + radius_g * unit_g
    logs_g = np.empty(Qg)
    dlogs_g = np.empty(Qg, dtype=complex)
    for i in range(Qg):
        la, dl = handle(complex(nodes_g[i]))
        logs_g[i] = la
        dlogs_g[i] = dl
    fvals_scaled, fscale = _boundary_values(radius_g, unit_g, logs_g, dlogs_g)

    pvals = P(nodes_g) if P.degree else np.ones(Qg, dtype=complex)
    gvals_scaled = fvals_scaled / pvals
    # Taylor data of g at the center from the boundary Fourier coefficients;
    # kept in the scaled variable u = (z - c)/radius_g so small radii cannot
    # underflow (|u| <= 2/3 on the validation grid)
    coeff_count = min(Qg // 2, 512)
    fft = np.fft.fft(gvals_scaled) / Qg

    # interior validation grid
    grid_r = np.array([0.15, 0.3, 0.45, 0.6]) * radius
    grid_t = 2.0 * math.pi * np.arange(24) / 24
    pts = (disk.center + np.outer(grid_r, np.exp(1j * grid_t))).ravel()
    pts = np.concatenate((pts, [complex(disk.center)]))
    u = (pts - disk.center) / radius_g
    ghat = np.zeros(len(pts), dtype=complex)
    for m in range(coeff_count - 1, -1, -1):
        ghat = ghat * u + fft[m]
    phat = P(pts) if P.degree else np.ones(len(pts), dtype=complex)
    recon_abs = np.abs(phat * ghat)
    f_abs_scaled = np.empty(len(pts))
    for i, z in enumerate(pts):
        la, _ = handle(complex(z))
        f_abs_scaled[i] = math.exp(la - fscale) if la > -math.inf else 0.0
    fmax = float(np.max(f_abs_scaled)) or 1.0
    residual = float(np.max(np.abs(f_abs_scaled - recon_abs))) / fmax

    # nonvanishing certificate on the 0.9-radius polar grid; points within
    # roundoff of a root of P make the quotient 0/0 and are skipped (g is
    # analytic there and certified by the neighboring samples)
    cert_r = np.array([0.0, 0.3, 0.6, 0.9]) * radius
    cert_pts = (disk.center + np.outer(cert_r, np.exp(1j * grid_t))).ravel()
    la_vals = np.array([handle(complex(z))[0] for z in cert_pts])
    pv_vals = np.abs(P(cert_pts)) if P.degree else np.ones(len(cert_pts))
    with np.errstate(divide="ignore"):
        lpv = np.log(pv_vals)
    usable = lpv > (np.max(lpv) - 34.5)
    g_logs = np.where(usable, (la_vals - fscale) - lpv, np.nan)
    finite = g_logs[usable]
    g_min = float(np.exp(np.min(finite))) if len(finite) and np.all(np.isfinite(finite)) else 0.0

    return PrepResult(
        P=P,
        g_min_abs_scaled=g_min,
        g_grid_logs=g_logs + fscale,
        residual=residual,
        condition=condition,
        radius_used=radius,
        nodes_used=Q,
        newton_fallback=newton_fallback,
    )


# ---------------------------------------------------------------------------
# resultants


@dataclass(frozen=True)
class ResultantResult:
    via_sylvester: complex
    via_roots: complex

    @property
    def value(self) -> complex:
        return self.via_sylvester


def _sylvester_matrix(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Sylvester matrix of two monic polynomials given by ascending
    coefficient arrays including the leading 1."""
    k = len(f) - 1
    m = len(g) - 1
    n = k + m
    s = np.zeros((n, n), dtype=complex)
    fr = f[::-1]  # descending
    gr = g[::-1]
    for i in range(m):
        s[i, i : i + k + 1] = fr
    for i in range(k):
        s[m + i, i : i + m + 1] = gr
    return s


def resultant(P0: MonicLocal, P1: MonicLocal, rtol: float = 1e-8, atol: float = 1e-12) -> ResultantResult:
    """Res(P0, P1) two ways: Sylvester determinant and the product of root
    differences prod (zeta_i - eta_j) over companion-matrix roots.

    Disagreement beyond tolerance raises (it signals quadrature or
    conditioning failure upstream).  Degree-zero inputs give the empty
    product 1.
    """
    k, m = P0.degree, P1.degree
    if k == 0 or m == 0:
        return ResultantResult(via_sylvester=1.0 + 0j, via_roots=1.0 + 0j)
    f = np.concatenate((np.asarray(P0.coeffs, dtype=complex), [1.0]))
    g = np.concatenate((np.asarray(P1.coeffs, dtype=complex), [1.0]))
    det = complex(np.linalg.det(_sylvester_matrix(f, g)))
    zr = P0.roots()
    er = P1.roots()
    prod = complex(np.prod(zr[:, None] - er[None, :]))
    scale = max(abs(det), abs(prod))
    if abs(det - prod) > max(atol, rtol * scale):
        raise ResultantDisagreementError(f"sylvester {det} vs roots {prod}")
    return ResultantResult(via_sylvester=det, via_roots=prod)


@dataclass(frozen=True)
class SeparationFloorResult:
    applicable: bool
    reason: str
    floor: float
    min_over_probes: float
    ok: bool


def separation_floor(P0: MonicLocal, P1: MonicLocal, delta: float, probes) -> SeparationFloorResult:
    """Check max(|P0(z)|, |P1(z)|) > (delta/2)^s at every probe point,
    s = max degree; valid when |Res| > delta and all roots lie in D(0, 1/2).

    A violated precondition is reported as inapplicable, not as a failure.
    """
    if not 0 < delta < 1:
        return SeparationFloorResult(False, "delta must lie in (0,1)", math.nan, math.nan, False)
    s = max(P0.degree, P1.degree)
    roots = np.concatenate((P0.roots(), P1.roots()))
    if len(roots) and float(np.max(np.abs(roots))) > 0.5:
        return SeparationFloorResult(False, "roots escape D(0, 1/2)", math.nan, math.nan, False)
    try:
        res = resultant(P0, P1)
    except ResultantDisagreementError:
        return SeparationFloorResult(False, "resultant methods disagree", math.nan, math.nan, False)
    if abs(res.value) <= delta:
        return SeparationFloorResult(False, "|Res| <= delta", math.nan, math.nan, False)
    zs = np.asarray(probes, dtype=complex)
    vals = np.maximum(np.abs(P0(zs)), np.abs(P1(zs)))
    floor = (delta / 2.0) ** s
    worst = float(np.min(vals)) if len(zs) else math.inf
    return SeparationFloorResult(True, "", floor, worst, bool(worst > floor))


# ---------------------------------------------------------------------------
# annulus gaps


@dataclass(frozen=True)
class AnnulusGap:
    r: float
    half_width: float  # r0 / (8 (K+1))
    margin: float  # distance from the annulus to the nearest eigenvalue radius


def annulus_gap(eigenvalues, E0: float, r0: float, K: int) -> AnnulusGap:
    """Find r in (r0/2, r0) whose annulus of width r0/(4(K+1)) around |z-E0|=r
    contains no eigenvalues.

    Requires at most K eigenvalues in (E0 - r0, E0 + r0); existence is then a
    pigeonhole fact.  The gap search sorts the eigenvalue radii and returns
    the midpoint of the widest free gap.
    """
    w = np.sort(np.abs(np.asarray(eigenvalues, dtype=float) - E0))
    inside = int(np.sum(w < r0))
    if inside > K:
        raise ValueError(f"{inside} eigenvalues in the window, more than K={K}")
    half = r0 / (8.0 * (K + 1))
    lo, hi = r0 / 2.0, r0
    radii = w[(w > lo - 2 * half) & (w < hi + 2 * half)]
    cuts = np.concatenate(([lo], radii[(radii > lo) & (radii < hi)], [hi]))
    gaps = np.diff(cuts)
    i = int(np.argmax(gaps))
    r = float(0.5 * (cuts[i] + cuts[i + 1]))
    if len(w):
        margin = float(np.min(np.abs(w - r))) - half
    else:
        margin = math.inf
    return AnnulusGap(r=r, half_width=half, margin=margin)
