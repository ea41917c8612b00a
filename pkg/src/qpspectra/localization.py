"""Eigenvector localization, eigenvalue separation, and multiscale
stabilization diagnostics on finite volumes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lyapunov import lyapunov_finite
from .operator import EigenSystem, Potential, eigs, eigs_from_diag, hamiltonian
from .torus import SamplePlan

__all__ = [
    "LocalizationProfile",
    "SeparationReport",
    "StabilizationRecord",
    "ApproxEigenpair",
    "ScaleMatch",
    "DecayProbe",
    "localize_eigenpair",
    "separation_report",
    "stabilization_bound",
    "approx_eigenpair",
    "match_scales",
    "generalized_decay_probe",
    "localization_batch",
]

# Eigenvector entries below this relative floor are numerical noise, not
# wavefunction values; they count as the exact-zero case when measuring rates.
_NOISE_FLOOR = 1e-13


@dataclass(frozen=True)
class LocalizationProfile:
    index: Optional[int]
    energy: Optional[float]
    center: int  # site of max |psi|
    interval: tuple  # [N', N''] in lattice coordinates
    mass_inside: float
    decay_rate: Optional[float]  # None: no measurable exterior sites; inf: exterior all zero
    rate_floor: Optional[float] = None  # gamma/4 from a Lyapunov estimate, when computed

    @property
    def width(self) -> int:
        return self.interval[1] - self.interval[0] + 1


def localize_eigenpair(
    psi: np.ndarray,
    sites: np.ndarray,
    eps_mass: float = 0.05,
    guard: int = 2,
    noise_floor: float = _NOISE_FLOOR,
) -> LocalizationProfile:
    """Localization interval and exterior decay rate of a unit vector.

    The interval is the smallest one centered at the max-modulus site whose
    mass is at least 1 - eps_mass.  The decay rate is the minimum of
    -log|psi(m)| / dist(m, I) over sites with dist(m, I) > guard, where
    entries below ``noise_floor`` (relative) count as exact zeros
    (contributing +inf); the rate is None when no site lies beyond the guard.
    """
    psi = np.asarray(psi, dtype=float)
    sites = np.asarray(sites, dtype=int)
    if len(psi) != len(sites):
        raise ValueError("psi and sites must have equal length")
    nrm = float(np.linalg.norm(psi))
    if not math.isclose(nrm, 1.0, rel_tol=1e-6):
        raise ValueError("psi must be normalized")
    absv = np.abs(psi)
    c = int(np.argmax(absv))
    mass2 = absv**2
    target = 1.0 - eps_mass
    lo = hi = c
    acc = mass2[c]
    while acc < target:
        grew = False
        if lo > 0:
            lo -= 1
            acc += mass2[lo]
            grew = True
        if acc < target and hi < len(psi) - 1:
            hi += 1
            acc += mass2[hi]
            grew = True
        if not grew:
            break
    interval = (int(sites[lo]), int(sites[hi]))

    floor = noise_floor * float(absv[c])
    dist = np.maximum(sites - interval[1], interval[0] - sites)
    outside = dist > guard
    rate: Optional[float]
    if not np.any(outside):
        rate = None
    else:
        vals = absv[outside]
        ds = dist[outside].astype(float)
        ratios = np.where(vals > floor, -np.log(np.maximum(vals, 1e-300)) / ds, np.inf)
        rate = float(np.min(ratios))
    return LocalizationProfile(
        index=None,
        energy=None,
        center=int(sites[c]),
        interval=interval,
        mass_inside=float(acc),
        decay_rate=rate,
    )


@dataclass(frozen=True)
class SeparationReport:
    min_gap: float
    bound: float
    ok: bool


def separation_report(es: EigenSystem, j: int, interval_length: int, C_sep: float) -> SeparationReport:
    """Is E_j separated from every other eigenvalue by exp(-C_sep |I|)?"""
    gap = es.min_gap(j)
    bound = math.exp(-C_sep * interval_length) if C_sep * interval_length < 700 else 0.0
    return SeparationReport(min_gap=gap, bound=bound, ok=bool(gap > bound))


@dataclass(frozen=True)
class StabilizationRecord:
    lhs: float  # dist(E_j0 at the subvolume, spec of the volume)
    rhs: float  # |psi(a0)| + |psi(b0)|
    ok: bool


def stabilization_bound(V: Potential, x, omega, sub, volume, j0: int, tol: float = 1e-8) -> StabilizationRecord:
    """dist(E_{j0}^{sub}, spec H_volume) <= |psi_{j0}(a0)| + |psi_{j0}(b0)|.

    The zero-extension of the subvolume eigenvector is a trial vector for the
    larger volume, so this holds for every nesting; ok must always be true.
    """
    a0, b0 = int(sub[0]), int(sub[1])
    A, B = int(volume[0]), int(volume[1])
    if not (A <= a0 <= b0 <= B):
        raise ValueError("sub must be contained in volume")
    es_sub = eigs(V, x, omega, sub, want_vectors=True)
    E0 = float(es_sub.eigenvalues[j0])
    psi = es_sub.vector(j0)
    rhs = float(abs(psi[0]) + abs(psi[-1]))
    es_vol = eigs(V, x, omega, volume, want_vectors=False)
    lhs = float(np.min(np.abs(es_vol.eigenvalues - E0)))
    return StabilizationRecord(lhs=lhs, rhs=rhs, ok=bool(lhs <= rhs + tol))


@dataclass(frozen=True)
class ApproxEigenpair:
    # part (a): eigenvalue within eps*sqrt(2) carried by a well-aligned eigenvector
    energy_a: float
    overlap_a: float
    ok_a: bool
    # part (b): unique-eigenvalue refinement, when the multiplicity condition holds
    applicable_b: bool
    energy_b: Optional[float]
    vector_b: Optional[np.ndarray]
    distance_b: Optional[float]
    bound_b: Optional[float]
    ok_b: Optional[bool]


def approx_eigenpair(diag: np.ndarray, phi: np.ndarray, E: float, eps: Optional[float] = None, eta: Optional[float] = None) -> ApproxEigenpair:
    """Approximate-eigenvector refinement for a tridiagonal matrix.

    Given a unit vector phi with ||(A - E) phi|| < eps:
    (a) some eigenvalue lies in (E - eps sqrt 2, E + eps sqrt 2) whose
        eigenvector overlaps phi by at least (2N)^(-1/2);
    (b) if the eigenvalues in (E - eta, E + eta) span at most one dimension,
        the eigenvector at the eigenvalue nearest E (sign-aligned with phi)
        satisfies ||phi - psi|| < sqrt(2) eps / eta.
    """
    diag = np.asarray(diag, dtype=float)
    phi = np.asarray(phi, dtype=float)
    n = len(diag)
    if len(phi) != n:
        raise ValueError("phi length mismatch")
    if not math.isclose(float(np.linalg.norm(phi)), 1.0, rel_tol=1e-9):
        raise ValueError("phi must be normalized")
    res = diag * phi
    res[:-1] -= phi[1:]
    res[1:] -= phi[:-1]
    res -= E * phi
    actual = float(np.linalg.norm(res))
    if eps is None:
        eps = actual * (1.0 + 1e-12) + 1e-300
    elif actual >= eps:
        raise ValueError(f"||(A-E)phi|| = {actual} is not below eps = {eps}")

    es = eigs_from_diag(diag, want_vectors=True)
    overlaps = np.abs(es.eigenvectors.T @ phi)
    aligned = overlaps >= (2.0 * n) ** -0.5
    if not np.any(aligned):
        ja = int(np.argmax(overlaps))
        ok_a = False
    else:
        idx = np.nonzero(aligned)[0]
        ja = int(idx[np.argmin(np.abs(es.eigenvalues[idx] - E))])
        ok_a = bool(abs(es.eigenvalues[ja] - E) < eps * math.sqrt(2.0))

    applicable_b = False
    energy_b = vector_b = distance_b = bound_b = ok_b = None
    if eta is not None:
        if not eta > eps:
            raise ValueError("eta must exceed eps")
        in_window = np.abs(es.eigenvalues - E) < eta
        if int(np.sum(in_window)) <= 1:
            applicable_b = True
            jb = int(np.argmin(np.abs(es.eigenvalues - E)))
            psi = es.eigenvectors[:, jb].copy()
            if float(psi @ phi) < 0:
                psi = -psi
            energy_b = float(es.eigenvalues[jb])
            vector_b = psi
            distance_b = float(np.linalg.norm(phi - psi))
            bound_b = math.sqrt(2.0) * eps / eta
            ok_b = bool(distance_b < bound_b) and abs(energy_b - E) < eps
    return ApproxEigenpair(
        energy_a=float(es.eigenvalues[ja]),
        overlap_a=float(overlaps[ja]),
        ok_a=ok_a,
        applicable_b=applicable_b,
        energy_b=energy_b,
        vector_b=vector_b,
        distance_b=distance_b,
        bound_b=bound_b,
        ok_b=ok_b,
    )


@dataclass(frozen=True)
class ScaleMatch:
    N: int
    index: int
    N_prime: int
    matched_index: int
    energy_gap: float
    vector_distance: float
    overlap: float
    ambiguous: bool


def match_scales(V: Potential, x, omega, N: int, j: int, N_prime: int) -> ScaleMatch:
    """Match the j-th eigenpair of [-N, N] to an eigenpair of [-N', N'].

    The match maximizes the overlap of the zero-extended eigenvector with the
    larger-scale eigenvectors; sign is aligned before differencing.  Two
    overlaps within 1e-3 of each other flag the match ambiguous.
    """
    if N_prime < N:
        raise ValueError("need N' >= N")
    es = eigs(V, x, omega, (-N, N), want_vectors=True)
    psi = es.vector(j)
    ext = np.zeros(2 * N_prime + 1)
    off = N_prime - N
    ext[off : off + 2 * N + 1] = psi
    es2 = eigs(V, x, omega, (-N_prime, N_prime), want_vectors=True)
    overlaps = np.abs(es2.eigenvectors.T @ ext)
    order = np.argsort(overlaps)[::-1]
    jp = int(order[0])
    ambiguous = len(order) > 1 and float(overlaps[order[0]] - overlaps[order[1]]) < 1e-3
    psi2 = es2.eigenvectors[:, jp].copy()
    if float(psi2 @ ext) < 0:
        psi2 = -psi2
    return ScaleMatch(
        N=N,
        index=j,
        N_prime=N_prime,
        matched_index=jp,
        energy_gap=float(abs(es2.eigenvalues[jp] - es.eigenvalues[j])),
        vector_distance=float(np.linalg.norm(psi2 - ext)),
        overlap=float(overlaps[jp]),
        ambiguous=ambiguous,
    )


@dataclass(frozen=True)
class DecayProbe:
    poly_bounded: bool
    end_growth_log: float  # minimized max log growth at the window ends
    faithful_window: tuple  # sites over which the propagated solution is trustworthy
    profile_rate: Optional[float]
    decay_detected: bool
    rate_threshold: float


def generalized_decay_probe(
    V: Potential,
    x,
    omega,
    E: float,
    N: int,
    rate_threshold: float,
    poly_const: float = 100.0,
) -> DecayProbe:
    """Probe whether a polynomially bounded solution of the difference
    equation at energy E decays exponentially on [-N, N].

    Solutions are parametrized by the initial pair v = (psi(0), psi(-1)); the
    probe minimizes the end growth max(log||M_+ v||, log||M_- v||) over a
    closed-form candidate set (small singular directions of the one-sided
    propagators and the crossing directions of their quadratic forms) and
    propagates the winner.  Off the spectrum every direction blows up in at
    least one direction, which is reported as poly_bounded = False.  For a
    decaying solution the propagated profile is trustworthy only until
    roundoff re-injects the growing mode (the V-shaped minimum of the log
    profile); the decay rate is measured over that faithful window.
    """
    vals = V.orbit_values(x, omega, -N, N)  # indices 0..2N <-> sites -N..N
    center = N

    def propagate(c, s):
        # forward pair (psi(n), psi(n-1)), backward pair (psi(n), psi(n+1));
        # returns the log|psi| profile and the two end (pair, logscale) states
        out = np.empty(2 * N + 1)
        out[center] = math.log(abs(c)) if c != 0 else -math.inf
        p, q, ls = c, s, 0.0
        for n in range(0, N):
            p, q = (vals[center + n] - E) * p - q, p
            m = max(abs(p), abs(q))
            if m > 2.0**512 or (0.0 < m < 2.0**-512):
                p /= m
                q /= m
                ls += math.log(m)
            out[center + n + 1] = (ls + math.log(abs(p))) if p != 0 else -math.inf
        right_state = (p, q, ls)
        out[center - 1] = math.log(abs(s)) if s != 0 else -math.inf
        p, q, ls = s, c, 0.0
        for n in range(-1, -N, -1):
            p, q = (vals[center + n] - E) * p - q, p
            m = max(abs(p), abs(q))
            if m > 2.0**512 or (0.0 < m < 2.0**-512):
                p /= m
                q /= m
                ls += math.log(m)
            out[center + n - 1] = (ls + math.log(abs(p))) if p != 0 else -math.inf
        left_state = (p, q, ls)
        return out, right_state, left_state

    # one-sided propagators acting on v = (psi(0), psi(-1))
    e1, re1, le1 = propagate(1.0, 0.0)
    e2, re2, le2 = propagate(0.0, 1.0)
    sR = max(re1[2], re2[2])
    sL = max(le1[2], le2[2])
    matR = np.array(
        [
            [re1[0] * math.exp(re1[2] - sR), re2[0] * math.exp(re2[2] - sR)],
            [re1[1] * math.exp(re1[2] - sR), re2[1] * math.exp(re2[2] - sR)],
        ]
    )
    matL = np.array(
        [
            [le1[0] * math.exp(le1[2] - sL), le2[0] * math.exp(le2[2] - sL)],
            [le1[1] * math.exp(le1[2] - sL), le2[1] * math.exp(le2[2] - sL)],
        ]
    )

    def end_growth(v):
        gr = float(np.linalg.norm(matR @ v))
        gl = float(np.linalg.norm(matL @ v))
        a = (math.log(gr) + sR) if gr > 0 else -math.inf
        b = (math.log(gl) + sL) if gl > 0 else -math.inf
        return max(a, b)

    candidates = []
    for m in (matR, matL):
        _, _, vt = np.linalg.svd(m)
        candidates.append(vt[-1])
    scale = max(sR, sL)
    if abs(sR - sL) < 50:
        D = math.exp(2 * (sR - scale)) * (matR.T @ matR) - math.exp(2 * (sL - scale)) * (matL.T @ matL)
        _, vecs = np.linalg.eigh(0.5 * (D + D.T))
        candidates.extend([vecs[:, 0], vecs[:, 1]])
    best_v = min(candidates, key=end_growth)
    profile, _, _ = propagate(float(best_v[0]), float(best_v[1]))
    growth = end_growth(best_v)

    peak0 = max(profile[center], profile[center - 1])
    # pairwise-max envelope: adjacent sites of a nonzero solution cannot both
    # vanish, so this stays finite through oscillation zeros
    env = np.maximum(profile[:-1], profile[1:])
    env_r = env[center:]
    env_l = env[:center][::-1]

    def side_bottom(e):
        # faithful extent: the farthest point within one nat of the minimum
        # (roundoff re-injects the growing mode beyond the V-bottom)
        mn = float(np.min(e))
        idx = int(np.nonzero(e <= mn + 1.0)[0][-1])
        return idx, mn

    i_plus, min_r = side_bottom(env_r)
    i_minus, min_l = side_bottom(env_l)
    m_plus = center + i_plus
    m_minus = center - i_minus
    sites = np.arange(-N, N + 1)
    window = (int(sites[m_minus]), int(sites[min(m_plus + 1, 2 * N)]))
    fslice = slice(m_minus, m_plus + 2)
    poly_log = math.log(poly_const) + np.log(np.abs(sites[fslice]) + 1.0) + peak0
    wide_enough = (m_plus - center) + (center - m_minus) >= max(4, N // 8)
    poly_bounded = wide_enough and bool(np.all(profile[fslice] <= poly_log))

    rate = None
    decay = False
    if poly_bounded:
        drops = []
        if i_plus > 0:
            drops.append((peak0 - min_r) / i_plus)
        if i_minus > 0:
            drops.append((peak0 - min_l) / i_minus)
        if drops:
            rate = float(min(drops))
            depth = min(peak0 - min_r, peak0 - min_l)
            decay = rate >= rate_threshold and depth >= 2.0
    return DecayProbe(
        poly_bounded=poly_bounded,
        end_growth_log=growth,
        faithful_window=window,
        profile_rate=rate,
        decay_detected=decay,
        rate_threshold=rate_threshold,
    )


# ---------------------------------------------------------------------------
# batch driver


def localization_batch(
    V: Potential,
    omega,
    N: int,
    xs: np.ndarray,
    gamma_threshold: float,
    C_sep: float,
    lyap_scale: int = 512,
    lyap_samples: int = 48,
    eps_mass: float = 0.05,
    guard: int = 6,
    seed: int = 0,
) -> list:
    """Per-eigenpair localization/separation rows over sampled phases.

    For each phase: solve [1, N], profile every eigenvector, estimate the
    exponent at each eigenvalue (batched transfer over a shared plan at
    ``lyap_scale``), and evaluate the separation bound.  Returns dict rows
    (sample, j, E, center, I_lo, I_hi, mass, rate, rate_floor, L, min_gap,
    sep_ok).
    """
    from .lyapunov import step_values_on_orbit
    from .operator import transfer_batch
    from .torus import sample_phases

    plan = SamplePlan(V.dimension, lyap_samples, seed, "low-discrepancy")
    phase_set = sample_phases(plan)
    rows = []
    for si in range(xs.shape[0]):
        x = xs[si]
        es = eigs(V, x, omega, (1, N), want_vectors=True)
        energies = es.eigenvalues
        # batched exponent estimate: energies (chunked) x plan phases
        vals = step_values_on_orbit(V, phase_set, omega, 1, lyap_scale)
        M = phase_set.shape[0]
        L = np.empty(len(energies))
        chunk = max(1, (1 << 21) // (lyap_scale * M))
        for s in range(0, len(energies), chunk):
            Es = energies[s : s + chunk]
            tiled = np.tile(vals, (1, len(Es)))
            Erep = np.repeat(Es, M)
            _, ls = transfer_batch(tiled, Erep)
            L[s : s + chunk] = ls.reshape(len(Es), M).mean(axis=1) / lyap_scale
        for j in range(len(energies)):
            prof = localize_eigenpair(es.vector(j), es.sites, eps_mass=eps_mass, guard=guard)
            sep = separation_report(es, j, prof.width, C_sep)
            rows.append(
                {
                    "sample": si,
                    "j": j,
                    "E": float(energies[j]),
                    "center": prof.center,
                    "I_lo": prof.interval[0],
                    "I_hi": prof.interval[1],
                    "mass": prof.mass_inside,
                    "rate": prof.decay_rate,
                    "rate_floor": float(L[j]) / 4.0,
                    "L": float(L[j]),
                    "min_gap": sep.min_gap,
                    "sep_ok": sep.ok,
                    "L_above_threshold": bool(L[j] > gamma_threshold),
                }
            )
    return rows
