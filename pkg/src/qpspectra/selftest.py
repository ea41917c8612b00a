"""Deterministic self-test suite behind the `selftest` subcommand.

Each check produces one (name, metric, tolerance, status) row; the run is a
pure function of the config seed, so repeated runs are byte-identical.
"""

from __future__ import annotations

import math

import numpy as np

from .config import ExperimentConfig
from .intervals import IntervalSet
from .ldt import greens_entry, poisson_residual
from .localization import stabilization_bound
from .lyapunov import avalanche_check, lyapunov_finite
from .operator import (
    Potential,
    dirichlet_det,
    eigs,
    eigs_from_diag,
    hamiltonian,
    interlace_check,
    logdet_from_values,
    transfer,
)
from .prep import DiskSpec, MonicLocal, annulus_gap, count_zeros, determinant_handle, resultant, separation_floor, weierstrass_prep
from .resonance import ladder, ndr_scan
from .torus import Frequency, SamplePlan, sample_phases, torus_norm


def selftest_checks(cfg: ExperimentConfig, threads: int = 1):
    rows = []
    ok_all = True

    def check(name, metric, tol, passed):
        nonlocal ok_all
        ok_all &= bool(passed)
        rows.append([name, metric, tol, "pass" if passed else "fail"])

    rng = np.random.default_rng(cfg.seed + 101)
    V = cfg.potential
    omega = cfg.omega
    d = V.dimension

    # torus
    check("torus-norm-periodic", abs(torus_norm(1.25) - 0.25), 0.0, torus_norm(1.25) == 0.25)
    plan = SamplePlan(d, 64, cfg.seed, "low-discrepancy")
    same = np.array_equal(sample_phases(plan), sample_phases(plan))
    check("sampling-deterministic", 0.0 if same else 1.0, 0.0, same)

    # determinant vs eigenproduct
    worst = 0.0
    for _ in range(20):
        x = rng.random(d)
        E = float(rng.uniform(-3, 3))
        n = int(rng.integers(4, 11))
        diag = V.orbit_values(x, omega, 1, n)
        es = eigs_from_diag(diag, want_vectors=False)
        if float(np.min(np.abs(es.eigenvalues - E))) < 1e-8:
            continue
        ld = logdet_from_values(diag, E)
        ref = float(np.sum(np.log(np.abs(es.eigenvalues - E))))
        worst = max(worst, abs(ld.log_mag - ref) / max(abs(ref), 1.0))
    check("determinant-eigenproduct", worst, 1e-9, worst <= 1e-9)

    # transfer entries vs determinants
    worst = 0.0
    sign_ok = True
    for _ in range(10):
        x = rng.random(d)
        E = float(rng.uniform(-3, 3))
        tp = transfer(V, x, omega, E, (1, 40))
        for (i, j), (aa, bb), flip in (
            ((0, 0), (1, 40), 1.0),
            ((0, 1), (2, 40), -1.0),
            ((1, 0), (1, 39), 1.0),
            ((1, 1), (2, 39), -1.0),
        ):
            s, lm = tp.entry(i, j)
            ld = dirichlet_det(V, x, omega, E, (aa, bb))
            sign_ok &= s == flip * ld.sign
            worst = max(worst, abs(lm - ld.log_mag))
    check("transfer-entry-identity", worst, 1e-10, worst <= 1e-10 and sign_ok)

    # avalanche principle, commuting diagonal
    rep = avalanche_check([np.diag([10.0, 0.1])] * 5, 10.0)
    check("avalanche-diagonal", rep.lhs_residual, 1e-12, rep.hypotheses_ok and rep.lhs_residual <= 1e-12)

    # free and shifted-constant exponents
    est = lyapunov_finite(Potential.constant(0.0, dimension=d), omega, 0.0, 64, SamplePlan(d, 8, cfg.seed, "grid"))
    check("lyapunov-free", est.value, 0.35 / 64, est.value <= 0.35 / 64)
    estc = lyapunov_finite(Potential.constant(3.0, dimension=d), omega, 0.0, 512, SamplePlan(d, 4, cfg.seed, "grid"))
    target = math.log((3 + math.sqrt(5)) / 2)
    check("lyapunov-constant", abs(estc.value - target), 0.01, abs(estc.value - target) <= 0.01)

    # Green identity vs direct solve
    from scipy.linalg import solve_banded

    worst = 0.0
    for _ in range(8):
        x = rng.random(d)
        E = float(rng.uniform(-2, 2))
        h = hamiltonian(V, x, omega, (1, 80))
        es = eigs_from_diag(h.diag, a=1, want_vectors=False)
        if float(np.min(np.abs(es.eigenvalues - E))) < 1e-3:
            continue
        j, k = sorted(rng.integers(1, 81, size=2).tolist())
        ge = greens_entry(V, x, omega, E, (1, 80), j, k)
        ab = np.zeros((3, 80))
        ab[0, 1:] = -1.0
        ab[1] = h.diag - E
        ab[2, :-1] = -1.0
        rhs = np.zeros(80)
        rhs[k - 1] = 1.0
        u = solve_banded((1, 1), ab, rhs)
        worst = max(worst, abs(ge.value - u[j - 1]) / max(abs(u[j - 1]), 1e-300))
    check("green-cramer-vs-solve", worst, 1e-6, worst <= 1e-6)

    # Poisson identity on a decaying tail
    x = rng.random(d)
    esys = eigs(V, x, omega, (1, 100), want_vectors=True)
    centers = np.argmax(np.abs(esys.eigenvectors), axis=0) + 1
    cands = [j for j in range(100) if centers[j] >= 70]
    worst = 0.0
    for j in cands[:3]:
        sub_es = eigs(V, x, omega, (5, 50), want_vectors=False)
        Ej = float(esys.eigenvalues[j])
        if float(np.min(np.abs(sub_es.eigenvalues - Ej))) < 1e-2:
            continue
        r = poisson_residual(V, x, omega, Ej, esys.vector(j), (1, 100), (5, 50), 30)
        worst = max(worst, r)
    check("poisson-identity", worst, 1e-8, worst <= 1e-8)

    # interlacing and stabilization
    all_ok = True
    for _ in range(10):
        x = rng.random(d)
        outer = eigs(V, x, omega, (1, 50), want_vectors=False)
        inner = eigs(V, x, omega, (1 + int(rng.integers(0, 5)), 50 - int(rng.integers(0, 5))), want_vectors=False)
        all_ok &= interlace_check(outer, inner)
    check("interlacing", 0.0 if all_ok else 1.0, 0.0, all_ok)
    all_ok = True
    for _ in range(8):
        x = rng.random(d)
        rec = stabilization_bound(V, x, omega, (20, 60), (1, 100), int(rng.integers(0, 41)))
        all_ok &= rec.ok
    check("stabilization-bound", 0.0 if all_ok else 1.0, 0.0, all_ok)

    # annulus gaps
    all_ok = True
    for _ in range(10):
        evs = rng.uniform(-1, 1, size=int(rng.integers(0, 4)))
        ag = annulus_gap(evs, 0.0, 1.0, 3)
        all_ok &= ag.margin > 0
    check("annulus-gap", 0.0 if all_ok else 1.0, 0.0, all_ok)

    # prep: zero count + factorization residual against the eigensolver
    x = rng.random(d)
    size = 40
    es = eigs(V, x, omega, (1, size), want_vectors=False)
    handle = determinant_handle(V, x, omega, (1, size))
    j = size // 2
    E0 = float(es.eigenvalues[j])
    r0 = 0.6 * float(min(es.eigenvalues[j + 1] - E0, E0 - es.eigenvalues[j - 1]))
    got = count_zeros(handle, DiskSpec(E0, r0))
    res = weierstrass_prep(handle, DiskSpec(E0, r0))
    inside = int(np.sum(np.abs(es.eigenvalues - E0) < res.radius_used))
    check("prep-count", abs(got - inside), 0.0, got == inside)
    check("prep-residual", res.residual, 1e-8, res.residual <= 1e-8)

    # resultants
    rr = resultant(MonicLocal((-1.0, 0.0), DiskSpec(0, 2.0)), MonicLocal((-4.0, 0.0), DiskSpec(0, 3.0)))
    check("resultant-fixture", abs(rr.via_sylvester - 9.0), 1e-8, abs(rr.via_sylvester - 9.0) <= 1e-8)
    sf = separation_floor(
        MonicLocal((-0.3,), DiskSpec(0, 0.45)), MonicLocal((0.3,), DiskSpec(0, 0.45)), 0.5, np.linspace(-2, 2, 41)
    )
    check("separation-floor", 0.0 if sf.ok else 1.0, 0.0, sf.applicable and sf.ok)

    # interval algebra
    A = IntervalSet.from_pairs([(0, 1), (2, 3)])
    ok_m = A.measure() == 2.0
    t = IntervalSet.from_pairs([(0, 1)]).fatten(0.5).intersect(IntervalSet.from_pairs([(2, 3)]).fatten(0.5))
    ok_t = t.intervals == ((1.5, 1.5),) and t.measure() == 0.0
    check("interval-algebra", 0.0 if (ok_m and ok_t) else 1.0, 0.0, ok_m and ok_t)

    # ndr scan reproducibility + ladder fixture
    E = float(np.mean(es.eigenvalues[size // 2 : size // 2 + 2]))
    rep1 = ndr_scan(V, x, omega, E, 12, (-300, 300), plan=SamplePlan(d, 128, cfg.seed, "low-discrepancy"), sigma=cfg.sigma, tau=cfg.tau)
    ld12 = dirichlet_det(V, x, omega, E, (50, 61))
    check("ndr-bitwise", 0.0, 0.0, ld12.log_mag == rep1.log_dets[350])
    lad = ladder(16, 0.5, 0.25, [(1.0, 2.0)])
    check("ladder-fixture", 0.0, 0.0, lad.scales == (54,) and lad.sizes == (8,))

    return rows, ok_all
