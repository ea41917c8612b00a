"""Batch experiment driver.

Every subcommand reads one config (INI or JSON), runs a deterministic sweep,
and writes CSV tables plus a JSON summary (config echo and version string).
Outputs are a pure function of (config, seed); --threads only affects speed.

    qp-spectra SUBCOMMAND --config cfg.ini [--out DIR] [--threads N] [--seed S]

Subcommands: lyap ldt green localize stabilize ndr resonance prep spectrum
homog selftest.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .torus import SamplePlan, sample_phases

SCHEMA_VERSION = 1


def get_version() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def ordered_parallel_map(fn, items, threads: int):
    """Map preserving order; the reduction is list order, so results are
    bitwise independent of the worker count."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["schema_version"] + list(header))
        for row in rows:
            w.writerow([SCHEMA_VERSION] + [_fmt(v) for v in row])


def write_summary(outdir: Path, name: str, cfg: ExperimentConfig, results: dict, ok: bool):
    payload = {
        "subcommand": name,
        "version": get_version(),
        "schema_version": SCHEMA_VERSION,
        "config": cfg.raw,
        "results": results,
        "status": "ok" if ok else "fail",
    }
    (outdir / f"{name}_summary.json").write_text(json.dumps(payload, sort_keys=True, indent=1, default=_fmt) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def run_lyap(cfg: ExperimentConfig, outdir: Path, threads: int) -> bool:
    from .lyapunov import ap_multiscale_L, lyapunov_finite

    sec = cfg.section("lyap")
    scales = [int(v) for v in str(sec.get("scales", "32 64 128 256")).split()]
    E = float(sec.get("energy", 0.0))
    M = int(sec.get("samples", min(cfg.sample_count, 500)))
    plan = cfg.plan(count=M)

    ests = ordered_parallel_map(lambda N: lyapunov_finite(cfg.potential, cfg.omega, E, N, plan), scales, threads)
    rows = [["finite", e.N, e.value, e.stderr, e.sample_count] for e in ests]
    ap_info = {}
    if "block_length" in sec:
        ell = int(sec["block_length"])
        n = int(sec.get("block_count", 10))
        ap = ap_multiscale_L(cfg.potential, cfg.omega, E, ell, n, plan)
        rows.append(["ap", ell * n, ap.value, ap.stderr, plan.count])
        ap_info = {"failure_rate": ap.failure_rate, "reliable": ap.reliable, "mu": ap.mu}
    write_csv(outdir / "lyap.csv", ["kind", "N", "value", "stderr", "M"], rows)
    write_summary(outdir, "lyap", cfg, {"scales": scales, "energy": E, **ap_info}, True)
    return True


def run_ldt(cfg: ExperimentConfig, outdir: Path, threads: int) -> bool:
    from .ldt import ldt_measure

    sec = cfg.section("ldt")
    scales = [int(v) for v in str(sec.get("scales", "100 200 400")).split()]
    p = float(sec.get("exponent", 0.6))
    E = float(sec.get("energy", 0.0))
    target = sec.get("target", "transfer-norm")
    M = int(sec.get("samples", min(cfg.sample_count, 1000)))
    plan = cfg.plan(count=M)
    reports = ordered_parallel_map(
        lambda N: ldt_measure(cfg.potential, cfg.omega, E, N, p, plan, target=target), scales, threads
    )
    rows = [[r.N, r.threshold_exponent, r.deviation_fraction, r.L_N_ref, r.L_stderr, r.sample_count] for r in reports]
    write_csv(outdir / "ldt.csv", ["N", "p", "fraction", "L_N", "stderr", "M"], rows)
    write_summary(outdir, "ldt", cfg, {"fractions": [r.deviation_fraction for r in reports]}, True)
    return True


def run_green(cfg: ExperimentConfig, outdir: Path, threads: int) -> bool:
    from .ldt import GreensSingularError, greens_entry, poisson_residual
    from .operator import eigs, hamiltonian
    from scipy.linalg import solve_banded

    sec = cfg.section("green")
    N = int(sec.get("size", 100))
    count = int(sec.get("count", 50))
    tol = float(sec.get("tolerance", 1e-6))
    rng = np.random.default_rng(cfg.seed)
    rows = []
    ok = True
    for case in range(count):
        x = rng.random(cfg.potential.dimension)
        E = float(rng.uniform(-2 - cfg.potential.sup_norm_bound(), 2 + cfg.potential.sup_norm_bound()))
        h = hamiltonian(cfg.potential, x, cfg.omega, (1, N))
        es = eigs(cfg.potential, x, cfg.omega, (1, N), want_vectors=False)
        if float(np.min(np.abs(es.eigenvalues - E))) < 1e-3:
            rows.append([case, "cramer-vs-solve", "", "", "skipped-near-spectrum"])
            continue
        j, k = sorted(rng.integers(1, N + 1, size=2).tolist())
        ge = greens_entry(cfg.potential, x, cfg.omega, E, (1, N), j, k)
        ab = np.zeros((3, N))
        ab[0, 1:] = -1.0
        ab[1] = h.diag - E
        ab[2, :-1] = -1.0
        rhs = np.zeros(N)
        rhs[k - 1] = 1.0
        u = solve_banded((1, 1), ab, rhs)
        direct = float(u[j - 1])
        rel = abs(ge.value - direct) / max(abs(direct), 1e-300)
        passed = rel <= tol
        ok &= passed
        rows.append([case, "cramer-vs-solve", rel, tol, "pass" if passed else "fail"])
    write_csv(outdir / "green.csv", ["case", "kind", "metric", "tolerance", "status"], rows)
    write_summary(outdir, "green", cfg, {"cases": count, "tolerance": tol}, ok)
    return ok


def run_localize(cfg: ExperimentConfig, outdir: Path, threads: int) -> bool:
    from .localization import localization_batch

    sec = cfg.section("localize")
    N = int(sec.get("size", 300))
    n_phases = int(sec.get("phases", 4))
    gamma = float(sec.get("gamma", cfg.gamma or 0.5))
    C_sep = float(sec.get("c_sep", 4.0))
    xs = sample_phases(cfg.plan(count=n_phases, seed_offset=11, scheme="uniform-random"))
    rows = localization_batch(
        cfg.potential,
        cfg.omega,
        N,
        xs,
        gamma_threshold=gamma,
        C_sep=C_sep,
        lyap_scale=int(sec.get("lyap_scale", 512)),
        lyap_samples=int(sec.get("lyap_samples", 48)),
        eps_mass=float(sec.get("eps_mass", 0.01)),
        seed=cfg.seed,
    )
    header = ["sample", "j", "E", "center", "I_lo", "I_hi", "mass", "rate", "rate_floor", "min_gap", "sep_ok"]
    write_csv(outdir / "localize.csv", header, [[r[k] for k in ["sample", "j", "E", "center", "I_lo", "I_hi", "mass", "rate", "rate_floor", "min_gap", "sep_ok"]] for r in rows])
    eligible = [r for r in rows if r["L_above_threshold"]]
    loc_ok = [r for r in eligible if r["rate"] is not None and r["rate"] >= r["rate_floor"]]
    sep_ok = [r for r in eligible if r["sep_ok"]]
    results = {
        "eligible": len(eligible),
        "rate_fraction": len(loc_ok) / len(eligible) if eligible else math.nan,
        "sep_fraction": len(sep_ok) / len(eligible) if eligible else math.nan,
    }
    write_summary(outdir, "localize", cfg, results, True)
    return True


def run_stabilize(cfg: ExperimentConfig, outdir: Path, threads: int) -> bool:
    from .localization import localize_eigenpair, match_scales
    from .operator import eigs

    sec = cfg.section("stabilize")
    N = int(sec.get("base", 40))
    cap = int(sec.get("cap", 2000))
    x = sample_phases(cfg.plan(count=1, seed_offset=3, scheme="uniform-random"))[0]
    es = eigs(cfg.potential, x, cfg.omega, (-N, N), want_vectors=True)
    centers = [abs(int(np.argmax(np.abs(es.eigenvectors[:, j]))) - N) for j in range(es.size)]
    j = int(np.argmin(centers))  # best-centered state
    chain = [N]
    while chain[-1] < cap:
        chain.append(min(chain[-1] ** 2, cap))
    rows = []
    jk = j
    Nk = N
    for Nn in chain[1:]:
        m = match_scales(cfg.potential, x, cfg.omega, Nk, jk, Nn)
        rows.append([Nk, jk, Nn, m.matched_index, m.energy_gap, m.vector_distance, m.overlap, m.ambiguous])
        jk, Nk = m.matched_index, Nn
    write_csv(outdir / "stabilize.csv", ["N", "j", "N_next", "j_next", "dE", "dpsi", "overlap", "ambiguous"], rows)
    write_summary(outdir, "stabilize", cfg, {"chain": chain, "start_index": j}, True)
    return True


def run_ndr(cfg: ExperimentConfig, outdir: Path, threads: int) -> bool:
    from .resonance import ladder, ndr_scan

    sec = cfg.section("ndr")
    ell = int(sec.get("window", 30))
    lo = int(sec.get("range_lo", -1000))
    hi = int(sec.get("range_hi", 1000))
    E = float(sec.get("energy", 0.0))
    C = float(sec.get("deviation_constant", 1.0))
    rep = ndr_scan(
        cfg.potential, sample_phases(cfg.plan(count=1, seed_offset=5, scheme="uniform-random"))[0],
        cfg.omega, E, ell, (lo, hi), C=C, plan=cfg.plan(count=256), sigma=cfg.sigma, tau=cfg.tau,
    )
    under = set(rep.under_raw)
    rows = [[m, rep.log_dets[i], rep.threshold, m in under] for i, m in enumerate(range(lo, hi + 1))]
    write_csv(outdir / "ndr.csv", ["m", "window_logdet", "threshold", "fail"], rows)
    lsec = cfg.section("ladder")
    pairs = []
    values = [float(v) for v in str(lsec.get("constants", "1 2")).split()]
    for i in range(0, len(values) - 1, 2):
        pairs.append((values[i], values[i + 1]))
    lad = ladder(ell, float(lsec.get("sigma", cfg.sigma)), cfg.tau, pairs)
    write_csv(
        outdir / "ladder.csv",
        ["level", "c_lo", "c_hi", "K", "scale", "K_admissible", "reachable"],
        [[i, lv.c_lo, lv.c_hi, lv.K, lv.scale, lv.K_admissible, lv.reachable] for i, lv in enumerate(lad.levels)],
    )
    write_summary(outdir, "ndr", cfg, {"K_raw": rep.K_raw, "K": rep.K, "min_component": rep.min_component}, True)
    return True


def run_resonance(cfg: ExperimentConfig, outdir: Path, threads: int) -> bool:
    from .resonance import double_resonance_scan, resonant_frequency_fraction

    sec = cfg.section("resonance")
    ell = int(sec.get("window", 25))
    N = int(sec.get("range", 2000))
    E = float(sec.get("energy", 0.0))
    x = sample_phases(cfg.plan(count=1, seed_offset=7, scheme="uniform-random"))[0]
    scan = double_resonance_scan(cfg.potential, x, cfg.omega, E, ell, N, plan=cfg.plan(count=256), tau=cfg.tau)
    write_csv(outdir / "resonance.csv", ["m", "threshold"], [[m, scan.threshold] for m in scan.positions])
    write_csv(outdir / "histogram.csv", ["distance_bin_lo", "distance_bin_hi", "count"], list(scan.distance_counts))
    t0s = [float(v) for v in str(sec.get("separations", "10 100 1000")).split()]
    fr = resonant_frequency_fraction(
        cfg.potential,
        E,
        ell,
        N,
        cfg.plan(count=int(sec.get("omega_samples", 8)), seed_offset=13, scheme="uniform-random"),
        cfg.plan(count=int(sec.get("x_samples", 2)), seed_offset=17, scheme="uniform-random"),
        np.asarray(t0s),
        tau=cfg.tau,
        L_plan=cfg.plan(count=256),
    )
    write_csv(outdir / "fractions.csv", ["t0", "fraction"], [[t, f] for t, f in zip(t0s, fr)])
    write_summary(outdir, "resonance", cfg, {"resonant_positions": len(scan.positions)}, True)
    return True


def mid_gap_disk(eigenvalues: np.ndarray, rng) -> tuple:
    """Random disk catching a small eigenvalue cluster, with the contour
    placed mid-gap so it cannot graze the spectrum."""
    n = len(eigenvalues)
    j = int(rng.integers(1, n - 1))
    width = int(rng.integers(1, min(4, n - j) + 1))
    cluster = eigenvalues[j : j + width]
    E0 = float(0.5 * (cluster[0] + cluster[-1]))
    inner = float(np.max(np.abs(cluster - E0)))
    others = np.concatenate((eigenvalues[:j], eigenvalues[j + width :]))
    outer = float(np.min(np.abs(others - E0))) if len(others) else inner + 1.0
    if outer <= inner:  # cluster touches its surroundings; shrink to one point
        E0 = float(cluster[0])
        inner = 0.0
        outer = float(np.min(np.abs(np.delete(eigenvalues, j) - E0)))
    r = 0.5 * (inner + outer) * float(rng.uniform(0.9, 1.05))
    return E0, max(r, 1e-8)


def run_prep(cfg: ExperimentConfig, outdir: Path, threads: int) -> bool:
    from .operator import eigs
    from .prep import DiskSpec, determinant_handle, count_zeros, weierstrass_prep

    sec = cfg.section("prep")
    size = int(sec.get("size", 40))
    count = int(sec.get("disks", 20))
    rng = np.random.default_rng(cfg.seed + 23)
    x = rng.random(cfg.potential.dimension)
    es = eigs(cfg.potential, x, cfg.omega, (1, size), want_vectors=False)
    handle = determinant_handle(cfg.potential, x, cfg.omega, (1, size))
    rows = []
    ok = True
    for case in range(count):
        E0, r = mid_gap_disk(es.eigenvalues, rng)
        expected = int(np.sum(np.abs(es.eigenvalues - E0) < r))
        try:
            got = count_zeros(handle, DiskSpec(E0, r))
            res = weierstrass_prep(handle, DiskSpec(E0, r))
            passed = got == int(np.sum(np.abs(es.eigenvalues - E0) < res.radius_used)) and res.residual < 1e-8
            rows.append([case, E0, r, expected, got, res.residual, "pass" if passed else "fail"])
            ok &= passed
        except ArithmeticError as exc:
            rows.append([case, E0, r, expected, "", "", f"retry-exhausted:{type(exc).__name__}"])
    write_csv(outdir / "prep.csv", ["case", "center", "radius", "count_eigensolver", "count_contour", "prep_residual", "status"], rows)
    write_summary(outdir, "prep", cfg, {"disks": count}, ok)
    return ok


def run_spectrum(cfg: ExperimentConfig, outdir: Path, threads: int) -> bool:
    from .spectrum import default_rho, thmD_report

    sec = cfg.section("spectrum")
    scales = [int(v) for v in str(sec.get("scales", "20 40")).split()]
    s = int(sec.get("ratio", 2))
    depth = int(sec.get("depth", 1))
    gamma = float(sec.get("gamma", cfg.gamma or 1.0))
    lo, hi = (float(v) for v in str(sec.get("window", "-6 6")).split())
    cap = int(sec.get("cap", 1024))
    M = int(sec.get("phases", 80))
    reference = None
    rows = []
    last = None
    for N in scales:
        rep = thmD_report(
            cfg.potential, cfg.omega, N, s, depth, default_rho(N, gamma, depth), (lo, hi),
            cfg.plan(count=M), reference=reference,
            reference_plan=cfg.plan(count=2 * M, seed_offset=1), reference_cap=cap, cap=cap,
        )
        reference = rep.reference
        rows.append([N, rep.excess, rep.inclusion_defect])
        last = rep
    write_csv(outdir / "thmd.csv", ["N", "excess", "inclusion_defect"], rows)
    (outdir / "spectrum.json").write_text(last.restricted.to_json() + "\n")
    write_summary(outdir, "spectrum", cfg, {"scales": scales}, True)
    return True


def run_homog(cfg: ExperimentConfig, outdir: Path, threads: int) -> bool:
    from .spectrum import RestrictedSpectrumSpec, restricted_spectrum
    from .spectrum import homogeneity_profile

    sec = cfg.section("homog")
    N = int(sec.get("base", 40))
    deltas = [float(v) for v in str(sec.get("deltas", "0.1 0.01")).split()]
    lo, hi = (float(v) for v in str(sec.get("window", "-6 6")).split())
    rho = float(sec.get("rho", 1e-3))
    spec = RestrictedSpectrumSpec(
        base=N, ratio=2, depth=1, rho=(rho, rho), plan=cfg.plan(count=int(sec.get("phases", 120))), cap=int(sec.get("cap", 1024))
    )
    S = restricted_spectrum(spec, cfg.potential, cfg.omega)
    prof = homogeneity_profile(S, (lo, hi), deltas, n_samples=int(sec.get("energy_samples", 32)))
    write_csv(outdir / "homog.csv", ["E", "delta", "ratio"], [[r["E"], r["delta"], r["ratio"]] for r in prof["rows"]])
    write_summary(outdir, "homog", cfg, {"min_ratio": {str(k): v for k, v in prof["min_ratio"].items()}}, True)
    return True


def run_selftest(cfg: ExperimentConfig, outdir: Path, threads: int) -> bool:
    from .selftest import selftest_checks

    rows, ok = selftest_checks(cfg, threads)
    write_csv(outdir / "selftest.csv", ["check", "metric", "tolerance", "status"], rows)
    write_summary(outdir, "selftest", cfg, {"checks": len(rows)}, ok)
    return ok


_SUBCOMMANDS = {
    "lyap": run_lyap,
    "ldt": run_ldt,
    "green": run_green,
    "localize": run_localize,
    "stabilize": run_stabilize,
    "ndr": run_ndr,
    "resonance": run_resonance,
    "prep": run_prep,
    "spectrum": run_spectrum,
    "homog": run_homog,
    "selftest": run_selftest,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qp-spectra", description=__doc__)
    parser.add_argument("subcommand", choices=sorted(_SUBCOMMANDS))
    parser.add_argument("--config", required=True, help="INI or JSON experiment config")
    parser.add_argument("--out", default="qp-out", help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="worker count (speed only)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.raw.setdefault("params", {})["seed"] = str(args.seed)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        ok = _SUBCOMMANDS[args.subcommand](cfg, outdir, max(1, args.threads))
    except Exception as exc:  # numerical failure: serialize the case
        (outdir / "failure.json").write_text(
            json.dumps({"subcommand": args.subcommand, "error": repr(exc)}, indent=1) + "\n"
        )
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
