"""Finite-volume operator core.

Trigonometric-polynomial potentials with exact complex-analytic extension,
Dirichlet determinants in sign/log-magnitude form, scaled transfer-matrix
products, a symmetric-tridiagonal eigensolver, Sturm counts, and interlacing.

Conventions used throughout: the operator on the lattice interval [a, b] has
diagonal entries V(x + n*omega) for n = a..b and off-diagonal entries -1, with
Dirichlet boundary conditions.  The determinant recurrence is

    f_n = (V(x + n*omega) - E) f_{n-1} - f_{n-2},    f_{[a, a-1]} = 1,

and the transfer matrix over [a, b] is the product of one-step matrices
[[V - E, -1], [1, 0]] taken from n = b down to n = a.  Its entries are the
four Dirichlet determinants

    M_[a,b] = [[ f_[a,b],   -f_[a+1,b]   ],
               [ f_[a,b-1], -f_[a+1,b-1] ]].
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal, eigvalsh_tridiagonal

from .torus import orbit_phases

__all__ = [
    "Potential",
    "Tridiagonal",
    "LogDet",
    "TransferProduct",
    "EigenSystem",
    "hamiltonian",
    "dirichlet_det",
    "logdet_from_values",
    "logdet_window_sweep",
    "transfer",
    "transfer_from_values",
    "transfer_batch",
    "transfer_norm_logs",
    "eigs",
    "eigs_from_diag",
    "eigenvalue_count_below",
    "interlace_check",
]

_RESCALE_HI = 2.0**512
_RESCALE_LO = 2.0**-512


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class Potential:
    """Real trigonometric polynomial on T^d with analyticity width rho.

    Coefficients are stored over a half lattice (first nonzero index positive)
    together with the real constant term; Hermitian symmetry c_{-k} = conj(c_k)
    is therefore built in and V is exactly real on real phases.
    """

    dimension: int
    rho: float
    c0: float
    ks: tuple  # tuple of index tuples, each with first nonzero entry > 0
    cs: tuple  # matching complex coefficients

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        for k in self.ks:
            if len(k) != self.dimension:
                raise ValueError("coefficient index dimension mismatch")
            nz = [v for v in k if v != 0]
            if not nz or nz[0] <= 0:
                raise ValueError("half-lattice indices must have first nonzero entry > 0")

    # -- constructors

    @staticmethod
    def from_coefficients(coeffs: dict, rho: float = 0.5, dimension: Optional[int] = None) -> "Potential":
        """Build from a full coefficient table {k: c_k}; validates symmetry."""
        if not coeffs:
            raise ValueError("empty coefficient table")
        table = {tuple(int(v) for v in (k if hasattr(k, "__len__") else (k,))): complex(c) for k, c in coeffs.items()}
        d = dimension or len(next(iter(table)))
        scale = max(abs(c) for c in table.values()) or 1.0
        c0 = table.get((0,) * d, 0.0)
        if abs(complex(c0).imag) > 1e-14 * scale:
            raise ValueError("constant coefficient must be real")
        ks, cs = [], []
        for k, c in sorted(table.items()):
            if all(v == 0 for v in k):
                continue
            nz = [v for v in k if v != 0]
            if nz[0] < 0:
                continue  # mirror of a half-lattice entry
            mirror = table.get(tuple(-v for v in k), 0.0)
            if abs(mirror - c.conjugate()) > 1e-13 * scale:
                raise ValueError(f"Hermitian symmetry violated at k={k}")
            ks.append(k)
            cs.append(c)
        return Potential(d, float(rho), float(complex(c0).real), tuple(ks), tuple(cs))

    @staticmethod
    def constant(value: float, dimension: int = 1, rho: float = 1.0) -> "Potential":
        return Potential(dimension, rho, float(value), (), ())

    @staticmethod
    def amo(lam: float, rho: float = 0.5) -> "Potential":
        """2*lam*cos(2 pi x) on T^1."""
        return Potential(1, rho, 0.0, ((1,),), (complex(lam),))

    @staticmethod
    def two_cos(lam: float, rho: float = 0.5) -> "Potential":
        """lam*(2 cos 2 pi x1 + 2 cos 2 pi x2) on T^2."""
        return Potential(2, rho, 0.0, ((0, 1), (1, 0)), (complex(lam), complex(lam)))

    @staticmethod
    def cos_sum(amplitudes, rho: float = 0.5) -> "Potential":
        """sum_j amplitudes[j] * cos(2 pi x_j)."""
        amps = [float(a) for a in np.atleast_1d(amplitudes)]
        d = len(amps)
        ks, cs = [], []
        for j, a in enumerate(amps):
            k = [0] * d
            k[j] = 1
            ks.append(tuple(k))
            cs.append(complex(a / 2.0))
        return Potential(d, rho, 0.0, tuple(ks), tuple(cs))

    # -- queries

    @property
    def degree(self) -> int:
        return max((max(abs(v) for v in k) for k in self.ks), default=0)

    def sup_norm_bound(self) -> float:
        """Upper bound for sup |V| on the real torus."""
        return abs(self.c0) + 2.0 * sum(abs(c) for c in self.cs)

    def strip_bound(self, y: float) -> float:
        """Upper bound for sup |V| on |Im z| <= y (Euclidean)."""
        return abs(self.c0) + 2.0 * sum(
            abs(c) * math.exp(2 * math.pi * sum(abs(v) for v in k) * y) for k, c in zip(self.ks, self.cs)
        )

    # -- evaluation

    def evaluate(self, points: np.ndarray, y=None) -> np.ndarray:
        """Evaluate V at real phases ``points`` (shape (..., d)), optionally
        shifted by an imaginary displacement vector y.

        Returns a real array for y=None, complex otherwise.
        """
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.dimension:
            raise ValueError("point dimension mismatch")
        if y is None:
            out = np.full(pts.shape[:-1], self.c0)
            for k, c in zip(self.ks, self.cs):
                theta = 2.0 * math.pi * (pts @ np.asarray(k, dtype=float))
                out = out + 2.0 * (c.real * np.cos(theta) - c.imag * np.sin(theta))
            return out
        yv = np.zeros(self.dimension) + np.asarray(y, dtype=float)
        if math.sqrt(float(yv @ yv)) >= self.rho:
            raise ValueError("evaluation outside the analyticity strip |y| < rho")
        z = pts + 1j * yv
        return self._evaluate_complex(z)

    def evaluate_complex(self, z) -> complex:
        """Evaluate the analytic extension at a single point z in C^d."""
        zv = np.atleast_1d(np.asarray(z, dtype=complex))
        if zv.shape[-1] != self.dimension:
            raise ValueError("point dimension mismatch")
        im = np.asarray(zv.imag, dtype=float)
        if math.sqrt(float((im * im).sum(axis=-1).max())) >= self.rho:
            raise ValueError("evaluation outside the analyticity strip |y| < rho")
        return complex(self._evaluate_complex(zv)) if zv.ndim == 1 else self._evaluate_complex(zv)

    def _evaluate_complex(self, z: np.ndarray) -> np.ndarray:
        out = np.full(z.shape[:-1], complex(self.c0))
        for k, c in zip(self.ks, self.cs):
            theta = 2.0j * math.pi * (z @ np.asarray(k, dtype=float))
            out = out + c * np.exp(theta) + c.conjugate() * np.exp(-theta)
        return out

    def orbit_values(self, x, omega, a: int, b: int, y=None) -> np.ndarray:
        """V(x + n*omega (+ iy)) for n = a..b."""
        if b < a:
            return np.zeros(0)
        phases = orbit_phases(x, omega, np.arange(a, b + 1))
        return self.evaluate(phases, y=y)


# ---------------------------------------------------------------------------
# Hamiltonian


@dataclass(frozen=True)
class Tridiagonal:
    """Symmetric tridiagonal description of H_[a,b](x, omega)."""

    diag: np.ndarray
    a: int  # leftmost lattice site

    @property
    def size(self) -> int:
        return len(self.diag)

    @property
    def b(self) -> int:
        return self.a + self.size - 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.a, self.b + 1)

    def dense(self) -> np.ndarray:
        n = self.size
        m = np.diag(np.asarray(self.diag, dtype=float))
        idx = np.arange(n - 1)
        m[idx, idx + 1] = -1.0
        m[idx + 1, idx] = -1.0
        return m


def hamiltonian(V: Potential, x, omega, interval) -> Tridiagonal:
    a, b = int(interval[0]), int(interval[1])
    if b < a:
        raise ValueError("interval must satisfy a <= b")
    return Tridiagonal(diag=V.orbit_values(x, omega, a, b), a=a)


# ---------------------------------------------------------------------------
# Dirichlet determinants in log form


@dataclass(frozen=True)
class LogDet:
    """sign * exp(log_mag) with an optional exact logarithmic derivative.

    ``sign`` is -1/0/+1 for real data and a unit-modulus complex phase for
    complex data; ``log_mag`` is -inf exactly when sign == 0.  ``dlog`` is
    f'(E)/f(E) from the simultaneous derivative recurrence (None when not
    requested or when f = 0).
    """

    sign: complex
    log_mag: float
    dlog: Optional[complex] = None

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def value(self):
        """The represented number; overflows to inf for log_mag > ~709."""
        if self.sign == 0:
            return 0.0
        mag = math.exp(self.log_mag) if self.log_mag < 709.0 else math.inf
        return self.sign * mag


def _sign_of(f):
    if isinstance(f, complex):
        r = abs(f)
        return f / r if r > 0 else 0.0
    return 0.0 if f == 0 else math.copysign(1.0, f)


def logdet_from_values(values, E, derivative: bool = False) -> LogDet:
    """Determinant recurrence over explicit diagonal values (real or complex).

    An empty value sequence yields the convention value 1.  The running pair
    is rescaled to unit sup-norm whenever its magnitude leaves
    [2^-512, 2^512]; the rescaling accumulates into log_mag, and the optional
    derivative pair is rescaled identically so the ratio f'/f is preserved.
    """
    f_prev, f_pp = 1.0, 0.0
    fp_prev, fp_pp = 0.0, 0.0
    ls = 0.0
    for v in np.atleast_1d(values):
        a = v - E
        f = a * f_prev - f_pp
        if derivative:
            fp = a * fp_prev - fp_pp - f_prev
        m = max(abs(f), abs(f_prev))
        if m > _RESCALE_HI or (0.0 < m < _RESCALE_LO):
            inv = 1.0 / m
            f *= inv
            f_prev *= inv
            if derivative:
                fp *= inv
                fp_prev *= inv
            ls += math.log(m)
        if derivative:
            fp_pp, fp_prev = fp_prev, fp
        f_pp, f_prev = f_prev, f
    sign = _sign_of(f_prev)
    mag = abs(f_prev)
    log_mag = ls + math.log(mag) if mag > 0 else -math.inf
    dlog = None
    if derivative and sign != 0:
        dlog = fp_prev / f_prev
    return LogDet(sign=sign, log_mag=log_mag, dlog=dlog)


def dirichlet_det(V: Potential, x, omega, E, interval, derivative: bool = False, y=None) -> LogDet:
    """f_[a,b](x, omega, E) = det(H_[a,b] - E) in sign/log form.

    Allows the empty interval b = a - 1 (value 1).
    """
    a, b = int(interval[0]), int(interval[1])
    if b < a - 1:
        raise ValueError("interval must satisfy a <= b + 1")
    values = V.orbit_values(x, omega, a, b, y=y)
    return logdet_from_values(values, E, derivative=derivative)


def logdet_columns(step_values: np.ndarray, E) -> tuple:
    """Determinant recurrence run down every column of an (N, M) value array.

    Column i gets the diagonal values step_values[:, i]; E is a scalar or an
    (M,) array.  Returns (signs, log_mags) of shape (M,).
    """
    vals = np.asarray(step_values)
    N, M = vals.shape
    dtype = complex if (np.iscomplexobj(vals) or np.iscomplexobj(np.asarray(E))) else float
    f_prev = np.ones(M, dtype=dtype)
    f_pp = np.zeros(M, dtype=dtype)
    ls = np.zeros(M)
    for n in range(N):
        a = vals[n].astype(dtype) - E
        f = a * f_prev - f_pp
        m = np.maximum(np.abs(f), np.abs(f_prev))
        mask = (m > _RESCALE_HI) | ((m > 0.0) & (m < _RESCALE_LO))
        if mask.any():
            scale = np.where(mask, m, 1.0)
            f = f / scale
            f_prev = f_prev / scale
            ls = ls + np.log(scale)
        f_pp, f_prev = f_prev, f
    mag = np.abs(f_prev)
    with np.errstate(divide="ignore"):
        log_mags = ls + np.log(mag)
    if dtype is complex:
        signs = np.where(mag > 0, f_prev / np.where(mag > 0, mag, 1.0), 0.0)
    else:
        signs = np.sign(f_prev)
    return signs, log_mags


def logdet_window_sweep(values: np.ndarray, ell: int, E) -> tuple:
    """Determinants of all length-``ell`` windows of a value buffer.

    Window i covers values[i : i + ell]; returns (signs, log_mags) arrays of
    length len(values) - ell + 1.  Each window is an independent O(ell)
    recurrence over the shared buffer, vectorized across windows.
    """
    values = np.asarray(values)
    W = len(values) - ell + 1
    if W < 1:
        raise ValueError("buffer shorter than the window")
    dtype = complex if (np.iscomplexobj(values) or isinstance(E, complex)) else float
    f_prev = np.ones(W, dtype=dtype)
    f_pp = np.zeros(W, dtype=dtype)
    ls = np.zeros(W)
    for i in range(ell):
        a = values[i : i + W].astype(dtype) - E
        f = a * f_prev - f_pp
        m = np.maximum(np.abs(f), np.abs(f_prev))
        mask = (m > _RESCALE_HI) | ((m > 0.0) & (m < _RESCALE_LO))
        if mask.any():
            scale = np.where(mask, m, 1.0)
            f = f / scale
            f_prev = f_prev / scale
            ls = ls + np.log(scale)
        f_pp, f_prev = f_prev, f
    mag = np.abs(f_prev)
    with np.errstate(divide="ignore"):
        log_mags = ls + np.log(mag)
    if dtype is complex:
        signs = np.where(mag > 0, f_prev / np.where(mag > 0, mag, 1.0), 0.0)
    else:
        signs = np.sign(f_prev)
    return signs, log_mags


# ---------------------------------------------------------------------------
# transfer cocycle


def _two_prod(a: float, b: float):
    """Dekker product: returns (h, l) with h + l == a*b exactly."""
    p = a * b
    splitter = 134217729.0  # 2**27 + 1
    ta = splitter * a
    ah = ta - (ta - a)
    al = a - ah
    tb = splitter * b
    bh = tb - (tb - b)
    bl = b - bh
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


def _compensated_det2(m: np.ndarray) -> float:
    """ad - bc with double-double compensation (real matrices only)."""
    p1, e1 = _two_prod(float(m[0, 0]), float(m[1, 1]))
    p2, e2 = _two_prod(float(m[0, 1]), float(m[1, 0]))
    return (p1 - p2) + (e1 - e2)


@dataclass(frozen=True)
class TransferProduct:
    """A 2x2 matrix stored as exp(log_scale) * unit with ||unit||_F = 1."""

    unit: np.ndarray
    log_scale: float

    @property
    def frobenius_log(self) -> float:
        """log of the Frobenius norm of the represented matrix."""
        return self.log_scale + math.log(float(np.sqrt((np.abs(self.unit) ** 2).sum())))

    @property
    def spectral_log(self) -> float:
        """log of the operator (spectral) norm of the represented matrix."""
        return self.log_scale + math.log(_sigma_max(self.unit))

    def matrix(self) -> np.ndarray:
        """The represented matrix; overflows for log_scale > ~709."""
        return self.unit * math.exp(self.log_scale)

    def entry(self, i: int, j: int) -> tuple:
        """(sign_or_phase, log magnitude) of the represented entry."""
        v = self.unit[i, j]
        m = abs(v)
        if m == 0:
            return 0.0, -math.inf
        return _sign_of(complex(v) if np.iscomplexobj(self.unit) else float(v)), self.log_scale + math.log(m)

    def det_defect(self) -> float:
        """|det(represented) - 1|, computed with a compensated 2x2 det.

        Meaningful while the contracting direction is representable,
        i.e. log_scale not much above ~25; beyond that the defect reflects
        roundoff in det(unit) rather than the product itself.
        """
        if np.iscomplexobj(self.unit):
            du = complex(self.unit[0, 0] * self.unit[1, 1] - self.unit[0, 1] * self.unit[1, 0])
            ld = 2.0 * self.log_scale + math.log(abs(du)) if du != 0 else -math.inf
            return abs(cmath.exp(ld + 1j * cmath.phase(du)) - 1.0) if ld < 700 else math.inf
        du = _compensated_det2(self.unit)
        if du == 0.0:
            return 1.0
        ld = 2.0 * self.log_scale + math.log(abs(du))
        if ld >= 700:
            return math.inf
        return abs(math.copysign(math.exp(ld), du) - 1.0)

    def __matmul__(self, other: "TransferProduct") -> "TransferProduct":
        raw = self.unit @ other.unit
        fro = float(np.sqrt((np.abs(raw) ** 2).sum()))
        return TransferProduct(unit=raw / fro, log_scale=self.log_scale + other.log_scale + math.log(fro))


def _sigma_max(m: np.ndarray) -> float:
    """Largest singular value of a 2x2 matrix, closed form."""
    a = np.asarray(m)
    fro2 = float((np.abs(a) ** 2).sum())
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    disc = max(fro2 * fro2 - 4.0 * abs(det) ** 2, 0.0)
    return math.sqrt(0.5 * (fro2 + math.sqrt(disc)))


def transfer_from_values(values, E) -> TransferProduct:
    """Scaled product of one-step matrices over explicit diagonal values."""
    vals = np.atleast_1d(values)
    cplx = np.iscomplexobj(vals) or isinstance(E, complex)
    one = 1.0 + 0.0j if cplx else 1.0
    m00, m01, m10, m11 = one, 0.0 * one, 0.0 * one, one
    ls = 0.0
    for v in vals:
        a = v - E
        n00 = a * m00 - m10
        n01 = a * m01 - m11
        m00, m01, m10, m11 = n00, n01, m00, m01
        fro = math.sqrt(abs(m00) ** 2 + abs(m01) ** 2 + abs(m10) ** 2 + abs(m11) ** 2)
        inv = 1.0 / fro
        m00 *= inv
        m01 *= inv
        m10 *= inv
        m11 *= inv
        ls += math.log(fro)
    dtype = complex if cplx else float
    return TransferProduct(unit=np.array([[m00, m01], [m10, m11]], dtype=dtype), log_scale=ls)


def transfer(V: Potential, x, omega, E, interval, y=None) -> TransferProduct:
    """M_[a,b](x, omega, E), optionally complexified by the shift iy."""
    a, b = int(interval[0]), int(interval[1])
    if b < a:
        raise ValueError("interval must satisfy a <= b")
    return transfer_from_values(V.orbit_values(x, omega, a, b, y=y), E)


def transfer_batch(step_values: np.ndarray, E) -> tuple:
    """Batched transfer products.

    ``step_values`` has shape (N, M): row n holds V(x_i + n*omega) for the M
    batch members; ``E`` is a scalar or an (M,) array.  Returns
    (units (M, 2, 2), log_scales (M,)).  The reduction order is fixed, so the
    result is independent of any outer parallel scheduling.
    """
    vals = np.asarray(step_values)
    N, M = vals.shape
    dtype = complex if (np.iscomplexobj(vals) or np.iscomplexobj(np.asarray(E))) else float
    m00 = np.ones(M, dtype=dtype)
    m01 = np.zeros(M, dtype=dtype)
    m10 = np.zeros(M, dtype=dtype)
    m11 = np.ones(M, dtype=dtype)
    ls = np.zeros(M)
    for n in range(N):
        a = vals[n].astype(dtype) - E
        n00 = a * m00 - m10
        n01 = a * m01 - m11
        m10, m11 = m00, m01
        m00, m01 = n00, n01
        fro = np.sqrt(np.abs(m00) ** 2 + np.abs(m01) ** 2 + np.abs(m10) ** 2 + np.abs(m11) ** 2)
        inv = 1.0 / fro
        m00 = m00 * inv
        m01 = m01 * inv
        m10 = m10 * inv
        m11 = m11 * inv
        ls = ls + np.log(fro)
    units = np.empty((M, 2, 2), dtype=dtype)
    units[:, 0, 0] = m00
    units[:, 0, 1] = m01
    units[:, 1, 0] = m10
    units[:, 1, 1] = m11
    return units, ls


def transfer_norm_logs(step_values: np.ndarray, E) -> np.ndarray:
    """log Frobenius norms of batched transfer products (see transfer_batch)."""
    _, ls = transfer_batch(step_values, E)
    return ls  # units have Frobenius norm 1


# ---------------------------------------------------------------------------
# eigensystems


@dataclass(frozen=True)
class EigenSystem:
    """Sorted eigenvalues (and optionally eigenvectors) of H_[a,b](x, omega).

    Eigenvectors are columns, paired with eigenvalues by index, normalized,
    with the first nonzero entry of each column positive.
    """

    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray]
    a: int  # leftmost lattice site

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.a, self.a + self.size)

    def vector(self, j: int) -> np.ndarray:
        if self.eigenvectors is None:
            raise ValueError("eigenvectors were not requested")
        return self.eigenvectors[:, j]

    def min_gap(self, j: int) -> float:
        others = np.delete(self.eigenvalues, j)
        if len(others) == 0:
            return math.inf
        return float(np.min(np.abs(others - self.eigenvalues[j])))

    def validate(self, diag: np.ndarray, rtol: float = 1e-8) -> None:
        """Assert the residual/orthogonality invariants against the matrix."""
        if self.eigenvectors is None:
            return
        n = self.size
        scale = float(np.max(np.abs(diag)) + 2.0)
        v = self.eigenvectors
        hv = np.asarray(diag)[:, None] * v
        hv[:-1] -= v[1:]
        hv[1:] -= v[:-1]
        res = np.max(np.abs(hv - self.eigenvalues[None, :] * v))
        if res > rtol * scale:
            raise AssertionError(f"eigenpair residual {res:.3e} exceeds {rtol * scale:.3e}")
        gram = v.T @ v
        if np.max(np.abs(gram - np.eye(n))) > 1e-8:
            raise AssertionError("eigenvectors are not orthonormal to 1e-8")


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        nz = np.nonzero(col)[0]
        if len(nz) and col[nz[0]] < 0:
            out[:, j] = -col
    return out


def _orthonormalize_clusters(w: np.ndarray, v: np.ndarray, scale: float) -> np.ndarray:
    """Jointly re-orthonormalize eigenvector groups of near-degenerate
    eigenvalues (relative gap below 1e-10)."""
    tol = 1e-10 * (1.0 + scale)
    n = len(w)
    i = 0
    v = v.copy()
    while i < n:
        j = i + 1
        while j < n and w[j] - w[j - 1] <= tol:
            j += 1
        if j - i > 1:
            q, _ = np.linalg.qr(v[:, i:j])
            v[:, i:j] = q
        i = j
    return v


def eigs_from_diag(diag: np.ndarray, a: int = 0, want_vectors: bool = True) -> EigenSystem:
    diag = np.asarray(diag, dtype=float)
    n = len(diag)
    if n == 1:
        w = diag.copy()
        v = np.ones((1, 1)) if want_vectors else None
        return EigenSystem(eigenvalues=w, eigenvectors=v, a=a)
    off = -np.ones(n - 1)
    if not want_vectors:
        w = eigvalsh_tridiagonal(diag, off, lapack_driver="sterf")
        return EigenSystem(eigenvalues=w, eigenvectors=None, a=a)
    w, v = eigh_tridiagonal(diag, off)
    v = _orthonormalize_clusters(w, v, float(np.max(np.abs(diag)) + 2.0))
    v = _fix_signs(v)
    return EigenSystem(eigenvalues=w, eigenvectors=v, a=a)


def eigs(V: Potential, x, omega, interval, want_vectors: bool = True) -> EigenSystem:
    h = hamiltonian(V, x, omega, interval)
    return eigs_from_diag(h.diag, a=h.a, want_vectors=want_vectors)


def eigenvalue_count_below(diag: np.ndarray, E: float) -> int:
    """Number of eigenvalues strictly below E, by the Sturm pivot scan.

    The pivots d_i are the ratios f_i/f_{i-1} of the determinant recurrence;
    the count of negative pivots (sign changes of the f-sequence) equals the
    eigenvalue count below E.
    """
    diag = np.asarray(diag, dtype=float)
    pivmin = 1e-300
    count = 0
    d = diag[0] - E
    if abs(d) < pivmin:
        d = -pivmin
    if d < 0:
        count += 1
    for i in range(1, len(diag)):
        d = (diag[i] - E) - 1.0 / d
        if abs(d) < pivmin:
            d = -pivmin
        if d < 0:
            count += 1
    return count


def interlace_check(outer, inner, tol: float = 1e-9) -> bool:
    """Cauchy interlacing E_k(H) <= E_k(H_r) <= E_{k+n-r}(H), with tolerance."""
    wo = np.asarray(outer.eigenvalues if isinstance(outer, EigenSystem) else outer, dtype=float)
    wi = np.asarray(inner.eigenvalues if isinstance(inner, EigenSystem) else inner, dtype=float)
    n, r = len(wo), len(wi)
    if r > n:
        raise ValueError("inner system larger than outer")
    lower_ok = bool(np.all(wo[:r] <= wi + tol))
    upper_ok = bool(np.all(wi <= wo[n - r :] + tol))
    return lower_ok and upper_ok
