"""Determinantal side: a point process on the nonnegative integers whose
kernel is a half-line Gaussian integral of Hermite-function products.

The kernel entry at (x, y) is int_r^inf psi_x(t) psi_y(t) dt with psi_n the
L2-normalized Hermite functions.  Everything downstream is standard DPP
machinery: diagonal sums, multiplicative-functional determinants, spectral
sampling, and a best-effort inversion recovering the pmf of the matched
height variable from its q-Laplace transform.

Hermite functions are generated by the normalized three-term recurrence, so
nothing here evaluates 2^n n! directly; raw polynomials exist only in
:func:`hermite` for reference values at small n.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, optimize
from scipy.special import erfc

from .qcomb import check_q


class QuadratureError(RuntimeError):
    """Adaptive quadrature missed the requested absolute tolerance."""

    def __init__(self, requested: float, achieved: float):
        super().__init__(
            f"quadrature error estimate {achieved:.3e} exceeds "
            f"requested tolerance {requested:.3e}"
        )
        self.requested = requested
        self.achieved = achieved


class SpectrumError(RuntimeError):
    """Kernel eigenvalues left [0, 1] by more than the numerical slack."""


def hermite(n: int, t: float) -> float:
    """Physicists' polynomial by the raw recurrence; fine for small n."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    h_prev, h = 1.0, 2.0 * t
    if n == 0:
        return 1.0
    for k in range(1, n):
        h_prev, h = h, 2.0 * t * h - 2.0 * k * h_prev
    return h


def hermite_functions(N: int, ts) -> np.ndarray:
    """Rows psi_0..psi_{N-1} evaluated at the points ts.

    Normalized recurrence: psi_{n+1} = t sqrt(2/(n+1)) psi_n
    - sqrt(n/(n+1)) psi_{n-1}, which keeps every value O(1).
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
    out = np.empty((N, ts.size))
    out[0] = math.pi ** -0.25 * np.exp(-0.5 * ts * ts)
    if N > 1:
        out[1] = math.sqrt(2.0) * ts * out[0]
    for n in range(1, N - 1):
        out[n + 1] = (math.sqrt(2.0 / (n + 1)) * ts * out[n]
                      - math.sqrt(n / (n + 1)) * out[n - 1])
    return out


def _upper_limit(r: float, n_max: int) -> float:
    # the classically allowed region ends near sqrt(2n+1); past it the
    # functions die like a Gaussian, and 12 units buy far more than 1e-15
    return max(r, math.sqrt(2.0 * n_max + 1.0)) + 12.0


def kernel_dh(r: float, x: int, y: int, tol: float = 1e-12) -> float:
    """One kernel entry by adaptive quadrature, absolute error <= tol."""
    if x < 0 or y < 0:
        raise ValueError("indices must be nonnegative")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    n = max(x, y) + 1

    def integrand(t):
        col = hermite_functions(n, t)
        return float(col[x, 0] * col[y, 0])

    value, err = integrate.quad(integrand, r, _upper_limit(r, n - 1),
                                epsabs=tol / 2, epsrel=0.0, limit=300)
    if err > tol:
        raise QuadratureError(requested=tol, achieved=err)
    return value


@dataclass(frozen=True)
class KernelMatrix:
    """Dense kernel block on {0..N-1} for cutoff r."""

    r: float
    N: int
    entries: np.ndarray

    def __post_init__(self):
        if self.entries.shape != (self.N, self.N):
            raise ValueError("entries must be N x N")

    def spectrum(self) -> tuple:
        evals, evecs = np.linalg.eigh(self.entries)
        return evals, evecs

    def trace(self) -> float:
        return float(np.trace(self.entries))


_PANEL = 0.5
_GL_ORDER = 24


def kernel_matrix(r: float, N: int) -> KernelMatrix:
    """All entries at once via composite Gauss-Legendre panels on [r, T]."""
    if N < 1:
        raise ValueError(f"N must be positive, got {N}")
    T = _upper_limit(r, N - 1)
    xg, wg = leggauss(_GL_ORDER)
    n_panels = max(1, int(math.ceil((T - r) / _PANEL)))
    edges = np.linspace(r, T, n_panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()
    psi = hermite_functions(N, nodes)
    scaled = psi * np.sqrt(weights)
    M = scaled @ scaled.T
    M = 0.5 * (M + M.T)
    return KernelMatrix(r=float(r), N=int(N), entries=M)


def weighted_trace(r: float, q, tol: float = 1e-10) -> float:
    """Sum of q^n * diagonal(n), truncated where the geometric tail is < tol.

    Diagonal entries sit in [0, 1], so the neglected mass is at most
    q^N / (1 - q).
    """
    qf = float(check_q(q))
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if qf == 0.0:
        N = 1
    else:
        N = max(1, math.ceil(math.log(tol * (1.0 - qf)) / math.log(qf)))
    diag = np.diag(kernel_matrix(r, N).entries)
    return float(np.dot(qf ** np.arange(N), diag))


def closed_form_first_moment(r: float, q) -> float:
    """Gaussian tail integral form of the q-weighted diagonal sum."""
    qf = float(check_q(q))
    return float(erfc(r * math.sqrt((1.0 - qf) / (1.0 + qf))) / (2.0 * (1.0 - qf)))


# ---------------------------------------------------------------------------
# generating-series cross-check


def mehler_closed(x: float, y: float, z: float) -> float:
    """Closed Gaussian form of sum_n z^n/(2^n n!) H_n(x) H_n(y)."""
    if not abs(z) < 1.0:
        raise ValueError(f"need |z| < 1, got {z}")
    denom = 1.0 - z * z
    return math.exp((2.0 * x * y * z - (x * x + y * y) * z * z) / denom) / math.sqrt(denom)


def mehler_sum(x: float, y: float, z: float, *, tol: float = 1e-12,
               max_terms: int = 800) -> float:
    """Partial sums of the same series with normalized polynomial values."""
    # scaled recurrence: H_n/sqrt(2^n n!) stays O(poly) where the raw values blow up
    hx_prev, hx = 0.0, 1.0
    hy_prev, hy = 0.0, 1.0
    total = hx * hy
    zn = 1.0
    small = 0
    for n in range(max_terms):
        c1 = math.sqrt(2.0 / (n + 1))
        c2 = math.sqrt(n / (n + 1))
        hx_prev, hx = hx, c1 * x * hx - c2 * hx_prev
        hy_prev, hy = hy, c1 * y * hy - c2 * hy_prev
        zn *= z
        term = zn * hx * hy
        total += term
        small = small + 1 if abs(term) < tol else 0
        if small >= 8:
            break
    return total


# ---------------------------------------------------------------------------
# multiplicative functionals


def default_size(r: float, q=None, z: float = None) -> int:
    """Truncation size: past ~2r^2 the diagonal is numerically negligible."""
    N = max(30, math.ceil(2.0 * r * r) + 30)
    if q is not None and z is not None and z > 0:
        qf = float(check_q(q))
        if qf > 0.0:
            # keep going until z q^N is below determinant-level noise
            N = max(N, math.ceil((math.log(z) + 14 * math.log(10.0))
                                 / -math.log(qf)))
    return N


def fredholm_qlaplace(r: float, q, z: float, N: int = None) -> float:
    """E prod over points of 1/(1 + z q^point), as det(I - sqrt(G) K sqrt(G)).

    G is the diagonal of z q^x / (1 + z q^x); the determinant is the
    standard multiplicative-functional formula for a DPP.
    """
    qf = float(check_q(q))
    if z < 0:
        raise ValueError(f"z must be nonnegative, got {z}")
    if z == 0.0:
        return 1.0
    if N is None:
        N = default_size(r, qf, z)
    K = kernel_matrix(r, N).entries
    x = np.arange(N)
    g = z * qf ** x
    g = g / (1.0 + g)
    root = np.sqrt(g)
    M = np.eye(N) - root[:, None] * K * root[None, :]
    sign, logdet = np.linalg.slogdet(M)
    if not np.isfinite(logdet) or sign <= 0:
        raise FloatingPointError(
            f"determinant not a positive finite number: sign={sign}, log={logdet}"
        )
    return float(sign * math.exp(logdet))


# ---------------------------------------------------------------------------
# sampling


class DppSampler:
    """Spectral sampler: Bernoulli-select eigenvectors, then project out
    one point at a time, re-orthonormalizing after each conditioning step."""

    def __init__(self, kernel: KernelMatrix, slack: float = 1e-8):
        evals, evecs = kernel.spectrum()
        if evals.min() < -slack or evals.max() > 1.0 + slack:
            raise SpectrumError(
                f"eigenvalues [{evals.min():.3e}, {evals.max():.3e}] leave [0,1] "
                f"beyond slack {slack:.1e}"
            )
        self.kernel = kernel
        self.evals = np.clip(evals, 0.0, 1.0)
        self.evecs = evecs

    def sample(self, rng) -> np.ndarray:
        keep = rng.random(self.evals.size) < self.evals
        V = self.evecs[:, keep].copy()
        points = []
        while V.shape[1] > 0:
            k = V.shape[1]
            p = np.einsum("ij,ij->i", V, V) / k
            p = np.clip(p, 0.0, None)
            p = p / p.sum()
            i = int(rng.choice(p.size, p=p))
            points.append(i)
            j = int(np.argmax(np.abs(V[i])))
            col = V[:, j] / V[i, j]
            V = V - np.outer(col, V[i])
            V = np.delete(V, j, axis=1)
            if V.shape[1] > 0:
                V, _ = np.linalg.qr(V)
        return np.array(sorted(points), dtype=np.int64)


def dpp_sample(r: float, N: int, rng) -> np.ndarray:
    """One draw of the truncated ensemble; build a DppSampler for many."""
    return DppSampler(kernel_matrix(r, N)).sample(rng)


# ---------------------------------------------------------------------------
# q-Laplace transforms of integer laws


def _product_factors(q: float, z: float, L_hi: int) -> np.ndarray:
    """A[L] = prod_{i>=0} 1/(1 + z q^{L+i}) for L = 0..L_hi, by the backward
    recursion A[L] = A[L+1]/(1 + z q^L), cut where z q^M < 1e-16."""
    if z == 0.0:
        return np.ones(L_hi + 1)
    if q == 0.0:
        out = np.ones(L_hi + 1)
        out[0] = 1.0 / (1.0 + z)
        return out
    M = L_hi + 1
    while z * q ** M >= 1e-16:
        M += 1
    acc = 1.0
    out = np.empty(L_hi + 1)
    for L in range(M - 1, -1, -1):
        acc = acc / (1.0 + z * q ** L)
        if L <= L_hi:
            out[L] = acc
    return out


def q_laplace_of_pmf(pmf, q, z: float) -> float:
    """Transform of a law on {0, 1, ...}: E prod_{i>=0} 1/(1 + z q^{xi+i})."""
    qf = float(check_q(q))
    if isinstance(pmf, dict):
        L_hi = max(pmf)
        probs = np.zeros(L_hi + 1)
        for L, p in pmf.items():
            probs[int(L)] = float(p)
    else:
        probs = np.asarray(pmf, dtype=np.float64)
        L_hi = probs.size - 1
    if (probs < 0).any():
        raise ValueError("pmf entries must be nonnegative")
    return float(np.dot(probs, _product_factors(qf, float(z), L_hi)))


@dataclass(frozen=True)
class XiDistribution:
    """Recovered law of the matched height variable, with diagnostics.

    The inversion is a nonnegative least-squares fit of transform values at
    a node grid; it is intrinsically ill-conditioned, so the residual and
    condition number travel with the result and ``reliable`` is an honest
    flag, not a promise.
    """

    r: float
    q: float
    probs: np.ndarray
    residual: float
    condition: float
    reliable: bool

    @property
    def L_max(self) -> int:
        return self.probs.size - 1

    def as_dict(self) -> dict:
        return {L: float(p) for L, p in enumerate(self.probs)}

    def total_mass(self) -> float:
        return float(self.probs.sum())

    def mean(self) -> float:
        return float(np.dot(np.arange(self.probs.size), self.probs))

    def q_moment(self) -> float:
        """E q^xi under the recovered law."""
        return float(np.dot(self.q ** np.arange(self.probs.size), self.probs))


def xi_pmf(r: float, q, L_max: int, *, residual_threshold: float = 1e-6,
           N: int = None) -> XiDistribution:
    """Recover the pmf whose q-Laplace transform matches the ensemble's.

    Nodes are log-spaced in [1e-3, 10], 4 per unknown; the fit is solved
    with nonnegativity constraints and reported as-is.
    """
    qf = float(check_q(q))
    if L_max < 0:
        raise ValueError(f"L_max must be nonnegative, got {L_max}")
    zs = np.geomspace(1e-3, 10.0, 4 * max(L_max, 1))
    if N is None:
        N = default_size(r, qf, float(zs.max()))
    K = kernel_matrix(r, N).entries
    x = np.arange(N)
    targets = np.empty(zs.size)
    for k, z in enumerate(zs):
        g = z * qf ** x
        g = g / (1.0 + g)
        root = np.sqrt(g)
        sign, logdet = np.linalg.slogdet(np.eye(N) - root[:, None] * K * root[None, :])
        if not np.isfinite(logdet) or sign <= 0:
            raise FloatingPointError(f"bad determinant at z={z}")
        targets[k] = sign * math.exp(logdet)
    design = np.empty((zs.size, L_max + 1))
    for k, z in enumerate(zs):
        design[k] = _product_factors(qf, float(z), L_max)
    probs, rnorm = optimize.nnls(design, targets)
    condition = float(np.linalg.cond(design))
    reliable = (rnorm <= residual_threshold
                and probs.sum() <= 1.0 + 1e-8
                and probs.sum() >= 1.0 - 1e-3)
    return XiDistribution(r=float(r), q=qf, probs=probs, residual=float(rnorm),
                          condition=condition, reliable=bool(reliable))


# ---------------------------------------------------------------------------
# tabulation


def tabulate_kernel_csv(path: str, rs, qs, n_max: int = 30) -> None:
    """Diagonal table: one row per (r, q, n) with the kernel diagonal."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "q", "n", "kernel_diag"])
        for r in rs:
            diag = np.diag(kernel_matrix(float(r), n_max).entries)
            for q in qs:
                check_q(q)
                for n in range(n_max):
                    w.writerow([repr(float(r)), repr(float(q)), n,
                                repr(float(diag[n]))])


def tabulate_fredholm_csv(path: str, rs, qs, zs) -> None:
    """Transform table with the generating-series residual as a cross-check."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "q", "z", "fredholm", "series_check"])
        for r in rs:
            for q in qs:
                qf = float(check_q(q))
                series = abs(mehler_sum(float(r), float(r), qf)
                             - mehler_closed(float(r), float(r), qf))
                for z in zs:
                    val = fredholm_qlaplace(float(r), qf, float(z))
                    w.writerow([repr(float(r)), repr(qf), repr(float(z)),
                                repr(val), repr(series)])
