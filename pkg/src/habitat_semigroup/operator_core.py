"""Transversal Dirichlet Laplacian and the matrix functions built on it.

Two evaluation paths coexist. The dense path works on arbitrary square
matrices (Schur square root, scaling-and-squaring exponential from scipy).
The spectral path exploits the symmetry of the Laplacian: every function of
it is diagonal in its eigenbasis, so matrix functions reduce to scalar maps
on the eigenvalues.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Literal

import numpy as np
from scipy import linalg

UNDERFLOW_EXPONENT = 700.0


class OperatorDomainError(ValueError):
    pass


class BranchCutError(OperatorDomainError):
    """A spectrum point sits on (or within tolerance of) the closed negative axis."""


# ---------------------------------------------------------------------------
# transversal operator
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TransversalOperator:
    """Second-difference Dirichlet Laplacian on ``(0, 1)`` with ``n`` interior nodes."""

    n: int
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise OperatorDomainError("n must be a positive integer")

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @cached_property
    def matrix(self) -> np.ndarray:
        n, h = self.n, self.h
        m = np.diag(np.full(n, -2.0)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)
        return m / h**2

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(1, self.n + 1) * self.h

    def closed_form_eigenvalues(self) -> np.ndarray:
        k = np.arange(1, self.n + 1)
        return -(4 / self.h**2) * np.sin(k * np.pi * self.h / 2) ** 2

    @property
    def eigen_decomposition(self) -> tuple[np.ndarray, np.ndarray]:
        """``(mu, V)`` with ``mu`` ascending in magnitude (``mu[0]`` closest to 0)
        and orthonormal columns ``V``. Computed once; thread safe."""
        d = self.__dict__
        if "_eig" not in d:
            with self._lock:
                if "_eig" not in d:
                    mu, v = np.linalg.eigh(self.matrix)
                    order = np.argsort(-mu)
                    # sine modes: fix the sign so the first entry is positive
                    v = v[:, order]
                    v *= np.sign(v[0])[None, :]
                    d["_eig"] = (mu[order], v)
        return d["_eig"]


def build_dirichlet_laplacian(n: int) -> TransversalOperator:
    if n < 1:
        raise OperatorDomainError("n must be >= 1")
    return TransversalOperator(int(n))


# ---------------------------------------------------------------------------
# sectoriality
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SectorialityReport:
    m_constant: float
    angle_bound: float
    scanned_set: str
    n_samples: int
    rejected: tuple = ()


def measure_sectoriality(op, samples: Iterable[complex], description: str = "") -> SectorialityReport:
    """``M = max |lam| ||(op - lam)^{-1}||_2`` over the samples.

    ``op`` is a matrix or a ``TransversalOperator`` (its matrix is used).
    Samples within ``1e-10`` of an eigenvalue are rejected and listed.
    """
    m = op.matrix if isinstance(op, TransversalOperator) else np.asarray(op)
    eig = np.linalg.eigvals(m)
    n = m.shape[0]
    best, kept, rejected = 0.0, 0, []
    for lam in samples:
        lam = complex(lam)
        if np.min(np.abs(eig - lam)) < 1e-10:
            rejected.append(lam)
            continue
        r = np.linalg.solve(m - lam * np.eye(n), np.eye(n))
        best = max(best, abs(lam) * np.linalg.norm(r, 2))
        kept += 1
    if kept == 0:
        raise OperatorDomainError("no admissible samples")
    angle = math.pi - math.asin(min(1.0, 1.0 / best)) if best > 0 else math.pi / 2
    return SectorialityReport(best, angle, description, kept, tuple(rejected))


# ---------------------------------------------------------------------------
# matrix functions
# ---------------------------------------------------------------------------


def principal_sqrt(m) -> np.ndarray:
    """Principal square root via the Schur method."""
    m = np.asarray(m, dtype=complex)
    ev = np.linalg.eigvals(m)
    scale = max(1.0, np.max(np.abs(ev)))
    if np.any((np.abs(ev.imag) <= 1e-8 * scale) & (ev.real <= 1e-8 * scale)):
        raise BranchCutError("eigenvalue on or near the closed negative real axis")
    return linalg.sqrtm(m)


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """``B = -sqrt(-A + (r + lam)/d)``; ``matrix`` is dense, ``modes`` holds the
    diagonal in the eigenbasis of ``A`` when built on the spectral path."""

    matrix: np.ndarray
    kind: Literal["B_minus", "B_plus", "generic"] = "generic"
    meta: tuple = ()
    modes: np.ndarray | None = None
    basis: np.ndarray | None = field(default=None, repr=False)

    @cached_property
    def spectral_abscissa(self) -> float:
        if self.modes is not None:
            return float(np.max(self.modes.real))
        return float(np.max(np.linalg.eigvals(self.matrix).real))


def generator_modes(op: TransversalOperator, d: float, r: float, lam: complex) -> np.ndarray:
    mu, _ = op.eigen_decomposition
    return -np.sqrt(-mu + (r + lam) / d + 0j)


def build_generator(op: TransversalOperator, d: float, r: float, lam: complex = 0j,
                    kind: str = "generic", path: str = "dense") -> GeneratorMatrix:
    """Square-root generator of ``-A + ((r + lam)/d) I``.

    ``path="dense"`` uses the Schur square root, ``path="spectral"`` the
    eigenbasis map ``mu -> -sqrt(-mu + (r + lam)/d)``.
    """
    if not (d > 0 and r >= 0):
        raise OperatorDomainError("need d > 0 and r >= 0")
    meta = (float(d), float(r), complex(lam))
    if path == "spectral":
        modes = generator_modes(op, d, r, lam)
        _, v = op.eigen_decomposition
        return GeneratorMatrix((v * modes) @ v.T, kind, meta, modes, v)
    if path != "dense":
        raise OperatorDomainError(f"unknown path {path!r}")
    shifted = -op.matrix + (r + lam) / d * np.eye(op.n)
    return GeneratorMatrix(-principal_sqrt(shifted), kind, meta)


def propagator(b: GeneratorMatrix, x: float) -> np.ndarray:
    """``exp(x B)`` for ``x >= 0``; the zero matrix once ``x |abscissa| > 700``."""
    if x < 0:
        raise OperatorDomainError("x must be nonnegative")
    n = b.matrix.shape[0]
    if x == 0:
        return np.eye(n, dtype=complex)
    if x * abs(b.spectral_abscissa) > UNDERFLOW_EXPONENT:
        return np.zeros((n, n), dtype=complex)
    if b.modes is not None:
        v = b.basis
        return (v * np.exp(x * b.modes)) @ v.T
    return linalg.expm(x * b.matrix)


def phi_functions(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(exp(M), phi1(M), phi2(M))`` from one exponential of a block matrix.

    ``phi1 = (e^M - I)/M`` and ``phi2 = (e^M - I - M)/M^2`` (entire functions).
    """
    n = m.shape[0]
    big = np.zeros((3 * n, 3 * n), dtype=complex)
    big[:n, :n] = m
    big[:n, n:2 * n] = np.eye(n)
    big[n:2 * n, 2 * n:] = np.eye(n)
    e = linalg.expm(big)
    return e[:n, :n], e[:n, n:2 * n], e[:n, 2 * n:]


def phi_scalar(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Elementwise ``(e^m, phi1(m), phi2(m))`` with a Taylor branch near 0."""
    m = np.asarray(m, dtype=complex)
    e = np.exp(m)
    small = np.abs(m) < 0.5
    safe = np.where(small, 1.0, m)
    em1 = np.expm1(safe)
    p1 = em1 / safe
    p2 = (em1 - safe) / safe**2
    if np.any(small):
        ms = m[small]
        s1 = np.zeros_like(ms)
        s2 = np.zeros_like(ms)
        term = np.ones_like(ms)
        # phi1 = sum m^k/(k+1)!, phi2 = sum m^k/(k+2)!
        for k in range(20):
            s1 += term / (k + 1)
            s2 += term / ((k + 1) * (k + 2))
            term = term * ms / (k + 1)
        p1 = p1.copy()
        p2 = p2.copy()
        p1[small] = s1
        p2[small] = s2
    return e, p1, p2


@dataclass(frozen=True)
class DecayFit:
    C: float
    c: float
    residual_max: float


def fit_propagator_decay(op: TransversalOperator, d: float, r: float,
                         lambdas: Iterable[complex], ts: np.ndarray) -> DecayFit:
    """Fit ``||exp(tB)|| <= C exp(-c t |lam/d + r/d|^{1/2})`` over samples.

    ``c`` is the least-squares slope of ``-log||exp(tB)||`` against
    ``t |lam/d + r/d|^{1/2}``; ``C`` the smallest constant making the bound hold
    with that slope.
    """
    xs, ys = [], []
    mu, _ = op.eigen_decomposition
    for lam in lambdas:
        modes = generator_modes(op, d, r, lam)
        w = abs(lam / d + r / d) ** 0.5
        for t in ts:
            # normal operator: the 2-norm is the largest modulus of the diagonal
            nrm = np.max(np.abs(np.exp(t * modes)))
            xs.append(t * w)
            ys.append(np.log(nrm))
    xs, ys = np.array(xs), np.array(ys)
    c = -float(np.polyfit(xs, ys, 1)[0])
    logC = float(np.max(ys + c * xs))
    return DecayFit(math.exp(logC), c, float(np.max(np.abs(ys + c * xs - logC))))
