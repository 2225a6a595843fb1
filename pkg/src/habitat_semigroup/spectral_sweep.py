"""Resolvent-norm sweeps, estimate scans and contour evolution.

All norms are discrete ``L^2`` (trapezoid in ``x``), unless stated otherwise.
Because every operator here commutes with the transversal Laplacian, each
map splits into one longitudinal matrix per transversal mode; those matrices
are obtained by pushing a batch of nodal deltas through the same recurrences
used by the resolvent, and operator norms are then taken mode by mode.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize

from .complex_sector import in_resolvent_sector
from .habitat import GridFunction, HabitatConfig, grid_norm, trapezoid_weights
from .transmission_resolvent import (
    DEFAULT_EPSILON0, ResolventWorkspace, _act, _backward_sweep, _exp_native, _forward_sweep,
    _resolve_native, assemble_workspace, resolve,
)

NORM_KINDS = ("p1", "p2", "pinf")


class SweepError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRecord:
    lam: complex
    norm_estimate: float
    scaled: float
    norm_kind: str
    lower_bound: bool = False
    iterations: int = 0
    wall_time_ms: float = 0.0


@dataclass(frozen=True)
class SectorFit:
    C_hat: float
    slope: float  # the slope farthest from -1
    slopes: dict  # ray angle -> slope
    max_over_median: float
    argmax_lambda: complex


# ---------------------------------------------------------------------------
# per-mode matrices
# ---------------------------------------------------------------------------


def _deltas(n_batch: int, offset: int, n_nodes: int, n_modes: int) -> np.ndarray:
    out = np.zeros((n_batch, n_nodes, n_modes), dtype=complex)
    idx = np.arange(n_nodes)
    out[offset + idx, idx, :] = 1.0
    return out


def resolvent_mode_matrices(ws: ResolventWorkspace) -> np.ndarray:
    """Stack ``(n_modes, n_out, n_in)`` of the resolvent in the eigenbasis.

    Rows and columns run over the minus nodes followed by the plus nodes.
    Requires the spectral path.
    """
    if ws.basis is None:
        raise SweepError("mode matrices need the spectral path")
    c = ws.cfg
    nm, npl, n = c.n_long_minus, c.n_long_plus, c.n_transversal
    tot = nm + npl
    gm = np.zeros((tot, nm, n), dtype=complex)
    gp = np.zeros((tot, npl, n), dtype=complex)
    gm[np.arange(nm), np.arange(nm), :] = 1.0 / c.d_minus
    gp[nm + np.arange(npl), np.arange(npl), :] = 1.0 / c.d_plus
    s = _resolve_native(ws, gm, gp)
    out = np.concatenate([s.minus, s.plus], axis=1)  # (in, out, mode)
    return np.transpose(out, (2, 1, 0))


def _full_weights(cfg: HabitatConfig) -> np.ndarray:
    return np.concatenate([trapezoid_weights(cfg.n_long_minus, cfg.dx_minus),
                           trapezoid_weights(cfg.n_long_plus, cfg.dx_plus)])


def weighted(mats: np.ndarray, w_out: np.ndarray, w_in: np.ndarray) -> np.ndarray:
    """Conjugate a stack of matrices so the Euclidean norm equals the
    weighted one: ``diag(sqrt w_out) M diag(1/sqrt w_in)``."""
    return np.sqrt(w_out)[None, :, None] * mats / np.sqrt(w_in)[None, None, :]


def power_norm(mats: np.ndarray, rng: np.random.Generator, tol: float = 1e-4,
               max_iter: int = 500) -> tuple[float, int]:
    """Largest singular value over a stack via power iteration on ``M M^*``.

    Iterates every matrix of the stack together; stops when the largest
    Rayleigh quotient changes by less than ``tol`` relatively.
    """
    k, _, n_in = mats.shape
    x = rng.standard_normal((k, n_in)) + 1j * rng.standard_normal((k, n_in))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    prev = None
    mh = np.conj(np.transpose(mats, (0, 2, 1)))
    for it in range(1, max_iter + 1):
        y = np.einsum("kij,kj->ki", mats, x)
        z = np.einsum("kij,kj->ki", mh, y)
        rq = np.max(np.linalg.norm(y, axis=1) ** 2)
        nz = np.linalg.norm(z, axis=1, keepdims=True)
        x = z / np.where(nz == 0, 1.0, nz)
        if prev is not None and abs(rq - prev) <= tol * rq:
            return float(math.sqrt(rq)), it
        prev = rq
    raise SweepError(f"power iteration did not converge in {max_iter} steps")


# ---------------------------------------------------------------------------
# resolvent norms
# ---------------------------------------------------------------------------


def resolvent_norm(cfg: HabitatConfig, lam: complex, norm_kind: str = "p2",
                   epsilon0: float = DEFAULT_EPSILON0, seed: int = 0,
                   workspace: ResolventWorkspace | None = None) -> SweepRecord:
    """Estimate ``||(S_h - lam)^{-1}||`` in the discrete ``L^p`` norm.

    ``p2`` is two-sided (power iteration); ``p1`` and ``pinf`` are lower
    bounds from 64 random sign vectors and are flagged as such.
    """
    if norm_kind not in NORM_KINDS:
        raise ValueError(f"norm_kind must be one of {NORM_KINDS}")
    t0 = time.perf_counter()
    ws = workspace or assemble_workspace(cfg, lam, epsilon0)
    rng = np.random.default_rng(seed)
    if norm_kind == "p2":
        w = _full_weights(cfg)
        mats = weighted(resolvent_mode_matrices(ws), w, w)
        nrm, its = power_norm(mats, rng)
        lower = False
    else:
        its = 64
        fm = rng.choice([-1.0, 1.0], size=(its, cfg.n_long_minus, cfg.n_transversal))
        fp = rng.choice([-1.0, 1.0], size=(its, cfg.n_long_plus, cfg.n_transversal))
        s = resolve(ws, fm, fp)
        nrm = max(grid_norm(s.minus[i], s.plus[i], cfg, norm_kind) / grid_norm(fm[i], fp[i], cfg, norm_kind)
                  for i in range(its))
        lower = True
    ms = (time.perf_counter() - t0) * 1e3
    lam = complex(lam)
    return SweepRecord(lam, float(nrm), float(abs(lam) * nrm), norm_kind, lower, its, ms)


def sweep_lambdas(epsilon0: float, r_min: float = 1.0, r_max: float = 1e6,
                  n_radii: int = 13, ray_offset: float = 0.01) -> list[complex]:
    """``0`` followed by the rays ``arg = 0, +-(pi - epsilon0 - ray_offset)``."""
    radii = np.geomspace(r_min, r_max, n_radii)
    edge = math.pi - epsilon0 - ray_offset
    out = [0j]
    for ang in (0.0, edge, -edge):
        out.extend(complex(r * np.exp(1j * ang)) for r in radii)
    return out


def sweep(cfg: HabitatConfig, lambdas: Sequence[complex], norm_kind: str = "p2",
          epsilon0: float = DEFAULT_EPSILON0, jobs: int = 1, seed: int = 0) -> list[SweepRecord]:
    """Parallel map of :func:`resolvent_norm`; output order follows ``lambdas``
    and each point gets its own seed, so results do not depend on ``jobs``."""
    cfg.transversal().eigen_decomposition  # build the shared cache up front

    def one(item):
        i, lam = item
        return resolvent_norm(cfg, lam, norm_kind, epsilon0, seed=seed + i)

    items = list(enumerate(lambdas))
    if jobs <= 1:
        return [one(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, items))


def fit_sector_constant(records: Iterable[SweepRecord], min_decades: float = 3.0) -> SectorFit:
    """Sector constant ``C_hat = max |lam| ||R(lam)||`` and per-ray log-log slopes."""
    recs = [r for r in records if r.lam != 0]
    if not recs:
        raise ValueError("no nonzero lambda samples")
    rays: dict[float, list[SweepRecord]] = {}
    for r in recs:
        rays.setdefault(round(float(np.angle(r.lam)), 9), []).append(r)
    if len(rays) < 3:
        raise ValueError("need at least three rays")
    angles = sorted(rays)
    if not (angles[0] < 0 < angles[-1] and math.isclose(-angles[0], angles[-1], rel_tol=1e-6)):
        raise ValueError("both boundary rays (symmetric extreme angles) are required")
    slopes = {}
    for ang, rs in rays.items():
        mods = np.array([abs(r.lam) for r in rs])
        if len(rs) < 3 or np.log10(mods.max() / mods.min()) < min_decades:
            raise ValueError(f"ray at angle {ang} spans fewer than {min_decades} decades")
        slopes[ang] = float(np.polyfit(np.log(mods), np.log([r.norm_estimate for r in rs]), 1)[0])
    scaled = np.array([r.scaled for r in records])
    k = int(np.argmax(scaled))
    worst = max(slopes.values(), key=lambda s: abs(s + 1))
    return SectorFit(float(scaled[k]), worst, slopes, float(scaled.max() / np.median(scaled)),
                     list(records)[k].lam)


# ---------------------------------------------------------------------------
# estimate scans
# ---------------------------------------------------------------------------


def _side_data(ws: ResolventWorkspace, side: str):
    c = ws.cfg
    if side == "minus":
        return ws.bm, ws.step_minus, c.n_long_minus, c.dx_minus, c.ell, c.d_minus, c.r_minus
    if side == "plus":
        return ws.bp, ws.step_plus, c.n_long_plus, c.dx_plus, c.L, c.d_plus, c.r_plus
    raise ValueError("side must be 'minus' or 'plus'")


def estimate_scale(cfg: HabitatConfig, lam: complex, side: str) -> float:
    """``sqrt(d) / sqrt(|lam + r| + d)`` for the given habitat."""
    d, r = (cfg.d_minus, cfg.r_minus) if side == "minus" else (cfg.d_plus, cfg.r_plus)
    return math.sqrt(d) / math.sqrt(abs(lam + r) + d)


@dataclass(frozen=True)
class ScanRecord:
    lam: complex
    ratio: float
    bound: float

    @property
    def normalized(self) -> float:
        return self.ratio / self.bound


def _mode_norm(mats: np.ndarray, w: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(weighted(mats, w, w), ord=2, axis=(1, 2))))


def convolution_norm_scan(cfg: HabitatConfig, lam: complex, side: str, g=None,
                          epsilon0: float = DEFAULT_EPSILON0) -> ScanRecord:
    """Norm of ``g -> int exp(|x - t| B) g(t) dt`` over the habitat.

    With ``g=None`` the exact discrete operator norm (supremum over all
    ``g``) is returned; otherwise the ratio ``||U g|| / ||g||`` for that ``g``
    (an array ``(n_nodes, n_transversal)``, ratio 0 for ``g = 0``).
    """
    ws = assemble_workspace(cfg, lam, epsilon0)
    b, step, n_nodes, dx, _, _, _ = _side_data(ws, side)
    bound = estimate_scale(cfg, lam, side)
    w = trapezoid_weights(n_nodes, dx)
    if g is not None:
        gn = ws.to_native(g)
        u = _forward_sweep(gn, step) + _backward_sweep(gn, step)
        num = np.sqrt(np.sum(w[:, None] * np.abs(u) ** 2))
        den = np.sqrt(np.sum(w[:, None] * np.abs(gn) ** 2))
        return ScanRecord(complex(lam), float(num / den) if den > 0 else 0.0, bound)
    g = _deltas(n_nodes, 0, n_nodes, cfg.n_transversal)
    u = _forward_sweep(g, step) + _backward_sweep(g, step)
    mats = np.transpose(u, (2, 1, 0))
    return ScanRecord(complex(lam), _mode_norm(mats, w), bound)


BOUNDARY_MAPS = (
    # (side, outer profile, inner functional)
    ("minus", "from_far", "far"),  # exp((x+ell)B) int exp((t+ell)B) g
    ("minus", "from_far", "near"),  # exp((x+ell)B) int exp(-tB) g
    ("minus", "from_near", "near"),  # exp(-xB) int exp(-tB) g
    ("minus", "from_near", "far"),  # exp(-xB) int exp((t+ell)B) g
    ("plus", "from_near", "near"),  # exp(xB) int exp(tB) g
    ("plus", "from_near", "far"),  # exp(xB) int exp((L-t)B) g
    ("plus", "from_far", "far"),  # exp((L-x)B) int exp((L-t)B) g
    ("plus", "from_far", "near"),  # exp((L-x)B) int exp(tB) g
)


def boundary_term_maps(ws: ResolventWorkspace, index: int):
    """Outer profile ``(n_nodes, n)`` and inner functional ``(n_nodes, n)``
    of rank-one map ``index`` (0-based) in native coordinates.

    The functional acts on nodal ``g`` through the exact weights for
    piecewise-linear data: ``inner(g) = sum_j c_j g_j``.
    """
    side, outer_kind, inner_kind = BOUNDARY_MAPS[index]
    b, step, n_nodes, dx, length, _, _ = _side_data(ws, side)
    n = ws.cfg.n_transversal
    g = _deltas(n_nodes, 0, n_nodes, n)
    # "near" means the interface x = 0, "far" the Dirichlet end
    fwd_end = _forward_sweep(g, step)[:, -1, :]  # int exp((end - t) B) g
    bwd_start = _backward_sweep(g, step)[:, 0, :]  # int exp((t - start) B) g
    if side == "minus":
        inner = fwd_end if inner_kind == "near" else bwd_start
    else:
        inner = bwd_start if inner_kind == "near" else fwd_end
    dist = np.arange(n_nodes) * dx  # distance from the start node
    if side == "minus":
        # start is -ell (far), end is 0 (near)
        d_from = dist if outer_kind == "from_far" else length - dist
    else:
        d_from = dist if outer_kind == "from_near" else length - dist
    d_from = np.clip(d_from, 0.0, None)
    if b.ndim != 1:
        raise SweepError("boundary maps need the spectral path")
    outer = np.stack([_exp_native(b, float(x)) for x in d_from])
    return outer, inner


def boundary_term_scan(cfg: HabitatConfig, lam: complex, epsilon0: float = DEFAULT_EPSILON0,
                       g=None) -> list[ScanRecord]:
    """Norms of the eight rank-one boundary maps ``x -> exp(a(x)B) int exp(b(t)B) g``.

    With ``g=None`` each record holds the exact discrete operator norm; with
    ``g = (g_minus, g_plus)`` the ratios for that data.
    """
    ws = assemble_workspace(cfg, lam, epsilon0)
    out = []
    for i, (side, _, _) in enumerate(BOUNDARY_MAPS):
        _, _, n_nodes, dx, _, _, _ = _side_data(ws, side)
        w = trapezoid_weights(n_nodes, dx)
        outer, inner = boundary_term_maps(ws, i)
        bound = estimate_scale(cfg, lam, side)
        if g is None:
            # rank one per mode: ||o|| times the dual norm of the functional
            on = np.sqrt(np.sum(w[:, None] * np.abs(outer) ** 2, axis=0))
            cn = np.sqrt(np.sum(np.abs(inner) ** 2 / w[:, None], axis=0))
            ratio = float(np.max(on * cn))
        else:
            gs = ws.to_native(g[0] if side == "minus" else g[1])
            val = np.sum(inner * gs, axis=0)
            res = outer * val[None, :]
            den = np.sqrt(np.sum(w[:, None] * np.abs(gs) ** 2))
            ratio = float(np.sqrt(np.sum(w[:, None] * np.abs(res) ** 2)) / den) if den > 0 else 0.0
        out.append(ScanRecord(complex(lam), ratio, bound))
    return out


def decade_spread(records: Sequence[ScanRecord]) -> float:
    """``max / min`` of the normalized ratios."""
    v = np.array([r.normalized for r in records])
    return float(v.max() / v.min())


# ---------------------------------------------------------------------------
# contour evolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContourSpec:
    """Hyperbola ``lam(theta) = mu (1 - sin(beta + i theta))`` sampled at
    ``theta_k = (k + 1/2) step`` for ``|k + 1/2| < n_nodes/2``."""

    mu: float
    beta: float
    n_nodes: int
    t_min: float
    t_max: float
    step: float
    shape: str = "hyperbola"

    def __post_init__(self):
        if self.shape != "hyperbola":
            raise ValueError("only the hyperbola is supported")
        if self.n_nodes < 2 or self.n_nodes % 2:
            raise ValueError("n_nodes must be an even integer >= 2")
        if not (self.mu > 0 and self.step > 0 and 0 < self.beta < math.pi / 2):
            raise ValueError("need mu > 0, step > 0 and beta in (0, pi/2)")
        if not 0 < self.t_min <= self.t_max:
            raise ValueError("need 0 < t_min <= t_max")

    @classmethod
    def for_window(cls, t_min: float, t_max: float, n_nodes: int = 48,
                   epsilon0: float = DEFAULT_EPSILON0, margin: float = 0.05) -> "ContourSpec":
        """Parameters balancing discretisation and truncation error over the window.

        The strip half-width ``d`` and angle ``beta`` keep every hyperbola of
        the analyticity strip inside ``S_(pi - epsilon0)``.
        """
        lam_ratio = t_max / t_min
        top = math.pi / 2 - epsilon0 - margin
        best = None
        for beta in np.linspace(0.2 * top, 0.95 * top, 16):
            for frac in np.linspace(0.1, 0.95, 18):
                d = frac * min(beta, top - beta)
                if d <= 0:
                    continue
                e, s, m = _contour_exponent(beta, d, lam_ratio, n_nodes // 2)
                if best is None or e < best[0]:
                    best = (e, beta, d, s, m)
        _, beta, d, s, m = best
        return cls(mu=m / t_min, beta=float(beta), n_nodes=n_nodes, t_min=t_min, t_max=t_max,
                   step=2 * math.pi * d / s)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes ``theta > 0`` (the lower half-plane) mapped to ``(lam, dlam/dtheta)``."""
        theta = (np.arange(self.n_nodes // 2) + 0.5) * self.step
        lam = self.mu * (1 - np.sin(self.beta + 1j * theta))
        dlam = -1j * self.mu * np.cos(self.beta + 1j * theta)
        return lam, dlam


def _contour_exponent(beta, d, lam_ratio, n):
    """Balanced error exponent ``E`` (log of the error) and the optimal
    ``s = 2 pi d / step``, ``m = mu t_min``."""
    def parts(log_s):
        s = math.exp(log_s)
        arg = 2 * math.pi * d * n / s
        if arg > 700:
            return math.inf, s, 0.0
        denom = lam_ratio * (1 - math.sin(beta - d)) - 1 + math.sin(beta) * math.cosh(arg)
        if denom <= 0:
            return math.inf, s, 0.0
        m = s / denom
        e = m * (1 - math.sin(beta) * math.cosh(arg))
        # round-off amplification floor
        e = max(e, math.log(1e-16) + m * lam_ratio * (1 - math.sin(beta)))
        return e, s, m

    res = optimize.minimize_scalar(lambda ls: parts(ls)[0], bounds=(math.log(1e-2), math.log(1e4 * n)),
                                   method="bounded", options={"xatol": 1e-10})
    return parts(res.x)


def semigroup_apply(cfg: HabitatConfig, contour: ContourSpec, t: float, u0: GridFunction,
                    epsilon0: float = DEFAULT_EPSILON0, jobs: int = 1) -> GridFunction:
    """``exp(t S) u0`` by trapezoid quadrature of the resolvent along the contour."""
    if not contour.t_min * (1 - 1e-12) <= t <= contour.t_max * (1 + 1e-12):
        raise ValueError(f"t={t} outside the contour window [{contour.t_min}, {contour.t_max}]")
    lam, dlam = contour.nodes()
    if not np.all(in_resolvent_sector(lam, epsilon0)):
        raise ValueError("contour node outside the resolvent sector")
    parts = [u0.minus_part.real, u0.plus_part.real]
    imag = np.iscomplexobj(u0.minus_part) or np.iscomplexobj(u0.plus_part)
    if imag:
        parts += [u0.minus_part.imag, u0.plus_part.imag]
    fm = np.stack(parts[0::2])
    fp = np.stack(parts[1::2])

    def node(k):
        ws = assemble_workspace(cfg, complex(lam[k]), epsilon0)
        s = resolve(ws, fm, fp)
        c = contour.step / (2j * math.pi) * np.exp(lam[k] * t) * dlam[k]
        return c * s.minus, c * s.plus

    ks = range(lam.size)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            terms = list(pool.map(node, ks))
    else:
        terms = [node(k) for k in ks]
    # conjugate-symmetric pairs: the lower-half nodes contribute the conjugate
    sm = 2 * sum(tm for tm, _ in terms).real
    sp = 2 * sum(tp for _, tp in terms).real
    if imag:
        return GridFunction(sm[0] + 1j * sm[1], sp[0] + 1j * sp[1], cfg)
    return GridFunction(sm[0], sp[0], cfg)
