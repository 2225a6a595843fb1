"""Independent finite-difference discretisation of the transmission problem.

Unknowns are the nodal values at interior longitudinal nodes of both
habitats, for every interior transversal node. Dirichlet end values are zero
and the two interface traces are eliminated through the transmission
conditions written with 3-point one-sided derivatives, which keeps the
scheme second order up to the interface.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .habitat import GridFunction, HabitatConfig, trapezoid_weights


class OracleError(RuntimeError):
    pass


def _second_difference(n_nodes: int, dx: float) -> sparse.csr_matrix:
    """Second difference on the interior nodes of ``n_nodes`` uniform nodes
    (end values excluded)."""
    m = n_nodes - 2
    return sparse.diags([np.ones(m - 1), -2 * np.ones(m), np.ones(m - 1)], [-1, 0, 1],
                        shape=(m, m), format="lil") / dx**2


def _interface_map(cfg: HabitatConfig) -> np.ndarray:
    """2x4 matrix giving ``(a, b) = (u_-(0), u_+(0))`` from
    ``(u_-[-2], u_-[-3], u_+[1], u_+[2])``.

    Rows of the 2x2 system:
      d_- (3a - 4 u_-[-2] + u_-[-3]) / (2 dx_-) = q (b - a)
      d_+ (-3b + 4 u_+[1] - u_+[2]) / (2 dx_+) = q (b - a)
    """
    cm = cfg.d_minus / (2 * cfg.dx_minus)
    cp = cfg.d_plus / (2 * cfg.dx_plus)
    q = cfg.q
    lhs = np.array([[3 * cm + q, -q], [q, -3 * cp - q]])
    rhs = np.array([[4 * cm, -cm, 0.0, 0.0], [0.0, 0.0, -4 * cp, cp]])
    return np.linalg.solve(lhs, rhs)


@dataclass(frozen=True)
class Layout:
    """Row ``(habitat, i, j)`` <-> index; ``i`` is the longitudinal node
    (grid numbering), ``j`` the transversal node."""

    n_minus: int  # interior longitudinal nodes, minus side
    n_plus: int
    n_t: int

    def index(self, habitat: str, i: int, j: int) -> int:
        if habitat == "minus":
            if not 1 <= i <= self.n_minus:
                raise IndexError(i)
            return (i - 1) * self.n_t + j
        if not 1 <= i <= self.n_plus:
            raise IndexError(i)
        return (self.n_minus + i - 1) * self.n_t + j

    @property
    def size(self) -> int:
        return (self.n_minus + self.n_plus) * self.n_t


@dataclass(frozen=True, eq=False)
class Direct2DOperator:
    matrix: sparse.csr_matrix
    layout: Layout
    cfg: HabitatConfig
    interface: np.ndarray = field(repr=False)
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    # ---- grid-function <-> vector ------------------------------------------------
    def restrict(self, f: GridFunction) -> np.ndarray:
        m = f.minus_part[1:-1]
        p = f.plus_part[1:-1]
        return np.concatenate([m, p], axis=0).reshape(-1)

    def extend(self, u: np.ndarray) -> GridFunction:
        c, lay = self.cfg, self.layout
        u = u.reshape(lay.n_minus + lay.n_plus, lay.n_t)
        um, up = u[: lay.n_minus], u[lay.n_minus:]
        m = np.zeros((c.n_long_minus, c.n_transversal), dtype=u.dtype)
        p = np.zeros((c.n_long_plus, c.n_transversal), dtype=u.dtype)
        m[1:-1], p[1:-1] = um, up
        nb = np.stack([m[-2], m[-3], p[1], p[2]])
        ab = self.interface @ nb
        m[-1], p[0] = ab[0], ab[1]
        return GridFunction(m, p, c)

    @property
    def weights(self) -> np.ndarray:
        """Diagonal of ``diag(1/d_-, 1/d_+)`` in vector layout."""
        lay = self.layout
        return np.concatenate([np.full(lay.n_minus * lay.n_t, 1 / self.cfg.d_minus),
                               np.full(lay.n_plus * lay.n_t, 1 / self.cfg.d_plus)])

    def factorization(self, lam: complex):
        lam = complex(lam)
        with self._lock:
            lu = self._cache.get(lam)
            if lu is None:
                a = (self.matrix - lam * sparse.identity(self.layout.size, format="csc")).tocsc()
                if lam.imag != 0:
                    a = a.astype(complex)
                lu = splinalg.splu(a)
                self._cache[lam] = lu
        return lu


def build_2d_operator(cfg: HabitatConfig) -> Direct2DOperator:
    nm, npl, nt = cfg.n_long_minus - 2, cfg.n_long_plus - 2, cfg.n_transversal
    # transversal Laplacian assembled here independently of operator_core
    h = 1.0 / (nt + 1)
    a0 = sparse.diags([np.ones(nt - 1), -2 * np.ones(nt), np.ones(nt - 1)], [-1, 0, 1],
                      shape=(nt, nt)) / h**2
    lm = _second_difference(cfg.n_long_minus, cfg.dx_minus)
    lp = _second_difference(cfg.n_long_plus, cfg.dx_plus)
    n_x = nm + npl
    lxx = sparse.block_diag([lm, lp], format="lil")
    # eliminate the interface traces: the last minus row sees a, the first plus row sees b
    ab = _interface_map(cfg)
    cols = [nm - 1, nm - 2, nm, nm + 1]  # u_-[-2], u_-[-3], u_+[1], u_+[2] in interior numbering
    im, ip = nm - 1, nm
    for k, col in enumerate(cols):
        lxx[im, col] += ab[0, k] / cfg.dx_minus**2
        lxx[ip, col] += ab[1, k] / cfg.dx_plus**2
    d = sparse.diags(np.r_[np.full(nm, cfg.d_minus), np.full(npl, cfg.d_plus)])
    r = sparse.diags(np.r_[np.full(nm, cfg.r_minus), np.full(npl, cfg.r_plus)])
    eye_t = sparse.identity(nt)
    k = sparse.kron(d @ lxx.tocsr(), eye_t) + sparse.kron(d, a0) - sparse.kron(r, eye_t)
    return Direct2DOperator(k.tocsr(), Layout(nm, npl, nt), cfg, ab)


def direct_resolvent_solve(op: Direct2DOperator, lam: complex, f: GridFunction) -> GridFunction:
    """Solve ``(K - lam) w = f`` at the unknown nodes; traces are reconstructed."""
    rhs = op.restrict(f)
    lu = op.factorization(lam)
    if np.iscomplexobj(rhs) and not np.iscomplexobj(lu.L.data):
        w = lu.solve(rhs.real.copy()) + 1j * lu.solve(rhs.imag.copy())
    else:
        w = lu.solve(rhs.astype(lu.L.dtype, copy=False))
    res = (op.matrix @ w - lam * w) - rhs
    scale = max(np.linalg.norm(rhs), 1e-300)
    if not np.all(np.isfinite(w)) or np.linalg.norm(res) > 1e-10 * scale * max(1.0, _norm1(op) / max(abs(lam), 1.0)):
        raise OracleError(f"sparse solve failed: relative residual {np.linalg.norm(res) / scale:.3g}")
    return op.extend(w)


def _norm1(op: Direct2DOperator) -> float:
    return float(abs(op.matrix).sum(axis=0).max())


def time_step_cn(op: Direct2DOperator, u0: GridFunction, dt: float, n_steps: int) -> GridFunction:
    """Crank-Nicolson: ``(I - dt/2 K) u_{k+1} = (I + dt/2 K) u_k``."""
    if not dt > 0 or n_steps < 1:
        raise ValueError("need dt > 0 and n_steps >= 1")
    n = op.layout.size
    eye = sparse.identity(n, format="csc")
    lu = splinalg.splu((eye - 0.5 * dt * op.matrix).tocsc())
    explicit = (eye + 0.5 * dt * op.matrix).tocsr()
    u = op.restrict(u0)
    solve = (lambda b: lu.solve(b.real.copy()) + 1j * lu.solve(b.imag.copy())) if np.iscomplexobj(u) else lu.solve
    for _ in range(n_steps):
        u = solve(explicit @ u)
    return op.extend(u)


def spectrum(op: Direct2DOperator) -> np.ndarray:
    """All eigenvalues (dense; desk-scale sizes only)."""
    return np.linalg.eigvals(op.matrix.toarray())


# ---------------------------------------------------------------------------
# weak form
# ---------------------------------------------------------------------------


def _fe_1d(n_nodes: int, dx: float):
    """Stiffness and consistent mass of P1 hats on a uniform grid (all nodes)."""
    main_k = np.full(n_nodes, 2.0)
    main_k[[0, -1]] = 1.0
    k = sparse.diags([-np.ones(n_nodes - 1), main_k, -np.ones(n_nodes - 1)], [-1, 0, 1]) / dx
    main_m = np.full(n_nodes, 4.0)
    main_m[[0, -1]] = 2.0
    m = sparse.diags([np.ones(n_nodes - 1), main_m, np.ones(n_nodes - 1)], [-1, 0, 1]) * dx / 6
    return k.tocsr(), m.tocsr()


def _fe_transversal(nt: int):
    h = 1.0 / (nt + 1)
    k = sparse.diags([-np.ones(nt - 1), 2 * np.ones(nt), -np.ones(nt - 1)], [-1, 0, 1]) / h
    m = sparse.diags([np.ones(nt - 1), 4 * np.ones(nt), np.ones(nt - 1)], [-1, 0, 1]) * h / 6
    return k.tocsr(), m.tocsr()


def weak_residual(op: Direct2DOperator, u: GridFunction, g: GridFunction, lam: complex = 0.0,
                  per_node: bool = False):
    """Residual of ``a(u, w) + b(u, w) + lam (u, w) = l(w)`` for ``-(P - lam) u = g``.

    ``a`` holds the diffusion and reaction forms and ``b`` the interface
    exchange ``q (u_+ - u_-)(w_+ - w_-)``; forms are integrated exactly for
    the piecewise bilinear interpolants. Test functions are tensor hats at
    every node that is not on a Dirichlet boundary, the interface nodes of
    each habitat carrying half-hats. Each residual is normalised by the
    transversal mass of its test function and, for interior nodes, also by
    its longitudinal width, so it estimates a pointwise equation defect.
    Returns the maximum modulus (or the full arrays with ``per_node``).
    """
    c = op.cfg
    kt, mt = _fe_transversal(c.n_transversal)
    out = []
    for side, d, r, length, n_nodes, uu, gg in (
        ("minus", c.d_minus, c.r_minus, c.ell, c.n_long_minus, u.minus_part, g.minus_part),
        ("plus", c.d_plus, c.r_plus, c.L, c.n_long_plus, u.plus_part, g.plus_part),
    ):
        dx = length / (n_nodes - 1)
        kx, mx = _fe_1d(n_nodes, dx)
        au = d * (kx @ uu @ mt.T + mx @ uu @ kt.T) + (r + lam) * (mx @ uu @ mt.T)
        lw = mx @ gg @ mt.T
        out.append([au - lw, dx])
    jump = u.plus_part[0] - u.minus_part[-1]
    # b(u, w) = q int (u_+ - u_-)(w_+ - w_-) over the interface
    out[0][0][-1] -= c.q * (mt @ jump)
    out[1][0][0] += c.q * (mt @ jump)
    h = 1.0 / (c.n_transversal + 1)
    res_m, dxm = out[0]
    res_p, dxp = out[1]
    res_m = res_m[1:] / h
    res_p = res_p[:-1] / h
    res_m[:-1] /= dxm
    res_p[1:] /= dxp
    if per_node:
        return res_m, res_p
    return float(max(np.abs(res_m).max(), np.abs(res_p).max()))


def discrete_energy(op: Direct2DOperator, u: GridFunction) -> float:
    """``a(u, u) + b(u, u)`` with the piecewise bilinear forms."""
    c = op.cfg
    kt, mt = _fe_transversal(c.n_transversal)
    e = 0.0
    for d, r, length, n_nodes, uu in (
        (c.d_minus, c.r_minus, c.ell, c.n_long_minus, u.minus_part),
        (c.d_plus, c.r_plus, c.L, c.n_long_plus, u.plus_part),
    ):
        kx, mx = _fe_1d(n_nodes, length / (n_nodes - 1))
        au = d * (kx @ uu @ mt.T + mx @ uu @ kt.T) + r * (mx @ uu @ mt.T)
        e += float(np.real(np.sum(np.conj(uu) * au)))
    jump = u.plus_part[0] - u.minus_part[-1]
    e += c.q * float(np.real(np.conj(jump) @ (mt @ jump)))
    return e


def grid_weights(cfg: HabitatConfig):
    """Trapezoid weights on each habitat (for norms consistent with the
    resolvent module)."""
    return trapezoid_weights(cfg.n_long_minus, cfg.dx_minus), trapezoid_weights(cfg.n_long_plus, cfg.dx_plus)
