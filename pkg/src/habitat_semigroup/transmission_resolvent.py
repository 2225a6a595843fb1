"""Closed-form resolvent of the two-habitat transmission operator.

The operator acts on ``u = (u_-, u_+)`` over ``(-ell, 0) U (0, L)`` as
``d (u'' + A u) - r u`` on each side, with ``u_-(-ell) = u_+(L) = 0`` and the
semi-permeable interface ``d_- u_-'(0) = d_+ u_+'(0) = q (u_+(0) - u_-(0))``.
``A`` is the transversal Dirichlet Laplacian.

Solving ``(S - lam) w = f`` reduces on each side to ``w'' - B^2 w = g`` with
``g = f/d`` and ``B = -sqrt(-A + (r + lam)/d)``. The solution is written as
propagated boundary coefficients plus a variation-of-constants convolution
``v``; the four boundary conditions become a 2x2 operator system whose
determinant factors through the symbol ``f`` of :mod:`complex_sector`.

Operators are held either as diagonals in the eigenbasis of ``A``
(``path="spectral"``) or as dense matrices (``path="dense"``). Both paths run
the same formulas through the small helpers ``_act``, ``_mm`` and ``_inv``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .complex_sector import check_resolvent_sector, eval_f
from .habitat import GridFunction, HabitatConfig
from .operator_core import GeneratorMatrix, build_generator, phi_functions, phi_scalar, propagator

DEFAULT_EPSILON0 = 0.5
COND_LIMIT = 1e12


class SingularDeterminantError(ArithmeticError):
    """The regularised determinant is numerically singular."""


# ---------------------------------------------------------------------------
# operator helpers: 1-D arrays are diagonals, 2-D arrays are matrices
# ---------------------------------------------------------------------------


def _act(op, x):
    """Apply ``op`` to the last axis of ``x``."""
    if op.ndim == 1:
        return x * op
    return x @ op.T


def _mm(*ops):
    out = ops[0]
    for b in ops[1:]:
        if out.ndim == 1 and b.ndim == 1:
            out = out * b
        elif out.ndim == 1:
            out = out[:, None] * b
        elif b.ndim == 1:
            out = out * b[None, :]
        else:
            out = out @ b
    return out


def _inv(op):
    return 1.0 / op if op.ndim == 1 else np.linalg.inv(op)


def _eye_like(op):
    return np.ones_like(op) if op.ndim == 1 else np.eye(op.shape[0], dtype=op.dtype)


def _exp_native(b, x):
    """``exp(x B)`` in native form with the underflow floor."""
    if b.ndim == 1:
        return np.where(x * np.abs(b.real) > 700, 0.0, np.exp(x * b))
    return propagator(GeneratorMatrix(b), x)


class StepWeights(NamedTuple):
    """One-step propagator and exact weights for piecewise-linear data."""

    prop: np.ndarray
    w_near: np.ndarray  # multiplies the sample at the far end of the step
    w_far: np.ndarray  # multiplies the sample where the step starts

    @classmethod
    def build(cls, b, dx: float) -> "StepWeights":
        m = dx * b
        if b.ndim == 1:
            e, p1, p2 = phi_scalar(m)
        else:
            e, p1, p2 = phi_functions(m)
        return cls(e, dx * p2, dx * (p1 - p2))


# ---------------------------------------------------------------------------
# workspace
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ResolventWorkspace:
    """Every ``lam``-dependent operator needed by the resolvent.

    Operator fields are stored in native form (see module docstring); use
    :meth:`as_matrix` for a dense view in physical coordinates.
    """

    cfg: HabitatConfig
    lam: complex
    path: str
    epsilon0: float
    basis: np.ndarray | None
    b_minus: GeneratorMatrix
    b_plus: GeneratorMatrix
    bm: np.ndarray
    bp: np.ndarray
    prop_ell: np.ndarray
    prop_L: np.ndarray
    prop_2ell: np.ndarray
    prop_2L: np.ndarray
    inv_b_minus: np.ndarray
    inv_b_plus: np.ndarray
    bracket_inverses: dict
    d_star: np.ndarray
    d_star_inverse: np.ndarray
    d_inverse: np.ndarray
    step_minus: StepWeights
    step_plus: StepWeights
    symbol_discrepancy: float = 0.0
    condition: float = 1.0
    scalars: dict = field(default_factory=dict)

    # reductions by the diffusion coefficients
    @property
    def lambda_minus(self): return self.scalars["lambda_minus"]
    @property
    def lambda_plus(self): return self.scalars["lambda_plus"]
    @property
    def rho_minus(self): return self.scalars["rho_minus"]
    @property
    def rho_plus(self): return self.scalars["rho_plus"]
    @property
    def q_minus(self): return self.scalars["q_minus"]
    @property
    def q_plus(self): return self.scalars["q_plus"]

    def to_native(self, x):
        x = np.asarray(x, dtype=complex)
        return x if self.basis is None else x @ self.basis

    def from_native(self, x):
        return x if self.basis is None else x @ self.basis.T

    def as_matrix(self, op) -> np.ndarray:
        if op.ndim == 2:
            return op
        v = self.basis
        return (v * op) @ v.T

    def determinant(self) -> np.ndarray:
        """``D`` rebuilt from the boundary system: its Cramer determinant
        divided by ``B_- B_+`` (native form)."""
        qm, qp = self.q_minus, self.q_plus
        I = _eye_like(self.bm)
        em, ep = self.prop_2ell, self.prop_2L
        a11 = _mm(self.bm, I + em) - qm * (I - em)
        a22 = _mm(self.bp, I + ep) - qp * (I - ep)
        det = _mm(a11, a22) - qm * qp * _mm(I - ep, I - em)
        return _mm(self.inv_b_minus, self.inv_b_plus, det)

    def d_star_inverse_norm(self) -> float:
        if self.d_star_inverse.ndim == 1:
            return float(np.max(np.abs(self.d_star_inverse)))
        return float(np.linalg.norm(self.d_star_inverse, 2))

    def d_inverse_norm(self) -> float:
        if self.d_inverse.ndim == 1:
            return float(np.max(np.abs(self.d_inverse)))
        return float(np.linalg.norm(self.d_inverse, 2))


def assemble_workspace(cfg: HabitatConfig, lam: complex, epsilon0: float = DEFAULT_EPSILON0,
                       path: str = "spectral") -> ResolventWorkspace:
    lam = check_resolvent_sector(lam, epsilon0)
    op = cfg.transversal()
    spectral = path == "spectral"
    b_minus = build_generator(op, cfg.d_minus, cfg.r_minus, lam, "B_minus", path)
    b_plus = build_generator(op, cfg.d_plus, cfg.r_plus, lam, "B_plus", path)
    if spectral:
        basis = b_minus.basis
        bm, bp = b_minus.modes, b_plus.modes
    else:
        basis = None
        bm, bp = b_minus.matrix, b_plus.matrix

    prop_ell = _exp_native(bm, cfg.ell)
    prop_L = _exp_native(bp, cfg.L)
    prop_2ell = _exp_native(bm, 2 * cfg.ell)
    prop_2L = _exp_native(bp, 2 * cfg.L)
    I = _eye_like(bm)
    brackets = {
        "plus_2ell": _inv(I + prop_2ell),
        "minus_2ell": _inv(I - prop_2ell),
        "plus_2L": _inv(I + prop_2L),
        "minus_2L": _inv(I - prop_2L),
    }
    inv_bm, inv_bp = _inv(bm), _inv(bp)
    qm, qp = cfg.q / cfg.d_minus, cfg.q / cfg.d_plus
    d_star = (I - qp * _mm(inv_bp, I - prop_2L, brackets["plus_2L"])
              - qm * _mm(inv_bm, I - prop_2ell, brackets["plus_2ell"]))

    discrepancy = 0.0
    if spectral:
        mu, _ = op.eigen_decomposition
        fvals = eval_f(-mu, cfg.symbol_params(lam), epsilon0)
        discrepancy = float(np.max(np.abs(fvals - d_star)) / np.max(np.abs(fvals)))
        cond = float(np.max(np.abs(fvals)) / np.min(np.abs(fvals)))
        if not np.all(np.isfinite(fvals)) or cond > COND_LIMIT:
            raise SingularDeterminantError(f"symbol nearly vanishes at lam={lam} (cond {cond:.3g})")
        d_star_inv = 1.0 / fvals
    else:
        cond = float(np.linalg.cond(d_star))
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise SingularDeterminantError(f"D* numerically singular at lam={lam} (cond {cond:.3g})")
        d_star_inv = np.linalg.inv(d_star)
    d_inv = _mm(d_star_inv, brackets["plus_2L"], brackets["plus_2ell"])

    scalars = dict(
        lambda_minus=lam / cfg.d_minus, lambda_plus=lam / cfg.d_plus,
        rho_minus=cfg.r_minus / cfg.d_minus, rho_plus=cfg.r_plus / cfg.d_plus,
        q_minus=qm, q_plus=qp,
    )
    return ResolventWorkspace(
        cfg=cfg, lam=lam, path=path, epsilon0=epsilon0, basis=basis,
        b_minus=b_minus, b_plus=b_plus, bm=bm, bp=bp,
        prop_ell=prop_ell, prop_L=prop_L, prop_2ell=prop_2ell, prop_2L=prop_2L,
        inv_b_minus=inv_bm, inv_b_plus=inv_bp, bracket_inverses=brackets,
        d_star=d_star, d_star_inverse=d_star_inv, d_inverse=d_inv,
        step_minus=StepWeights.build(bm, cfg.dx_minus),
        step_plus=StepWeights.build(bp, cfg.dx_plus),
        symbol_discrepancy=discrepancy, condition=cond, scalars=scalars,
    )


# ---------------------------------------------------------------------------
# convolution terms
# ---------------------------------------------------------------------------


def _forward_sweep(g, step: StepWeights):
    """``I_j = int_{x_0}^{x_j} exp((x_j - t) B) g(t) dt`` for piecewise-linear ``g``."""
    out = np.empty_like(g)
    acc = np.zeros_like(g[..., 0, :])
    out[..., 0, :] = acc
    for j in range(1, g.shape[-2]):
        acc = _act(step.prop, acc) + _act(step.w_far, g[..., j - 1, :]) + _act(step.w_near, g[..., j, :])
        out[..., j, :] = acc
    return out


def _backward_sweep(g, step: StepWeights):
    """``J_j = int_{x_j}^{x_end} exp((t - x_j) B) g(t) dt``."""
    n = g.shape[-2]
    out = np.empty_like(g)
    acc = np.zeros_like(g[..., 0, :])
    out[..., n - 1, :] = acc
    for j in range(n - 2, -1, -1):
        acc = _act(step.prop, acc) + _act(step.w_near, g[..., j, :]) + _act(step.w_far, g[..., j + 1, :])
        out[..., j, :] = acc
    return out


class ConvolutionResult(NamedTuple):
    v: np.ndarray  # v at every node
    deriv0: np.ndarray  # v'(0) at the interface
    forward: np.ndarray
    backward: np.ndarray


def _convolve_native(g, b, inv_b, step: StepWeights, side: str) -> ConvolutionResult:
    fwd = _forward_sweep(g, step)
    bwd = _backward_sweep(g, step)
    v = 0.5 * _act(inv_b, fwd + bwd)
    if side == "minus":
        deriv0 = 0.5 * fwd[..., -1, :]
    elif side == "plus":
        deriv0 = -0.5 * bwd[..., 0, :]
    else:
        raise ValueError("side must be 'minus' or 'plus'")
    return ConvolutionResult(v, deriv0, fwd, bwd)


def convolve_v(g, b: GeneratorMatrix, side: str, length: float) -> ConvolutionResult:
    """Variation-of-constants particular solution of ``v'' - B^2 v = g``.

    ``g`` has shape ``(..., n_nodes, n)`` sampled on a uniform grid of the
    interval of size ``length``; the interface is the last node for
    ``side="minus"`` and the first for ``side="plus"``. Returns nodal values
    of ``v`` and the exact interface derivative ``v'(0)``.
    """
    g = np.asarray(g, dtype=complex)
    dx = length / (g.shape[-2] - 1)
    if b.modes is not None:
        v_basis = b.basis
        native = g @ v_basis
        res = _convolve_native(native, b.modes, 1.0 / b.modes, StepWeights.build(b.modes, dx), side)
        back = lambda a: a @ v_basis.T
        return ConvolutionResult(*(back(a) for a in res))
    return _convolve_native(g, b.matrix, np.linalg.inv(b.matrix), StepWeights.build(b.matrix, dx), side)


# ---------------------------------------------------------------------------
# boundary system
# ---------------------------------------------------------------------------


class BoundaryCoefficients(NamedTuple):
    j_minus: np.ndarray
    k_minus: np.ndarray
    j_plus: np.ndarray
    k_plus: np.ndarray


def _boundary_data_native(ws, v_minus, v_plus, dv_minus0, dv_plus0):
    qm, qp = ws.q_minus, ws.q_plus
    vm_far = v_minus[..., 0, :]  # v_-(-ell)
    vm_0 = v_minus[..., -1, :]
    vp_0 = v_plus[..., 0, :]
    vp_far = v_plus[..., -1, :]  # v_+(L)
    em_vm = _act(ws.prop_ell, vm_far)
    ep_vp = _act(ws.prop_L, vp_far)
    pi1 = (dv_minus0 - _act(ws.bm, em_vm) + qm * ep_vp - qm * vp_0 - qm * em_vm + qm * vm_0)
    pi2 = (-dv_plus0 - _act(ws.bp, ep_vp) - qp * ep_vp + qp * vp_0 + qp * em_vm - qp * vm_0)
    return pi1, pi2


def boundary_data(ws: ResolventWorkspace, v_minus, v_plus, v_minus_deriv0, v_plus_deriv0):
    """Right-hand sides ``(Pi', Pi'')`` of the boundary-coefficient system.

    ``v_minus``/``v_plus`` are nodal convolution values (interface last/first
    respectively) in physical coordinates.
    """
    n = ws.to_native
    p1, p2 = _boundary_data_native(ws, n(v_minus), n(v_plus), n(v_minus_deriv0), n(v_plus_deriv0))
    return ws.from_native(p1), ws.from_native(p2)


def _solve_native(ws, pi1, pi2, vm_far=None, vp_far=None) -> BoundaryCoefficients:
    qm, qp = ws.q_minus, ws.q_plus
    I = _eye_like(ws.bm)
    em, ep = ws.prop_2ell, ws.prop_2L
    ibm, ibp = ws.inv_b_minus, ws.inv_b_plus
    # k_- = D^{-1} [ B_-^{-1} ((I + e_+) - q_+ B_+^{-1}(I - e_+)) Pi' - q_- B_+^{-1} B_-^{-1} (I - e_+) Pi'' ]
    k_op1 = _mm(ws.d_inverse, ibm, (I + ep) - qp * _mm(ibp, I - ep))
    k_op2 = _mm(ws.d_inverse, ibp, ibm, I - ep) * qm
    k_minus = _act(k_op1, pi1) - _act(k_op2, pi2)
    # j_+ = D^{-1} [ ((I + e_-) - q_- B_-^{-1}(I - e_-)) B_+^{-1} Pi'' - q_+ B_+^{-1} (I - e_-) B_-^{-1} Pi' ]
    j_op1 = _mm(ws.d_inverse, (I + em) - qm * _mm(ibm, I - em), ibp)
    j_op2 = _mm(ws.d_inverse, ibp, I - em, ibm) * qp
    j_plus = _act(j_op1, pi2) - _act(j_op2, pi1)
    j_minus = -_act(ws.prop_ell, k_minus)
    k_plus = -_act(ws.prop_L, j_plus)
    if vm_far is not None:
        j_minus = j_minus - vm_far
    if vp_far is not None:
        k_plus = k_plus - vp_far
    return BoundaryCoefficients(j_minus, k_minus, j_plus, k_plus)


def solve_boundary_coefficients(ws: ResolventWorkspace, Pi_prime, Pi_double_prime,
                                v_minus_far=None, v_plus_far=None) -> BoundaryCoefficients:
    """Coefficients ``(j_-, k_-, j_+, k_+)`` from the boundary data.

    ``v_minus_far = v_-(-ell)`` and ``v_plus_far = v_+(L)`` enter the
    back-substitution for ``j_-`` and ``k_+``; they default to zero.
    """
    n = ws.to_native
    opt = lambda a: None if a is None else n(a)
    c = _solve_native(ws, n(Pi_prime), n(Pi_double_prime), opt(v_minus_far), opt(v_plus_far))
    return BoundaryCoefficients(*(ws.from_native(a) for a in c))


# ---------------------------------------------------------------------------
# resolvent
# ---------------------------------------------------------------------------


def _homogeneous(prop_step, first, last, n_nodes):
    """Rows ``exp(i dx B) first + exp((n-1-i) dx B) last`` for ``i = 0..n-1``."""
    a, b = first, last
    fw, bw = [a], [b]
    for _ in range(1, n_nodes):
        a = _act(prop_step, a)
        b = _act(prop_step, b)
        fw.append(a)
        bw.append(b)
    return np.stack(fw, axis=-2) + np.stack(bw[::-1], axis=-2)


class ResolventSolution(NamedTuple):
    minus: np.ndarray
    plus: np.ndarray
    deriv_minus0: np.ndarray
    deriv_plus0: np.ndarray
    coefficients: BoundaryCoefficients


def _resolve_native(ws: ResolventWorkspace, gm, gp) -> ResolventSolution:
    cfg = ws.cfg
    cm = _convolve_native(gm, ws.bm, ws.inv_b_minus, ws.step_minus, "minus")
    cp = _convolve_native(gp, ws.bp, ws.inv_b_plus, ws.step_plus, "plus")
    pi1, pi2 = _boundary_data_native(ws, cm.v, cp.v, cm.deriv0, cp.deriv0)
    coef = _solve_native(ws, pi1, pi2, cm.v[..., 0, :], cp.v[..., -1, :])
    # w_-(x) = exp((x + ell) B_-) j_- + exp(-x B_-) k_- + v_-(x)
    wm = _homogeneous(ws.step_minus.prop, coef.j_minus, coef.k_minus, cfg.n_long_minus) + cm.v
    # w_+(x) = exp(x B_+) j_+ + exp((L - x) B_+) k_+ + v_+(x)
    wp = _homogeneous(ws.step_plus.prop, coef.j_plus, coef.k_plus, cfg.n_long_plus) + cp.v
    # the outer Dirichlet values vanish analytically
    wm[..., 0, :] = 0.0
    wp[..., -1, :] = 0.0
    dwm = _act(ws.bm, _act(ws.prop_ell, coef.j_minus) - coef.k_minus) + cm.deriv0
    dwp = _act(ws.bp, coef.j_plus - _act(ws.prop_L, coef.k_plus)) + cp.deriv0
    return ResolventSolution(wm, wp, dwm, dwp, coef)


def resolve(ws: ResolventWorkspace, f_minus, f_plus) -> ResolventSolution:
    """Solve ``(S - lam) w = f`` for arrays of shape ``(..., n_nodes, n)``
    in physical coordinates; leading axes are batch axes."""
    cfg = ws.cfg
    gm = ws.to_native(np.asarray(f_minus) / cfg.d_minus)
    gp = ws.to_native(np.asarray(f_plus) / cfg.d_plus)
    s = _resolve_native(ws, gm, gp)
    back = ws.from_native
    coef = BoundaryCoefficients(*(back(a) for a in s.coefficients))
    return ResolventSolution(back(s.minus), back(s.plus), back(s.deriv_minus0), back(s.deriv_plus0), coef)


def apply_resolvent(cfg: HabitatConfig, lam: complex, f: GridFunction,
                    epsilon0: float = DEFAULT_EPSILON0, path: str = "spectral",
                    workspace: ResolventWorkspace | None = None) -> GridFunction:
    """``w = (S - lam)^{-1} f`` on the shared grid.

    Pass ``workspace`` to reuse operators assembled for the same ``lam``.
    """
    ws = workspace if workspace is not None else assemble_workspace(cfg, lam, epsilon0, path)
    if ws.lam != complex(lam) or ws.cfg != cfg:
        raise ValueError("workspace was assembled for a different lambda or config")
    s = resolve(ws, f.minus_part, f.plus_part)
    return GridFunction(s.minus, s.plus, cfg)
