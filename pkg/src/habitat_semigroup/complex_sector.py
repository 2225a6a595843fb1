"""Scalar complex-plane geometry used by the transmission resolvent.

Principal branches throughout: ``arg`` takes values in ``(-pi, pi]`` and
``sqrt`` maps into the closed right half-plane.

The module holds three groups of functions:

* argument identities and the elementary inequalities on sums and on
  ``1 +/- exp(-z)`` (scalar checkers plus vectorised random sweeps),
* the determinant symbol ``f`` together with its sector floor certificate,
* the empirical radius scan that makes the admissible sector half-angle
  ``epsilon0`` checkable for a given set of habitat parameters.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

SLACK = 1e-12


class SectorDomainError(ValueError):
    """Input lies outside the domain on which an operation is defined."""


# ---------------------------------------------------------------------------
# sectors and arguments
# ---------------------------------------------------------------------------


def principal_arg(z):
    """Principal argument in ``(-pi, pi]``.

    Works on scalars and arrays. ``np.angle`` returns ``-pi`` for negative
    reals carrying a negative zero imaginary part; those are mapped to ``pi``.
    """
    za = np.asarray(z, dtype=complex)
    if np.any(za == 0):
        raise SectorDomainError("argument of 0 is undefined")
    a = np.angle(za)
    a = np.where(a == -np.pi, np.pi, a)
    if np.ndim(z) == 0:
        return float(a)
    return a


def half_angle_arg(z):
    """``2*arctan(Im z / (Re z + |z|))``; equals the principal argument off the
    closed negative real axis."""
    za = np.asarray(z, dtype=complex)
    return 2.0 * np.arctan(za.imag / (za.real + np.abs(za)))


def in_sector(z, angle: float):
    """Membership in the open sector ``S_angle = {z != 0 : |arg z| < angle}``.

    ``angle == 0`` is the positive half-line.
    """
    za = np.asarray(z, dtype=complex)
    nz = za != 0
    a = np.abs(np.angle(np.where(nz, za, 1.0)))
    if angle == 0:
        out = nz & (za.imag == 0) & (za.real > 0)
    else:
        out = nz & (a < angle)
    return bool(out) if np.ndim(z) == 0 else out


def in_resolvent_sector(lam, epsilon0: float):
    """Membership in ``S_{pi - epsilon0} U {0}``."""
    la = np.asarray(lam, dtype=complex)
    out = (la == 0) | in_sector(la, math.pi - epsilon0)
    return bool(out) if np.ndim(lam) == 0 else out


def check_resolvent_sector(lam: complex, epsilon0: float) -> complex:
    lam = complex(lam)
    if not in_resolvent_sector(lam, epsilon0):
        raise SectorDomainError(
            f"lambda={lam} lies outside S_(pi-{epsilon0:g}) U {{0}}"
        )
    return lam


# ---------------------------------------------------------------------------
# scalar checkers
# ---------------------------------------------------------------------------


def check_shift_monotonicity(z: complex, c: float, slack: float = SLACK) -> bool:
    """Shifting a non-real ``z`` along the real axis moves its argument
    towards 0 for ``c > 0`` and towards ``+/-pi`` for ``c < 0``."""
    z = complex(z)
    if z.imag == 0:
        raise SectorDomainError("z must not be real")
    if c == 0 or z + c == 0:
        raise SectorDomainError("c must be nonzero with z + c != 0")
    a0 = abs(principal_arg(z))
    a1 = abs(principal_arg(z + c))
    if c > 0:
        lo, mid, hi = a1, a0, math.pi
    else:
        lo, mid, hi = a0, a1, math.pi
    return 0 < lo + slack and lo < mid + slack and mid < hi + slack


def sandwich_hypothesis(z1: complex, z2: complex) -> bool:
    """Ordering hypothesis under which ``arg(z1 + z2)`` lies between
    ``arg z1`` and ``arg z2``."""
    a1 = principal_arg(z1)
    a2 = principal_arg(z2)
    if a2 >= 0 and principal_arg(-complex(z2)) <= a1 <= a2:
        return True
    return a2 <= 0 and -math.pi <= a1 <= a2


def check_sum_arg_sandwich(z1: complex, z2: complex, slack: float = SLACK):
    """``arg z1 <= arg(z1 + z2) <= arg z2`` under the ordering hypothesis.

    Returns ``None`` when the hypothesis is not met, otherwise a bool.
    """
    z1, z2 = complex(z1), complex(z2)
    if z1 == 0 or z2 == 0:
        raise SectorDomainError("z1 and z2 must be nonzero")
    if z1 + z2 == 0:
        raise SectorDomainError("z1 + z2 must be nonzero")
    if not sandwich_hypothesis(z1, z2):
        return None
    a = principal_arg(z1 + z2)
    return principal_arg(z1) - slack <= a <= principal_arg(z2) + slack


def sum_modulus_lower_bound(z1: complex, z2: complex) -> tuple[float, float]:
    """``(|z1 + z2|, (|z1| + |z2|) |cos((arg z1 - arg z2)/2)|)``; the first
    entry dominates the second."""
    z1, z2 = complex(z1), complex(z2)
    if z1 == 0 or z2 == 0:
        raise SectorDomainError("z1 and z2 must be nonzero")
    rhs = (abs(z1) + abs(z2)) * abs(math.cos((principal_arg(z1) - principal_arg(z2)) / 2))
    return abs(z1 + z2), rhs


@dataclass(frozen=True)
class ExpBracketBounds:
    """Quantities bounding ``1 - exp(-z)`` and ``1 + exp(-z)`` on ``S_alpha``."""

    alpha: float
    arg_gap: float
    one_plus_abs: float
    one_plus_floor: float
    one_minus_abs: float
    one_minus_lo: float
    one_minus_hi: float

    def holds(self, slack: float = SLACK) -> bool:
        return (
            abs(self.arg_gap) < self.alpha + slack
            and self.one_plus_abs >= self.one_plus_floor - slack
            and self.one_minus_lo - slack <= self.one_minus_abs <= self.one_minus_hi + slack
        )


def exp_bracket_bounds(z: complex, alpha: float) -> ExpBracketBounds:
    if not 0 < alpha < math.pi / 2:
        raise SectorDomainError("alpha must lie in (0, pi/2)")
    z = complex(z)
    if not in_sector(z, alpha):
        raise SectorDomainError(f"z={z} outside S_{alpha:g}")
    e = np.exp(-z)
    r = abs(z) * math.cos(alpha)
    return ExpBracketBounds(
        alpha=alpha,
        arg_gap=principal_arg(1 - e) - principal_arg(1 + e),
        one_plus_abs=abs(1 + e),
        one_plus_floor=1 - math.exp(-math.pi / (2 * math.tan(alpha))),
        one_minus_abs=abs(1 - e),
        one_minus_lo=r / (1 + r),
        one_minus_hi=2 * abs(z) / (1 + r),
    )


def _gap_cases(arg_z, alpha, beta):
    case1 = (arg_z >= -beta) & (arg_z < alpha - beta)
    case2 = (arg_z > -alpha + beta) & (arg_z <= beta)
    return case1, case2


def refined_arg_gap(z: complex, alpha: float, beta: float) -> float:
    """``arg(1 - exp(-z)) - arg(1 + exp(-z))`` for ``|Im z| <= pi``.

    With ``arg z`` in ``[-beta, alpha - beta)`` the gap lies in
    ``[-beta, alpha - beta)``; with ``arg z`` in ``(-alpha + beta, beta]`` it
    lies in ``(-alpha + beta, beta]``.
    """
    z = complex(z)
    if not 0 < alpha <= math.pi / 2 or not 0 <= beta <= alpha / 2:
        raise SectorDomainError("need alpha in (0, pi/2] and beta in [0, alpha/2]")
    if z == 0:
        raise SectorDomainError("z must be nonzero")
    if abs(z.imag) > math.pi:
        raise SectorDomainError("|Im z| must not exceed pi")
    c1, c2 = _gap_cases(principal_arg(z), alpha, beta)
    if not (c1 or c2):
        raise SectorDomainError("arg z outside both admissible ranges")
    e = np.exp(-z)
    return principal_arg(1 - e) - principal_arg(1 + e)


def refined_gap_contract(z: complex, alpha: float, beta: float, slack: float = SLACK) -> bool:
    gap = refined_arg_gap(z, alpha, beta)
    c1, c2 = _gap_cases(principal_arg(z), alpha, beta)
    ok = True
    if c1:
        ok &= -beta - slack <= gap < alpha - beta + slack
    if c2:
        ok &= -alpha + beta - slack < gap <= beta + slack
    return bool(ok)


# ---------------------------------------------------------------------------
# vectorised sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PropositionCheck:
    name: str
    samples: int
    violations: int
    min_slack: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _loguniform(rng, lo, hi, n):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), n))


def _arr_arg(z):
    a = np.angle(z)
    return np.where(a == -np.pi, np.pi, a)


def _summarise(name, margins, slack):
    margins = np.asarray(margins, dtype=float)
    return PropositionCheck(
        name=name,
        samples=int(margins.size),
        violations=int(np.count_nonzero(margins < -slack)),
        min_slack=float(margins.min()),
    )


def sweep_shift_monotonicity(rng, n: int, slack: float = SLACK) -> PropositionCheck:
    r = _loguniform(rng, 1e-3, 1e3, n)
    th = rng.uniform(-np.pi, np.pi, n)
    th = np.where(np.sin(th) == 0, 0.5, th)
    z = r * np.exp(1j * th)
    c = _loguniform(rng, 1e-3, 1e3, n) * rng.choice([-1.0, 1.0], n)
    c = np.where(np.abs(z + c) == 0, 2 * c, c)
    a0 = np.abs(_arr_arg(z))
    a1 = np.abs(_arr_arg(z + c))
    lo = np.where(c > 0, a1, a0)
    mid = np.where(c > 0, a0, a1)
    # strict chain 0 < lo < mid < pi; report the tightest gap
    margins = np.minimum.reduce([lo, mid - lo, np.pi - mid])
    return _summarise("shift_monotonicity", margins, slack)


def sweep_sum_arg_sandwich(rng, n: int, slack: float = SLACK) -> PropositionCheck:
    a2 = rng.uniform(-np.pi, np.pi, n)
    upper = a2 >= 0
    lo = np.where(upper, a2 - np.pi, -np.pi)
    a1 = lo + (a2 - lo) * rng.uniform(0, 1, n)
    z1 = _loguniform(rng, 1e-3, 1e3, n) * np.exp(1j * a1)
    z2 = _loguniform(rng, 1e-3, 1e3, n) * np.exp(1j * a2)
    s = z1 + z2
    keep = s != 0
    z1, z2, s = z1[keep], z2[keep], s[keep]
    arg1, arg2, args = _arr_arg(z1), _arr_arg(z2), _arr_arg(s)
    # hypothesis re-evaluated on the rounded samples
    up = arg2 >= 0
    hyp = np.where(up, (_arr_arg(-z2) <= arg1) & (arg1 <= arg2), arg1 <= arg2)
    margins = np.minimum(args - arg1, arg2 - args)[hyp]
    return _summarise("sum_arg_sandwich", margins, slack)


def sweep_sum_modulus(rng, n: int, slack: float = SLACK) -> PropositionCheck:
    z1 = _loguniform(rng, 1e-3, 1e3, n) * np.exp(1j * rng.uniform(-np.pi, np.pi, n))
    z2 = _loguniform(rng, 1e-3, 1e3, n) * np.exp(1j * rng.uniform(-np.pi, np.pi, n))
    lhs = np.abs(z1 + z2)
    rhs = (np.abs(z1) + np.abs(z2)) * np.abs(np.cos((_arr_arg(z1) - _arr_arg(z2)) / 2))
    # relative margin; the inequality is homogeneous of degree one
    margins = (lhs - rhs) / (np.abs(z1) + np.abs(z2))
    return _summarise("sum_modulus_lower_bound", margins, slack)


def sweep_exp_brackets(rng, n: int, slack: float = SLACK) -> PropositionCheck:
    alpha = rng.uniform(1e-3, np.pi / 2 - 1e-3, n)
    th = alpha * rng.uniform(-1, 1, n)
    z = _loguniform(rng, 1e-3, 1e3, n) * np.exp(1j * th)
    e = np.exp(-z)
    gap = _arr_arg(1 - e) - _arr_arg(1 + e)
    r = np.abs(z) * np.cos(alpha)
    m1 = alpha - np.abs(gap)
    m2 = np.abs(1 + e) - (1 - np.exp(-np.pi / (2 * np.tan(alpha))))
    one_minus = np.abs(1 - e)
    m3 = one_minus - r / (1 + r)
    m4 = 2 * np.abs(z) / (1 + r) - one_minus
    margins = np.minimum.reduce([m1, m2, m3, m4])
    return _summarise("exp_bracket_bounds", margins, slack)


def sweep_refined_gap(rng, n: int, slack: float = SLACK) -> PropositionCheck:
    alpha = rng.uniform(1e-3, np.pi / 2, n)
    alpha[: n // 10] = np.pi / 2
    beta = alpha / 2 * rng.uniform(0, 1, n)
    beta[n // 10 : n // 5] = 0.0
    case1 = rng.uniform(0, 1, n) < 0.5
    u = rng.uniform(0, 1, n)
    th = np.where(case1, -beta + u * alpha, -alpha + beta + (1 - u) * alpha)
    th = np.where(case1, np.minimum(th, alpha - beta - 1e-15), np.maximum(th, -alpha + beta + 1e-15))
    s = np.abs(np.sin(th))
    rmax = np.minimum(1e3, np.where(s > 0, np.pi / np.maximum(s, 1e-300), 1e3))
    r = np.exp(rng.uniform(np.log(1e-3), np.log(rmax)))
    z = r * np.exp(1j * th)
    z = z.real + 1j * np.clip(z.imag, -np.pi, np.pi)
    e = np.exp(-z)
    gap = _arr_arg(1 - e) - _arr_arg(1 + e)
    argz = _arr_arg(z)
    c1, c2 = _gap_cases(argz, alpha, beta)
    big = np.full(n, np.inf)
    m1 = np.where(c1, np.minimum(gap + beta, alpha - beta - gap), big)
    m2 = np.where(c2, np.minimum(gap + alpha - beta, beta - gap), big)
    valid = c1 | c2
    margins = np.minimum(m1, m2)[valid]
    return _summarise("refined_arg_gap", margins, slack)


PROPOSITION_SWEEPS = {
    "shift_monotonicity": sweep_shift_monotonicity,
    "sum_arg_sandwich": sweep_sum_arg_sandwich,
    "sum_modulus_lower_bound": sweep_sum_modulus,
    "exp_bracket_bounds": sweep_exp_brackets,
    "refined_arg_gap": sweep_refined_gap,
}


def verify_propositions(seed: int = 0, n_samples: int = 100_000) -> list[PropositionCheck]:
    """Run every random sweep with ``n_samples`` draws each."""
    rng = np.random.default_rng(seed)
    return [sweep(rng, n_samples) for sweep in PROPOSITION_SWEEPS.values()]


# ---------------------------------------------------------------------------
# determinant symbol
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymbolParams:
    """Habitat constants plus the spectral parameter ``lam``."""

    ell: float
    L: float
    d_minus: float
    d_plus: float
    r_minus: float
    r_plus: float
    q: float
    lam: complex = 0j

    def __post_init__(self):
        for name in ("ell", "L", "d_minus", "d_plus", "r_minus", "r_plus", "q"):
            if not getattr(self, name) > 0:
                raise SectorDomainError(f"{name} must be strictly positive")

    @property
    def lambda_minus(self) -> complex:
        return self.lam / self.d_minus

    @property
    def lambda_plus(self) -> complex:
        return self.lam / self.d_plus

    @property
    def rho_minus(self) -> float:
        return self.r_minus / self.d_minus

    @property
    def rho_plus(self) -> float:
        return self.r_plus / self.d_plus

    @property
    def q_minus(self) -> float:
        return self.q / self.d_minus

    @property
    def q_plus(self) -> float:
        return self.q / self.d_plus

    def with_lambda(self, lam: complex) -> "SymbolParams":
        return dataclasses.replace(self, lam=complex(lam))


def tanh_ratio(w, length: float):
    """``(1 - exp(-2 length s)) / (s (1 + exp(-2 length s)))`` with
    ``s = sqrt(w)`` principal."""
    s = np.sqrt(np.asarray(w, dtype=complex))
    e = np.exp(-2 * length * s)
    return -np.expm1(-2 * length * s) / (s * (1 + e))


def symbol_terms(z, p: SymbolParams):
    """The two fractional terms of ``f``: plus-habitat first."""
    z = np.asarray(z, dtype=complex)
    t_plus = p.q_plus * tanh_ratio(z + p.lambda_plus + p.rho_plus, p.L)
    t_minus = p.q_minus * tanh_ratio(z + p.lambda_minus + p.rho_minus, p.ell)
    return t_plus, t_minus


def eval_f(z, p: SymbolParams, epsilon0: float | None = None):
    """Determinant symbol ``f(z)``.

    ``epsilon0``, when given, enforces ``z`` in ``S_epsilon0`` and ``lam`` in
    ``S_{pi - epsilon0} U {0}``.
    """
    if epsilon0 is not None:
        if not np.all(in_sector(z, epsilon0)):
            raise SectorDomainError(f"z outside S_{epsilon0:g}")
        check_resolvent_sector(p.lam, epsilon0)
    t_plus, t_minus = symbol_terms(z, p)
    out = 1 + t_plus + t_minus
    return complex(out) if np.ndim(z) == 0 else out


@dataclass(frozen=True)
class SectorSpec:
    """Sampling of ``S_epsilon0`` (z) and of ``S_{pi - epsilon0} U {0}`` (lambda)."""

    epsilon0: float = 0.5
    radius_min: float = 1e-3
    radius_max: float = 1e6
    n_radial: int = 100
    n_angular: int = 100
    big_R: float | None = None
    n_lambda_radial: int = 11
    n_lambda_angular: int = 9

    def __post_init__(self):
        if not 0 < self.epsilon0 < math.pi / 2:
            raise SectorDomainError("epsilon0 must lie in (0, pi/2)")
        if not 0 < self.radius_min < self.radius_max:
            raise SectorDomainError("need 0 < radius_min < radius_max")
        if min(self.n_radial, self.n_angular) < 2:
            raise SectorDomainError("sample counts must be >= 2")
        if self.big_R is not None and not self.big_R > 0:
            raise SectorDomainError("big_R must be positive")

    def epsilon_bound(self, ell: float, L: float) -> float:
        """``arctan(pi^2 / (2 R) min(1/L^2, 1/ell^2))`` for the stored radius."""
        if self.big_R is None:
            raise SectorDomainError("big_R not set; run empirical_big_r first")
        return admissible_bound(self.big_R, ell, L)

    def admissible_for(self, ell: float, L: float) -> bool:
        return self.epsilon0 <= self.epsilon_bound(ell, L)

    def z_samples(self) -> np.ndarray:
        """Log-radial x uniform-angular grid in the closure of ``S_epsilon0``;
        both boundary rays are included."""
        r = np.geomspace(self.radius_min, self.radius_max, self.n_radial)
        th = np.linspace(-self.epsilon0, self.epsilon0, self.n_angular)
        return (r[:, None] * np.exp(1j * th)[None, :]).ravel()

    def lambda_samples(self) -> np.ndarray:
        """``0`` plus a log-radial x angular grid of ``S_{pi - epsilon0}``.

        The outermost rays sit at ``(pi - epsilon0)(1 - 1e-9)`` so every sample
        is inside the open sector.
        """
        r = np.geomspace(self.radius_min, self.radius_max, self.n_lambda_radial)
        edge = (math.pi - self.epsilon0) * (1 - 1e-9)
        th = np.linspace(-edge, edge, self.n_lambda_angular)
        lam = (r[:, None] * np.exp(1j * th)[None, :]).ravel()
        return np.concatenate([[0j], lam])


@dataclass(frozen=True)
class FloorCertificate:
    min_abs_f: float
    floor: float
    passed: bool
    argmin_z: complex
    argmin_lambda: complex
    n_samples: int

    @property
    def margin(self) -> float:
        return self.min_abs_f - self.floor


def certify_f_floor(spec: SectorSpec, p_grid: Sequence[SymbolParams]) -> FloorCertificate:
    """Sampled certificate of ``|f(z)| > sin(epsilon0/2)``."""
    z = spec.z_samples()
    if z.size == 0 or len(p_grid) == 0:
        raise SectorDomainError("empty sample set")
    best = (math.inf, 0j, 0j)
    for p in p_grid:
        check_resolvent_sector(p.lam, spec.epsilon0)
        vals = np.abs(eval_f(z, p))
        k = int(np.argmin(vals))
        if vals[k] < best[0]:
            best = (float(vals[k]), complex(z[k]), complex(p.lam))
    floor = math.sin(spec.epsilon0 / 2)
    return FloorCertificate(
        min_abs_f=best[0],
        floor=floor,
        passed=best[0] > floor,
        argmin_z=best[1],
        argmin_lambda=best[2],
        n_samples=z.size * len(p_grid),
    )


def admissible_bound(big_R: float, ell: float, L: float) -> float:
    return math.atan(math.pi**2 / (2 * big_R) * min(1 / L**2, 1 / ell**2))


def empirical_big_r(
    p: SymbolParams,
    epsilon0: float,
    lambdas: Iterable[complex] | None = None,
    radii: np.ndarray | None = None,
    n_rays: int = 9,
) -> float:
    """Smallest sampled radius beyond which both fractional terms of ``f`` stay
    below ``(1 - sin(epsilon0/2))/2`` for every sampled ``lambda``."""
    if radii is None:
        radii = np.geomspace(1e-3, 1e8, 441)
    if lambdas is None:
        lambdas = SectorSpec(epsilon0=epsilon0, n_lambda_radial=37,
                             n_lambda_angular=41).lambda_samples()
    threshold = (1 - math.sin(epsilon0 / 2)) / 2
    th = np.linspace(-epsilon0, epsilon0, n_rays)
    z = radii[:, None] * np.exp(1j * th)[None, :]
    worst = np.zeros(radii.size)
    for lam in lambdas:
        t_plus, t_minus = symbol_terms(z, p.with_lambda(lam))
        m = np.maximum(np.abs(t_plus), np.abs(t_minus)).max(axis=1)
        worst = np.maximum(worst, m)
    above = np.nonzero(worst >= threshold)[0]
    if above.size == 0:
        return float(radii[0])
    if above[-1] == radii.size - 1:
        raise SectorDomainError("fractional terms never drop below threshold on the scanned radii")
    return float(radii[above[-1] + 1])


@dataclass(frozen=True)
class AdmissibilityReport:
    epsilon0: float
    big_R: float
    bound: float
    admissible: bool
    degenerate: bool


def check_epsilon0(p: SymbolParams, epsilon0: float, **kw) -> AdmissibilityReport:
    """Empirical radius and the admissibility of ``epsilon0`` against it.

    ``degenerate`` flags configurations whose admissible half-angle is below
    1e-3 rad.
    """
    R = empirical_big_r(p, epsilon0, **kw)
    bound = admissible_bound(R, p.ell, p.L)
    return AdmissibilityReport(epsilon0, R, bound, epsilon0 <= bound, bound < 1e-3)
