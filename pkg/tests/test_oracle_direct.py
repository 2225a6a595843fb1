import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse
from scipy.sparse import linalg as splinalg

from habitat_semigroup.cli_bench import interface_residuals
from habitat_semigroup.habitat import GridFunction
from habitat_semigroup.oracle_direct import (
    Layout, build_2d_operator, direct_resolvent_solve, discrete_energy, spectrum, time_step_cn, weak_residual,
)

from conftest import make_cfg, smooth


def transversal_eigs(n):
    h = 1 / (n + 1)
    return -(4 / h**2) * np.sin(np.arange(1, n + 1) * np.pi * h / 2) ** 2


def top_eigs(op, k):
    vals = splinalg.eigs(op.matrix.tocsc(), k=k, sigma=0, return_eigenvectors=False)
    return np.sort(vals.real)[::-1]


def test_layout_indexing():
    lay = Layout(3, 4, 2)
    assert lay.size == 14
    assert lay.index("minus", 1, 0) == 0 and lay.index("plus", 1, 0) == 6
    with pytest.raises(IndexError):
        lay.index("minus", 4, 0)


def test_restrict_extend_round_trip(small_cfg, rng):
    op = build_2d_operator(small_cfg)
    u = rng.standard_normal(op.layout.size)
    g = op.extend(u)
    np.testing.assert_array_equal(op.restrict(g), u)
    assert np.all(g.minus_part[0] == 0) and np.all(g.plus_part[-1] == 0)


def test_interface_traces_satisfy_transmission(small_cfg, rng):
    c = small_cfg
    g = build_2d_operator(c).extend(rng.standard_normal(build_2d_operator(c).layout.size))
    m, p = g.minus_part, g.plus_part
    jump = p[0] - m[-1]
    dm = c.d_minus * (3 * m[-1] - 4 * m[-2] + m[-3]) / (2 * c.dx_minus)
    dp = c.d_plus * (-3 * p[0] + 4 * p[1] - p[2]) / (2 * c.dx_plus)
    np.testing.assert_allclose(dm, c.q * jump, atol=1e-10)
    np.testing.assert_allclose(dp, c.q * jump, atol=1e-10)


def test_weighted_symmetry_away_from_interface(small_cfg):
    op = build_2d_operator(small_cfg)
    lay = op.layout
    wk = (sparse.diags(op.weights) @ op.matrix).toarray()
    nt = lay.n_t
    near = set(range((lay.n_minus - 2) * nt, (lay.n_minus + 2) * nt))
    keep = [i for i in range(lay.size) if i not in near]
    sub = wk[np.ix_(keep, keep)]
    np.testing.assert_allclose(sub, sub.T, atol=1e-9 * np.abs(sub).max())


def test_strong_coupling_limit():
    # equal coefficients and q -> infinity: one homogeneous strip of length ell + L
    n, nt = 41, 4
    c = make_cfg(ell=1.0, L=1.0, d_minus=0.5, d_plus=0.5, r_minus=0.3, r_plus=0.3, q=1e8,
                 n_transversal=nt, n_long_minus=n, n_long_plus=n)
    dx = c.dx_minus
    m = np.arange(1, 6)
    n_total = 2 * (n - 1)
    # single-domain second difference on 2(n-1)-1 interior nodes
    lx = -(4 / dx**2) * np.sin(m * np.pi / (2 * n_total)) ** 2
    mu = transversal_eigs(nt)
    oracle = np.sort((0.5 * (lx[:, None] + mu[None, :]) - 0.3).ravel())[::-1][:5]
    got = top_eigs(build_2d_operator(c), 5)
    np.testing.assert_allclose(got, oracle, rtol=2e-3)


def test_weak_coupling_limit():
    # q -> 0: Dirichlet at the outer end, no-flux at the interface on each side
    nt = 3
    c = make_cfg(q=1e-8, n_transversal=nt, n_long_minus=201, n_long_plus=301)
    mu = transversal_eigs(nt)
    cont = []
    for d, r, length in ((c.d_minus, c.r_minus, c.ell), (c.d_plus, c.r_plus, c.L)):
        kx = -((np.arange(4) + 0.5) * np.pi / length) ** 2
        cont.append((d * (kx[:, None] + mu[None, :]) - r).ravel())
    oracle = np.sort(np.concatenate(cont))[::-1][:6]
    got = top_eigs(build_2d_operator(c), 6)
    np.testing.assert_allclose(got, oracle, rtol=1e-3)


def test_default_config_top_eigenvalue_negative(cfg):
    assert top_eigs(build_2d_operator(cfg), 1)[0] < 0


@settings(max_examples=8, deadline=None)
@given(st.lists(st.floats(0.05, 5.0), min_size=7, max_size=7))
def test_spectrum_in_left_half_plane(vals):
    ell, L, dm, dp, rm, rp, q = vals
    c = make_cfg(ell=ell, L=L, d_minus=dm, d_plus=dp, r_minus=rm, r_plus=rp, q=q,
                 n_transversal=3, n_long_minus=9, n_long_plus=11)
    assert spectrum(build_2d_operator(c)).real.max() < 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.01, 10.0))
def test_energy_positive(seed, q):
    c = make_cfg(q=q, n_transversal=4, n_long_minus=9, n_long_plus=13)
    op = build_2d_operator(c)
    u = op.extend(np.random.default_rng(seed).standard_normal(op.layout.size))
    assert discrete_energy(op, u) > 0


# --- direct solves ------------------------------------------------------------


def test_zero_rhs(small_cfg):
    w = direct_resolvent_solve(build_2d_operator(small_cfg), 1 + 1j, GridFunction.zeros(small_cfg))
    assert w.norm("pinf") == 0


def test_maximum_principle(cfg):
    # S is dissipative, so S w = -bump gives w >= 0
    bump = GridFunction.sample(cfg, lambda x, y: -np.exp(-20 * x**2) * np.sin(np.pi * y))
    w = direct_resolvent_solve(build_2d_operator(cfg), 0, bump)
    assert w.minus_part[1:].min() > 0 and w.plus_part[:-1].min() > 0


def test_solve_residual(small_cfg, rng):
    op = build_2d_operator(small_cfg)
    f = GridFunction.random(small_cfg, rng, complex_=True)
    lam = 3 - 7j
    w = op.restrict(direct_resolvent_solve(op, lam, f))
    rhs = op.restrict(f)
    assert np.linalg.norm(op.matrix @ w - lam * w - rhs) <= 1e-10 * np.linalg.norm(rhs) * 1e3


def test_self_convergence_and_flux_balance(cfg):
    sols, flux = [], []
    for k in (1, 2, 4):
        c = cfg.refined(k)
        f = GridFunction.sample(c, smooth)
        w = direct_resolvent_solve(build_2d_operator(c), 0, f)
        sols.append(w)
        # one-sided flux defect of the reconstructed traces vanishes by construction
        flux.append(max(interface_residuals(c, w)))
    def coarse(w, k):
        return np.concatenate([w.minus_part[::k, (k - 1)::k][:, : cfg.n_transversal].ravel(),
                               w.plus_part[::k, (k - 1)::k][:, : cfg.n_transversal].ravel()])
    a, b, c = coarse(sols[0], 1), coarse(sols[1], 2), coarse(sols[2], 4)
    order = math.log2(np.abs(a - b).max() / np.abs(b - c).max())
    assert 1.7 <= order <= 2.3
    assert max(flux) < 1e-10


def test_centred_flux_converges(cfg):
    # centred flux at the half-nodes next to the interface versus q * jump
    errs = []
    for k in (1, 2, 4):
        c = cfg.refined(k)
        w = direct_resolvent_solve(build_2d_operator(c), 0, GridFunction.sample(c, smooth))
        m, p = w.minus_part, w.plus_part
        jump = p[0] - m[-1]
        dm = c.d_minus * (m[-1] - m[-2]) / c.dx_minus
        errs.append(np.abs(dm - c.q * jump).max())
    assert errs[1] < errs[0] / 1.8 and errs[2] < errs[1] / 1.8


# --- time stepping ----------------------------------------------------------------


def test_cn_zero(small_cfg):
    op = build_2d_operator(small_cfg)
    assert time_step_cn(op, GridFunction.zeros(small_cfg), 0.01, 5).norm() == 0


def test_cn_argument_checks(small_cfg):
    op = build_2d_operator(small_cfg)
    with pytest.raises(ValueError):
        time_step_cn(op, GridFunction.zeros(small_cfg), -0.1, 3)


def test_cn_eigenvector_decay_second_order(small_cfg):
    op = build_2d_operator(small_cfg)
    vals, vecs = splinalg.eigs(op.matrix.tocsc(), k=1, sigma=0)
    nu = vals[0].real
    v = op.extend(np.real(vecs[:, 0]))
    t = 0.5
    errs = []
    for n in (10, 20, 40):
        u = time_step_cn(op, v, t / n, n)
        errs.append((u - v * math.exp(nu * t)).norm() / (v.norm() * math.exp(nu * t)))
    assert math.log2(errs[0] / errs[1]) == pytest.approx(2, abs=0.2)
    assert math.log2(errs[1] / errs[2]) == pytest.approx(2, abs=0.2)


# --- weak form ---------------------------------------------------------------


def test_weak_residual_zero(small_cfg):
    op = build_2d_operator(small_cfg)
    z = GridFunction.zeros(small_cfg)
    assert weak_residual(op, z, z) == 0


def test_weak_residual_order_and_sensitivity(rng):
    base = make_cfg(n_transversal=7, n_long_minus=21, n_long_plus=31)
    res = []
    for k in (1, 2, 4):
        c = base.refined(k)
        op = build_2d_operator(c)
        g = GridFunction.sample(c, smooth)
        u = direct_resolvent_solve(op, 0, g * -1)
        res.append(weak_residual(op, u, g))
        if k == 2:
            noisy = u + u.map(lambda a: 0.01 * np.abs(a).max() * rng.standard_normal(a.shape))
            assert weak_residual(op, noisy, g) >= 10 * res[-1]
    assert math.log2(res[0] / res[1]) == pytest.approx(2, abs=0.3)
    assert math.log2(res[1] / res[2]) == pytest.approx(2, abs=0.3)


def test_weak_residual_with_lambda(small_cfg):
    op = build_2d_operator(small_cfg.refined(2))
    c = op.cfg
    g = GridFunction.sample(c, smooth)
    lam = 2 + 1j
    u = direct_resolvent_solve(op, lam, g * -1)
    assert weak_residual(op, u, g, lam) < 0.05 * g.norm("pinf")
