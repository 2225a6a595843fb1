import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from habitat_semigroup.habitat import ConfigError, GridFunction, HabitatConfig, grid_norm, trapezoid_weights

from conftest import DEFAULT, make_cfg


@pytest.mark.parametrize("field", ["ell", "L", "d_minus", "d_plus", "r_minus", "r_plus", "q"])
@pytest.mark.parametrize("bad", [0.0, -1.0, math.nan, math.inf])
def test_physical_constants_must_be_positive(field, bad):
    with pytest.raises(ConfigError) as e:
        make_cfg(**{field: bad})
    assert e.value.field == field


def test_grid_sizes_validated():
    with pytest.raises(ConfigError):
        make_cfg(n_transversal=0)
    with pytest.raises(ConfigError):
        make_cfg(n_long_minus=3)
    with pytest.raises(ConfigError):
        make_cfg(n_long_plus=10.0)


def test_from_dict_round_trip():
    c = HabitatConfig.from_dict(dict(DEFAULT))
    assert HabitatConfig.from_dict(c.to_dict()) == c
    with pytest.raises(ConfigError) as e:
        HabitatConfig.from_dict({k: v for k, v in DEFAULT.items() if k != "q"})
    assert e.value.field == "q"
    with pytest.raises(ConfigError):
        HabitatConfig.from_dict({**DEFAULT, "extra": 1})


def test_refined_divides_spacings():
    c = make_cfg()
    f = c.refined(2)
    assert f.dx_minus == pytest.approx(c.dx_minus / 2)
    assert f.dx_plus == pytest.approx(c.dx_plus / 2)
    assert 1 / (f.n_transversal + 1) == pytest.approx(0.5 / (c.n_transversal + 1))


def test_grids():
    c = make_cfg(n_transversal=3, n_long_minus=5, n_long_plus=7)
    np.testing.assert_allclose(c.x_minus, [-1, -0.75, -0.5, -0.25, 0])
    assert c.x_plus[0] == 0 and c.x_plus[-1] == 1.5
    np.testing.assert_allclose(c.y, [0.25, 0.5, 0.75])
    sp = c.symbol_params(2j)
    assert sp.lam == 2j and sp.q == c.q


def test_grid_function_shapes_and_algebra(rng):
    c = make_cfg(n_transversal=3, n_long_minus=5, n_long_plus=7)
    u = GridFunction.random(c, rng)
    with pytest.raises(ValueError):
        GridFunction(u.plus_part, u.minus_part, c)
    assert ((u + u) - 2 * u).norm() == 0
    assert (u * 1j).conj().norm() == pytest.approx(u.norm())
    assert GridFunction.zeros(c).norm("pinf") == 0


def test_trapezoid_integrates_linear_exactly():
    w = trapezoid_weights(11, 0.1)
    x = np.linspace(0, 1, 11)
    assert w @ (3 * x + 1) == pytest.approx(2.5)


def test_norms_of_constant():
    c = make_cfg(n_transversal=4, n_long_minus=5, n_long_plus=9)
    one = GridFunction.sample(c, lambda x, y: np.ones_like(x * y))
    h = 1 / 5
    area = (c.ell + c.L) * 4 * h
    assert one.norm("p1") == pytest.approx(area)
    assert one.norm("p2") == pytest.approx(math.sqrt(area))
    assert one.norm("pinf") == 1
    with pytest.raises(ValueError):
        grid_norm(one.minus_part, one.plus_part, c, "p3")


@given(st.floats(-10, 10).filter(lambda v: v == 0 or abs(v) > 1e-100),
       st.floats(-10, 10).filter(lambda v: v == 0 or abs(v) > 1e-100))
def test_norm_homogeneity(a, b):
    c = make_cfg(n_transversal=2, n_long_minus=5, n_long_plus=5)
    u = GridFunction.sample(c, lambda x, y: np.sin(x + y))
    z = complex(a, b)
    for kind in ("p1", "p2", "pinf"):
        assert (u * z).norm(kind) == pytest.approx(abs(z) * u.norm(kind), rel=1e-12, abs=1e-300)


def test_transversal_operator_shared():
    assert make_cfg().transversal() is make_cfg(ell=2.0).transversal()
