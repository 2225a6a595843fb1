"""Habitat parameters and grid functions on ``(-ell, 0) U (0, L)``."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .complex_sector import SymbolParams
from .operator_core import TransversalOperator, build_dirichlet_laplacian

PHYSICAL_FIELDS = ("ell", "L", "d_minus", "d_plus", "r_minus", "r_plus", "q")
GRID_FIELDS = ("n_transversal", "n_long_minus", "n_long_plus")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class HabitatConfig:
    """Physical constants and grid sizes.

    Longitudinal grids are uniform and include both end nodes: the minus
    habitat has ``n_long_minus`` nodes on ``[-ell, 0]`` and the plus habitat
    ``n_long_plus`` nodes on ``[0, L]``. The interface ``x = 0`` appears in
    both (one-sided traces).
    """

    ell: float
    L: float
    d_minus: float
    d_plus: float
    r_minus: float
    r_plus: float
    q: float
    n_transversal: int
    n_long_minus: int
    n_long_plus: int

    def __post_init__(self):
        for name in PHYSICAL_FIELDS:
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v):
                raise ConfigError(name, "must be a finite real number")
            if not v > 0:
                raise ConfigError(name, f"must be strictly positive, got {v!r}")
        for name in GRID_FIELDS:
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise ConfigError(name, "must be an integer")
        if self.n_transversal < 1:
            raise ConfigError("n_transversal", "must be >= 1")
        for name in ("n_long_minus", "n_long_plus"):
            if getattr(self, name) < 4:
                raise ConfigError(name, "must be >= 4")

    @classmethod
    def from_dict(cls, data: dict) -> "HabitatConfig":
        missing = [k for k in PHYSICAL_FIELDS + GRID_FIELDS if k not in data]
        if missing:
            raise ConfigError(missing[0], "missing")
        extra = sorted(set(data) - set(PHYSICAL_FIELDS + GRID_FIELDS))
        if extra:
            raise ConfigError(extra[0], "unknown field")
        return cls(**data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **kw) -> "HabitatConfig":
        return dataclasses.replace(self, **kw)

    def refined(self, factor: int) -> "HabitatConfig":
        """Every grid spacing divided by ``factor`` (transversal ``h`` included)."""
        return self.replace(
            n_transversal=(self.n_transversal + 1) * factor - 1,
            n_long_minus=(self.n_long_minus - 1) * factor + 1,
            n_long_plus=(self.n_long_plus - 1) * factor + 1,
        )

    @property
    def dx_minus(self) -> float:
        return self.ell / (self.n_long_minus - 1)

    @property
    def dx_plus(self) -> float:
        return self.L / (self.n_long_plus - 1)

    @property
    def x_minus(self) -> np.ndarray:
        return np.linspace(-self.ell, 0.0, self.n_long_minus)

    @property
    def x_plus(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.n_long_plus)

    @property
    def y(self) -> np.ndarray:
        return np.arange(1, self.n_transversal + 1) / (self.n_transversal + 1)

    def transversal(self) -> TransversalOperator:
        return _laplacian(self.n_transversal)

    def symbol_params(self, lam: complex = 0j) -> SymbolParams:
        return SymbolParams(self.ell, self.L, self.d_minus, self.d_plus,
                            self.r_minus, self.r_plus, self.q, complex(lam))


_LAPLACIANS: dict[int, TransversalOperator] = {}


def _laplacian(n: int) -> TransversalOperator:
    # shared instances so the eigendecomposition is computed once per size
    op = _LAPLACIANS.get(n)
    if op is None:
        op = _LAPLACIANS.setdefault(n, build_dirichlet_laplacian(n))
    return op


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples on both habitats; rows are longitudinal nodes, columns the
    transversal interior nodes."""

    minus_part: np.ndarray
    plus_part: np.ndarray
    cfg: HabitatConfig

    def __post_init__(self):
        c = self.cfg
        if self.minus_part.shape[-2:] != (c.n_long_minus, c.n_transversal):
            raise ValueError(f"minus_part shape {self.minus_part.shape} does not match config")
        if self.plus_part.shape[-2:] != (c.n_long_plus, c.n_transversal):
            raise ValueError(f"plus_part shape {self.plus_part.shape} does not match config")

    @classmethod
    def zeros(cls, cfg: HabitatConfig, dtype=float) -> "GridFunction":
        return cls(np.zeros((cfg.n_long_minus, cfg.n_transversal), dtype),
                   np.zeros((cfg.n_long_plus, cfg.n_transversal), dtype), cfg)

    @classmethod
    def sample(cls, cfg: HabitatConfig, fm: Callable, fp: Callable | None = None) -> "GridFunction":
        """Evaluate ``fm(x, y)`` on the minus grid and ``fp(x, y)`` (default
        ``fm``) on the plus grid."""
        fp = fm if fp is None else fp
        y = cfg.y[None, :]
        m = np.asarray(fm(cfg.x_minus[:, None], y)) * np.ones((cfg.n_long_minus, 1))
        p = np.asarray(fp(cfg.x_plus[:, None], y)) * np.ones((cfg.n_long_plus, 1))
        return cls(m, p, cfg)

    @classmethod
    def random(cls, cfg: HabitatConfig, rng: np.random.Generator, complex_: bool = False) -> "GridFunction":
        shape_m = (cfg.n_long_minus, cfg.n_transversal)
        shape_p = (cfg.n_long_plus, cfg.n_transversal)
        m, p = rng.standard_normal(shape_m), rng.standard_normal(shape_p)
        if complex_:
            m = m + 1j * rng.standard_normal(shape_m)
            p = p + 1j * rng.standard_normal(shape_p)
        return cls(m, p, cfg)

    @property
    def grids(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.cfg.x_minus, self.cfg.x_plus, self.cfg.y

    def map(self, fn) -> "GridFunction":
        return GridFunction(fn(self.minus_part), fn(self.plus_part), self.cfg)

    def __add__(self, other):
        return GridFunction(self.minus_part + other.minus_part, self.plus_part + other.plus_part, self.cfg)

    def __sub__(self, other):
        return GridFunction(self.minus_part - other.minus_part, self.plus_part - other.plus_part, self.cfg)

    def __mul__(self, c):
        return GridFunction(self.minus_part * c, self.plus_part * c, self.cfg)

    __rmul__ = __mul__

    def conj(self) -> "GridFunction":
        return self.map(np.conj)

    def norm(self, kind: str = "p2") -> float:
        return grid_norm(self.minus_part, self.plus_part, self.cfg, kind)


def trapezoid_weights(n: int, dx: float) -> np.ndarray:
    w = np.full(n, dx)
    w[0] = w[-1] = dx / 2
    return w


def grid_norm(minus, plus, cfg: HabitatConfig, kind: str = "p2") -> float:
    """Discrete ``L^p`` norm: trapezoid rule in ``x``, rectangle rule in ``y``."""
    h = 1.0 / (cfg.n_transversal + 1)
    wm = trapezoid_weights(cfg.n_long_minus, cfg.dx_minus)[:, None] * h
    wp = trapezoid_weights(cfg.n_long_plus, cfg.dx_plus)[:, None] * h
    am, ap = np.abs(minus), np.abs(plus)
    if kind == "p2":
        return float(np.sqrt(np.sum(wm * am**2) + np.sum(wp * ap**2)))
    if kind == "p1":
        return float(np.sum(wm * am) + np.sum(wp * ap))
    if kind == "pinf":
        return float(max(am.max(), ap.max()))
    raise ValueError(f"unknown norm kind {kind!r}")
