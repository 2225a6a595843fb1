"""Transmission-problem resolvents and analytic semigroups on two coupled strips."""
from .complex_sector import SectorSpec, SymbolParams, eval_f, verify_propositions
from .habitat import ConfigError, GridFunction, HabitatConfig
from .oracle_direct import build_2d_operator, direct_resolvent_solve, spectrum, time_step_cn
from .spectral_sweep import ContourSpec, fit_sector_constant, resolvent_norm, semigroup_apply, sweep
from .transmission_resolvent import apply_resolvent, assemble_workspace, resolve

__all__ = [
    "ConfigError", "ContourSpec", "GridFunction", "HabitatConfig", "SectorSpec", "SymbolParams",
    "apply_resolvent", "assemble_workspace", "build_2d_operator", "direct_resolvent_solve", "eval_f",
    "fit_sector_constant", "resolve", "resolvent_norm", "semigroup_apply", "spectrum", "sweep",
    "time_step_cn", "verify_propositions",
]
__version__ = "0.1.0"
