"""Finite volume schemes for scalar conservation laws on 1+1 Lorentzian
spacetimes, with runtime checks of the discrete stability estimates."""
from .config import RunConfig, load_config, parse_config
from .errors import LorfvError
from .flux import LaxFriedrichs, mu_inverse, verify_flux_axioms
from .geometry import make_flux, make_metric
from .mesh import Mesh, build_nonuniform_time, build_sheared, build_uniform
from .scheme import Trajectory, init, make_initial, march, run, step

__version__ = "0.1.0"

__all__ = [
    "LaxFriedrichs", "LorfvError", "Mesh", "RunConfig", "Trajectory",
    "build_nonuniform_time", "build_sheared", "build_uniform", "init",
    "load_config", "make_flux", "make_initial", "make_metric", "march",
    "mu_inverse", "parse_config", "run", "step", "verify_flux_axioms",
]
