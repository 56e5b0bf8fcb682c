"""Run configuration: ``key = value`` text files.

Recognised keys (``#`` starts a comment)::

    metric        minkowski | flrw_linear | flrw_exp
    metric.k      rate of flrw_exp
    L             spatial period (default 1)
    flux          burgers | flrw_compatible | linear_advection | constant_x
    flux.type     alias of ``flux``
    flux.c        parameter of linear_advection / constant_x
    numerical_flux  lax_friedrichs
    nx            cells per slice
    nt, t_end     number of layers and final time, or
    t_end, cfl    final time and target CFL ratio (nt is then derived)
    u0            riemann | shock | rarefaction | constant | sine | step
    u0.params     comma separated ``name=value`` pairs
    D_safety      safety factor of the diffusion constant (alias flux.D_safety)
    quad_order    Gauss-Legendre nodes per face
    u_range       ``lo, hi`` declared range of the flux
    mesh          optional mesh file replacing the generated uniform mesh
    out           output directory
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigError, LorfvError


@dataclass
class RunConfig:
    metric: str = "minkowski"
    metric_params: dict = field(default_factory=dict)
    L: float = 1.0
    flux: str = "burgers"
    flux_params: dict = field(default_factory=dict)
    numerical_flux: str = "lax_friedrichs"
    nx: int = 64
    nt: Optional[int] = None
    t_end: Optional[float] = None
    cfl: Optional[float] = None
    u0: str = "riemann"
    u0_params: dict = field(default_factory=dict)
    D_safety: float = 1.0
    quad_order: int = 5
    u_range: Optional[tuple] = None
    mesh: Optional[str] = None
    out: Optional[str] = None
    conservation_tol: float = 1e-12
    entropy_tol: float = 1e-10
    source: str = ""

    def validate(self) -> "RunConfig":
        if self.numerical_flux not in ("lax_friedrichs", "lf"):
            raise ConfigError(f"unsupported numerical flux {self.numerical_flux!r}")
        if self.mesh is None:
            if self.nx < 2:
                raise ConfigError("nx must be at least 2")
            if self.t_end is None or not self.t_end > 0:
                raise ConfigError("t_end must be given and positive")
            if self.nt is None and self.cfl is None:
                raise ConfigError("give either nt or cfl together with t_end")
            if self.nt is not None and self.nt < 0:
                raise ConfigError("nt must be non-negative")
        if self.cfl is not None and not self.cfl > 0:
            raise ConfigError("cfl must be positive")
        if self.D_safety < 1.0:
            raise ConfigError("D_safety below 1 breaks monotonicity")
        if self.quad_order < 1:
            raise ConfigError("quad_order must be positive")
        if self.u_range is not None and not self.u_range[1] > self.u_range[0]:
            raise ConfigError("u_range must be an increasing pair")
        self._check_names()
        return self

    def _check_names(self) -> None:
        from .geometry import make_flux, make_metric
        from .scheme import make_initial

        try:
            metric = make_metric(self.metric, L=self.L, **self.metric_params)
            make_flux(self.flux, metric, **self.flux_params)
            make_initial(self.u0, L=self.L, **self.u0_params)
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError, LorfvError) as exc:
            msg = exc.args[0] if exc.args else str(exc)
            raise ConfigError(f"invalid configuration: {msg}") from None

    def replace(self, **kw) -> "RunConfig":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(kw)
        return RunConfig(**data)


def _number(text: str, key: str):
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    return int(v) if v.is_integer() and "." not in text and "e" not in text.lower() else v


def _int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def parse_params(text: str, key: str = "params") -> dict:
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        if "=" not in item:
            raise ConfigError(f"{key}: expected name=value, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        out[k] = _number(v, f"{key}.{k}")
    return out


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    cfg = RunConfig(source=source)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        where = f"{source}:{lineno}: {key}"
        if key == "metric":
            cfg.metric = value
        elif key.startswith("metric."):
            cfg.metric_params[key[7:]] = _number(value, where)
        elif key == "L":
            cfg.L = float(_number(value, where))
        elif key in ("flux", "flux.type"):
            cfg.flux = value
        elif key in ("D_safety", "flux.D_safety"):
            cfg.D_safety = float(_number(value, where))
        elif key.startswith("flux."):
            cfg.flux_params[key[5:]] = _number(value, where)
        elif key == "numerical_flux":
            cfg.numerical_flux = value
        elif key == "nx":
            cfg.nx = _int(value, where)
        elif key == "nt":
            cfg.nt = _int(value, where)
        elif key == "t_end":
            cfg.t_end = float(_number(value, where))
        elif key == "cfl":
            cfg.cfl = float(_number(value, where))
        elif key == "u0":
            cfg.u0 = value
        elif key == "u0.params":
            cfg.u0_params = parse_params(value, where)
        elif key == "quad_order":
            cfg.quad_order = _int(value, where)
        elif key == "u_range":
            parts = [p for p in value.replace(",", " ").split() if p]
            if len(parts) != 2:
                raise ConfigError(f"{where}: expected two numbers")
            cfg.u_range = (float(_number(parts[0], where)), float(_number(parts[1], where)))
        elif key == "mesh":
            cfg.mesh = value
        elif key == "out":
            cfg.out = value
        elif key == "conservation_tol":
            cfg.conservation_tol = float(_number(value, where))
        elif key == "entropy_tol":
            cfg.entropy_tol = float(_number(value, where))
        else:
            raise ConfigError(f"{where}: unknown key")
    return cfg.validate()


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    cfg = parse_config(text, str(p))
    if cfg.mesh is not None and not Path(cfg.mesh).is_absolute():
        cfg.mesh = str(p.parent / cfg.mesh)
    return cfg


def dump_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config` for the keys that differ from defaults."""
    lines = [f"metric = {cfg.metric}"]
    lines += [f"metric.{k} = {v!r}" for k, v in cfg.metric_params.items()]
    lines += [f"L = {cfg.L!r}", f"flux = {cfg.flux}"]
    lines += [f"flux.{k} = {v!r}" for k, v in cfg.flux_params.items()]
    lines += [f"numerical_flux = {cfg.numerical_flux}", f"nx = {cfg.nx}"]
    if cfg.nt is not None:
        lines.append(f"nt = {cfg.nt}")
    if cfg.t_end is not None:
        lines.append(f"t_end = {cfg.t_end!r}")
    if cfg.cfl is not None:
        lines.append(f"cfl = {cfg.cfl!r}")
    lines.append(f"u0 = {cfg.u0}")
    if cfg.u0_params:
        lines.append("u0.params = " + ", ".join(f"{k}={v!r}" for k, v in cfg.u0_params.items()))
    lines += [f"D_safety = {cfg.D_safety!r}", f"quad_order = {cfg.quad_order}"]
    if cfg.u_range is not None:
        lines.append(f"u_range = {cfg.u_range[0]!r}, {cfg.u_range[1]!r}")
    if cfg.mesh is not None:
        lines.append(f"mesh = {cfg.mesh}")
    return "\n".join(lines) + "\n"
