"""Lorentzian metrics on a 1+1 periodic chart, flux fields and quadrature.

Everything here is chart-local: a metric is three component functions of
``(t, x)`` with ``x`` living on the circle ``[0, L)``.  All component and
flux callables accept numpy arrays and broadcast.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import DegenerateFace, EmptyGrid, LorfvError

NULL_TOL = 1e-12

Array = np.ndarray


def _const(c: float) -> Callable[[Array, Array], Array]:
    def component(t, x):
        return np.full(np.broadcast(np.asarray(t), np.asarray(x)).shape, float(c))

    return component


@dataclass(frozen=True)
class ChartPoint:
    t: float
    x: float


@dataclass(frozen=True)
class SpacetimeVector:
    base: ChartPoint
    X_t: float
    X_x: float


@dataclass(frozen=True)
class MetricChart:
    """A Lorentzian metric ``g_tt dt^2 + 2 g_tx dt dx + g_xx dx^2``.

    ``scale_factor`` and its derivative are set only for the FLRW family;
    fluxes that need the expansion rate read them from here.
    """

    name: str
    g_tt: Callable[[Array, Array], Array]
    g_tx: Callable[[Array, Array], Array]
    g_xx: Callable[[Array, Array], Array]
    period: float = 1.0
    scale_factor: Optional[Callable[[Array], Array]] = None
    scale_factor_dt: Optional[Callable[[Array], Array]] = None
    params: dict = field(default_factory=dict)

    def components(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        return self.g_tt(t, x), self.g_tx(t, x), self.g_xx(t, x)

    def det(self, t, x):
        gtt, gtx, gxx = self.components(t, x)
        return gtt * gxx - gtx * gtx

    def volume_density(self, t, x):
        return np.sqrt(-self.det(t, x))

    def point(self, t: float, x: float) -> ChartPoint:
        return ChartPoint(float(t), float(np.mod(x, self.period)))

    def is_lorentzian(self, t, x) -> bool:
        gtt = self.components(t, x)[0]
        return bool(np.all(gtt < 0) and np.all(self.det(t, x) < 0))

    def inverse_components(self, t, x):
        gtt, gtx, gxx = self.components(t, x)
        d = gtt * gxx - gtx * gtx
        return gxx / d, -gtx / d, gtt / d


# -- metric registry ---------------------------------------------------------

def minkowski(L: float = 1.0) -> MetricChart:
    return MetricChart("minkowski", _const(-1.0), _const(0.0), _const(1.0), period=L)


def _flrw(name, a, da, L, params):
    def g_xx(t, x):
        return np.broadcast_to(a(np.asarray(t, dtype=float)) ** 2,
                               np.broadcast(np.asarray(t), np.asarray(x)).shape).copy()

    return MetricChart(name, _const(-1.0), _const(0.0), g_xx, period=L,
                       scale_factor=a, scale_factor_dt=da, params=params)


def flrw_linear(L: float = 1.0) -> MetricChart:
    """FLRW metric ``-dt^2 + (1+t)^2 dx^2``."""
    return _flrw("flrw_linear", lambda t: 1.0 + t, lambda t: np.ones_like(t), L, {})


def flrw_exp(k: float = 1.0, L: float = 1.0) -> MetricChart:
    """FLRW metric ``-dt^2 + exp(2kt) dx^2``."""
    return _flrw("flrw_exp", lambda t: np.exp(k * t), lambda t: k * np.exp(k * t),
                 L, {"k": k})


METRICS = {"minkowski": minkowski, "flrw_linear": flrw_linear, "flrw_exp": flrw_exp}


def make_metric(name: str, **params) -> MetricChart:
    try:
        factory = METRICS[name]
    except KeyError:
        raise LorfvError(f"unknown metric {name!r}; known: {sorted(METRICS)}") from None
    return factory(**params)


# -- inner products and causal classes ---------------------------------------

class CausalClass(str, enum.Enum):
    TIMELIKE = "timelike"
    NULL = "null"
    SPACELIKE = "spacelike"


def inner_components(gtt, gtx, gxx, Xt, Xx, Yt, Yx):
    return gtt * Xt * Yt + gtx * (Xt * Yx + Xx * Yt) + gxx * Xx * Yx


def inner(g: MetricChart, p: ChartPoint, X: SpacetimeVector, Y: SpacetimeVector) -> float:
    gtt, gtx, gxx = g.components(p.t, p.x)
    return float(inner_components(gtt, gtx, gxx, X.X_t, X.X_x, Y.X_t, Y.X_x))


def classify(g: MetricChart, p: ChartPoint, X: SpacetimeVector,
             eps: float = NULL_TOL) -> CausalClass:
    q = inner(g, p, X, X)
    if q < -eps:
        return CausalClass.TIMELIKE
    if q > eps:
        return CausalClass.SPACELIKE
    return CausalClass.NULL


def is_future(g: MetricChart, t, x, Xt, Xx):
    """Time orientation test for causal vectors: ``g(X, d/dt) < 0``.

    ``d/dt`` is future-directed time-like in every registered chart.
    """
    gtt, gtx, _ = g.components(t, x)
    return gtt * Xt + gtx * Xx < 0


# -- flux fields -------------------------------------------------------------

@dataclass(frozen=True)
class FluxField:
    """Vector-valued flux ``f(u, p)`` and its analytic u-derivative.

    ``f(u, t, x)`` and ``df_du(u, t, x)`` return ``(component_t, component_x)``.
    """

    name: str
    f: Callable
    df_du: Callable
    declared_range: tuple = (-1.0, 1.0)
    params: dict = field(default_factory=dict)

    def __call__(self, u, t, x):
        return self.f(u, t, x)


def _bcast(*arrays):
    return np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in arrays])


def burgers(declared_range=(-1.0, 1.0)) -> FluxField:
    """``f = (u, u^2/2)`` in chart components."""

    def f(u, t, x):
        u, t, x = _bcast(u, t, x)
        return u.copy(), 0.5 * u * u

    def df(u, t, x):
        u, t, x = _bcast(u, t, x)
        return np.ones_like(u), u.copy()

    return FluxField("burgers", f, df, tuple(declared_range))


def linear_advection(c: float = 0.5, declared_range=(-1.0, 1.0)) -> FluxField:
    def f(u, t, x):
        u, t, x = _bcast(u, t, x)
        return u.copy(), c * u

    def df(u, t, x):
        u, t, x = _bcast(u, t, x)
        return np.ones_like(u), np.full_like(u, c)

    return FluxField("linear_advection", f, df, tuple(declared_range), {"c": c})


def constant_x(c: float = 0.0, declared_range=(-1.0, 1.0)) -> FluxField:
    """``f = (u, c)``: zero spatial wave speed."""

    def f(u, t, x):
        u, t, x = _bcast(u, t, x)
        return u.copy(), np.full_like(u, c)

    def df(u, t, x):
        u, t, x = _bcast(u, t, x)
        return np.ones_like(u), np.zeros_like(u)

    return FluxField("constant_x", f, df, tuple(declared_range), {"c": c})


def flrw_compatible(metric: MetricChart, declared_range=(-0.4, 0.4)) -> FluxField:
    """Burgers-type flux ``(u/a, u^2/(2a))`` with zero divergence on FLRW."""
    a = metric.scale_factor
    if a is None:
        raise LorfvError("flrw_compatible needs a metric with a scale factor")

    def f(u, t, x):
        u, t, x = _bcast(u, t, x)
        at = a(t)
        return u / at, 0.5 * u * u / at

    def df(u, t, x):
        u, t, x = _bcast(u, t, x)
        at = a(t)
        return 1.0 / at, u / at

    return FluxField("flrw_compatible", f, df, tuple(declared_range))


FLUXES = {
    "burgers": lambda metric, **kw: burgers(**kw),
    "linear_advection": lambda metric, **kw: linear_advection(**kw),
    "constant_x": lambda metric, **kw: constant_x(**kw),
    "flrw_compatible": lambda metric, **kw: flrw_compatible(metric, **kw),
}


def make_flux(name: str, metric: MetricChart, **params) -> FluxField:
    try:
        factory = FLUXES[name]
    except KeyError:
        raise LorfvError(f"unknown flux {name!r}; known: {sorted(FLUXES)}") from None
    return factory(metric, **params)


@dataclass
class TimelikeReport:
    ok: bool
    worst_value: float
    witness: tuple
    future_ok: bool


def flux_sample_grid(f: FluxField, g: MetricChart, t_range=(0.0, 1.0),
                     n_u: int = 65, n_t: int = 17, n_x: int = 9):
    """Tensor sample grid over ``declared_range x [t0, t1] x [0, L)``."""
    u = np.linspace(*f.declared_range, n_u)
    t = np.linspace(*t_range, n_t)
    x = np.linspace(0.0, g.period, n_x, endpoint=False)
    U, T, X = np.meshgrid(u, t, x, indexing="ij")
    return U.ravel(), T.ravel(), X.ravel()


def timelike_flux_report(f: FluxField, g: MetricChart, samples) -> TimelikeReport:
    """Check that ``du f`` is future-directed and time-like on the samples.

    ``samples`` is a triple of arrays ``(u, t, x)``.
    """
    u, t, x = (np.atleast_1d(np.asarray(s, dtype=float)) for s in samples)
    if u.size == 0:
        raise EmptyGrid("timelike_flux_report needs at least one sample")
    u, t, x = np.broadcast_arrays(u, t, x)
    dt_, dx_ = f.df_du(u, t, x)
    gtt, gtx, gxx = g.components(t, x)
    q = inner_components(gtt, gtx, gxx, dt_, dx_, dt_, dx_)
    future = is_future(g, t, x, dt_, dx_)
    i = int(np.argmax(q))
    bad = np.flatnonzero((q >= 0) | ~future)
    if bad.size:
        j = int(bad[0]) if q[i] < 0 else i
    else:
        j = i
    return TimelikeReport(
        ok=bool(bad.size == 0),
        worst_value=float(q[i]),
        witness=(float(u[j]), float(t[j]), float(x[j])),
        future_ok=bool(np.all(future)),
    )


def divergence(f: FluxField, g: MetricChart, u, t, x, h: float = 1e-3):
    """``div_g f(u, .)`` at chart points, by 4th-order central differences
    of the densitised components ``sqrt(-det g) f^a``."""
    u, t, x = _bcast(u, t, x)

    def dens(tt, xx):
        ft, fx = f.f(u, tt, xx)
        J = g.volume_density(tt, xx)
        return J * ft, J * fx

    def d4(fun, shift_t, shift_x, comp):
        vals = [fun(t + k * shift_t, x + k * shift_x)[comp] for k in (-2, -1, 1, 2)]
        return (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h)

    return (d4(dens, h, 0.0, 0) + d4(dens, 0.0, h, 1)) / g.volume_density(t, x)


def growth_constants(f: FluxField, g: MetricChart, t_range=(0.0, 1.0),
                     u_range=None, n_u: int = 41, n_t: int = 33, n_x: int = 16,
                     noise_floor: float = 1e-9):
    """Sampled constants with ``|div_g f(u,p)| <= C1 + C2 |u|``.

    Values below ``noise_floor`` are finite-difference noise and set to 0.
    """
    lo, hi = f.declared_range if u_range is None else u_range
    u = np.linspace(lo, hi, n_u)
    u = np.union1d(u, [0.0])
    t = np.linspace(*t_range, n_t)
    x = np.linspace(0.0, g.period, n_x, endpoint=False)
    U, T, X = np.meshgrid(u, t, x, indexing="ij")
    div = np.abs(divergence(f, g, U, T, X))
    zero = np.isclose(U, 0.0)
    C1 = float(div[zero].max())
    nz = ~zero
    C2 = float(np.max(np.maximum(div[nz] - C1, 0.0) / np.abs(U[nz]))) if nz.any() else 0.0
    C1 = 0.0 if C1 < noise_floor else C1
    C2 = 0.0 if C2 < noise_floor else C2
    return C1, C2


# -- quadrature --------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Rule on the reference interval [0, 1]; exact through degree ``order``."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    @property
    def size(self) -> int:
        return len(self.nodes)


def gauss_legendre(n: int = 5) -> QuadratureRule:
    if n < 1:
        raise ValueError("need at least one node")
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(0.5 * (x + 1.0), 0.5 * w, 2 * n - 1)


def integrate_segments(fun, a, b, rule: QuadratureRule):
    """Vectorised integral of ``fun`` over ``[a, b]`` (broadcast arrays)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = a[..., None] + (b - a)[..., None] * rule.nodes
    return (b - a) * np.sum(rule.weights * fun(s), axis=-1)


def compatibility_defect(f: FluxField, mesh, elements, ubar) -> np.ndarray:
    """Boundary form of ``int_K div_g f(ubar, p) dp`` per element.

    Uses the Lorentzian divergence theorem: inward normals on the
    space-like faces, outward normals on the time-like lateral ones.
    Zero (to quadrature accuracy) for geometry-compatible fluxes.
    """
    elements = np.atleast_1d(np.asarray(elements, dtype=int))
    if np.any(mesh.faces.measure <= 0):
        raise DegenerateFace("mesh has a face of zero measure")
    ubar = np.broadcast_to(np.asarray(ubar, dtype=float), elements.shape)
    return mesh.boundary_flux(elements, f, ubar)


def sample_points(g: MetricChart, t_values: Iterable[float], n_x: int = 8):
    t = np.asarray(list(t_values), dtype=float)
    x = np.linspace(0.0, g.period, n_x, endpoint=False)
    T, X = np.meshgrid(t, x, indexing="ij")
    return T.ravel(), X.ravel()
