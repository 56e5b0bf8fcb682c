"""Mesh admissibility and CFL checkers.

The Cartesian-deviation check compares, for every element ``K`` with a
predecessor ``K^-``, the forms ``|K| E(K)`` and ``|K^-| E(K^-)`` where
``E(K)(X, Y) = g(X, w_K) g(Y, n_K^+) / tau_K``.  ``w_K`` is the future
unit tangent of the straight chart segment from the lateral-boundary
centroid ``p_K^0`` to the outflow centroid ``p_K^+``, and ``n_K^+`` is the
future unit normal of the outflow face.  Smooth probe fields stand in for
the arbitrary vector fields of the admissibility definition.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import EmptyRange
from .geometry import FluxField, inner_components, is_future
from .mesh import Mesh, wrap

ProbeField = Callable[[np.ndarray, np.ndarray], tuple]


def _probe(name, fun):
    fun.__name__ = name
    return fun


def default_probes(L: float = 1.0) -> list:
    """Coordinate fields plus two oscillatory fields, all with sup-norm 1."""
    k = 2 * np.pi / L
    return [
        _probe("d_t", lambda t, x: (np.ones_like(x), np.zeros_like(x))),
        _probe("d_x", lambda t, x: (np.zeros_like(x), np.ones_like(x))),
        _probe("rot1", lambda t, x: (np.sin(k * x), np.cos(k * x))),
        _probe("osc2", lambda t, x: (np.cos(2 * k * x) * np.cos(np.pi * t), np.sin(2 * k * x))),
    ]


@dataclass
class CflReport:
    ratios: np.ndarray
    max_ratio: float
    ok: bool
    worst_element: int
    limit: float = 1.0


def cfl_report(mesh: Mesh, f: FluxField, u_range=None, n_samples: int = 64,
               limit: float = 1.0) -> CflReport:
    """Per-element CFL ratio.

    ``r_K = |d0K| / |e_K^+| * max_e sup_u |mu'_{K,e}(u)| / inf_u mu_K^+'(u)``,
    suprema over ``n_samples`` (at least 64) equispaced values of ``u_range``.
    """
    lo, hi = f.declared_range if u_range is None else u_range
    if not hi > lo:
        raise EmptyRange(f"empty u range [{lo}, {hi}]")
    m = mesh
    lat, out_min = m.derivative_extrema(f, (lo, hi), max(n_samples, 64))
    lat_max = np.zeros(m.n_elements)
    np.maximum.at(lat_max, m.lat_elem, lat)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_slope = np.where(out_min > 0, 1.0 / out_min, np.inf)
        ratios = (m.lateral_total / m.e_plus) * lat_max * inv_slope
    ratios = np.where(lat_max == 0, 0.0, ratios)
    worst = int(np.argmax(ratios))
    mx = float(ratios[worst])
    return CflReport(ratios, mx, bool(mx <= limit), worst, limit)


@dataclass
class DeviationReport:
    probes: list
    pair_elements: np.ndarray            # K with a predecessor
    pair_terms: np.ndarray               # (n_pairs, n_probes), Psi_K = Phi
    signed_sum: np.ndarray               # per probe
    aggregate: float                     # worst case over |Psi_K| <= 1
    eta_aggregate: float
    ex3_residual: np.ndarray             # per pair, max over probes
    ex4_residual: np.ndarray
    eta_ex3: float
    eta_ex4: float
    eta: float
    threshold: float
    flatness_residual: float
    smoothness_proxy: float
    skipped_initial: int
    h: float
    metadata: dict = field(default_factory=dict)

    @property
    def ex3_pass(self) -> bool:
        return self.eta_ex3 <= self.threshold

    @property
    def ex4_pass(self) -> bool:
        return self.eta_ex4 <= self.threshold

    @property
    def flat_pass(self) -> bool:
        return self.flatness_residual <= self.metadata.get("flatness_bound", 1.0)

    @property
    def smooth_pass(self) -> bool:
        return self.smoothness_proxy <= self.metadata.get("smoothness_bound", 100.0)

    @property
    def ok(self) -> bool:
        return (self.eta <= self.threshold and self.flat_pass and self.smooth_pass
                and bool(np.all(np.isfinite(self.ex4_residual))))


def _point_segment_distance(p, a, d):
    dd = (d * d).sum(-1)
    s = np.clip(((p - a) * d).sum(-1) / dd, 0.0, 1.0)
    q = a + s[..., None] * d
    return np.sqrt(((p - q) ** 2).sum(-1))


def element_frames(mesh: Mesh):
    """Outflow centroid, ``w_K`` and the scaled future normal ``|e+| n+``
    lowered at the centroid, for every element.

    Returns ``(p_plus, w, scaled_normal_low, timelike_ok)``.
    """
    m = mesh
    F = m.faces
    L = m.period
    of = m.out_face
    p_plus = F.centroid[of].copy()
    # lateral boundary centroid, unwrapped near p_plus
    lat_c = F.centroid[m.lat_face].copy()
    lat_c[:, 1] = p_plus[m.lat_elem, 1] + wrap(lat_c[:, 1] - p_plus[m.lat_elem, 1], L)
    wts = m.lat_measure
    p0 = np.zeros((m.n_elements, 2))
    np.add.at(p0, m.lat_elem, lat_c * wts[:, None])
    p0 /= m.lateral_total[:, None]
    v = p_plus - p0
    t, x = p_plus[:, 0], p_plus[:, 1]
    gtt, gtx, gxx = m.metric.components(t, x)
    vv = inner_components(gtt, gtx, gxx, v[:, 0], v[:, 1], v[:, 0], v[:, 1])
    ok = vv < 0
    w = v / np.sqrt(np.abs(np.where(vv == 0, 1.0, vv)))[:, None]
    flip = ~is_future(m.metric, t, x, w[:, 0], w[:, 1])
    w[flip] *= -1
    # future unit normal of the outflow face at its centroid, from the
    # tangent annihilator (faces are straight, so this is exact)
    T = F.delta[of]
    om_t, om_x = -T[:, 1], T[:, 0]
    it, itx, ix = m.metric.inverse_components(t, x)
    n_t = it * om_t + itx * om_x
    n_x = itx * om_t + ix * om_x
    nn = inner_components(gtt, gtx, gxx, n_t, n_x, n_t, n_x)
    n_t, n_x = n_t / np.sqrt(np.abs(nn)), n_x / np.sqrt(np.abs(nn))
    past = ~is_future(m.metric, t, x, n_t, n_x)
    n_t = np.where(past, -n_t, n_t)
    n_x = np.where(past, -n_x, n_x)
    low = np.stack([gtt * n_t + gtx * n_x, gtx * n_t + gxx * n_x], 1) * m.e_plus[:, None]
    return p_plus, w, low, ok


def _smoothness_proxy(mesh: Mesh, faces):
    F = mesh.faces
    s = mesh.quad.nodes
    out = 0.0
    for comp in (0, 1):
        vals = F.normal_low[faces, :, comp]             # (nf, nq)
        V = np.vander(s, 3)                             # quadratic fit in s
        coef, *_ = np.linalg.lstsq(V, vals.T, rcond=None)
        length = np.maximum(F.measure[faces], 1e-300)
        c2, c1 = coef[0], coef[1]
        d1 = np.abs(c1) + 2 * np.abs(c2)
        d2 = 2 * np.abs(c2)
        norm = np.abs(vals).max(1) + d1 / length + d2 / length ** 2
        out = max(out, float(norm.max()))
    return out


def cartesian_deviation(mesh: Mesh, probes: Optional[Sequence[ProbeField]] = None,
                        eta_threshold: float = 0.5, flatness_bound: float = 1.0,
                        smoothness_bound: float = 100.0) -> DeviationReport:
    """Evaluate the Cartesian deviation of ``mesh`` against probe fields.

    The estimated ``eta(h)`` is the largest of three scaled quantities:
    ``h`` times the worst-case deviation sum (over ``|Psi_K| <= 1``), and the
    pairwise normal and tangent residuals scaled by ``h / |K|`` and
    ``h / tau_K``.  The mesh passes when that estimate is at most
    ``eta_threshold`` and the flatness and normal-smoothness residuals are
    within their bounds.  Elements of the initial layer have no
    predecessor; they are skipped and counted.
    """
    m = mesh
    probes = list(default_probes(m.period) if probes is None else probes)
    p_plus, w, nlow, ok = element_frames(m)
    K = np.flatnonzero(m.down >= 0)
    Km = m.down[K]
    skipped = int(m.n_elements - K.size)
    t, x = p_plus[K, 0], p_plus[K, 1]
    gtt, gtx, gxx = m.metric.components(t, x)
    gm = m.metric.components(p_plus[Km, 0], p_plus[Km, 1])

    pair_terms = np.zeros((K.size, len(probes)))
    ex3 = np.zeros((K.size, len(probes)))
    ex4 = np.zeros((K.size, len(probes)))
    aggregate = 0.0
    for j, phi in enumerate(probes):
        Xt, Xx = (np.asarray(c, dtype=float) * np.ones_like(t) for c in phi(t, x))
        scale = max(float(np.max(np.maximum(np.abs(Xt), np.abs(Xx)))), 1e-300)
        gw = inner_components(gtt, gtx, gxx, w[K, 0], w[K, 1], Xt, Xx)
        gwm = inner_components(*gm, w[Km, 0], w[Km, 1], Xt, Xx)
        cov = gw[:, None] * nlow[K] - gwm[:, None] * nlow[Km]
        pair_terms[:, j] = cov[:, 0] * Xt + cov[:, 1] * Xx
        aggregate = max(aggregate, float(np.abs(cov).sum()) / scale)
        ex3[:, j] = np.abs((nlow[K] - nlow[Km])[:, 0] * Xt + (nlow[K] - nlow[Km])[:, 1] * Xx) / scale
        ex4[:, j] = np.abs(gw - gwm) / scale
    h = m.h
    ex3_pair = ex3.max(1) if K.size else np.zeros(0)
    ex4_pair = ex4.max(1) if K.size else np.zeros(0)
    ex4_pair = np.where(ok[K] & ok[Km], ex4_pair, np.inf)
    eta3 = float((h * ex3_pair / m.volume[K]).max()) if K.size else 0.0
    eta4 = float((h * ex4_pair / m.tau_K[K]).max()) if K.size else 0.0
    eta_agg = h * aggregate

    F = m.faces
    of = m.out_face
    dist = _point_segment_distance(F.centroid[of], F.p0[of], F.delta[of])
    flat = float((dist / (m.e_plus * m.tau)).max())
    smooth = _smoothness_proxy(m, of)
    return DeviationReport(
        probes=[p.__name__ for p in probes], pair_elements=K, pair_terms=pair_terms,
        signed_sum=pair_terms.sum(0), aggregate=aggregate, eta_aggregate=eta_agg,
        ex3_residual=ex3_pair, ex4_residual=ex4_pair, eta_ex3=eta3, eta_ex4=eta4,
        eta=max(eta_agg, eta3, eta4), threshold=eta_threshold,
        flatness_residual=flat, smoothness_proxy=smooth, skipped_initial=skipped, h=h,
        metadata={"w_K": "straight chart segment p0 -> p+, normalised at p+",
                  "probe_point": "all probe fields evaluated at p_K^+",
                  "flatness_bound": flatness_bound, "smoothness_bound": smoothness_bound})
