"""Face-averaged fluxes, their monotone inversion and the Lax-Friedrichs
numerical flux.

On a space-like face with its past-directed unit normal the average
``u -> mean_e g(f(u, p), n(p))`` is strictly increasing for a time-like flux,
which is what makes the implicit per-element update well defined.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DTooSmall, OutOfRange
from .geometry import FluxField
from .mesh import Mesh


def mu(mesh: Mesh, face: int, owner: int, f: FluxField, u):
    """Face average of ``g(f(u), n)`` with ``n`` the outward normal of ``owner``."""
    u = np.asarray(u, dtype=float)
    faces = np.full(u.shape, face, dtype=int)
    return mesh.incidence_sign(face, owner) * mesh.mu_ref(faces, f, u)


def mu_plus(mesh: Mesh, elements, f: FluxField, u, derivative: bool = False):
    """The increasing outflow average of each element, evaluated at ``u``."""
    elements = np.asarray(elements, dtype=int)
    return mesh.mu_ref(mesh.out_face[elements], f, u, derivative)


def invert_ref(mesh: Mesh, faces, f: FluxField, y, u_range=None, tol: float = 1e-12,
               max_iter: int = 100, margin: float = 0.25, guess=None):
    """Solve ``mu_ref(face, u) = y`` on space-like faces, vectorised.

    Safeguarded Newton iteration inside a bisection bracket.  The bracket
    starts at ``u_range`` (default: the declared range of ``f``) and is
    widened at most by ``margin`` times its width on each side.  Newton
    starts from ``guess`` when given (clipped to the bracket), otherwise
    from a secant step across the bracket.

    Raises
    ------
    OutOfRange
        If some ``y`` is not bracketed.
    """
    faces = np.atleast_1d(np.asarray(faces, dtype=int))
    y = np.broadcast_to(np.asarray(y, dtype=float), faces.shape).astype(float)
    lo, hi = f.declared_range if u_range is None else u_range
    width = hi - lo
    a = np.full(faces.shape, float(lo))
    b = np.full(faces.shape, float(hi))
    Fa = mesh.mu_ref(faces, f, a) - y
    Fb = mesh.mu_ref(faces, f, b) - y
    for step in (0.05, 0.1, 0.25):
        if step > margin:
            break
        low = Fa > 0
        if low.any():
            a[low] = lo - step * width
            Fa[low] = mesh.mu_ref(faces[low], f, a[low]) - y[low]
        high = Fb < 0
        if high.any():
            b[high] = hi + step * width
            Fb[high] = mesh.mu_ref(faces[high], f, b[high]) - y[high]
    bad = (Fa > 0) | (Fb < 0)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise OutOfRange(f"value {float(y[i])!r} on face {int(faces[i])} is outside the range "
                         f"of the face average over [{a[i]}, {b[i]}]")
    target = tol * (1.0 + np.abs(y))
    if guess is None:
        denom = np.where(Fb - Fa != 0, Fb - Fa, 1.0)
        x = np.clip(a - Fa * (b - a) / denom, a, b)
    else:
        x = np.clip(np.broadcast_to(np.asarray(guess, dtype=float), faces.shape), a, b)
    active = np.ones(faces.shape, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        fi = faces[idx]
        xi = x[idx]
        r = mesh.mu_ref(fi, f, xi) - y[idx]
        done = np.abs(r) <= 0.25 * target[idx]
        ai, bi = a[idx], b[idx]
        ai = np.where(r < 0, xi, ai)
        bi = np.where(r > 0, xi, bi)
        d = mesh.mu_ref(fi, f, xi, derivative=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = xi - r / d
        bisect = ~np.isfinite(xn) | (xn <= ai) | (xn >= bi) | (d <= 0)
        xn = np.where(bisect, 0.5 * (ai + bi), xn)
        stalled = (bi - ai) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(xi))
        a[idx], b[idx] = ai, bi
        x[idx] = np.where(done | stalled, xi, xn)
        active[idx[done | stalled]] = False
    r = mesh.mu_ref(faces, f, x) - y
    if np.any(np.abs(r) > target):
        i = int(np.argmax(np.abs(r) / target))
        raise OutOfRange(f"inversion did not converge on face {int(faces[i])}: residual {r[i]:.3e}")
    return x


def mu_inverse(mesh: Mesh, face: int, owner: int, f: FluxField, y, **kw):
    """Inverse of :func:`mu` in ``u``; the face must be space-like."""
    s = mesh.incidence_sign(face, owner)
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    out = invert_ref(mesh, np.full(ys.shape, face), f, s * ys, **kw)
    return out.reshape(np.shape(y)) if np.ndim(y) else float(out[0])


def _expand(a, like):
    """Append singleton axes to ``a`` so it broadcasts against ``like``."""
    return a.reshape(a.shape + (1,) * (np.ndim(like) - a.ndim))


class LaxFriedrichs:
    """Lax-Friedrichs type flux on every lateral face.

    ``q_{K,e}(u, v) = (mu_{K,e}(u) + mu_{K,e}(v)) / 2 + D_e / 2 (mu_K^+(u) - mu_{K_e}^+(v))``

    where ``mu_K^+`` is the increasing outflow average of ``K``.  ``D_e`` is
    shared by the two owners of a face, which makes the flux conservative.

    Parameters
    ----------
    D : float or array, optional
        Fixed diffusion constant(s).  When omitted ``D_e`` is the larger of
        the two owners' lower bounds times ``D_safety``.
    check : bool
        Raise :class:`DTooSmall` if a supplied ``D`` is below the bound.
    """

    def __init__(self, mesh: Mesh, f: FluxField, D_safety: float = 1.0,
                 D=None, u_range=None, n_samples: int = 64, check: bool = True):
        self.mesh = mesh
        self.f = f
        self.D_safety = D_safety
        self.u_range = f.declared_range if u_range is None else tuple(u_range)
        m = mesh
        inc = np.arange(len(m.lat_face))
        K = m.lat_elem
        lat_d, out_min = m.derivative_extrema(f, self.u_range, max(n_samples, 2))
        out_d = out_min[K]
        geometric = m.e_plus[K] / m.lateral_total[K]
        with np.errstate(divide="ignore"):
            wave = np.where(out_d > 0, lat_d / out_d, np.inf)
        bound_inc = np.maximum(geometric, wave)
        bound_face = np.zeros(len(m.faces))
        np.maximum.at(bound_face, m.lat_face, bound_inc)
        self.D_min = bound_face[m.lat_face]
        if D is None:
            self.D = D_safety * self.D_min
        else:
            self.D = np.broadcast_to(np.asarray(D, dtype=float), inc.shape).copy()
            if check and np.any(self.D < self.D_min * (1 - 1e-12)):
                i = int(np.argmin(self.D - self.D_min))
                raise DTooSmall(f"D = {self.D[i]} below the required {self.D_min[i]} "
                                f"on face {int(m.lat_face[i])}")

    def lateral_mu(self, inc, u):
        m = self.mesh
        inc = np.asarray(inc, dtype=int)
        return _expand(m.lat_sign[inc], u) * m.mu_ref(m.lat_face[inc], self.f, u)

    def __call__(self, inc, u, v):
        """Flux through lateral incidence(s) ``inc`` (rows of the mesh's
        lateral table) with owner value ``u`` and neighbour value ``v``."""
        m = self.mesh
        inc = np.asarray(inc, dtype=int)
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        own = m.out_face[m.lat_elem[inc]]
        nbr = m.out_face[m.lat_nbr[inc]]
        D = _expand(self.D[inc], u)
        return (0.5 * (self.lateral_mu(inc, u) + self.lateral_mu(inc, v))
                + 0.5 * D * (m.mu_ref(own, self.f, u) - m.mu_ref(nbr, self.f, v)))

    def consistency_defect(self, inc, u):
        """``q(u, u) - mu_{K,e}(u)``; zero where both outflow averages agree."""
        return self(inc, u, u) - self.lateral_mu(inc, u)

    def generalized_consistency(self, inc, u):
        """Residual of the four-argument consistency form of the flux."""
        m = self.mesh
        inc = np.asarray(inc, dtype=int)
        own = m.out_face[m.lat_elem[inc]]
        nbr = m.out_face[m.lat_nbr[inc]]
        expected = self.lateral_mu(inc, u) + 0.5 * _expand(self.D[inc], u) * (
            m.mu_ref(own, self.f, u) - m.mu_ref(nbr, self.f, u))
        return self(inc, u, u) - expected


def lax_friedrichs(mesh: Mesh, inc: int, f: FluxField, u, v, D: float) -> float:
    """Single evaluation of the Lax-Friedrichs flux with a given ``D``.

    Raises :class:`DTooSmall` if ``D`` is below the face's lower bound.
    """
    q = LaxFriedrichs(mesh, f)
    if D < q.D_min[inc] * (1 - 1e-12):
        raise DTooSmall(f"D = {D} below the required {q.D_min[inc]}")
    q.D[inc] = D
    q.D[mesh.lat_twin[inc]] = D
    return q(np.array(inc), u, v)


@dataclass
class FluxAxiomReport:
    consistency: float
    generalized_consistency: float
    conservation: float
    min_dq_du: float
    max_dq_dv: float

    @property
    def monotone(self) -> bool:
        return self.min_dq_du >= -1e-8 and self.max_dq_dv <= 1e-8

    @property
    def ok(self) -> bool:
        return self.monotone and self.conservation <= 1e-12 and self.consistency <= 1e-12


def verify_flux_axioms(q: LaxFriedrichs, u_grid, fd_step: float = 1e-6,
                       incidences: Optional[np.ndarray] = None) -> FluxAxiomReport:
    """Sweep consistency, conservation and monotonicity over a value grid.

    Monotonicity is measured with centred differences on every pair of grid
    values.  Nothing is raised; the report carries the residuals.
    """
    m = q.mesh
    u_grid = np.asarray(u_grid, dtype=float)
    inc = np.arange(len(m.lat_face)) if incidences is None else np.asarray(incidences)
    n = len(u_grid)
    U = np.broadcast_to(u_grid, (len(inc), n))
    cons_strict = float(np.abs(q.consistency_defect(inc, U)).max())
    cons_gen = float(np.abs(q.generalized_consistency(inc, U)).max())
    uu, vv = np.meshgrid(u_grid, u_grid, indexing="ij")
    uu = np.broadcast_to(uu.ravel(), (len(inc), n * n))
    vv = np.broadcast_to(vv.ravel(), (len(inc), n * n))
    twin = m.lat_twin[inc]
    conservation = float(np.abs(q(inc, uu, vv) + q(twin, vv, uu)).max())
    h = fd_step
    dq_du = (q(inc, uu + h, vv) - q(inc, uu - h, vv)) / (2 * h)
    dq_dv = (q(inc, uu, vv + h) - q(inc, uu, vv - h)) / (2 * h)
    return FluxAxiomReport(cons_strict, cons_gen, conservation,
                           float(dq_du.min()), float(dq_dv.max()))
