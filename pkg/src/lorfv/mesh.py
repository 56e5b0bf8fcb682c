"""Space-time triangulations of a periodic 1+1 chart.

A :class:`Mesh` stores faces and elements as flat numpy tables so that face
averages can be evaluated for a whole slice at once.  Faces are straight
chart segments; each carries quadrature nodes, the measure induced by the
metric and a unit normal field.  The stored *reference* normal is the
past-directed one on space-like faces and the one pointing to increasing
``x`` on time-like faces; each element/face incidence records the sign
turning it into the element's outward normal.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (BadDimensions, DegenerateFace, MeshStructureError,
                     NonMonotoneGrid, ShearTooLarge)
from .geometry import (NULL_TOL, CausalClass, ChartPoint, MetricChart,
                       QuadratureRule, SpacetimeVector, gauss_legendre,
                       inner_components, is_future)

KINDS = ("inflow", "outflow", "lateral")


def wrap(dx, L):
    """Minimal periodic image of a displacement, in ``[-L/2, L/2]``.

    Ties at exactly ``L/2`` resolve to ``+L/2``.
    """
    dx = np.asarray(dx, dtype=float)
    w = dx - L * np.round(dx / L)
    return np.where(np.isclose(w, -0.5 * L, rtol=0, atol=1e-14 * L), 0.5 * L, w)


@dataclass(frozen=True)
class Face:
    id: int
    kind: str
    measure: float
    centroid: ChartPoint
    start: ChartPoint
    delta: tuple
    causal: CausalClass


@dataclass(frozen=True)
class Element:
    id: int
    inflow_face: int
    outflow_face: int
    lateral_faces: tuple
    lateral_neighbors: tuple
    volume: float
    tau: float
    up: int
    down: int
    slice: int


@dataclass
class FaceTable:
    ids: np.ndarray
    declared_kind: list
    v0: np.ndarray
    v1: np.ndarray
    p0: np.ndarray           # (nf, 2) start point (t, x)
    delta: np.ndarray        # (nf, 2) chart displacement
    spacelike: np.ndarray    # declared role: bool
    causal: list             # computed CausalClass per face
    tangent_norm: np.ndarray  # (nf, nq) g(T, T)
    nodes_t: np.ndarray      # (nf, nq)
    nodes_x: np.ndarray
    avg_w: np.ndarray        # (nf, nq) averaging weights, rows sum to 1
    measure: np.ndarray      # (nf,)
    centroid: np.ndarray     # (nf, 2) center of mass, x unwrapped near p0
    normal: np.ndarray       # (nf, nq, 2) reference unit normal (vector)
    normal_low: np.ndarray   # (nf, nq, 2) lowered reference normal

    def __len__(self):
        return len(self.ids)


def _face_geometry(metric: MetricChart, p0, delta, spacelike, quad: QuadratureRule):
    s = quad.nodes
    nt = p0[:, 0:1] + delta[:, 0:1] * s
    nx = p0[:, 1:2] + delta[:, 1:2] * s
    gtt, gtx, gxx = metric.components(nt, nx)
    Tt = np.broadcast_to(delta[:, 0:1], nt.shape)
    Tx = np.broadcast_to(delta[:, 1:2], nt.shape)
    tt = inner_components(gtt, gtx, gxx, Tt, Tx, Tt, Tx)
    speed = np.sqrt(np.abs(tt))
    measure = speed @ quad.weights
    if np.any(measure <= 0):
        raise DegenerateFace(f"face {int(np.argmin(measure))} has zero measure")
    w = quad.weights * speed
    avg_w = w / w.sum(axis=1, keepdims=True)
    centroid = np.stack([(avg_w * nt).sum(1), (avg_w * nx).sum(1)], axis=1)

    # raise the annihilating covector of the tangent, then normalise
    om_t, om_x = -Tx, Tt
    d = gtt * gxx - gtx * gtx
    it, itx, ix = gxx / d, -gtx / d, gtt / d
    n_t = it * om_t + itx * om_x
    n_x = itx * om_t + ix * om_x
    nn = inner_components(gtt, gtx, gxx, n_t, n_x, n_t, n_x)
    scale = 1.0 / np.sqrt(np.abs(nn))
    n_t = n_t * scale
    n_x = n_x * scale
    past_flip = is_future(metric, nt, nx, n_t, n_x)
    plus_t = -Tx * np.sign(Tt)
    plus_x = Tt * np.sign(Tt)
    lat_flip = (n_t * plus_t + n_x * plus_x) < 0
    flip = np.where(spacelike[:, None], past_flip, lat_flip)
    sgn = np.where(flip, -1.0, 1.0)
    n_t = n_t * sgn
    n_x = n_x * sgn
    low_t = gtt * n_t + gtx * n_x
    low_x = gtx * n_t + gxx * n_x
    return (tt, nt, nx, avg_w, measure, centroid,
            np.stack([n_t, n_x], -1), np.stack([low_t, low_x], -1))


def _classify_faces(tt, eps=NULL_TOL):
    tt = np.asarray(tt)
    out = np.full(len(tt), CausalClass.NULL, dtype=object)
    out[np.all(tt > eps, axis=1)] = CausalClass.SPACELIKE
    out[np.all(tt < -eps, axis=1)] = CausalClass.TIMELIKE
    return list(out)


def _fan_volume(metric: MetricChart, polys: np.ndarray, quad: QuadratureRule):
    """Metric volume of star-shaped polygons ``(ne, m, 2)`` by a fan of
    collapsed-square triangle rules around the vertex mean."""
    c = polys.mean(axis=1, keepdims=True)
    A = np.broadcast_to(c, polys.shape)
    B = polys
    C = np.roll(polys, -1, axis=1)
    e1 = B - A
    e2 = C - B
    jac = np.abs(e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0])  # (ne, m)
    xi = quad.nodes[:, None]
    eta = quad.nodes[None, :]
    W = quad.weights[:, None] * quad.weights[None, :] * xi
    pt = (A[..., 0, None, None] + xi * (e1[..., 0, None, None] + eta * e2[..., 0, None, None]))
    px = (A[..., 1, None, None] + xi * (e1[..., 1, None, None] + eta * e2[..., 1, None, None]))
    dens = metric.volume_density(pt, px)
    return np.sum(jac * np.sum(W * dens, axis=(-2, -1)), axis=1)


def _polygon_centroid(polys):
    x = polys[..., 0]
    y = polys[..., 1]
    xs = np.roll(x, -1, axis=1)
    ys = np.roll(y, -1, axis=1)
    cross = x * ys - xs * y
    area = 0.5 * cross.sum(1)
    cx = ((x + xs) * cross).sum(1) / (6 * area)
    cy = ((y + ys) * cross).sum(1) / (6 * area)
    return np.stack([cx, cy], 1)


class Mesh:
    """Immutable space-time triangulation.

    Built either by the generators below or from a mesh file
    (:mod:`lorfv.meshio`); both go through :meth:`from_tables`.
    """

    def __init__(self):
        raise TypeError("use Mesh.from_tables or a build_* generator")

    @classmethod
    def from_tables(cls, metric: MetricChart, vertices, faces, elements, slices,
                    quad: Optional[QuadratureRule] = None, *, vertex_ids=None,
                    face_ids=None, element_ids=None, face_p0=None, face_delta=None,
                    polygons=None):
        """Assemble a mesh.

        Parameters
        ----------
        vertices : (nv, 2) array of chart points (t, x)
        faces : sequence of (kind, v0, v1) with vertex *indices*
        elements : sequence of (inflow, outflow, [laterals...]) face indices
        slices : sequence of element-index arrays, slice 0 first
        face_p0, face_delta, polygons :
            Optional unwrapped geometry supplied by generators; computed
            from vertex coordinates when omitted.
        """
        self = object.__new__(cls)
        self._cache = {}
        self.metric = metric
        self.quad = quad or gauss_legendre(5)
        L = metric.period
        self.period = L
        V = np.asarray(vertices, dtype=float).reshape(-1, 2)
        self.vertices = V
        self.vertex_ids = np.arange(len(V)) if vertex_ids is None else np.asarray(vertex_ids)

        kinds = [fk for fk, _, _ in faces]
        v0 = np.array([a for _, a, _ in faces], dtype=int)
        v1 = np.array([b for _, _, b in faces], dtype=int)
        for k in kinds:
            if k not in KINDS:
                raise MeshStructureError(f"unknown face kind {k!r}")
        spacelike = np.array([k != "lateral" for k in kinds])
        if face_p0 is None:
            p0 = V[v0].copy()
            delta = V[v1] - V[v0]
            delta[:, 1] = wrap(delta[:, 1], L)
        else:
            p0 = np.asarray(face_p0, dtype=float)
            delta = np.asarray(face_delta, dtype=float)
        (tt, nt, nx, avg_w, measure, centroid,
         normal, normal_low) = _face_geometry(metric, p0, delta, spacelike, self.quad)
        self.faces = FaceTable(
            ids=np.arange(len(faces)) if face_ids is None else np.asarray(face_ids),
            declared_kind=kinds, v0=v0, v1=v1, p0=p0, delta=delta,
            spacelike=spacelike, causal=_classify_faces(tt), tangent_norm=tt,
            nodes_t=nt, nodes_x=nx, avg_w=avg_w, measure=measure, centroid=centroid,
            normal=normal, normal_low=normal_low)

        ne = len(elements)
        self.n_elements = ne
        self.element_ids = np.arange(ne) if element_ids is None else np.asarray(element_ids)
        self.in_face = np.array([e[0] for e in elements], dtype=int)
        self.out_face = np.array([e[1] for e in elements], dtype=int)
        lat_lists = [list(e[2]) for e in elements]
        if any(len(l) == 0 for l in lat_lists):
            raise MeshStructureError("every element needs at least one lateral face")
        counts = np.array([len(l) for l in lat_lists])
        self.lat_ptr = np.concatenate([[0], np.cumsum(counts)])
        self.lat_face = np.array([f for l in lat_lists for f in l], dtype=int)
        self.lat_elem = np.repeat(np.arange(ne), counts)
        if np.any(~spacelike[self.in_face]) or np.any(~spacelike[self.out_face]):
            raise MeshStructureError("inflow/outflow faces must be declared space-like")
        if np.any(spacelike[self.lat_face]):
            raise MeshStructureError("lateral faces must be declared lateral")

        # polygons and element geometry
        if polygons is None:
            polys = [self._walk_polygon(k) for k in range(ne)]
            self.volume = np.empty(ne)
            self.centroid = np.empty((ne, 2))
            for m in sorted({len(p) for p in polys}):
                idx = np.array([k for k, p in enumerate(polys) if len(p) == m])
                arr = np.array([polys[k] for k in idx])
                self.volume[idx] = _fan_volume(metric, arr, self.quad)
                self.centroid[idx] = _polygon_centroid(arr)
        else:
            polys = np.asarray(polygons, dtype=float)
            self.volume = _fan_volume(metric, polys, self.quad)
            self.centroid = _polygon_centroid(polys)
        if np.any(self.volume <= 0):
            raise MeshStructureError("element with non-positive volume")

        self._link_neighbors()
        self._orient_laterals()

        self.slices = [np.asarray(s, dtype=int) for s in slices]
        self.slice_of = np.full(ne, -1, dtype=int)
        for n, s in enumerate(self.slices):
            if np.any(self.slice_of[s] >= 0):
                raise MeshStructureError("element listed in two slices")
            self.slice_of[s] = n
        if np.any(self.slice_of < 0):
            raise MeshStructureError("element not assigned to any slice")
        if np.any(self.slice_of[self.lat_nbr] != self.slice_of[self.lat_elem]):
            raise MeshStructureError("lateral neighbours must belong to the same slice")
        self.slice_pos = np.empty(ne, dtype=int)
        for s in self.slices:
            self.slice_pos[s] = np.arange(len(s))
        self.slice_inc = [np.flatnonzero(np.isin(self.lat_elem, s)) for s in self.slices]

        self.e_plus = self.faces.measure[self.out_face]
        self.e_minus = self.faces.measure[self.in_face]
        self.lat_measure = self.faces.measure[self.lat_face]
        self.lateral_total = np.add.reduceat(self.lat_measure, self.lat_ptr[:-1])
        self.tau_K = self.volume / self.e_plus
        self.tau = float(self.tau_K.max())
        self.h = float(self.faces.measure[self.faces.spacelike].max())
        self.slice_tau = np.array([self.tau_K[s].max() for s in self.slices])
        self.t_n = np.concatenate([[0.0], np.cumsum(self.slice_tau)])
        self._check_slices()
        return self

    # -- construction helpers ---------------------------------------------

    def _walk_polygon(self, k):
        F = self.faces
        fs = [self.in_face[k], self.out_face[k]] + list(
            self.lat_face[self.lat_ptr[k]:self.lat_ptr[k + 1]])
        adj = {}
        for f in fs:
            adj.setdefault(F.v0[f], []).append((f, F.v1[f], F.delta[f]))
            adj.setdefault(F.v1[f], []).append((f, F.v0[f], -F.delta[f]))
        f0 = self.in_face[k]
        start = F.v0[f0]
        pos = F.p0[f0].copy()
        pts = [pos.copy()]
        used = {f0}
        cur = F.v1[f0]
        pos = pos + F.delta[f0]
        while cur != start:
            pts.append(pos.copy())
            nxt = [e for e in adj.get(cur, []) if e[0] not in used]
            if len(nxt) != 1:
                raise MeshStructureError(f"element {self.element_ids[k]} boundary is not a simple cycle")
            f, cur, d = nxt[0]
            used.add(f)
            pos = pos + d
        if len(used) != len(fs) or np.linalg.norm(pos - pts[0]) > 1e-9 * self.period:
            raise MeshStructureError(f"element {self.element_ids[k]} boundary does not close")
        return np.array(pts)

    def _link_neighbors(self):
        ne = self.n_elements
        nf = len(self.faces)
        in_owner = np.full(nf, -1)
        out_owner = np.full(nf, -1)
        for arr, owner in ((self.in_face, in_owner), (self.out_face, out_owner)):
            if len(np.unique(arr)) != len(arr):
                raise MeshStructureError("a space-like face is shared in the same role twice")
            owner[arr] = np.arange(ne)
        self.up = in_owner[self.out_face]
        self.down = out_owner[self.in_face]

        order = np.argsort(self.lat_face, kind="stable")
        lf = self.lat_face[order]
        _, first, cnt = np.unique(lf, return_index=True, return_counts=True)
        if np.any(cnt != 2):
            raise MeshStructureError("every lateral face must be shared by exactly two elements")
        a = order[first]
        b = order[first + 1]
        if np.any(self.lat_elem[a] == self.lat_elem[b]):
            raise MeshStructureError("lateral face shared by an element with itself")
        twin = np.empty_like(self.lat_face)
        twin[a] = b
        twin[b] = a
        self.lat_twin = twin
        self.lat_nbr = self.lat_elem[twin]

    def _orient_laterals(self):
        F = self.faces
        L = self.period
        f = self.lat_face
        d = F.centroid[f] - self.centroid[self.lat_elem]
        d[:, 1] = wrap(d[:, 1], L)
        T = F.delta[f]
        plus = np.stack([-T[:, 1] * np.sign(T[:, 0]), T[:, 0] * np.sign(T[:, 0])], 1)
        proj = (plus * d).sum(1)
        self.lat_sign = np.where(proj > 0, 1.0, -1.0)
        if np.any(self.lat_sign[self.lat_twin] == self.lat_sign):
            raise MeshStructureError("lateral face has the same orientation for both owners")

    def _check_slices(self):
        for n, s in enumerate(self.slices[:-1]):
            ups = self.up[s]
            if np.any(ups < 0):
                raise MeshStructureError(f"slice {n} has an outflow face with no successor")
            if set(ups.tolist()) != set(self.slices[n + 1].tolist()):
                raise MeshStructureError(f"slice {n + 1} is not the successor of slice {n}")
        if np.any(self.down[self.slices[0]] >= 0):
            raise MeshStructureError("slice 0 elements must have their inflow faces on H_0")

    # -- geometric queries -------------------------------------------------

    @property
    def n_slices(self) -> int:
        return len(self.slices)

    def lateral_range(self, k):
        return slice(self.lat_ptr[k], self.lat_ptr[k + 1])

    def slice_faces(self, n: int) -> np.ndarray:
        """Face indices of the Cauchy slice ``H_n`` in slice-element order."""
        if n < self.n_slices:
            return self.in_face[self.slices[n]]
        return self.out_face[self.slices[n - 1]]

    def slice_time(self, n: int) -> float:
        return float(self.faces.centroid[self.slice_faces(n), 0].mean())

    def face(self, i: int) -> Face:
        F = self.faces
        return Face(int(F.ids[i]), F.declared_kind[i], float(F.measure[i]),
                    self.metric.point(*F.centroid[i]), self.metric.point(*F.p0[i]),
                    tuple(F.delta[i]), F.causal[i])

    def element(self, k: int) -> Element:
        r = self.lateral_range(k)
        return Element(int(k), int(self.in_face[k]), int(self.out_face[k]),
                       tuple(self.lat_face[r].tolist()), tuple(self.lat_nbr[r].tolist()),
                       float(self.volume[k]), float(self.tau_K[k]), int(self.up[k]),
                       int(self.down[k]), int(self.slice_of[k]))

    def normal(self, face: int, owner: int) -> np.ndarray:
        """Outward unit normal of ``owner`` along ``face`` at the quadrature
        nodes, shape ``(nq, 2)``."""
        return self.incidence_sign(face, owner) * self.faces.normal[face]

    def incidence_sign(self, face: int, owner: int) -> float:
        if face == self.in_face[owner]:
            return 1.0
        if face == self.out_face[owner]:
            return -1.0
        r = self.lateral_range(owner)
        hit = np.flatnonzero(self.lat_face[r] == face)
        if hit.size == 0:
            raise MeshStructureError(f"face {face} is not on element {owner}")
        return float(self.lat_sign[r][hit[0]])

    # -- face averages -------------------------------------------------------

    def _nodes(self, faces, extra: int):
        shape = faces.shape + (1,) * extra + (self.quad.size,)
        F = self.faces
        return (F.nodes_t[faces].reshape(shape), F.nodes_x[faces].reshape(shape),
                F.avg_w[faces].reshape(shape), F.normal_low[faces, :, 0].reshape(shape),
                F.normal_low[faces, :, 1].reshape(shape))

    def mu_ref(self, faces, flux, u, derivative: bool = False):
        """Average of ``g(f(u,p), n_ref(p))`` over each face.

        ``u`` has shape ``faces.shape`` or ``faces.shape + (S,)``.
        """
        faces = np.asarray(faces, dtype=int)
        u = np.asarray(u, dtype=float)
        t, x, w, lt, lx = self._nodes(faces, u.ndim - faces.ndim)
        ft, fx = (flux.df_du if derivative else flux.f)(u[..., None], t, x)
        return np.sum(w * (ft * lt + fx * lx), axis=-1)

    def derivative_extrema(self, flux, u_range, n_samples: int = 64):
        """``(sup_u |mu'_{e}|`` per lateral incidence, ``inf_u mu_K^+'`` per
        element``)`` over ``n_samples`` equispaced values of ``u_range``.

        Shared by the CFL check and the diffusion bound of the numerical
        flux, and cached per flux object and range.
        """
        lo, hi = u_range
        key = (id(flux), float(lo), float(hi), int(n_samples))
        hit = self._cache.get(key)
        if hit is not None and hit[0] is flux:
            return hit[1], hit[2]
        us = np.linspace(lo, hi, n_samples)
        lat_faces, inv = np.unique(self.lat_face, return_inverse=True)
        lat = np.empty(len(lat_faces))
        out = np.empty(self.n_elements)
        chunk = max(1, 2 ** 16 // n_samples)
        for i in range(0, len(lat_faces), chunk):
            fc = lat_faces[i:i + chunk]
            U = np.broadcast_to(us, (len(fc), n_samples))
            lat[i:i + chunk] = np.abs(self.mu_ref(fc, flux, U, derivative=True)).max(axis=1)
        for i in range(0, self.n_elements, chunk):
            fc = self.out_face[i:i + chunk]
            U = np.broadcast_to(us, (len(fc), n_samples))
            out[i:i + chunk] = self.mu_ref(fc, flux, U, derivative=True).min(axis=1)
        self._cache[key] = (flux, lat[inv], out)
        return lat[inv], out

    def face_average(self, faces, fun):
        """Average of a scalar chart function ``fun(t, x)`` over faces."""
        faces = np.asarray(faces, dtype=int)
        F = self.faces
        return np.sum(F.avg_w[faces] * fun(F.nodes_t[faces], F.nodes_x[faces]), axis=-1)

    def face_average_split(self, faces, fun, breaks):
        """Like :meth:`face_average` but each face is cut where it crosses
        one of the periodic x-positions ``breaks`` and every piece gets its
        own quadrature rule, so jumps at those positions are exact."""
        faces = np.asarray(faces, dtype=int)
        F = self.faces
        L = self.period
        s, w = self.quad.nodes, self.quad.weights
        out = np.empty(faces.shape)
        for i, fc in enumerate(faces.ravel()):
            x0, dx = F.p0[fc, 1], F.delta[fc, 1]
            cuts = [0.0, 1.0]
            if dx != 0:
                for b in breaks:
                    r = np.mod(b - x0, L)
                    c = r / dx if dx > 0 else (r - L) / dx
                    if 0.0 < c < 1.0:
                        cuts.append(c)
            cuts = np.unique(cuts)
            a, bnd = cuts[:-1, None], cuts[1:, None]
            ss = (a + (bnd - a) * s).ravel()
            ww = ((bnd - a) * w).ravel()
            t = F.p0[fc, 0] + F.delta[fc, 0] * ss
            x = x0 + dx * ss
            gtt, gtx, gxx = self.metric.components(t, x)
            Tt, Tx = F.delta[fc]
            speed = np.sqrt(np.abs(inner_components(gtt, gtx, gxx, Tt, Tx, Tt, Tx)))
            out.flat[i] = np.sum(ww * speed * fun(t, x)) / np.sum(ww * speed)
        return out

    def boundary_flux(self, elements, flux, u):
        """``int_dK g(f(u), n~)``: inward normals on space-like faces."""
        elements = np.asarray(elements, dtype=int)
        u = np.asarray(u, dtype=float)
        total = (self.e_plus[elements] * self.mu_ref(self.out_face[elements], flux, u)
                 - self.e_minus[elements] * self.mu_ref(self.in_face[elements], flux, u))
        pos = {int(k): i for i, k in enumerate(elements)}
        sel = np.flatnonzero(np.isin(self.lat_elem, elements))
        owner = np.array([pos[int(k)] for k in self.lat_elem[sel]], dtype=int)
        lat = (self.lat_measure[sel] * self.lat_sign[sel]
               * self.mu_ref(self.lat_face[sel], flux, u[owner]))
        np.add.at(total, owner, lat)
        return total

    def slice_length(self, n: int) -> float:
        return float(self.faces.measure[self.slice_faces(n)].sum())

    def h2_over_tau(self) -> float:
        return self.h ** 2 / self.tau

    def check_normals(self, tol: float = 1e-10) -> bool:
        F = self.faces
        gtt, gtx, gxx = self.metric.components(F.nodes_t, F.nodes_x)
        n = F.normal
        nn = inner_components(gtt, gtx, gxx, n[..., 0], n[..., 1], n[..., 0], n[..., 1])
        ok_norm = np.all(np.abs(np.abs(nn) - 1.0) <= tol)
        sp = F.spacelike
        ok_cls = np.all(nn[sp] < 0) and np.all(nn[~sp] > 0)
        past = ~is_future(self.metric, F.nodes_t[sp], F.nodes_x[sp], n[sp, :, 0], n[sp, :, 1])
        return bool(ok_norm and ok_cls and np.all(past))

    def outward_normal_vector(self, face: int, owner: int, node: int = 0) -> SpacetimeVector:
        F = self.faces
        n = self.normal(face, owner)[node]
        p = self.metric.point(F.nodes_t[face, node], F.nodes_x[face, node])
        return SpacetimeVector(p, float(n[0]), float(n[1]))


# -- generators --------------------------------------------------------------

def _layered(metric: MetricChart, Nx: int, times: np.ndarray, offsets: np.ndarray,
             quad: Optional[QuadratureRule]):
    L = metric.period
    Nt = len(times) - 1
    dx = L / Nx
    j = np.arange(Nx)
    X = j[None, :] * dx + offsets[:, None]           # (Nt+1, Nx) unwrapped
    T = np.broadcast_to(times[:, None], X.shape)
    vertices = np.stack([T.ravel(), np.mod(X.ravel(), L)], 1)
    vid = lambda n, jj: n * Nx + (jj % Nx)

    faces, p0, delta = [], [], []
    for n in range(Nt + 1):
        kind = "inflow" if n == 0 else "outflow"
        for jj in range(Nx):
            faces.append((kind, vid(n, jj), vid(n, jj + 1)))
    p0.append(np.stack([T.ravel(), X.ravel()], 1))
    delta.append(np.tile([0.0, dx], ((Nt + 1) * Nx, 1)))
    base_lat = (Nt + 1) * Nx
    for n in range(Nt):
        for jj in range(Nx):
            faces.append(("lateral", vid(n, jj), vid(n + 1, jj)))
    p0.append(np.stack([T[:-1].ravel(), X[:-1].ravel()], 1))
    delta.append(np.stack([(T[1:] - T[:-1]).ravel(), (X[1:] - X[:-1]).ravel()], 1))

    elements, slices = [], []
    for n in range(Nt):
        for jj in range(Nx):
            elements.append((n * Nx + jj, (n + 1) * Nx + jj,
                             [base_lat + n * Nx + jj, base_lat + n * Nx + (jj + 1) % Nx]))
        slices.append(np.arange(n * Nx, (n + 1) * Nx))
    bl = np.stack([T[:-1], X[:-1]], -1)
    tl = np.stack([T[1:], X[1:]], -1)
    e = np.array([0.0, dx])
    polys = np.stack([bl, bl + e, tl + e, tl], axis=2).reshape(-1, 4, 2)
    return Mesh.from_tables(metric, vertices, faces, elements, slices, quad,
                            face_p0=np.concatenate(p0), face_delta=np.concatenate(delta),
                            polygons=polys)


def build_nonuniform_time(metric: MetricChart, Nx: int, time_grid: Sequence[float],
                          quad: Optional[QuadratureRule] = None) -> Mesh:
    times = np.asarray(time_grid, dtype=float)
    if Nx < 2 or times.ndim != 1 or len(times) < 2:
        raise BadDimensions("need Nx >= 2 and at least two time levels")
    if np.any(np.diff(times) <= 0):
        raise NonMonotoneGrid("time grid must be strictly increasing")
    return _layered(metric, Nx, times, np.zeros(len(times)), quad)


def build_uniform(metric: MetricChart, Nx: int, Nt: int, T: float,
                  quad: Optional[QuadratureRule] = None) -> Mesh:
    """Foliated product mesh: ``Nt`` layers of ``Nx`` chart rectangles on
    ``[0, T] x [0, L)``."""
    if Nx < 2 or Nt < 1 or not T > 0:
        raise BadDimensions(f"bad dimensions Nx={Nx}, Nt={Nt}, T={T}")
    return build_nonuniform_time(metric, Nx, np.linspace(0.0, T, Nt + 1), quad)


def build_sheared(metric: MetricChart, Nx: int, Nt: int, T: float, shear: float,
                  alternating: bool = False, quad: Optional[QuadratureRule] = None) -> Mesh:
    """Layered mesh whose lateral faces have chart slope ``dx/dt = shear``.

    With ``alternating`` the slope flips sign every layer, which breaks the
    Cartesian-deviation admissibility condition under refinement.
    """
    if Nx < 2 or Nt < 1 or not T > 0:
        raise BadDimensions(f"bad dimensions Nx={Nx}, Nt={Nt}, T={T}")
    times = np.linspace(0.0, T, Nt + 1)
    dt = T / Nt
    if abs(shear) * dt >= metric.period / Nx:
        raise ShearTooLarge(f"|s| dt = {abs(shear) * dt} exceeds the cell width")
    if alternating:
        offsets = np.where(np.arange(Nt + 1) % 2 == 1, shear * dt, 0.0)
    else:
        offsets = shear * times
    # time-likeness of the tilted faces, before any assembly
    s = np.linspace(0, 1, 9)
    for n in range(Nt):
        slope = (offsets[n + 1] - offsets[n]) / dt
        tt = times[n] + dt * s
        xx = np.linspace(0, metric.period, 8, endpoint=False)
        Tg, Xg = np.meshgrid(tt, xx)
        gtt, gtx, gxx = metric.components(Tg, Xg)
        q = inner_components(gtt, gtx, gxx, 1.0, slope, 1.0, slope)
        if np.any(q >= -NULL_TOL):
            raise ShearTooLarge(f"lateral faces with slope {slope} are not time-like")
    return _layered(metric, Nx, times, offsets, quad)
