"""Slice-by-slice time marching.

Each step reads the values of one slice ``K^n`` and writes the values on
the outflow faces, which are the inflow faces of ``K^{n+1}``:

    |e+| mu_K^+(u_K^{n+1}) = |e-| mu_K^-(u_K^n) - sum_e |e| q_{K,e}(u_K^n, u_{K_e}^n)

followed by a monotone scalar inversion of ``mu_K^+``.  Every quantity
needed by the entropy diagnostics is kept on the :class:`StepRecord`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .errors import InversionOutOfRange, NeighborMissing, OutOfRange
from .flux import LaxFriedrichs, invert_ref
from .geometry import FluxField
from .mesh import Mesh, wrap


@dataclass
class SliceState:
    """Values on the Cauchy slice ``H_n``.

    ``faces[i]`` carries ``u[i]``; ``elements[i]`` is the element having
    that face as inflow face (for the last slice: as outflow face).
    """

    n: int
    faces: np.ndarray
    elements: np.ndarray
    u: np.ndarray
    masses: np.ndarray
    t_n: float

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.u).max())


@dataclass
class StepRecord:
    """Everything computed in one accepted step, indexed by the slice
    ``K^n`` (per element) or by its lateral incidences (per face)."""

    n: int
    elements: np.ndarray
    u: np.ndarray                 # u_K^n
    u_next: np.ndarray            # u_K^{n+1}, same order
    inc: np.ndarray               # lateral incidences of the slice
    owner: np.ndarray             # position of the owner in ``elements``
    nbr: np.ndarray               # position of the neighbour in ``elements``
    q_uv: np.ndarray
    q_uu: np.ndarray
    mu_plus_u: np.ndarray         # mu_K^{n+1}(u_K), per element
    mu_plus_v: np.ndarray         # mu_K^{n+1}(u_{K_e}), per incidence
    mu_plus_next: np.ndarray      # mu_K^{n+1}(u_K^{n+1}), per element
    div: np.ndarray               # boundary form of int_K div f(u_K)
    consistency: np.ndarray       # sum_e |e| (q(u,u) - mu_e(u)), per element
    y: np.ndarray                 # inversion targets
    e_plus: np.ndarray
    lateral_total: np.ndarray
    lat_measure: np.ndarray       # per incidence
    mu_tilde: np.ndarray          # per incidence
    mu_bar: np.ndarray            # per incidence


def face_values(mesh: Mesh, faces, u0: Callable, breaks=()):
    """Face averages of ``u0(t, x)``, splitting faces at the x-positions in
    ``breaks`` so that jump discontinuities are integrated exactly."""
    faces = np.asarray(faces, dtype=int)
    if len(breaks) == 0:
        return mesh.face_average(faces, u0)
    return mesh.face_average_split(faces, u0, breaks)


def init(mesh: Mesh, f: FluxField, u0: Callable, breaks=()) -> SliceState:
    """Initial slice from face averages of ``u0`` over the faces of ``H_0``."""
    E = mesh.slices[0]
    faces = mesh.in_face[E]
    u = face_values(mesh, faces, u0, getattr(u0, "breaks", breaks))
    masses = mesh.e_minus[E] * mesh.mu_ref(faces, f, u)
    return SliceState(0, faces, E.copy(), u, masses, 0.0)


def _slice_topology(mesh: Mesh, n: int):
    E = mesh.slices[n]
    inc = mesh.slice_inc[n]
    own = mesh.lat_elem[inc]
    nb = mesh.lat_nbr[inc]
    if np.any(mesh.slice_of[nb] != n):
        raise NeighborMissing(f"slice {n} has a lateral neighbour outside the slice")
    return E, inc, mesh.slice_pos[own], mesh.slice_pos[nb]


def convex_coefficients(rec: StepRecord, guard: float = 1e-14) -> np.ndarray:
    """Per-incidence coefficients of the convex decomposition.

    ``alpha = |e| / |e+| (q(u,v) - q(u,u)) / (mu^+(u) - mu^+(v))`` with the
    0/0 case (equal outflow averages) set to 0.
    """
    num = rec.lat_measure / rec.e_plus[rec.owner] * (rec.q_uv - rec.q_uu)
    den = rec.mu_plus_u[rec.owner] - rec.mu_plus_v
    scale = 1.0 + np.abs(rec.mu_plus_u[rec.owner]) + np.abs(rec.mu_plus_v)
    small = np.abs(den) <= guard * scale
    return np.where(small, 0.0, num / np.where(small, 1.0, den))


def reconstruct(rec: StepRecord, alpha: Optional[np.ndarray] = None) -> np.ndarray:
    """``mu^{n+1}(u^{n+1})`` rebuilt from the convex decomposition."""
    alpha = convex_coefficients(rec) if alpha is None else alpha
    m = len(rec.elements)
    sa = np.bincount(rec.owner, weights=alpha, minlength=m)
    sv = np.bincount(rec.owner, weights=alpha * rec.mu_plus_v, minlength=m)
    return (1 - sa) * rec.mu_plus_u + sv - (rec.div + rec.consistency) / rec.e_plus


def step(mesh: Mesh, f: FluxField, q: LaxFriedrichs, state: SliceState,
         u_range=None, tol: float = 1e-12):
    """Advance ``state`` (slice ``n``) by one layer.

    Returns ``(next_state, record)``.

    Raises
    ------
    InversionOutOfRange
        When an update leaves the invertible range of an outflow average.
    """
    n = state.n
    if n >= mesh.n_slices:
        raise IndexError(f"slice {n} is the last one")
    E, inc, own, nb = _slice_topology(mesh, n)
    if not np.array_equal(state.elements, E):
        order = np.argsort(mesh.slice_pos[state.elements])
        u = state.u[order]
    else:
        u = state.u
    m = len(E)
    uo, un = u[own], u[nb]
    q_uv = q(inc, uo, un)
    q_uu = q(inc, uo, uo)
    lat_m = mesh.lat_measure[inc]
    flux_out = np.bincount(own, weights=lat_m * q_uv, minlength=m)
    e_plus = mesh.e_plus[E]
    e_minus = mesh.e_minus[E]
    mass_in = e_minus * mesh.mu_ref(mesh.in_face[E], f, u)
    y = (mass_in - flux_out) / e_plus
    out = mesh.out_face[E]
    try:
        u_next = invert_ref(mesh, out, f, y, u_range=u_range, tol=tol, guess=u)
    except OutOfRange as exc:
        raise InversionOutOfRange(f"step {n}: {exc}") from exc

    mu_plus_u = mesh.mu_ref(out, f, u)
    mu_plus_v = mesh.mu_ref(out[own], f, un)
    mu_plus_next = mesh.mu_ref(out, f, u_next)
    div = mesh.boundary_flux(E, f, u)
    cons = np.bincount(own, weights=lat_m * (q_uu - q.lateral_mu(inc, uo)), minlength=m)
    ratio = mesh.lateral_total[E] / e_plus
    mu_tilde = mu_plus_u[own] - ratio[own] * (q_uv - q_uu)
    mu_bar = mu_tilde - div[own] / e_plus[own]
    rec = StepRecord(n, E.copy(), u.copy(), u_next, inc, own, nb, q_uv, q_uu, mu_plus_u,
                     mu_plus_v, mu_plus_next, div, cons, y, e_plus, mesh.lateral_total[E],
                     lat_m, mu_tilde, mu_bar)

    if n + 1 < mesh.n_slices:
        E1 = mesh.slices[n + 1]
        pos = mesh.slice_pos[mesh.up[E]]
        u1 = np.empty(m)
        u1[pos] = u_next
        faces1 = mesh.in_face[E1]
        masses1 = np.empty(m)
        masses1[pos] = e_plus * mu_plus_next
        nxt = SliceState(n + 1, faces1, E1.copy(), u1, masses1, float(mesh.t_n[n + 1]))
    else:
        nxt = SliceState(n + 1, out.copy(), E.copy(), u_next, e_plus * mu_plus_next,
                         float(mesh.t_n[n + 1]))
    return nxt, rec


@dataclass
class Trajectory:
    mesh: Mesh
    flux: FluxField
    q: LaxFriedrichs
    states: List[SliceState]
    records: List[StepRecord] = field(default_factory=list)

    @property
    def t_N(self) -> float:
        return self.states[-1].t_n


def march(mesh: Mesh, f: FluxField, q: LaxFriedrichs, u0: Callable,
          n_steps: Optional[int] = None, u_range=None) -> Trajectory:
    """Initialise from ``u0`` and advance ``n_steps`` layers (default: all)."""
    n_steps = mesh.n_slices if n_steps is None else n_steps
    state = init(mesh, f, u0)
    traj = Trajectory(mesh, f, q, [state])
    for _ in range(n_steps):
        state, rec = step(mesh, f, q, state, u_range=u_range)
        traj.states.append(state)
        traj.records.append(rec)
    return traj


def l1_distance(a: SliceState, b: SliceState, mesh: Mesh, f: FluxField) -> float:
    """Distance of the conserved variables ``sum |e| |mu(u) - mu(v)|``."""
    return float(np.abs(a.masses - b.masses).sum())


# -- initial data ------------------------------------------------------------

class InitialData:
    """Scalar function of ``(t, x)`` with optional jump locations."""

    def __init__(self, name: str, fun: Callable, breaks=(), params=None):
        self.name = name
        self.fun = fun
        self.breaks = tuple(breaks)
        self.params = dict(params or {})

    def __call__(self, t, x):
        return self.fun(np.asarray(t, dtype=float), np.asarray(x, dtype=float))


def riemann_data(u_L: float, u_R: float, x0: float = 0.5, L: float = 1.0) -> InitialData:
    """``u_L`` on the half period left of ``x0``, ``u_R`` on the right half."""
    def fun(t, x):
        d = wrap(x - x0, L)
        return np.where((d < 0) & (d > -0.5 * L), u_L, u_R) + 0.0 * t

    return InitialData("riemann", fun, (x0 % L, (x0 - 0.5 * L) % L),
                       {"u_L": u_L, "u_R": u_R, "x0": x0})


def constant_data(c: float = 0.0, L: float = 1.0) -> InitialData:
    return InitialData("constant", lambda t, x: np.full(np.broadcast(t, x).shape, float(c)),
                       (), {"c": c})


def sine_data(amp: float = 1.0, k: int = 1, offset: float = 0.0, L: float = 1.0) -> InitialData:
    return InitialData("sine", lambda t, x: offset + amp * np.sin(2 * np.pi * k * x / L) + 0.0 * t,
                       (), {"amp": amp, "k": k, "offset": offset})


def step_data(value: float = 1.0, a: float = 0.0, b: float = 0.5, base: float = 0.0,
              L: float = 1.0) -> InitialData:
    """``value`` on ``[a, b)`` and ``base`` elsewhere."""
    def fun(t, x):
        y = np.mod(x - a, L)
        return np.where(y < (b - a) % L, value, base) + 0.0 * t

    return InitialData("step", fun, (a % L, b % L), {"value": value, "a": a, "b": b, "base": base})


INITIAL_DATA = {
    "riemann": riemann_data,
    "shock": lambda L=1.0, **kw: riemann_data(kw.pop("u_L", 1.0), kw.pop("u_R", 0.0), L=L, **kw),
    "rarefaction": lambda L=1.0, **kw: riemann_data(kw.pop("u_L", 0.0), kw.pop("u_R", 1.0), L=L, **kw),
    "constant": constant_data,
    "sine": sine_data,
    "step": step_data,
}


def make_initial(name: str, L: float = 1.0, **params) -> InitialData:
    try:
        factory = INITIAL_DATA[name]
    except KeyError:
        raise KeyError(f"unknown initial data {name!r}; known: {sorted(INITIAL_DATA)}") from None
    return factory(L=L, **params)


# -- configured runs ---------------------------------------------------------

def build_mesh(config, nt: Optional[int] = None) -> Mesh:
    """Mesh described by ``config``: a mesh file, or a uniform foliated mesh."""
    from .geometry import gauss_legendre, make_metric
    from .mesh import build_uniform

    quad = gauss_legendre(config.quad_order)
    metric = make_metric(config.metric, L=config.L, **config.metric_params)
    if config.mesh is not None:
        from .meshio import read_mesh
        return read_mesh(config.mesh, metric=metric, quad=quad)
    return build_uniform(metric, config.nx, config.nt if nt is None else nt, config.t_end, quad)


def choose_nt(config, f: FluxField, max_tries: int = 20) -> int:
    """Smallest-effort layer count meeting the target CFL ratio ``config.cfl``.

    The ratio scales like ``1 / Nt`` on foliated meshes, so a rescaled guess
    is corrected upward until the report confirms it.
    """
    from .admissibility import cfl_report

    nt = max(1, config.nx)
    for _ in range(max_tries):
        r = cfl_report(build_mesh(config, nt), f, config.u_range).max_ratio
        if r <= config.cfl * (1 + 1e-12):
            return nt
        nt = max(nt + 1, int(np.ceil(nt * r / config.cfl - 1e-9)))
    raise RuntimeError(f"no layer count reached CFL {config.cfl}")


@dataclass
class RunDiagnostics:
    """Per-slice (length ``N + 1``) and per-step (length ``N``) checks.

    ``drift`` is ``|M_n - M_0| / sum_K |m_K^0|`` with ``M_n`` the slice
    mass.  Residual, alpha and reconstruction columns are maxima (or minima)
    over the elements of one step.
    """

    t_n: np.ndarray
    total_mass: np.ndarray
    drift: np.ndarray
    max_abs: np.ndarray
    envelope: np.ndarray
    growth: tuple
    cfl_max: float
    alpha_min: np.ndarray
    alpha_sum_max: np.ndarray
    reconstruction_error: np.ndarray
    kruzkov_residual: np.ndarray
    quadratic_residual: np.ndarray
    dissipation: np.ndarray
    lambdas: np.ndarray
    conservation_tol: float = 1e-12
    entropy_tol: float = 1e-10
    reconstruction_tol: float = 1e-11

    @property
    def dissipation_total(self) -> float:
        return float(self.dissipation.sum())

    def violations(self) -> List[str]:
        out = []
        if self.drift.size and self.drift.max() > self.conservation_tol:
            out.append(f"conservation drift {self.drift.max():.3e} > {self.conservation_tol:g}")
        bad = np.flatnonzero(self.max_abs > self.envelope)
        if bad.size:
            out.append(f"max|u| leaves the L-infinity envelope at slice {bad[0]}")
        if self.alpha_min.size and self.alpha_min.min() < 0:
            out.append(f"negative convex coefficient {self.alpha_min.min():.3e}")
        if self.alpha_sum_max.size and self.alpha_sum_max.max() >= 1:
            out.append(f"convex coefficients sum to {self.alpha_sum_max.max():.6f} >= 1")
        if self.reconstruction_error.size and self.reconstruction_error.max() > self.reconstruction_tol:
            out.append(f"reconstruction error {self.reconstruction_error.max():.3e}")
        for name, r in (("Kruzkov", self.kruzkov_residual), ("quadratic", self.quadratic_residual)):
            if np.isfinite(r).any() and np.nanmax(r) > self.entropy_tol:
                out.append(f"{name} entropy residual {np.nanmax(r):.3e} > {self.entropy_tol:g}")
        return out

    @property
    def ok(self) -> bool:
        return not self.violations()


def step_checks(rec: StepRecord):
    """``(min alpha, max sum alpha, max reconstruction error)`` of one step."""
    alpha = convex_coefficients(rec)
    sa = np.bincount(rec.owner, weights=alpha, minlength=len(rec.elements))
    err = np.abs(reconstruct(rec, alpha) - rec.mu_plus_next)
    amin = float(alpha.min()) if alpha.size else 0.0
    return amin, float(sa.max()), float(err.max())


def diagnose(traj: Trajectory, u_range=None, entropy: bool = True, lambdas=None,
             conservation_tol: float = 1e-12, entropy_tol: float = 1e-10,
             cfl_max: float = float("nan")) -> RunDiagnostics:
    """Evaluate every runtime check on a finished trajectory."""
    from .entropy import (QUADRATIC, cell_entropy_residual, dissipation_terms, kruzkov,
                          lambda_grid, linfty_envelope)

    m = traj.mesh
    mass = np.array([s.total_mass for s in traj.states])
    ref = max(float(np.abs(traj.states[0].masses).sum()), 1e-300)
    drift = np.abs(mass - mass[0]) / ref
    env = linfty_envelope(traj, u_range=u_range)
    checks = np.array([step_checks(r) for r in traj.records]).reshape(-1, 3)
    if lambdas is None:
        lambdas = lambda_grid(np.concatenate([s.u for s in traj.states]))
    lambdas = np.asarray(lambdas, dtype=float)
    nsteps = len(traj.records)
    kr = np.full(nsteps, np.nan)
    qr = np.full(nsteps, np.nan)
    if entropy:
        pairs = [kruzkov(l) for l in lambdas]
        for i, r in enumerate(traj.records):
            kr[i] = max(float(cell_entropy_residual(r, m, traj.q, p, u_range).max()) for p in pairs)
            qr[i] = float(cell_entropy_residual(r, m, traj.q, QUADRATIC, u_range).max())
    diss = np.array([dissipation_terms(r).sum() for r in traj.records])
    return RunDiagnostics(
        t_n=np.array([s.t_n for s in traj.states]), total_mass=mass, drift=drift,
        max_abs=env.max_abs, envelope=env.bound, growth=(env.C1, env.C2), cfl_max=cfl_max,
        alpha_min=checks[:, 0], alpha_sum_max=checks[:, 1], reconstruction_error=checks[:, 2],
        kruzkov_residual=kr, quadratic_residual=qr, dissipation=diss, lambdas=lambdas,
        conservation_tol=conservation_tol, entropy_tol=entropy_tol)


def run(config, entropy: bool = True, n_steps: Optional[int] = None):
    """Build, check and march the run described by ``config``.

    Returns ``(trajectory, diagnostics)``.

    Raises
    ------
    CflViolation
        When the mesh fails the CFL check; no step is taken.
    """
    from .admissibility import cfl_report
    from .errors import CflViolation
    from .geometry import make_flux, make_metric

    config.validate()
    metric = make_metric(config.metric, L=config.L, **config.metric_params)
    f = make_flux(config.flux, metric, **config.flux_params)
    if config.mesh is None and config.nt is None:
        nt = choose_nt(config, f)
    else:
        nt = config.nt
    mesh = build_mesh(config, nt)
    f = make_flux(config.flux, mesh.metric, **config.flux_params)
    cfl = cfl_report(mesh, f, config.u_range)
    if not cfl.ok:
        raise CflViolation(f"CFL ratio {cfl.max_ratio:.4f} exceeds {cfl.limit:g} "
                           f"at element {int(mesh.element_ids[cfl.worst_element])}")
    q = LaxFriedrichs(mesh, f, D_safety=config.D_safety, u_range=config.u_range)
    u0 = make_initial(config.u0, L=mesh.period, **config.u0_params)
    traj = march(mesh, f, q, u0, n_steps=n_steps, u_range=config.u_range)
    diag = diagnose(traj, config.u_range, entropy=entropy,
                    conservation_tol=config.conservation_tol, entropy_tol=config.entropy_tol,
                    cfl_max=cfl.max_ratio)
    return traj, diag
