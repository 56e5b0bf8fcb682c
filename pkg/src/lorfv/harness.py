"""Exact reference solutions, error norms and convergence studies."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import InconsistentFamily
from .mesh import Mesh, wrap
from .scheme import SliceState, run


def burgers_riemann(u_L: float, u_R: float, xi):
    """Self-similar entropy solution of the Burgers Riemann problem at
    ``xi = (x - x0) / t``."""
    xi = np.asarray(xi, dtype=float)
    if u_L > u_R:
        return np.where(xi < 0.5 * (u_L + u_R), u_L, u_R)
    return np.clip(xi, u_L, u_R)


@dataclass
class ExactSolution:
    """Burgers reference solution in the flat chart.

    With ``L=None`` the problem is posed on the line.  With a period ``L``
    the data is the periodic two-state profile of
    :func:`lorfv.scheme.riemann_data`, whose second jump at ``x0 - L/2``
    opens the reversed Riemann problem; the composite is exact until the
    two wave systems meet, which cannot happen before ``L / (4 max|u|)``.
    """

    name: str
    u_L: float = 0.0
    u_R: float = 0.0
    x0: float = 0.5
    L: Optional[float] = None

    def __post_init__(self):
        if self.name == "burgers_shock" and not self.u_L > self.u_R:
            raise ValueError("a shock needs u_L > u_R")
        if self.name == "burgers_rarefaction" and not self.u_L < self.u_R:
            raise ValueError("a rarefaction needs u_L < u_R")
        if self.name not in ("burgers_shock", "burgers_rarefaction", "constant"):
            raise ValueError(f"unknown exact solution {self.name!r}")

    @property
    def valid_until(self) -> float:
        if self.name == "constant" or self.L is None:
            return np.inf
        return self.L / (4 * max(abs(self.u_L), abs(self.u_R), 1e-300))

    def _local(self, u_l, u_r, d, t):
        if t > 0:
            return burgers_riemann(u_l, u_r, d / t)
        return np.where(d < 0, u_l, u_r)

    def __call__(self, t, x):
        t = float(np.max(t)) if np.ndim(t) else float(t)
        x = np.asarray(x, dtype=float)
        if self.name == "constant":
            return np.full(x.shape, self.u_L)
        if self.L is None:
            return self._local(self.u_L, self.u_R, x - self.x0, t)
        d = wrap(x - self.x0, self.L)
        main = self._local(self.u_L, self.u_R, d, t)
        d2 = wrap(x - self.x0 + 0.5 * self.L, self.L)
        back = self._local(self.u_R, self.u_L, d2, t)
        return np.where(np.abs(d) < 0.25 * self.L, main, back)

    def breaks(self, t: float) -> tuple:
        """Positions of jumps and fan edges at time ``t``."""
        if self.name == "constant":
            return ()

        def edges(u_l, u_r, x0):
            if u_l > u_r:
                return [x0 + 0.5 * (u_l + u_r) * t]
            return [x0 + u_l * t, x0 + u_r * t]

        pts = edges(self.u_L, self.u_R, self.x0)
        if self.L is None:
            return tuple(pts)
        pts += edges(self.u_R, self.u_L, self.x0 - 0.5 * self.L)
        return tuple(sorted({float(np.mod(p, self.L)) for p in pts}))


def burgers_shock(u_L: float = 1.0, u_R: float = 0.0, x0: float = 0.5, L=None) -> ExactSolution:
    return ExactSolution("burgers_shock", u_L, u_R, x0, L)


def burgers_rarefaction(u_L: float = 0.0, u_R: float = 1.0, x0: float = 0.5, L=None) -> ExactSolution:
    return ExactSolution("burgers_rarefaction", u_L, u_R, x0, L)


def constant_solution(c: float = 0.0) -> ExactSolution:
    return ExactSolution("constant", c, c)


def exact_eval(sol: ExactSolution, t, x):
    if np.any(np.asarray(t) < 0):
        raise ValueError("exact solutions are evaluated for t >= 0 only")
    return sol(t, x)


def locate_jump(fun: Callable, a: float, b: float, tol: float = 1e-13, max_iter: int = 200) -> float:
    """Bisection for the position of a single jump of ``fun`` in ``[a, b]``.

    The half whose end values differ more is kept at each step.
    """
    fa, fb = float(fun(a)), float(fun(b))
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a)):
            break
        c = 0.5 * (a + b)
        fc = float(fun(c))
        if abs(fc - fa) >= abs(fb - fc):
            b, fb = c, fc
        else:
            a, fa = c, fc
    return 0.5 * (a + b)


def projected_values(mesh: Mesh, faces, sol, t: float, jump_tol: float = 1e-8) -> np.ndarray:
    """Face averages of ``sol(t, .)`` over ``faces``.

    Known break points of ``sol`` are used directly.  Otherwise ``sol`` is
    treated as piecewise constant: a face whose end values differ by more
    than ``jump_tol`` is split at the jump found by :func:`locate_jump`.
    Kinks such as rarefaction fan edges need the ``breaks`` route.
    """
    faces = np.asarray(faces, dtype=int)
    fun = lambda tt, xx: sol(t, xx)
    if hasattr(sol, "breaks"):
        br = sol.breaks(t)
        return mesh.face_average_split(faces, fun, br) if br else mesh.face_average(faces, fun)
    F = mesh.faces
    a = F.p0[faces, 1]
    b = a + F.delta[faces, 1]
    fa = np.asarray(sol(t, a), dtype=float)
    fb = np.asarray(sol(t, b), dtype=float)
    br = [np.mod(locate_jump(lambda s: sol(t, s), a[i], b[i]), mesh.period)
          for i in np.flatnonzero(np.abs(fa - fb) > jump_tol)]
    return mesh.face_average_split(faces, fun, br) if br else mesh.face_average(faces, fun)


def l1_error(state: SliceState, sol, t_n: float, mesh: Mesh) -> float:
    """``sum |e| |u_K - average of sol over e|`` on the faces of ``state``."""
    if t_n < 0:
        raise ValueError("t_n must be non-negative")
    ref = projected_values(mesh, state.faces, sol, t_n)
    return float((mesh.faces.measure[state.faces] * np.abs(state.u - ref)).sum())


@dataclass
class ConvergenceTable:
    nx: np.ndarray
    h: np.ndarray
    tau: np.ndarray
    h2_over_tau: np.ndarray
    error: np.ndarray
    order: np.ndarray          # NaN in the first row
    t_final: np.ndarray
    seconds: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.error) < 0))

    @property
    def finest_order(self) -> float:
        return float(self.order[-1]) if len(self.order) > 1 else float("nan")

    def converging(self, min_order: float = 0.5) -> bool:
        """Strictly decreasing errors and a finest-pair order of at least
        ``min_order`` (an engineering threshold, not a proven rate)."""
        return self.strictly_decreasing and self.finest_order >= min_order

    def rows(self):
        for i in range(len(self.nx)):
            yield {"nx": int(self.nx[i]), "h": self.h[i], "tau": self.tau[i],
                   "h2_over_tau": self.h2_over_tau[i], "l1_error": self.error[i],
                   "order": self.order[i], "t_final": self.t_final[i]}


def worker_count(n_jobs: int) -> int:
    """Thread count from ``LORFV_THREADS`` (0 or unset: automatic)."""
    raw = os.environ.get("LORFV_THREADS", "0").strip() or "0"
    try:
        k = int(raw)
    except ValueError:
        k = 0
    if k <= 0:
        k = os.cpu_count() or 1
    return max(1, min(k, n_jobs))


def check_family(family: Sequence) -> None:
    if len(family) < 2:
        raise InconsistentFamily("a convergence family needs at least two runs")
    key = lambda c: (c.metric, tuple(sorted(c.metric_params.items())), c.flux,
                     tuple(sorted(c.flux_params.items())), c.u0, tuple(sorted(c.u0_params.items())),
                     c.L, c.t_end, c.cfl, c.D_safety)
    k0 = key(family[0])
    for c in family[1:]:
        if key(c) != k0:
            raise InconsistentFamily("family members differ in metric, flux, data, t_end or CFL")
    for a, b in zip(family, family[1:]):
        if b.nx != 2 * a.nx:
            raise InconsistentFamily(f"Nx must double along the family, got {a.nx} -> {b.nx}")
        if a.cfl is None and (a.nt is None or b.nt != 2 * a.nt):
            raise InconsistentFamily("without a CFL target, nt must double with nx")


def convergence_study(family: Sequence, sol, entropy: bool = False,
                      threads: Optional[int] = None) -> ConvergenceTable:
    """Run every configuration of ``family`` and tabulate L1 errors at the
    final slice against ``sol``.

    Raises
    ------
    InconsistentFamily
        When the configurations do not form a refinement family, or when
        ``h^2 / tau`` fails to decrease along it.
    ValueError
        When ``t_end`` exceeds ``sol.valid_until``.
    """
    import time

    family = list(family)
    check_family(family)
    horizon = getattr(sol, "valid_until", np.inf)
    if any(c.t_end is not None and c.t_end > horizon for c in family):
        raise ValueError(f"family runs past the validity time {horizon:g} of the reference")

    def one(cfg):
        t0 = time.perf_counter()
        traj, _ = run(cfg, entropy=entropy)
        m = traj.mesh
        last = traj.states[-1]
        err = l1_error(last, sol, last.t_n, m)
        return m.h, m.tau, m.h2_over_tau(), err, last.t_n, time.perf_counter() - t0

    n = worker_count(len(family)) if threads is None else max(1, threads)
    if n == 1:
        res = [one(c) for c in family]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            res = list(pool.map(one, family))
    h, tau, r, err, tf, secs = (np.array(col, dtype=float) for col in zip(*res))
    if np.any(np.diff(r) >= 0):
        raise InconsistentFamily(f"h^2/tau does not decrease along the family: {r.tolist()}")
    with np.errstate(divide="ignore", invalid="ignore"):
        # exact families (zero errors) have no defined order
        order = np.concatenate([[np.nan], np.log(err[:-1] / err[1:]) / np.log(h[:-1] / h[1:])])
    return ConvergenceTable(np.array([c.nx for c in family]), h, tau, r, err, order, tf, secs)


def family_from(config, nxs: Sequence[int]) -> List:
    return [config.replace(nx=int(n), nt=None if config.cfl is not None else
                           (None if config.nt is None else config.nt * n // config.nx))
            for n in nxs]


def solution_for(config) -> ExactSolution:
    """Reference solution matching the initial data of ``config``.

    Raises
    ------
    ValueError
        When no exact solution is available for that data, or when
        ``t_end`` lies beyond the time the periodic reference stays exact.
    """
    sol = _solution_for(config)
    if config.t_end is not None and config.t_end > sol.valid_until:
        raise ValueError(f"t_end = {config.t_end:g} exceeds the validity time "
                         f"{sol.valid_until:g} of the periodic {sol.name} reference")
    return sol


def _solution_for(config) -> ExactSolution:
    if config.metric != "minkowski" and config.u0 != "constant":
        raise ValueError("exact solutions are available on Minkowski space only")
    p = dict(config.u0_params)
    if config.u0 == "constant":
        return constant_solution(p.get("c", 0.0))
    if config.flux != "burgers":
        raise ValueError("exact Riemann solutions are available for Burgers only")
    if config.u0 in ("shock", "rarefaction", "riemann"):
        dflt = {"shock": (1.0, 0.0), "rarefaction": (0.0, 1.0), "riemann": (1.0, 0.0)}[config.u0]
        uL, uR = p.get("u_L", dflt[0]), p.get("u_R", dflt[1])
        x0 = p.get("x0", 0.5)
        if uL > uR:
            return burgers_shock(uL, uR, x0, config.L)
        if uL < uR:
            return burgers_rarefaction(uL, uR, x0, config.L)
        return constant_solution(uL)
    raise ValueError(f"no exact solution for initial data {config.u0!r}")
