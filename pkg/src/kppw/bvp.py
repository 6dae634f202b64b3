"""Truncated two-point BVP for travelling-wave profiles.

A profile is a heteroclinic orbit of ``U' = G(U; lam)`` from ``(1, 0, ..., 0)``
at ``y = -inf`` to the origin at ``y = +inf``. On ``[-L_left, L_right]`` it
is computed by fourth-order collocation with one of two closures:

* ``PROJECTION``: the end states are constrained to the unstable subspace
  of the linearization at 1 (left) and the stable subspace at 0 (right).
  Requires hyperbolic equilibria.
* ``DIRICHLET``: ``f(-L) = 1``, ``f(L) = 0`` and low-order derivatives set
  to zero. Used when center modes exist; the boundary then acts as an
  artificial node for non-decaying oscillatory tails.

Both add the phase condition ``f(0) = 1/2`` to remove translations.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import schur
from scipy.special import expit

from .charroots import Bundles, bundle_dims
from .collocation import CollocationProblem, PointCondition
from .errors import (
    CenterModesPresent,
    ClosureCountMismatch,
    InvalidSpec,
    NoConvergence,
)
from .model import ProblemSpec, jacobian, jacobian_batch, rhs_batch, system_order

__all__ = [
    "BcMode",
    "Mesh",
    "WaveProfile",
    "BoundaryClosure",
    "heaviside_guess",
    "boundary_closure",
    "solve",
    "refine",
    "DEFAULT_L",
    "DEFAULT_N",
]

log = logging.getLogger(__name__)

DEFAULT_L = 60.0
DEFAULT_N = 2000
TOL = 1e-8
TOL_BC = 1e-6


class BcMode(str, enum.Enum):
    DIRICHLET = "dirichlet"
    PROJECTION = "projection"


@dataclass(frozen=True)
class Mesh:
    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("mesh needs at least two points")
        if not np.all(np.isfinite(p)):
            raise ValueError("mesh endpoints must be finite")
        if np.any(np.diff(p) <= 0):
            raise ValueError("mesh must be strictly increasing")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @classmethod
    def uniform(cls, left=-DEFAULT_L, right=DEFAULT_L, n=DEFAULT_N) -> "Mesh":
        pts = np.linspace(left, right, n + 1)
        if left < 0 < right and not np.any(pts == 0.0):
            j = int(np.argmin(np.abs(pts)))
            pts[j] = 0.0
        return cls(pts)

    @property
    def N(self) -> int:
        return self.points.size - 1

    @property
    def left(self) -> float:
        return float(self.points[0])

    @property
    def right(self) -> float:
        return float(self.points[-1])

    @property
    def zero_index(self) -> int:
        return int(np.argmin(np.abs(self.points)))

    def subdivide(self, factor: int) -> "Mesh":
        p = self.points
        t = np.arange(factor) / factor
        inner = (p[:-1, None] + np.diff(p)[:, None] * t[None, :]).ravel()
        return Mesh(np.append(inner, p[-1]))

    def __len__(self):
        return self.points.size


@dataclass(frozen=True)
class BoundaryClosure:
    """Boundary functionals for one (spec, lam).

    ``left @ (U(-L) - e1) = 0``, ``right @ U(L) = 0`` and, if ``phase``,
    ``f(0) = 1/2``.
    """

    mode: BcMode
    m: int
    left: np.ndarray
    right: np.ndarray
    phase: bool = True

    @property
    def count(self) -> int:
        return self.left.shape[0] + self.right.shape[0] + int(self.phase)

    def point_conditions(self, mesh: Mesh) -> list[PointCondition]:
        e1 = np.zeros(self.m)
        e1[0] = 1.0
        Lm, Rm = self.left, self.right
        conds = []
        if Lm.shape[0]:
            conds.append(PointCondition(0, lambda U: Lm @ (U - e1), lambda U: Lm))
        if self.phase:
            conds.append(PointCondition(
                mesh.zero_index, lambda U: np.array([U[0] - 0.5]), lambda U: e1[None, :]))
        if Rm.shape[0]:
            conds.append(PointCondition(mesh.N, lambda U: Rm @ U, lambda U: Rm))
        return conds

    def residuals(self, mesh: Mesh, U: np.ndarray) -> dict:
        e1 = np.zeros(self.m)
        e1[0] = 1.0
        out = {
            "left": float(np.max(np.abs(self.left @ (U[0] - e1)), initial=0.0)),
            "right": float(np.max(np.abs(self.right @ U[-1]), initial=0.0)),
        }
        out["phase"] = float(abs(U[mesh.zero_index, 0] - 0.5))
        return out


@dataclass(frozen=True)
class WaveProfile:
    spec: ProblemSpec
    lam: float
    mesh: Mesh
    values: np.ndarray = field(repr=False)
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def y(self) -> np.ndarray:
        return self.mesh.points

    @property
    def f(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def interpolate(self, y) -> np.ndarray:
        """Cubic Hermite interpolation of every state component at ``y``."""
        dU = rhs_batch(self.spec, self.values, self.lam)
        return CubicHermiteSpline(self.y, self.values, dU, axis=0)(np.asarray(y, float))

    def check(self, tol=TOL, tol_bc=TOL_BC) -> list[str]:
        """Return the list of violated invariants (empty when all hold)."""
        bad = []
        d = self.diagnostics
        if not d.get("final_residual_norm", np.inf) < tol:
            bad.append("residual")
        bc = d.get("bc_residual", {})
        if max(bc.get("left", np.inf), bc.get("right", np.inf)) >= tol_bc:
            bad.append("boundary")
        if abs(self.f[self.mesh.zero_index] - 0.5) >= tol_bc:
            bad.append("phase")
        return bad


def _logistic_derivative_polys(m: int, width: float) -> list[Polynomial]:
    # sigma = 1/(1+exp(y/w)) satisfies sigma' = -sigma(1-sigma)/w, so every
    # derivative is a polynomial in sigma.
    dsig = Polynomial([0.0, -1.0, 1.0]) / width
    polys = [Polynomial([0.0, 1.0])]
    for _ in range(1, m):
        polys.append(polys[-1].deriv() * dsig)
    return polys


def heaviside_guess(mesh: Mesh, smoothing_width: float = 1.0, m: int = 2) -> np.ndarray:
    """Smoothed step ``1/(1+exp(y/w))`` and its first ``m-1`` derivatives."""
    if not smoothing_width > 0:
        raise ValueError("smoothing_width must be positive")
    y = mesh.points if isinstance(mesh, Mesh) else np.asarray(mesh, float)
    sig = expit(-y / smoothing_width)
    U = np.empty((y.size, m))
    for j, p in enumerate(_logistic_derivative_polys(m, smoothing_width)):
        U[:, j] = p(sig)
    return U


def _invariant_rows(A: np.ndarray, select) -> np.ndarray:
    """Orthonormal rows spanning the left-invariant subspace of ``A`` for
    eigenvalues picked by ``select(re, im)``."""
    _, Z, sdim = schur(A.T, output="real", sort=select)
    return Z[:, :sdim].T.copy()


def dirichlet_counts(b: Bundles) -> tuple[int, int]:
    """Number of conditions ``(q_left, q_right)`` for the Dirichlet closure.

    Modes growing toward an end are suppressed there (``n_plus`` at 0 on the
    right, ``n_minus`` at 1 on the left). The remaining budget of ``m - 1``
    conditions (center modes, balance surplus) is handed out alternately,
    starting at the ``+inf`` end when ``n_minus(0) >= n_plus(1)``.
    """
    m = b.m
    q = {"r": b.at0.n_plus, "l": b.at1.n_minus}
    target = m - 1
    side = "r" if b.at0.n_minus >= b.at1.n_plus else "l"
    while q["l"] + q["r"] < target:
        q[side] += 1
        side = "l" if side == "r" else "r"
    while q["l"] + q["r"] > target:
        big = "r" if q["r"] >= q["l"] else "l"
        q[big] -= 1
    if m >= 3:
        for a, o in (("l", "r"), ("r", "l")):
            if q[a] == 0:
                q[a], q[o] = 1, q[o] - 1
    return q["l"], q["r"]


def boundary_closure(spec: ProblemSpec, lam: float, mode: BcMode | str,
                     bundles: Bundles | None = None) -> BoundaryClosure:
    mode = BcMode(mode)
    m = system_order(spec, lam)
    b = bundles if bundles is not None else bundle_dims(spec, lam)
    if mode is BcMode.PROJECTION:
        if b.has_center:
            raise CenterModesPresent(
                f"center modes at equilibria (n_center = {b.at0.n_center}, {b.at1.n_center})")
        tol = b.at0.tol_center
        e1 = np.zeros(m)
        e1[0] = 1.0
        right = _invariant_rows(jacobian(spec, np.zeros(m), lam), lambda re, im: re > -tol)
        left = _invariant_rows(jacobian(spec, e1, lam), lambda re, im: re < tol)
        closure = BoundaryClosure(mode, m, left, right, True)
        if closure.count != m:
            raise ClosureCountMismatch(
                f"projection closure gives {closure.count} conditions for m={m} "
                f"(shooting balance {b.balance})")
        return closure
    q_l, q_r = dirichlet_counts(b)
    eye = np.eye(m)
    closure = BoundaryClosure(mode, m, eye[:q_l].copy(), eye[:q_r].copy(), True)
    if closure.count != m:
        raise ClosureCountMismatch(f"dirichlet closure gives {closure.count} conditions for m={m}")
    return closure


def default_mode(bundles: Bundles) -> BcMode:
    if bundles.has_center or bundles.balance != 0:
        return BcMode.DIRICHLET
    return BcMode.PROJECTION


def _initial_state(spec, lam, mesh: Mesh, guess, m, smoothing_width):
    if guess is None:
        return heaviside_guess(mesh, smoothing_width, m)
    if isinstance(guess, WaveProfile):
        src = guess.interpolate(np.clip(mesh.points, guess.mesh.left, guess.mesh.right))
    else:
        src = np.asarray(guess, dtype=float)
        if src.shape[0] != len(mesh):
            raise ValueError(f"guess has {src.shape[0]} rows, mesh has {len(mesh)} points")
    U = np.zeros((len(mesh), m))
    c = min(m, src.shape[1])
    U[:, :c] = src[:, :c]
    return U


def _problem(spec, lam, mesh, closure, m):
    return CollocationProblem(
        mesh.points,
        lambda U: rhs_batch(spec, U, lam),
        lambda U: jacobian_batch(spec, U, lam),
        m,
        closure.point_conditions(mesh),
    )


def solve(spec: ProblemSpec, lam: float, mesh: Mesh | None = None, mode=None, guess=None, *,
          tol: float = TOL, max_iter: int = 100, smoothing_width: float = 1.0,
          refine_on_failure: bool = True) -> WaveProfile:
    """Compute the travelling-wave profile of ``spec`` at speed ``lam``.

    ``mode=None`` picks the projection closure when both equilibria are
    hyperbolic with zero shooting balance, the Dirichlet closure otherwise.
    ``guess`` may be ``None`` (smoothed Heaviside step), a state array on
    ``mesh`` or a previous ``WaveProfile`` (interpolated).

    Raises ``NoConvergence`` (with ``best_residual``) when damped Newton
    fails on the mesh and on one uniformly refined mesh.
    """
    if not spec.semilinear:
        raise InvalidSpec("use kppw.quasilinear for n > 0")
    lam = float(lam)
    mesh = mesh if mesh is not None else Mesh.uniform()
    m = system_order(spec, lam)
    bundles = bundle_dims(spec, lam)
    mode = default_mode(bundles) if mode is None else BcMode(mode)
    closure = boundary_closure(spec, lam, mode, bundles)
    U0 = _initial_state(spec, lam, mesh, guess, m, smoothing_width)

    attempts = [mesh, mesh.subdivide(2)] if refine_on_failure else [mesh]
    best = np.inf
    iters = 0
    for k, msh in enumerate(attempts):
        if k > 0:
            U0 = CubicHermiteSpline(mesh.points, U0, rhs_batch(spec, U0, lam), axis=0)(msh.points)
        problem = _problem(spec, lam, msh, closure, m)
        try:
            res = problem.newton(U0, tol=tol, max_iter=max_iter)
        except NoConvergence as exc:
            best = min(best, exc.best_residual)
            iters += exc.iterations
            log.debug("solve %s lam=%g failed on N=%d: %s", spec.label, lam, msh.N, exc)
            continue
        diag = {
            "newton_iters": iters + res.iterations,
            "final_residual_norm": res.residual_norm,
            "bc_mode": closure.mode.value,
            "bc_residual": closure.residuals(msh, res.U),
            "q_left": int(closure.left.shape[0]),
            "q_right": int(closure.right.shape[0]),
            "balance": bundles.balance,
            "n_center": [bundles.at0.n_center, bundles.at1.n_center],
            "L_left": msh.left,
            "L_right": msh.right,
            "N": msh.N,
            "refined_on_failure": k > 0,
        }
        return WaveProfile(spec, lam, msh, res.U, diag)
    raise NoConvergence(f"{spec.label} at lam={lam}: no convergence", best, iters)


def _curvature_indicator(profile: WaveProfile) -> np.ndarray:
    G = rhs_batch(profile.spec, profile.values, profile.lam)
    return np.max(np.abs(np.diff(G, axis=0)), axis=1)


def refine(profile: WaveProfile, factor: int = 2, *, tol: float = TOL,
           extra_fraction: float = 0.1) -> WaveProfile:
    """Re-solve on a finer mesh.

    Every interval is split into ``factor`` pieces; the ``extra_fraction``
    of intervals with the largest variation of ``U'`` is split once more.
    """
    if factor < 1:
        raise ValueError("factor must be >= 1")
    ind = _curvature_indicator(profile)
    pts = profile.mesh.subdivide(factor).points
    n_extra = int(extra_fraction * ind.size)
    if n_extra:
        worst = np.argsort(ind)[-n_extra:]
        a, b = profile.y[worst], profile.y[worst + 1]
        offs = (np.arange(factor) + 0.5) / factor
        mids = (a[:, None] + (b - a)[:, None] * offs[None, :]).ravel()
        pts = np.union1d(pts, mids)
    mesh = Mesh(pts)
    out = solve(profile.spec, profile.lam, mesh, profile.diagnostics.get("bc_mode"),
                guess=profile, tol=tol, refine_on_failure=False)
    return out
