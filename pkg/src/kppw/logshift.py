"""Log-t shift expansion around the dispersion KPP-(11,3) front.

With ``u_ttt = -u^(11) + u(1-u)`` and a front profile ``f`` moving at speed
``lam0``, write ``u(x, t) = v(y, t)`` with ``y = x - lam0 t + g(t)`` and
``g = k log t``. The ansatz ``v = f + (k/t) psi + phi / t^2`` leads to the
linear problems ``B psi = r_psi`` and ``B phi = r_phi`` with
``B w = -w^(11) + (1 - 2f) w + lam0^3 w'''``.

``B`` is discretized by the same Hermite-Simpson collocation and the same
boundary closure as the profile itself; with that closure it has a
one-dimensional kernel (the translation mode ``f'``) and full row rank, so
the gauge condition ``<w, f'> = 0`` alone makes the system square.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import make_interp_spline

from .bvp import WaveProfile, boundary_closure, default_mode
from .charroots import bundle_dims
from .collocation import CollocationProblem, PointCondition
from .errors import NoConvergence, SingularSystem, SpecMismatch

__all__ = [
    "RhsVariant",
    "DiscreteB",
    "ShiftExpansion",
    "assemble_B",
    "solve_psi",
    "solve_phi",
    "shift_function",
    "expansion_residual",
    "build_expansion",
    "residual_slope",
]

M = 11
TOL_BC = 1e-6
TOL_SOLVE = 1e-8


class RhsVariant(str, enum.Enum):
    SECOND = "d2"  # B psi = 3 lam0^2 f''
    THIRD = "d3"   # B psi = 3 lam0^2 f'''


def shift_function(k: float, t: float) -> tuple[float, float, float, float]:
    """``g = k log t`` and its first three derivatives.

    The slow-variation hypothesis holds algebraically:
    ``|g''|/|g'| = 1/t`` and ``|g'''|/|g''| = 2/t``.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    g = (k * np.log(t), k / t, -k / t**2, 2.0 * k / t**3)
    if k != 0:
        assert np.isclose(abs(g[2] / g[1]), 1.0 / t, rtol=1e-12, atol=0.0)
        assert np.isclose(abs(g[3] / g[2]), 2.0 / t, rtol=1e-12, atol=0.0)
    return g


def _profile_states(profile: WaveProfile) -> np.ndarray:
    """``f, f', ..., f^(11)`` on the mesh (the last one from the ODE)."""
    U = profile.values
    lam = profile.lam
    f11 = lam**3 * U[:, 3] + U[:, 0] * (1.0 - U[:, 0])
    return np.column_stack([U, f11])


@dataclass(frozen=True)
class _Forcing:
    """``r(X) = sum_c a_c X_c + sum (c1, c2, b) b X_c1 X_c2`` over the augmented state."""

    linear: tuple = ()
    quadratic: tuple = ()

    def value(self, X):
        r = np.zeros(X.shape[:-1])
        for c, a in self.linear:
            r = r + a * X[..., c]
        for c1, c2, b in self.quadratic:
            r = r + b * X[..., c1] * X[..., c2]
        return r

    def grad(self, X):
        g = np.zeros(X.shape)
        for c, a in self.linear:
            g[..., c] += a
        for c1, c2, b in self.quadratic:
            g[..., c1] += b * X[..., c2]
            g[..., c2] += b * X[..., c1]
        return g


ZERO = _Forcing()


@dataclass(frozen=True, eq=False)
class DiscreteB:
    """Collocation form of ``B`` at the profile ``f``.

    Acts on state samples ``W`` of shape (N+1, 11) holding ``w, ..., w^(10)``;
    ``apply`` returns the interval defects of ``W' = L(f) W`` followed by the
    homogeneous boundary rows (decay conditions).
    """

    profile: WaveProfile
    lam0: float
    left: np.ndarray = field(repr=False)
    right: np.ndarray = field(repr=False)

    @property
    def mesh(self):
        return self.profile.mesh

    @property
    def h(self) -> float:
        return float(np.max(np.diff(self.mesh.points)))

    def _lin(self, W, F0):
        G = np.empty_like(W)
        G[:, :10] = W[:, 1:]
        G[:, 10] = self.lam0**3 * W[:, 3] + (1.0 - 2.0 * F0) * W[:, 0]
        return G

    def apply(self, W) -> np.ndarray:
        W = np.asarray(W, dtype=float)
        U = self.profile.values
        y = self.mesh.points
        h = np.diff(y)[:, None]
        Gf = _profile_states(self.profile)[:, 1:]
        Fm = 0.5 * (U[:-1] + U[1:]) - h / 8.0 * (Gf[1:] - Gf[:-1])
        G = self._lin(W, U[:, 0])
        Wm = 0.5 * (W[:-1] + W[1:]) - h / 8.0 * (G[1:] - G[:-1])
        Gm = self._lin(Wm, Fm[:, 0])
        D = (W[1:] - W[:-1]) / h - (G[:-1] + 4.0 * Gm + G[1:]) / 6.0
        return np.concatenate([self.left @ W[0], D.ravel(), self.right @ W[-1]])

    def kernel_defect(self) -> float:
        """Max-norm of ``B f'``; ``O(h^4)`` for a converged profile."""
        return float(np.max(np.abs(self.apply(_profile_states(self.profile)[:, 1:]))))

    def inner(self, a, b) -> float:
        return float(trapezoid(a * b, self.mesh.points))

    # -- linear solves on the augmented system -------------------------
    def _solve_chain(self, forcings, values_at_0):
        """Solve ``B S_j = r_j(f, S_0..S_{j-1})`` for each block with ``S_j(0)`` prescribed.

        The profile is carried as the first block so that coefficients are
        evaluated at the collocation midpoints exactly as in the profile solve.
        """
        lam3 = self.lam0**3
        nb = len(forcings)
        mt = M * (nb + 1)

        def fun(X):
            out = np.empty_like(X)
            F0 = X[..., 0]
            for b in range(nb + 1):
                s = slice(M * b, M * (b + 1))
                S = X[..., s]
                out[..., M * b:M * b + 10] = S[..., 1:]
                if b == 0:
                    out[..., 10] = lam3 * S[..., 3] + F0 * (1.0 - F0)
                else:
                    out[..., M * b + 10] = (lam3 * S[..., 3] + (1.0 - 2.0 * F0) * S[..., 0]
                                            - forcings[b - 1].value(X))
            return out

        def jac(X):
            J = np.zeros(X.shape[:-1] + (mt, mt))
            F0 = X[..., 0]
            for b in range(nb + 1):
                o = M * b
                idx = np.arange(10)
                J[..., o + idx, o + idx + 1] = 1.0
                J[..., o + 10, o + 3] = lam3
                if b == 0:
                    J[..., 10, 0] += 1.0 - 2.0 * F0
                else:
                    J[..., o + 10, o] += 1.0 - 2.0 * F0
                    J[..., o + 10, 0] += -2.0 * X[..., o]
                    J[..., o + 10, :] -= forcings[b - 1].grad(X)
            return J

        mesh = self.mesh
        Lm, Rm = self.left, self.right
        e1 = np.zeros(M)
        e1[0] = 1.0
        zero = mesh.zero_index

        def block_rows(rows, b):
            out = np.zeros((rows.shape[0], mt))
            out[:, M * b:M * (b + 1)] = rows
            return out

        left_rows = np.vstack([block_rows(Lm, b) for b in range(nb + 1)])
        right_rows = np.vstack([block_rows(Rm, b) for b in range(nb + 1)])
        e_full = np.zeros(mt)
        e_full[0] = 1.0
        pin = np.vstack([block_rows(e1[None], b) for b in range(nb + 1)])
        pin_val = np.concatenate([[0.5], values_at_0])
        conds = [
            PointCondition(0, lambda X: left_rows @ (X - e_full), lambda X: left_rows),
            PointCondition(zero, lambda X: pin @ X - pin_val, lambda X: pin),
            PointCondition(mesh.N, lambda X: right_rows @ X, lambda X: right_rows),
        ]
        prob = CollocationProblem(mesh.points, fun, jac, mt, conds)
        X0 = np.zeros((mesh.N + 1, mt))
        X0[:, :M] = self.profile.values
        try:
            res = prob.newton(X0, tol=TOL_SOLVE, max_iter=8)
        except NoConvergence as exc:
            raise SingularSystem(f"bordered solve failed: {exc}") from None
        X = res.U
        return [X[:, M * (b + 1):M * (b + 2)] for b in range(nb)], res.residual_norm

    def kernel(self) -> np.ndarray:
        """Discrete translation mode, normalized to ``w(0) = f'(0)``."""
        if not hasattr(self, "_kernel"):
            (K,), _ = self._solve_chain([ZERO], [self.profile.values[self.mesh.zero_index, 1]])
            object.__setattr__(self, "_kernel", K)
        return self._kernel

    def solve_gauged(self, forcings):
        """Solve the chain with ``<S_j, f'> = 0`` for every block."""
        fp = self.profile.values[:, 1]
        K = self.kernel()
        kk = self.inner(K[:, 0], fp)
        if abs(kk) < 1e-12 * np.sqrt(self.inner(K[:, 0], K[:, 0]) * self.inner(fp, fp)):
            raise SingularSystem("translation mode is orthogonal to the gauge vector")
        values = []
        out = None
        for j in range(len(forcings)):
            # S_j(0) is chosen so that the gauge holds: solve with S_j(0) = 0,
            # then shift along the kernel
            blocks, rn = self._solve_chain(forcings[:j + 1], values + [0.0])
            S = blocks[-1]
            a = self.inner(S[:, 0], fp) / kk
            values.append(float(-a * K[self.mesh.zero_index, 0]))
            out = blocks[:-1] + [S - a * K]
        return out, rn


def assemble_B(f: WaveProfile, lam0: float | None = None) -> DiscreteB:
    spec = f.spec
    if (spec.k, spec.l, spec.s_t, spec.s_x, spec.semilinear) != (11, 3, -1, -1, True):
        raise SpecMismatch(f"log-shift expansion is set up for the dispersion KPP-(11,3), got {spec.label}")
    if lam0 is not None and not np.isclose(lam0, f.lam, rtol=0, atol=1e-14):
        raise SpecMismatch(f"profile speed {f.lam} differs from lam0={lam0}")
    mode = f.diagnostics.get("bc_mode") or default_mode(bundle_dims(spec, f.lam))
    closure = boundary_closure(spec, f.lam, mode)
    return DiscreteB(f, float(f.lam), closure.left, closure.right)


def _psi_forcing(lam0, variant: RhsVariant) -> _Forcing:
    col = 3 if RhsVariant(variant) is RhsVariant.THIRD else 2
    return _Forcing(((col, 3.0 * lam0**2),))


def _phi_forcing(lam0, k, include_fprime=True) -> _Forcing:
    # block layout: f at 0..10, psi at 11..21
    P = M
    lin = [(2, 3 * lam0 * k), (P + 2, -3 * lam0**2 * k),
           (P + 3, 3 * lam0**2 * k * k), (3, -3 * lam0 * k * k)]
    if include_fprime:
        lin.append((1, -k))
    return _Forcing(tuple(lin), ((P, P, k * k),))


def _check_profile(B, f):
    if f is not None and f is not B.profile:
        raise SpecMismatch("B was assembled on a different profile")


def solve_psi(B: DiscreteB, f: WaveProfile | None = None,
              rhs_variant: RhsVariant | str = RhsVariant.THIRD) -> np.ndarray:
    """States ``psi, ..., psi^(10)`` with ``B psi = 3 lam0^2 f'''`` (or ``f''``)."""
    _check_profile(B, f)
    (psi,), _ = B.solve_gauged([_psi_forcing(B.lam0, rhs_variant)])
    return psi


def solve_phi(B: DiscreteB, f: WaveProfile | None, psi: np.ndarray, k_shift: float,
              rhs_variant: RhsVariant | str = RhsVariant.THIRD, *,
              include_fprime: bool = True) -> np.ndarray:
    """States of ``phi`` for
    ``B phi = k(3 lam0 f'' - 3 lam0^2 psi'' - f') + k^2(psi^2 + 3 lam0^2 psi''' - 3 lam0 f''')``.

    ``psi`` must come from ``solve_psi`` with the same variant; it is
    recomputed alongside ``phi`` and the two are compared.
    ``include_fprime=False`` drops the ``-k f'`` term, which belongs to the
    ``1/t^3`` layer when the moving-frame equation is expanded exactly.
    """
    _check_profile(B, f)
    (psi2, phi), _ = B.solve_gauged([_psi_forcing(B.lam0, rhs_variant),
                                     _phi_forcing(B.lam0, float(k_shift), include_fprime)])
    scale = max(1.0, float(np.max(np.abs(psi))))
    if np.max(np.abs(psi2 - psi)) > 1e-6 * scale:
        raise SpecMismatch("psi does not match this operator and rhs variant")
    return phi


def _top_derivative(y, S10):
    return make_interp_spline(y, S10, k=7).derivative()(y)


@dataclass
class ShiftExpansion:
    profile: WaveProfile
    k_shift: float
    psi: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    rhs_variant: RhsVariant = RhsVariant.THIRD
    residual_norms: dict = field(default_factory=dict)

    @property
    def lam0(self) -> float:
        return self.profile.lam

    def residual(self, t: float) -> float:
        r = expansion_residual(self, t)
        self.residual_norms[float(t)] = r
        return r

    def check(self, B: DiscreteB | None = None, tol_bc: float = TOL_BC) -> list[str]:
        B = B or assemble_B(self.profile)
        fp = self.profile.values[:, 1]
        bad = []
        for name, S in (("psi", self.psi), ("phi", self.phi)):
            scale = max(1.0, np.sqrt(B.inner(S[:, 0], S[:, 0]) * B.inner(fp, fp)))
            if abs(B.inner(S[:, 0], fp)) > 1e-10 * scale:
                bad.append(f"{name}_gauge")
            # no growing mode at either end; the amplitude itself decays only
            # as fast as f' does
            tails = np.concatenate([B.left @ S[0], B.right @ S[-1]])
            if np.max(np.abs(tails), initial=0.0) > tol_bc:
                bad.append(f"{name}_decay")
        return bad

    def to_dict(self) -> dict:
        return {"lambda0": self.lam0, "k_shift": self.k_shift, "rhs_variant": self.rhs_variant.value,
                "residual_norms": {repr(t): r for t, r in sorted(self.residual_norms.items())}}


def _derivs(S, y):
    """Columns ``s, s', ..., s^(11)``; the last by differentiating ``s^(10)``."""
    return np.column_stack([S, _top_derivative(y, S[:, 10])])


def expansion_residual(expansion: ShiftExpansion, t: float) -> float:
    """Max-norm over the inner half of the mesh of the moving-frame residual
    of ``v = f + (k/t) psi + phi/t^2``.

    Every term of ``D^3 v + v^(11) - v(1-v)`` with ``D = d/dt + (-lam0 + g') d/dy``
    is kept. The profile equation is subtracted analytically, so the
    result is ``E(f + w) - E_0(f)`` where ``E_0`` is the stationary residual
    of ``f``; the highest derivative of ``w`` is obtained by differentiating
    the interpolated ``w^(10)`` rather than from the ODE it was solved with.
    """
    if t < 10:
        raise ValueError("expansion residual is defined for t >= 10")
    prof = expansion.profile
    y = prof.mesh.points
    lam0, k = prof.lam, float(expansion.k_shift)
    F = _profile_states(prof)
    P = _derivs(expansion.psi, y)
    Q = _derivs(expansion.phi, y)
    _, g1, g2, g3 = shift_function(k, t)
    c, c1, c2 = -lam0 + g1, g2, g3
    # w = a(t) psi + b(t) phi and its t-derivatives
    a = [k / t, -k / t**2, 2 * k / t**3, -6 * k / t**4]
    b = [1 / t**2, -2 / t**3, 6 / t**4, -24 / t**5]

    def w(dt, dy):
        return a[dt] * P[:, dy] + b[dt] * Q[:, dy]

    w0 = w(0, 0)
    Bw = -w(0, 11) + (1.0 - 2.0 * F[:, 0]) * w0 + lam0**3 * w(0, 3)
    r = (w(3, 0) + 3 * c * w(2, 1) + 3 * c**2 * w(1, 2) + 3 * c1 * w(1, 1)
         + (c**3 + lam0**3) * (F[:, 3] + w(0, 3)) - Bw
         + 3 * c * c1 * (F[:, 2] + w(0, 2)) + c2 * (F[:, 1] + w(0, 1)) + w0 * w0)
    inner = np.abs(y) <= 0.5 * max(abs(prof.mesh.left), abs(prof.mesh.right))
    return float(np.max(np.abs(r[inner])))


def build_expansion(profile: WaveProfile, k_shift: float = 1.0,
                    rhs_variant: RhsVariant | str = RhsVariant.THIRD, *,
                    with_psi: bool = True, with_phi: bool = False,
                    include_fprime: bool = True) -> ShiftExpansion:
    B = assemble_B(profile)
    n = len(profile.mesh)
    zero = np.zeros((n, M))
    psi = solve_psi(B, profile, rhs_variant) if with_psi else zero
    phi = (solve_phi(B, profile, psi, k_shift, rhs_variant, include_fprime=include_fprime)
           if with_phi and with_psi else zero)
    return ShiftExpansion(profile, float(k_shift), psi, phi, RhsVariant(rhs_variant))


def residual_slope(expansion: ShiftExpansion, ts=(1e2, 1e3, 1e4)) -> float:
    """Least-squares slope of ``log residual`` against ``log t``."""
    ts = np.asarray(ts, dtype=float)
    rs = np.array([expansion.residual(t) for t in ts])
    return float(np.polyfit(np.log(ts), np.log(rs), 1)[0])
