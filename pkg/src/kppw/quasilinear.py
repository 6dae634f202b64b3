"""Quasilinear KPP-(11,1): profiles in the variable ``F = |f|^n f``, interfaces,
and the periodic oscillatory component near the interface.

The TW equation ``-lam f' = -(|f|^n f)^(11) + f(1-f)`` becomes, with
``g(F) = |F|^(-n/(n+1)) F`` (so that ``f = g(F)``)::

    F^(11) = lam (g(F))' + g(F) (1 - g(F)).

The singular factor is regularized by ``|F| -> sqrt(F^2 + delta^2)``. The
system is integrated in flux form: with ``V = F^(10) - lam g(F)`` the state
``(F, F', ..., F^(9), V)`` obeys ``F^(9)' = V + lam g(F)`` and
``V' = g(F)(1 - g(F))``. This keeps the vector field bounded where ``F``
changes sign, whereas the expanded form has a spike of width
``delta/|F'|`` there.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.special import expit

from .bvp import Mesh, _invariant_rows
from .charroots import roots
from .collocation import CollocationProblem, PointCondition
from .continuation import ContinuationBranch, lambda_max
from .errors import (
    ClosureCountMismatch,
    InterfaceNotFound,
    InvalidSpec,
    NoConvergence,
    NonPositiveN,
    RegularizationStall,
)
from .model import catalog_lookup
from .pk import pk_build, pk_eval

__all__ = [
    "interface_exponent",
    "operator_exponent",
    "f_to_F",
    "F_to_f",
    "QuasiProfile",
    "InterfaceInfo",
    "OscComponent",
    "solve_quasilinear",
    "interface_locate",
    "oscillatory_component",
    "oscillatory_residual",
    "constant_solution",
    "lambda_max_quasi",
]

log = logging.getLogger(__name__)

M_STATE = 11
DELTA_START = 1e-3
DELTA_TARGET = 1e-9
TOL = 1e-8


def _check_n(n) -> float:
    n = float(n)
    if not n > 0:
        raise NonPositiveN(f"quasilinear exponent must be positive, got n={n}")
    return n


def interface_exponent(n) -> float:
    """``gamma = 10/n``: ``f ~ (y0 - y)^gamma`` at the interface."""
    return 10.0 / _check_n(n)


def operator_exponent(n) -> float:
    """Exponent of the envelope of ``F = |f|^n f``, ``(n+1) * 10/n``.

    ``d^10/dy^10`` of ``(y0-y)^a psi(s)`` is ``(y0-y)^(a-10) P_10[psi]`` with
    the recursion parameter equal to ``a``; for ``psi = |phi|^n phi`` that is
    ``a = (n+1) gamma``.
    """
    n = _check_n(n)
    return (n + 1.0) * 10.0 / n


def f_to_F(f, n):
    f = np.asarray(f, dtype=float)
    return np.abs(f) ** n * f


def F_to_f(F, n):
    F = np.asarray(F, dtype=float)
    return np.sign(F) * np.abs(F) ** (1.0 / (n + 1.0))


def _g(F, n, delta):
    """Regularized ``g(F) = F (F^2 + delta^2)^(-alpha/2)`` and ``g'(F)``."""
    al = n / (n + 1.0)
    r2 = F * F + delta * delta
    a = r2 ** (-0.5 * al)
    return a * F, a - al * F * F * r2 ** (-0.5 * al - 1.0)


def _field(n, lam, delta):
    def fun(U):
        g, _ = _g(U[..., 0], n, delta)
        out = np.empty_like(U)
        out[..., :9] = U[..., 1:10]
        out[..., 9] = U[..., 10] + lam * g
        out[..., 10] = g * (1.0 - g)
        return out

    def jac(U):
        g, dg = _g(U[..., 0], n, delta)
        J = np.zeros(U.shape[:-1] + (M_STATE, M_STATE))
        idx = np.arange(9)
        J[..., idx, idx + 1] = 1.0
        J[..., 9, 10] = 1.0
        J[..., 9, 0] = lam * dg
        J[..., 10, 0] = dg * (1.0 - 2.0 * g)
        return J

    return fun, jac


@dataclass(frozen=True)
class InterfaceInfo:
    """Interface location and near-interface envelope fit.

    ``y0`` is the threshold location; ``y0_extrapolated`` and ``exponent``
    come from the log-periodic peak structure ``|F| ~ C (y* - y)^p``.
    """

    y0: float
    threshold: float
    exponent: float | None
    y0_extrapolated: float | None
    n_peaks: int
    expected_exponent: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class QuasiProfile:
    n: float
    lam: float
    mesh: Mesh
    values: np.ndarray = field(repr=False)
    delta: float = DELTA_TARGET
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def y(self) -> np.ndarray:
        return self.mesh.points

    @property
    def F(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def f(self) -> np.ndarray:
        return F_to_f(self.F, self.n)

    @property
    def y0(self) -> float | None:
        return self.diagnostics.get("y0")

    def derivatives(self) -> np.ndarray:
        """``F, F', ..., F^(10)`` on the mesh, shape (N+1, 11)."""
        out = self.values.copy()
        out[:, 10] = self.values[:, 10] + self.lam * _g(self.F, self.n, self.delta)[0]
        return out

    def interpolate(self, y) -> np.ndarray:
        fun, _ = _field(self.n, self.lam, self.delta)
        spl = CubicHermiteSpline(self.y, self.values, fun(self.values), axis=0)
        return spl(np.asarray(y, dtype=float))

    def check(self, tol=TOL) -> list[str]:
        bad = []
        if not self.diagnostics.get("final_residual_norm", np.inf) < tol:
            bad.append("residual")
        y0 = self.y0
        if y0 is not None:
            thr = self.diagnostics["interface_threshold"]
            h = np.max(np.diff(self.y))
            beyond = self.y > y0 + h
            if np.any(np.abs(self.F[beyond]) > thr):
                bad.append("compact_support")
        return bad


def _logistic_state(y, n, lam, delta, width=1.0):
    # F = sigma^a with sigma = 1/(1+exp(y/w)); d/dy (sigma^a Q(sigma)) =
    # sigma^a * (-(1-sigma)/w) * (a Q + sigma Q')
    a = n + 1.0
    sig = expit(-y / width)
    s = np.polynomial.Polynomial([0.0, 1.0])
    Q = np.polynomial.Polynomial([1.0])
    cols = []
    for _ in range(11):
        cols.append(sig ** a * Q(sig))
        Q = -(1.0 - s) / width * (a * Q + s * Q.deriv())
    U = np.stack(cols[:10] + [cols[10]], axis=1)
    U[:, 10] -= lam * _g(U[:, 0], n, delta)[0]
    return U


def _conditions(n, lam, delta, mesh):
    _, jac = _field(n, lam, delta)
    eL = np.zeros(M_STATE)
    eL[0] = 1.0
    eL[10] = -lam * _g(np.array(1.0), n, delta)[0]
    left = _invariant_rows(jac(eL[None])[0], lambda re, im: re < 1e-9)
    q_l = left.shape[0]
    q_r = M_STATE - 1 - q_l
    if q_r < 0:
        raise ClosureCountMismatch(f"left closure has {q_l} conditions, too many for m=11")
    e1 = np.eye(M_STATE)
    phase = 2.0 ** (-(n + 1.0))
    conds = [
        PointCondition(0, lambda U: left @ (U - eL), lambda U: left),
        PointCondition(mesh.zero_index, lambda U: np.array([U[0] - phase]), lambda U: e1[:1]),
    ]
    if q_r:
        conds.append(PointCondition(mesh.N, lambda U: U[:q_r], lambda U: e1[:q_r]))
    return conds, q_l, q_r


def _newton(n, lam, delta, mesh, U0, tol, max_iter):
    fun, jac = _field(n, lam, delta)
    conds, q_l, q_r = _conditions(n, lam, delta, mesh)
    prob = CollocationProblem(mesh.points, fun, jac, M_STATE, conds)
    return prob.newton(U0, tol=tol, max_iter=max_iter), q_l, q_r


def _continue_delta(n, lam, mesh, res, q_l, q_r, d, delta_target, tol, max_iter, history):
    U = res.U
    factor = 10.0
    while d > delta_target * (1 + 1e-12):
        d_new = max(d / factor, delta_target)
        try:
            res, q_l, q_r = _newton(n, lam, d_new, mesh, U, tol, max_iter)
        except NoConvergence as exc:
            factor = np.sqrt(factor)
            if factor < 1.05:
                raise RegularizationStall(
                    f"delta continuation stalled at delta={d:.3g}", exc.best_residual,
                    sum(h["iters"] for h in history)) from None
            continue
        change = float(np.max(np.abs(res.U[:, 0] - U[:, 0])))
        history.append({"delta": d_new, "iters": res.iterations, "change": change,
                        "residual": res.residual_norm})
        U, d = res.U, d_new
        factor = min(10.0, factor * 2.0)
    return U, d, res, q_l, q_r


def solve_quasilinear(n, lam, mesh: Mesh | None = None, delta_target: float = DELTA_TARGET, *,
                      guess=None, delta_start: float = DELTA_START, tol: float = TOL,
                      max_iter: int = 100, smoothing_width: float = 1.0,
                      refine_on_failure: bool = True, threshold: float | None = None) -> QuasiProfile:
    """Profile of the quasilinear equation for exponent ``n`` and speed ``lam``.

    Boundary data: projection onto the unstable subspace at ``F = 1`` on the
    left, ``F = F' = ... = 0`` (as many as the count allows) on the right,
    and the phase ``F(0) = 2^-(n+1)``. ``guess`` may be a previous
    ``QuasiProfile``; the continuation then starts at its ``delta``.
    """
    n = _check_n(n)
    lam = float(lam)
    if not 0 < delta_target <= delta_start:
        raise ValueError("need 0 < delta_target <= delta_start")
    mesh = mesh if mesh is not None else Mesh.uniform()

    attempts = [mesh, mesh.subdivide(2)] if refine_on_failure else [mesh]
    best, errors = np.inf, []
    for k, msh in enumerate(attempts):
        starts = []
        if isinstance(guess, QuasiProfile):
            y = np.clip(msh.points, guess.mesh.left, guess.mesh.right)
            starts.append((guess.interpolate(y), max(guess.delta, delta_target)))
        starts.append((_logistic_state(msh.points, n, lam, delta_start, smoothing_width), delta_start))
        for U0, d0 in starts:
            history = []
            try:
                res, q_l, q_r = _newton(n, lam, d0, msh, U0, tol, max_iter)
                history.append({"delta": d0, "iters": res.iterations, "change": None,
                                "residual": res.residual_norm})
                U, d, res, q_l, q_r = _continue_delta(
                    n, lam, msh, res, q_l, q_r, d0, delta_target, tol, max_iter, history)
            except NoConvergence as exc:
                best = min(best, exc.best_residual)
                errors.append(f"{type(exc).__name__}: {exc}")
                continue
            changes = [h["change"] for h in history if h["change"] is not None]
            diag = {
                "newton_iters": sum(h["iters"] for h in history),
                "final_residual_norm": res.residual_norm,
                "delta_history": history,
                "delta_last_change": changes[-1] if changes else None,
                "q_left": q_l,
                "q_right": q_r,
                "L_left": msh.left,
                "L_right": msh.right,
                "N": msh.N,
                "refined_on_failure": k > 0,
            }
            prof = QuasiProfile(n, lam, msh, U, d, diag)
            try:
                info = interface_locate(prof, threshold)
                diag.update(y0=info.y0, interface_threshold=info.threshold, interface=info.to_dict())
            except InterfaceNotFound:
                diag.update(y0=None, interface_threshold=None)
            return prof
    if any(e.startswith("RegularizationStall") for e in errors):
        raise RegularizationStall(f"n={n} lam={lam}: " + "; ".join(errors), best)
    raise NoConvergence(f"n={n} lam={lam}: " + "; ".join(errors), best)


def _peaks(y, F):
    a = np.abs(F)
    i = np.where((a[1:-1] > a[:-2]) & (a[1:-1] >= a[2:]))[0] + 1
    return y[i], a[i]


def interface_locate(profile: QuasiProfile, threshold: float | None = None, *,
                     upper: float = 1e-3, lower_factor: float = 1e2) -> InterfaceInfo:
    """Interface position and envelope exponent.

    ``y0`` is the largest mesh point where ``|F| >= threshold`` (default
    ``1e-6 max|F|``). The exponent is fitted on the local maxima of ``|F|``
    between ``lower_factor * delta`` and ``upper * max|F|``: near an
    interface the maxima sit at geometrically shrinking distances from the
    extrapolated interface ``y*``, so their spacing is linear in position
    and vanishes at ``y*``; the exponent is then the slope of
    ``log|F|`` against ``log(y* - y)``.
    """
    y, F = profile.y, profile.F
    top = float(np.max(np.abs(F)))
    thr = 1e-6 * top if threshold is None else float(threshold)
    above = np.nonzero(np.abs(F) >= thr)[0]
    if above.size == 0 or above[-1] == y.size - 1:
        raise InterfaceNotFound(f"|F| does not drop below {thr:.3g} inside the domain")
    y0 = float(y[above[-1]])

    py, pa = _peaks(y, F)
    big = np.nonzero(pa >= upper * top)[0]
    start = big[-1] + 1 if big.size else 0
    py, pa = py[start:], pa[start:]
    stop = np.nonzero(pa <= lower_factor * profile.delta)[0]
    if stop.size:
        py, pa = py[:stop[0]], pa[:stop[0]]
    exponent = y_star = None
    if py.size >= 5:
        # positive and negative lobes alternate and need not be symmetric,
        # so spacing is measured over one full oscillation (every other peak)
        mid = 0.5 * (py[2:] + py[:-2])
        slope, icpt = np.polyfit(mid, py[2:] - py[:-2], 1)
        if slope < 0:
            y_star = -icpt / slope
            if y_star > py[-1]:
                exponent = float(np.polyfit(np.log(y_star - py), np.log(pa), 1)[0])
                y_star = float(y_star)
            else:
                y_star = None
    return InterfaceInfo(y0, thr, exponent, y_star, int(py.size), operator_exponent(profile.n))


# -- oscillatory component ---------------------------------------------------

def _p10(gamma_op):
    return pk_eval(pk_build(10), gamma_op)


def constant_solution(n, lam, gamma_op=None) -> float:
    """Constant ``c`` with ``a_{10,0} |c|^n c = lam c``; 0 when only the trivial one exists."""
    n = _check_n(n)
    g = operator_exponent(n) if gamma_op is None else gamma_op
    a0 = _p10(g)[0]
    if a0 == 0 or lam / a0 <= 0:
        return 0.0
    return float((lam / a0) ** (1.0 / n))


def oscillatory_residual(n, lam, psi_derivatives, phi, gamma_op=None):
    """Pointwise ``P_10[psi] - lam phi`` for samples ``[psi, psi', ..., psi^(10)]``
    of ``psi = |phi|^n phi``."""
    n = _check_n(n)
    g = operator_exponent(n) if gamma_op is None else gamma_op
    a = _p10(g)
    d = np.asarray(psi_derivatives, dtype=float)
    return np.tensordot(a, d, axes=(0, 0)) - lam * np.asarray(phi, dtype=float)


@dataclass(frozen=True)
class OscComponent:
    n: float
    lam: float
    gamma: float
    gamma_op: float
    period: float
    phi: np.ndarray = field(repr=False)
    residual_norm: float = np.inf
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def s(self) -> np.ndarray:
        return np.arange(self.phi.size) * self.period / self.phi.size

    def evaluate(self, s) -> np.ndarray:
        """Trigonometric interpolant of the samples."""
        M = self.phi.size
        c = np.fft.rfft(self.phi) / M
        k = np.arange(c.size)
        if M % 2 == 0:
            c[-1] *= 0.5
        s = np.asarray(s, dtype=float)[..., None]
        z = np.exp(2j * np.pi * k * s / self.period)
        w = np.where(k == 0, 1.0, 2.0)
        return np.real(np.sum(w * c * z, axis=-1))

    @property
    def sign_changing(self) -> bool:
        return bool(self.phi.min() < 0 < self.phi.max())

    def to_dict(self) -> dict:
        return {"n": self.n, "lambda": self.lam, "gamma": self.gamma, "gamma_op": self.gamma_op,
                "period": self.period, "residual_norm": self.residual_norm,
                "phi": self.phi.tolist(), "diagnostics": self.diagnostics}


class _Fourier:
    """Inverse of ``P_10`` on trigonometric polynomials of period ``T``."""

    def __init__(self, M, coeffs, scale):
        self.M, self.a, self.scale = M, coeffs, scale
        self.k = np.fft.fftfreq(M, 1.0 / M)
        self.F = np.fft.fft(np.eye(M), axis=0)
        self.Fi = np.fft.ifft(np.eye(M), axis=0)
        kk = 1j * self.k
        if M % 2 == 0:
            kk[M // 2] = 0.0
        self.D1 = np.real(self.Fi @ (kk[:, None] * self.F))

    def symbol(self, T):
        z = 2j * np.pi * self.k / T
        p = sum(a * z ** j for j, a in enumerate(self.a)) * self.scale
        dp = sum(j * a * z ** j for j, a in enumerate(self.a)) * (-1.0 / T) * self.scale
        return p, dp

    def inverse(self, T):
        p, dp = self.symbol(T)
        Pinv = np.real(self.Fi @ ((1.0 / p)[:, None] * self.F))
        dPinv = np.real(self.Fi @ ((-dp / p ** 2)[:, None] * self.F))
        return Pinv, dPinv


def _periodic_newton(fo: _Fourier, n, x, tol, max_iter):
    """Newton on ``|Phi|^n Phi - P^{-1} Phi = 0``, ``Phi'(0) = 0``, unknown ``T``,
    deflated against the trivial solution."""
    M = fo.M

    def res(x):
        Phi, T = x[:-1], x[-1]
        Pinv, dPinv = fo.inverse(T)
        r = np.empty(M + 1)
        r[:M] = np.abs(Phi) ** n * Phi - Pinv @ Phi
        r[M] = fo.D1[0] @ Phi
        J = np.zeros((M + 1, M + 1))
        J[:M, :M] = np.diag((n + 1) * np.abs(Phi) ** n) - Pinv
        J[:M, M] = -dPinv @ Phi
        J[M, :M] = fo.D1[0]
        return r, J

    def rel(x, r):
        amp = max(np.max(np.abs(x[:-1])) ** (n + 1), 1e-300)
        return max(np.max(np.abs(r[:M])) / amp, abs(r[M]))

    def merit(x):
        r, _ = res(x)
        return np.linalg.norm(r) * (M / max(x[:-1] @ x[:-1], 1e-300) + 1.0)

    T0 = x[-1]
    nr = np.inf
    for it in range(max_iter):
        r, J = res(x)
        nr = rel(x, r)
        if nr < tol:
            return x, nr, it
        dx = np.linalg.solve(J, -r)
        nrm2 = x[:-1] @ x[:-1] / M
        grad = -2.0 / nrm2 ** 2 * x[:-1] / M / (1.0 / nrm2 + 1.0)
        dx = dx / (1.0 - grad @ dx[:-1])
        m0, step = merit(x), 1.0
        while step > 1e-6:
            xt = x + step * dx
            if T0 / 100 < xt[-1] < 100 * T0 and merit(xt) < (1.0 - 1e-4 * step) * m0:
                break
            step *= 0.5
        else:
            raise NoConvergence("periodic Newton stalled", nr, it)
        x = xt
    raise NoConvergence(f"periodic Newton: no convergence in {max_iter} iterations", nr, max_iter)


def _linear_period(a, n):
    # least-damped oscillatory mode of the linearization about the constant
    p = a[::-1].copy()
    p[-1] -= a[0] / (n + 1.0)
    r = roots(p)
    r = r[r.imag > 1e-9]
    if r.size == 0:
        return 1.0
    mu = r[np.argmax(r.real)]
    return float(2 * np.pi / mu.imag)


def oscillatory_component(n, lam, fourier_modes: int = 64, *, gamma_op: float | None = None,
                          tol: float = 1e-10, max_iter: int = 100,
                          period_factors=(1.0, 0.65, 0.4, 0.25, 0.18)) -> OscComponent:
    """Periodic sign-changing solution of ``P_10[|phi|^n phi] = lam phi``.

    Solved by Fourier collocation in ``s`` with the period as an unknown and
    the phase ``phi'(0) = 0``. The operator is applied through its inverse,
    which is smoothing. The first seed is the constant solution plus a
    perturbation in the least-damped linearized mode; if that returns to the
    constant, zero-mean seeds at a ladder of periods are tried. The
    operator parameter defaults to the envelope exponent of ``|f|^n f``.
    """
    n = _check_n(n)
    lam = float(lam)
    if not lam > 0:
        raise InvalidSpec(f"oscillatory component needs lam > 0, got {lam}")
    M = int(fourier_modes)
    if M < 8:
        raise ValueError("need at least 8 Fourier modes")
    g_op = operator_exponent(n) if gamma_op is None else float(gamma_op)
    a = _p10(g_op)
    T_lin = _linear_period(a, n)
    th = np.arange(M) * 2 * np.pi / M

    seeds = []
    c0 = constant_solution(n, 1.0, g_op)
    if c0 > 0:
        seeds.append(("constant+mode", T_lin, None))
    seeds += [(f"zero-mean T0={f:g}*T_lin", f * T_lin, np.cos(th)) for f in period_factors]

    attempts = []
    for name, T0, shape in seeds:
        w0 = 2 * np.pi / T0
        Pw = abs(sum(aj * (1j * w0) ** j for j, aj in enumerate(a)))
        B = Pw ** (-1.0 / n)  # phi = lam^(1/n) * B * Phi
        fo = _Fourier(M, a, B ** n)
        if shape is None:
            Phic = (Pw / a[0]) ** (1.0 / n)
            shape = Phic * (1.0 + 0.1 * np.cos(th))
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                x, nr, it = _periodic_newton(fo, n, np.append(shape, T0), tol, max_iter)
        except (NoConvergence, np.linalg.LinAlgError) as exc:
            attempts.append({"seed": name, "T0": T0, "outcome": f"{type(exc).__name__}: {exc}"})
            continue
        Phi, T = x[:-1], float(x[-1])
        if not Phi.min() < 0 < Phi.max():
            attempts.append({"seed": name, "T0": T0, "outcome": "converged to a sign-definite solution"})
            continue
        attempts.append({"seed": name, "T0": T0, "outcome": "ok", "iterations": it})
        phi = lam ** (1.0 / n) * B * Phi
        diag = {"seeds": attempts, "T_linear": T_lin, "fourier_modes": M,
                "residual_form": "|phi|^n phi - lam P^{-1} phi, relative"}
        return OscComponent(n, lam, 10.0 / n, g_op, T, phi, float(nr), diag)
    err = NoConvergence(f"no sign-changing periodic solution found for n={n}, lam={lam}")
    err.attempts = attempts
    raise err


def lambda_max_quasi(n, lam_lo, lam_hi, tol, mesh: Mesh | None = None, **kw) -> ContinuationBranch:
    """Solvability bisection for the quasilinear problem (see ``continuation.lambda_max``)."""
    n = _check_n(n)
    spec = catalog_lookup("quasilinear", 11, 1).with_n(n)

    def solver(_spec, lam, msh, _mode, guess, **skw):
        return solve_quasilinear(n, lam, msh, guess=guess, **skw)

    return lambda_max(spec, lam_lo, lam_hi, tol, mesh, None, solver=solver, **kw)
