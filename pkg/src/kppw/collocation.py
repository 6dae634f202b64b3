"""Fourth-order collocation for autonomous first-order BVPs with banded Newton solves.

The scheme is the three-stage Lobatto IIIA (Hermite-Simpson) method:

    U_mid = (U_i + U_{i+1}) / 2 - h/8 (G_{i+1} - G_i)
    (U_{i+1} - U_i) / h - (G_i + 4 G(U_mid) + G_{i+1}) / 6 = 0

Boundary and interior point conditions are interleaved with the interval
equations by position so that the global Jacobian stays banded.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import lapack

from .errors import NoConvergence, SingularJacobian

__all__ = ["PointCondition", "CollocationProblem", "NewtonResult", "BandedLU"]


@dataclass
class PointCondition:
    """Conditions ``c(U[node]) = 0`` attached to one mesh node.

    ``fun`` maps a state of shape (m,) to shape (q,); ``jac`` returns (q, m).
    """

    node: int
    fun: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]

    def count(self, m):
        return len(np.atleast_1d(self.fun(np.zeros(m))))


class BandedLU:
    """LU factorization of a banded matrix given as COO triplets."""

    def __init__(self, rows, cols, vals, n):
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        d = rows - cols
        self.kl = int(max(d.max(), 0))
        self.ku = int(max(-d.min(), 0))
        self.n = n
        ab = np.zeros((2 * self.kl + self.ku + 1, n))
        np.add.at(ab, (self.kl + self.ku + rows - cols, cols), vals)
        lu, piv, info = lapack.dgbtrf(ab, self.kl, self.ku)
        if info > 0:
            raise SingularJacobian(f"banded LU: zero pivot at {info}")
        if info < 0:
            raise ValueError(f"dgbtrf illegal argument {-info}")
        self._lu, self._piv = lu, piv
        diag = np.abs(lu[self.kl + self.ku])
        self.rcond_hint = float(diag.min() / max(diag.max(), 1e-300))

    def solve(self, b):
        x, info = lapack.dgbtrs(self._lu, self.kl, self.ku, b, self._piv)
        if info != 0:
            raise ValueError(f"dgbtrs failed with info={info}")
        return x


@dataclass
class NewtonResult:
    U: np.ndarray
    iterations: int
    residual_norm: float
    history: list = field(default_factory=list)


class CollocationProblem:
    """Discretized BVP ``U' = G(U)`` on a fixed mesh.

    Parameters
    ----------
    mesh : (N+1,) strictly increasing array
    fun : callable, (P, m) -> (P, m)
    jac : callable, (P, m) -> (P, m, m)
    conditions : point conditions; together with the N*m interval
        equations they must give exactly (N+1)*m equations.
    """

    def __init__(self, mesh, fun, jac, m: int, conditions: Sequence[PointCondition]):
        self.mesh = np.asarray(mesh, dtype=float)
        if self.mesh.ndim != 1 or np.any(np.diff(self.mesh) <= 0):
            raise ValueError("mesh must be strictly increasing")
        self.fun, self.jac, self.m = fun, jac, m
        self.conditions = sorted(conditions, key=lambda c: c.node)
        N = self.mesh.size - 1
        self.N = N
        self.h = np.diff(self.mesh)
        counts = [c.count(m) for c in self.conditions]
        if sum(counts) != m:
            raise ValueError(f"need {m} point conditions in total, got {sum(counts)}")
        # row layout: conditions at node j precede interval j's equations
        self._cond_rows = []
        self._interval_row0 = np.empty(N, dtype=int)
        row = 0
        ci = 0
        for i in range(N + 1):
            while ci < len(self.conditions) and self.conditions[ci].node == i:
                self._cond_rows.append(row)
                row += counts[ci]
                ci += 1
            if i < N:
                self._interval_row0[i] = row
                row += m
        self.size = row
        assert row == (N + 1) * m

    # -- residual -------------------------------------------------------
    def _stages(self, U):
        G = self.fun(U)
        h = self.h[:, None]
        Um = 0.5 * (U[:-1] + U[1:]) - h / 8.0 * (G[1:] - G[:-1])
        Gm = self.fun(Um)
        return G, Um, Gm

    def interval_defects(self, U):
        """Collocation defects per interval, shape (N, m)."""
        G, _, Gm = self._stages(U)
        h = self.h[:, None]
        return (U[1:] - U[:-1]) / h - (G[:-1] + 4.0 * Gm + G[1:]) / 6.0

    def residual(self, U):
        U = U.reshape(self.N + 1, self.m)
        r = np.empty(self.size)
        D = self.interval_defects(U)
        idx = self._interval_row0[:, None] + np.arange(self.m)[None, :]
        r[idx] = D
        for cond, r0 in zip(self.conditions, self._cond_rows):
            v = np.atleast_1d(cond.fun(U[cond.node]))
            r[r0:r0 + v.size] = v
        return r

    # -- jacobian -------------------------------------------------------
    def factorize(self, U):
        U = U.reshape(self.N + 1, self.m)
        m, N = self.m, self.N
        G, Um, Gm = self._stages(U)
        J = self.jac(U)
        Jm = self.jac(Um)
        h = self.h[:, None, None]
        I = np.eye(m)[None]
        # d Um / d U_i = I/2 + h/8 J_i ; d Um / d U_{i+1} = I/2 - h/8 J_{i+1}
        dUm_a = 0.5 * I + h / 8.0 * J[:-1]
        dUm_b = 0.5 * I - h / 8.0 * J[1:]
        A = -I / h - (J[:-1] + 4.0 * Jm @ dUm_a) / 6.0
        B = I / h - (J[1:] + 4.0 * Jm @ dUm_b) / 6.0
        r0 = self._interval_row0
        ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        rows_a = r0[:, None, None] + ii[None]
        cols_a = (np.arange(N) * m)[:, None, None] + jj[None]
        rows = [rows_a.ravel(), rows_a.ravel()]
        cols = [cols_a.ravel(), (cols_a + m).ravel()]
        vals = [A.ravel(), B.ravel()]
        for cond, rr in zip(self.conditions, self._cond_rows):
            Cj = np.atleast_2d(cond.jac(U[cond.node]))
            q = Cj.shape[0]
            ci, cj = np.meshgrid(np.arange(q), np.arange(m), indexing="ij")
            rows.append((rr + ci).ravel())
            cols.append((cond.node * m + cj).ravel())
            vals.append(Cj.ravel())
        return BandedLU(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), self.size)

    # -- newton ---------------------------------------------------------
    def newton(self, U0, tol=1e-8, max_iter=100, min_damping=1.0 / 1024, callback=None):
        """Damped Newton with a natural-level-function monotonicity test.

        A step ``U + a dU`` is accepted when the simplified correction
        ``|J(U)^{-1} R(U + a dU)|`` is smaller than ``(1 - a/4) |dU|``; on
        rejection ``a`` is halved. Convergence requires the max-norm of the
        residual to drop below ``tol``.
        """
        U = np.array(U0, dtype=float).reshape(-1)
        R = self.residual(U)
        rnorm = float(np.max(np.abs(R)))
        best = rnorm
        history = [rnorm]
        damping = 1.0
        for it in range(1, max_iter + 1):
            if not np.isfinite(rnorm):
                break
            if rnorm < tol:
                return NewtonResult(U.reshape(self.N + 1, self.m), it - 1, rnorm, history)
            try:
                lu = self.factorize(U)
            except SingularJacobian as exc:
                raise SingularJacobian(str(exc), best, it) from None
            dU = -lu.solve(R)
            dnorm = np.linalg.norm(dU)
            if not np.isfinite(dnorm):
                raise SingularJacobian("non-finite Newton step", best, it)
            damping = min(1.0, 2.0 * damping)
            accepted = False
            while damping >= min_damping:
                Ut = U + damping * dU
                Rt = self.residual(Ut)
                if np.all(np.isfinite(Rt)):
                    dbar = np.linalg.norm(lu.solve(-Rt))
                    rt = float(np.max(np.abs(Rt)))
                    if dbar <= (1.0 - damping / 4.0) * dnorm or rt < tol:
                        accepted = True
                        break
                damping *= 0.5
            if not accepted:
                raise NoConvergence(f"Newton stalled after {it} iterations", best, it)
            U, R, rnorm = Ut, Rt, rt
            best = min(best, rnorm)
            history.append(rnorm)
            if callback is not None:
                callback(it, U, rnorm)
        if rnorm < tol:
            return NewtonResult(U.reshape(self.N + 1, self.m), max_iter, rnorm, history)
        raise NoConvergence(f"no convergence in {max_iter} iterations", best, max_iter)
