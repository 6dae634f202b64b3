"""Characteristic roots of the linearizations at ``f = 0`` and ``f = 1``."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BracketInvalid, DegenerateLeadingCoefficient, InvalidSpec
from .model import ProblemSpec, speed_power, system_order

__all__ = [
    "CharSummary",
    "Bundles",
    "characteristic_poly",
    "roots",
    "bundle_dims",
    "root_collision_lambda",
    "polyval",
]

TOL_CENTER = 1e-9


def characteristic_poly(spec: ProblemSpec, lam: float, equilibrium: int) -> np.ndarray:
    """Coefficients (highest degree first) of ``s_x t^k - s_t lam^l t^l + c``.

    ``c = +1`` at ``equilibrium=0`` and ``-1`` at ``equilibrium=1``.
    """
    if not spec.semilinear:
        raise InvalidSpec("characteristic polynomial needs a semilinear spec")
    if equilibrium not in (0, 1):
        raise ValueError("equilibrium must be 0 or 1")
    deg = system_order(spec, lam)
    coeffs = np.zeros(deg + 1)
    coeffs[deg - spec.k] += spec.s_x
    c = speed_power(spec, lam)
    if spec.l <= deg:
        coeffs[deg - spec.l] -= spec.s_t * c
    coeffs[deg] += 1.0 if equilibrium == 0 else -1.0
    return coeffs


def polyval(coeffs, z):
    return np.polyval(np.asarray(coeffs, dtype=float), z)


def roots(coeffs) -> np.ndarray:
    """All complex roots (with multiplicity) via companion-matrix eigenvalues.

    Roots are polished with a few simultaneous Aberth corrections, which
    keeps clusters apart and improves simple roots to full precision.
    """
    p = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if p.size < 2:
        raise DegenerateLeadingCoefficient("polynomial degree must be >= 1")
    if p[0] == 0.0:
        raise DegenerateLeadingCoefficient("leading coefficient is zero")
    deg = p.size - 1
    comp = np.zeros((deg, deg))
    comp[0, :] = -p[1:] / p[0]
    comp[np.arange(1, deg), np.arange(deg - 1)] = 1.0
    z = np.linalg.eigvals(comp).astype(complex)
    dp = np.polyder(p)
    with np.errstate(all="ignore"):
        z = _aberth_polish(p, dp, z)
    # enforce exact conjugate symmetry for real coefficients
    return _symmetrize(z)


def _aberth_polish(p, dp, z, sweeps=3):
    for _ in range(sweeps):
        pv = np.polyval(p, z)
        dv = np.polyval(dp, z)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        ratio = pv / dv
        step = ratio / (1.0 - ratio * inv.sum(axis=1))
        ok = np.isfinite(step) & (np.abs(np.polyval(p, z - step)) < np.abs(pv))
        if not ok.any():
            break
        z = np.where(ok, z - step, z)
    return z


def _symmetrize(z):
    z = np.array(z, dtype=complex)
    used = np.zeros(z.size, dtype=bool)
    out = z.copy()
    order = np.argsort(-np.abs(z.imag))
    for i in order:
        if used[i]:
            continue
        used[i] = True
        if z[i].imag == 0.0:
            continue
        cand = np.where(~used)[0]
        if cand.size == 0:
            break
        j = cand[np.argmin(np.abs(z[cand] - np.conj(z[i])))]
        if np.abs(z[j] - np.conj(z[i])) <= 1e-6 * (1 + abs(z[i])):
            used[j] = True
            mid = 0.5 * (z[i] + np.conj(z[j]))
            out[i], out[j] = mid, np.conj(mid)
    return out[np.lexsort((out.imag, out.real))]


@dataclass(frozen=True)
class CharSummary:
    equilibrium: int
    roots: np.ndarray = field(repr=False)
    n_minus: int
    n_plus: int
    n_center: int
    tol_center: float

    @classmethod
    def from_roots(cls, equilibrium, rts, tol_center=TOL_CENTER):
        re = np.real(rts)
        return cls(
            equilibrium,
            np.asarray(rts),
            int(np.sum(re < -tol_center)),
            int(np.sum(re > tol_center)),
            int(np.sum(np.abs(re) <= tol_center)),
            tol_center,
        )

    def to_dict(self) -> dict:
        return {
            "equilibrium": self.equilibrium,
            "roots": [[float(r.real), float(r.imag)] for r in self.roots],
            "n_minus": self.n_minus,
            "n_plus": self.n_plus,
            "n_center": self.n_center,
            "tol_center": self.tol_center,
        }


@dataclass(frozen=True)
class Bundles:
    """Summaries at both equilibria plus the shooting balance."""

    at0: CharSummary
    at1: CharSummary
    m: int

    @property
    def balance(self) -> int:
        # stable dim at 0 (+inf end) + unstable dim at 1 (-inf end) - (m + 1)
        return self.at0.n_minus + self.at1.n_plus - (self.m + 1)

    @property
    def has_center(self) -> bool:
        return self.at0.n_center > 0 or self.at1.n_center > 0

    def to_dict(self) -> dict:
        return {"m": self.m, "at0": self.at0.to_dict(), "at1": self.at1.to_dict(),
                "balance": self.balance}


def bundle_dims(spec: ProblemSpec, lam: float, tol_center: float = TOL_CENTER) -> Bundles:
    s0 = CharSummary.from_roots(0, roots(characteristic_poly(spec, lam, 0)), tol_center)
    s1 = CharSummary.from_roots(1, roots(characteristic_poly(spec, lam, 1)), tol_center)
    return Bundles(s0, s1, system_order(spec, lam))


def _n_real(spec, equilibrium, lam):
    rts = roots(characteristic_poly(spec, lam, equilibrium))
    scale = 1.0 + np.abs(rts)
    return int(np.sum(np.abs(rts.imag) <= 1e-7 * scale))


def root_collision_lambda(spec, equilibrium, lam_lo, lam_hi, tol=1e-6, n_scan=400):
    """Smallest speed in ``[lam_lo, lam_hi]`` where a conjugate pair meets the real axis.

    The number of real roots is a step function of the speed that jumps
    by two exactly at a real double root. The bracket is scanned and the
    first jump is refined by bisection. The returned speed is the endpoint
    on the real side, so feeding it back gives a pair with ``|Im| < tol``.
    Returns ``None`` when no collision is found.
    """
    if not lam_lo < lam_hi:
        raise BracketInvalid(f"need lam_lo < lam_hi, got [{lam_lo}, {lam_hi}]")
    grid = np.linspace(lam_lo, lam_hi, n_scan + 1)
    if spec.l > spec.k:
        # the leading coefficient vanishes at lam = 0
        grid = grid[grid != 0.0]
    counts = [_n_real(spec, equilibrium, g) for g in grid]
    for i in range(1, len(grid)):
        if counts[i] == counts[i - 1]:
            continue
        a, b = grid[i - 1], grid[i]
        ca = counts[i - 1]
        width = min(tol, 1e-12) * 1e-1
        while b - a > max(width, 4 * np.finfo(float).eps * max(abs(a), abs(b), 1.0)):
            mid = 0.5 * (a + b)
            if _n_real(spec, equilibrium, mid) == ca:
                a = mid
            else:
                b = mid
        # real side is the one with more real roots
        if counts[i] > ca:
            return float(b)
        return float(a)
    return None
