"""Speed sweeps with warm starts and solvability bisection for the maximal speed."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bvp import Mesh, WaveProfile, solve
from .errors import BracketInvalid, KPPError, NoConvergence
from .model import ProblemSpec

__all__ = ["Record", "ContinuationBranch", "sweep", "lambda_max", "try_solve"]

log = logging.getLogger(__name__)


@dataclass
class Record:
    lam: float
    profile: WaveProfile | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.profile is not None

    def to_dict(self) -> dict:
        d = {"lambda": self.lam, "ok": self.ok}
        if self.ok:
            d["diagnostics"] = self.profile.diagnostics
        else:
            d["error"] = self.error
        return d


@dataclass
class ContinuationBranch:
    spec: ProblemSpec
    records: list[Record] = field(default_factory=list)
    lambda_max_bracket: tuple[float, float] | None = None
    diagnostics: dict = field(default_factory=dict)

    def add(self, rec: Record):
        self.records.append(rec)
        self.records.sort(key=lambda r: r.lam)

    @property
    def successes(self) -> list[float]:
        return [r.lam for r in self.records if r.ok]

    @property
    def failures(self) -> list[float]:
        return [r.lam for r in self.records if not r.ok]

    def check(self):
        lams = [r.lam for r in self.records]
        assert lams == sorted(lams), "records must be sorted by speed"
        if self.lambda_max_bracket is not None:
            lo, hi = self.lambda_max_bracket
            assert lo < hi
            assert self._outcome(lo) is True and self._outcome(hi) is False

    def _outcome(self, lam):
        for r in self.records:
            if r.lam == lam:
                return r.ok
        return None

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "records": [r.to_dict() for r in self.records],
            "lambda_max_bracket": list(self.lambda_max_bracket) if self.lambda_max_bracket else None,
            "diagnostics": self.diagnostics,
        }


Solver = Callable[..., WaveProfile]


def try_solve(spec, lam, mesh=None, mode=None, warm=None, solver: Solver = solve, **kw) -> Record:
    """One solvability probe: warm start first, then the Heaviside guess.

    The solver itself retries once on a refined mesh, so a failure here
    means three failed Newton runs.
    """
    errors = []
    starts = [warm, None] if warm is not None else [None]
    for guess in starts:
        try:
            return Record(float(lam), solver(spec, lam, mesh, mode, guess, **kw))
        except (NoConvergence, KPPError) as exc:
            errors.append(f"{type(exc).__name__}: {exc}")
    return Record(float(lam), None, "; ".join(errors))


def sweep(spec: ProblemSpec, lams, mesh: Mesh | None = None, mode=None, *,
          warm_start: bool = True, solver: Solver = solve, **kw) -> ContinuationBranch:
    lams = [float(x) for x in lams]
    if not lams:
        raise ValueError("empty speed list")
    if lams != sorted(lams):
        raise ValueError("speed list must be sorted")
    branch = ContinuationBranch(spec)
    last = None
    for lam in lams:
        rec = try_solve(spec, lam, mesh, mode, last if warm_start else None, solver, **kw)
        branch.add(rec)
        if rec.ok:
            last = rec.profile
    branch.diagnostics["mesh"] = _mesh_info(mesh)
    return branch


def _mesh_info(mesh):
    mesh = mesh if mesh is not None else Mesh.uniform()
    return {"L_left": mesh.left, "L_right": mesh.right, "N": mesh.N}


def lambda_max(spec: ProblemSpec, lam_lo: float, lam_hi: float, tol: float,
               mesh: Mesh | None = None, mode=None, *, solver: Solver = solve,
               verify_refined: bool = True, n_probe: int = 3, **kw) -> ContinuationBranch:
    """Bracket the largest solvable speed by bisection on solvability.

    The bracket ``(lam_in, lam_out)`` satisfies: solvable at ``lam_in``,
    unsolvable at ``lam_out``, ``lam_out - lam_in <= tol``. Both ends are
    re-checked on a once-refined mesh, and ``n_probe`` speeds below
    ``lam_in`` are probed; any failure there is reported under
    ``diagnostics['non_monotone']``.
    """
    if not lam_lo < lam_hi:
        raise BracketInvalid(f"need lam_lo < lam_hi, got [{lam_lo}, {lam_hi}]")
    mesh = mesh if mesh is not None else Mesh.uniform()
    branch = ContinuationBranch(spec)
    n_solves = 0

    def probe(lam, warm=None, msh=mesh):
        nonlocal n_solves
        n_solves += 1
        return try_solve(spec, lam, msh, mode, warm, solver, **kw)

    lo = probe(lam_lo)
    if not lo.ok:
        raise BracketInvalid(f"no solution at the lower speed {lam_lo}: {lo.error}")
    hi = probe(lam_hi, lo.profile)
    if hi.ok:
        raise BracketInvalid(f"solution exists at the upper speed {lam_hi}")
    branch.add(lo)
    branch.add(hi)
    while hi.lam - lo.lam > tol:
        mid = probe(0.5 * (lo.lam + hi.lam), lo.profile)
        branch.add(mid)
        if mid.ok:
            lo = mid
        else:
            hi = mid
        assert lo.ok and not hi.ok and lo.lam < hi.lam
        log.info("%s bracket [%g, %g]", spec.label, lo.lam, hi.lam)
    branch.lambda_max_bracket = (lo.lam, hi.lam)
    diag = {"mesh": _mesh_info(mesh), "tol": tol}

    if verify_refined:
        fine = mesh.subdivide(2)
        r_in = probe(lo.lam, lo.profile, fine)
        r_out = probe(hi.lam, lo.profile, fine)
        diag["refined_check"] = {"N": fine.N, "lam_in_ok": r_in.ok, "lam_out_ok": r_out.ok}
        diag["refined_consistent"] = bool(r_in.ok and not r_out.ok)

    non_monotone = []
    for lam in np.linspace(lam_lo, lo.lam, n_probe + 2)[1:-1]:
        if any(r.lam == lam for r in branch.records):
            continue
        rec = probe(float(lam), lo.profile)
        branch.add(rec)
        if not rec.ok:
            non_monotone.append(float(lam))
    diag["non_monotone"] = non_monotone
    diag["n_solves"] = n_solves
    branch.diagnostics = diag
    return branch
