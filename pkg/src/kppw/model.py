"""Travelling-wave ODE family and the equation catalog.

Every equation handled here has the canonical form::

    s_t * lam**l * f^(l) = s_x * (|f|^n f)^(k) + f (1 - f)

and is rewritten as a first-order system ``U' = G(U; lam)`` with
``U_j = f^(j)`` for ``j = 0 .. m-1``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from fractions import Fraction

import numpy as np

from .errors import InvalidSpec, UnknownEquation

__all__ = [
    "ProblemSpec",
    "NonlinearitySource",
    "CATALOG",
    "catalog_lookup",
    "catalog_table",
    "catalog_json",
    "system_order",
    "speed_power",
    "residual",
    "rhs",
    "rhs_batch",
    "jacobian",
    "jacobian_batch",
]


@dataclass(frozen=True)
class ProblemSpec:
    """One KPP-(k, l) travelling-wave equation."""

    k: int
    l: int
    s_t: int
    s_x: int
    n: Fraction = Fraction(0)
    label: str = ""
    family: str = ""
    tag: str = ""

    def __post_init__(self):
        if self.k < 1 or self.l < 1:
            raise InvalidSpec(f"orders must be >= 1, got k={self.k}, l={self.l}")
        if self.k == self.l:
            raise InvalidSpec(f"k and l must differ, got k=l={self.k}")
        if self.s_t not in (-1, 1) or self.s_x not in (-1, 1):
            raise InvalidSpec("signs must be +1 or -1")
        n = Fraction(self.n)
        if n < 0:
            raise InvalidSpec(f"n must be >= 0, got {n}")
        object.__setattr__(self, "n", n)

    @property
    def m(self) -> int:
        return max(self.k, self.l)

    @property
    def semilinear(self) -> bool:
        return self.n == 0

    def with_n(self, n) -> "ProblemSpec":
        return replace(self, n=Fraction(n))

    def with_signs(self, s_t=None, s_x=None, label=None) -> "ProblemSpec":
        return replace(
            self,
            s_t=self.s_t if s_t is None else s_t,
            s_x=self.s_x if s_x is None else s_x,
            label=self.label if label is None else label,
        )

    def equation_text(self) -> str:
        """Human-readable form of the TW ODE, e.g. ``-lam f' = -f^(11) + f(1-f)``."""
        lhs = _term(self.s_t, f"lam^{self.l}" if self.l > 1 else "lam", self.l)
        inner = "f" if self.n == 0 else f"(|f|^{self.n} f)"
        rhs_ = _term(self.s_x, "", self.k, inner)
        return f"{lhs} = {rhs_} + f(1-f)"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n"] = str(self.n)
        d["m"] = self.m
        d["equation"] = self.equation_text()
        return d


def _term(sign, coef, order, base="f"):
    d = {1: "'", 2: "''", 3: "'''"}.get(order, f"^({order})")
    s = "-" if sign < 0 else ""
    c = f"{coef} " if coef else ""
    return f"{s}{c}{base}{d}"


class NonlinearitySource:
    """The logistic source ``f (1 - f)``."""

    @staticmethod
    def value(f):
        return f * (1.0 - f)

    @staticmethod
    def derivative(f):
        return 1.0 - 2.0 * f


def _entries():
    rows = [
        # family, k, l, s_t, s_x, tag
        ("classic", 2, 1, -1, 1, "1.3"),
        ("parabolic", 4, 1, -1, -1, "1.9"),
        ("parabolic", 6, 1, -1, 1, "1.14"),
        ("parabolic", 8, 1, -1, -1, "1.16"),
        ("parabolic", 10, 1, -1, 1, "1.16"),
        ("dispersion", 11, 1, -1, -1, "1.17"),
        ("dispersion", 11, 3, -1, -1, "1.18"),
        ("dispersion", 11, 5, -1, -1, "1.19"),
        ("dispersion", 11, 7, -1, -1, "1.20"),
        ("dispersion", 11, 9, -1, -1, "1.21"),
        ("dispersion-hyperbolic", 11, 2, 1, -1, "1.22"),
        ("dispersion-hyperbolic", 11, 4, 1, -1, "1.23"),
        ("dispersion-hyperbolic", 11, 6, 1, -1, "1.24"),
        ("dispersion-hyperbolic", 11, 8, 1, -1, "1.25"),
        ("dispersion-hyperbolic", 11, 10, 1, -1, "1.26"),
        ("dispersion-parabolic", 10, 3, -1, -1, "1.27"),
        ("dispersion-parabolic", 10, 5, -1, 1, "1.28"),
        ("dispersion-parabolic", 10, 7, -1, -1, "1.29"),
        ("dispersion-parabolic", 10, 9, -1, 1, "1.30"),
        ("hyperbolic", 10, 2, 1, 1, "1.31"),
        ("hyperbolic", 10, 4, 1, -1, "1.32"),
        ("hyperbolic", 10, 6, 1, 1, "1.33"),
        ("hyperbolic", 10, 8, 1, -1, "1.34"),
        ("elliptic", 10, 2, 1, -1, "1.35"),
        ("elliptic", 10, 4, 1, 1, "1.36"),
        ("elliptic", 10, 6, 1, -1, "1.37"),
        ("high-t", 10, 11, -1, -1, "1.38"),
        ("high-t", 11, 12, 1, -1, "1.39"),
        ("eleventh-t", 1, 11, -1, -1, "1.40"),
        ("eleventh-t", 2, 11, -1, -1, "1.41"),
        ("eleventh-t", 3, 11, -1, -1, "1.42"),
        ("eleventh-t", 4, 11, -1, -1, "1.43"),
        # tag 1.40 with the x-term sign flipped: its lam=0 reduction is
        # f' = -f(1-f), solved exactly by 1/(1+e^y).
        ("classic-decreasing", 1, 11, -1, 1, "1.40*"),
    ]
    out = {}
    for fam, k, l, st, sx, tag in rows:
        out[(fam, k, l)] = ProblemSpec(k, l, st, sx, Fraction(0), f"{fam} KPP-({k},{l})", fam, tag)
    out[("quasilinear", 11, 1)] = ProblemSpec(
        11, 1, -1, -1, Fraction(1), "quasilinear KPP-(11,1)", "quasilinear", "1.44"
    )
    return out


CATALOG: dict[tuple[str, int, int], ProblemSpec] = _entries()


def catalog_lookup(family: str, k: int, l: int) -> ProblemSpec:
    try:
        return CATALOG[(family, int(k), int(l))]
    except KeyError:
        raise UnknownEquation(f"no catalog equation ({family!r}, {k}, {l})") from None


def catalog_by_tag(tag: str) -> list[ProblemSpec]:
    return [s for s in CATALOG.values() if s.tag == tag]


def catalog_table() -> list[dict]:
    return [
        {"name": s.label, "family": s.family, "k": s.k, "l": s.l, "s_t": s.s_t,
         "s_x": s.s_x, "n": str(s.n), "tag": s.tag, "equation": s.equation_text()}
        for s in CATALOG.values()
    ]


def catalog_json(indent=2) -> str:
    return json.dumps(catalog_table(), indent=indent)


def speed_power(spec: ProblemSpec, lam: float) -> float:
    """``lam**l`` computed with sign (odd l keeps the sign of negative speeds)."""
    return float(lam) ** spec.l


def system_order(spec: ProblemSpec, lam: float) -> int:
    """Order of the first-order system at speed ``lam``.

    When ``l > k`` and ``lam == 0`` the leading term drops out and the
    equation reduces to order ``k``.
    """
    if spec.l > spec.k and speed_power(spec, lam) == 0.0:
        return spec.k
    return spec.m


def _check(spec):
    if not spec.semilinear:
        raise InvalidSpec("residual/jacobian are defined for semilinear specs (n = 0) only")


def rhs_batch(spec: ProblemSpec, U: np.ndarray, lam: float) -> np.ndarray:
    """Vectorized ``G(U)`` for states stacked along the first axis, shape (P, m)."""
    _check(spec)
    U = np.asarray(U, dtype=float)
    m = system_order(spec, lam)
    if U.shape[-1] != m:
        raise InvalidSpec(f"state must have {m} components, got {U.shape[-1]}")
    f = U[..., 0]
    src = NonlinearitySource.value(f)
    out = np.empty_like(U)
    out[..., :-1] = U[..., 1:]
    c = speed_power(spec, lam)
    if m == spec.k and (spec.k > spec.l or c == 0.0):
        # s_x f^(k) = s_t c f^(l) - f(1-f)
        top = -src
        if spec.l < m and c != 0.0:
            top = top + spec.s_t * c * U[..., spec.l]
        out[..., -1] = top * spec.s_x
    else:
        # s_t c f^(l) = s_x f^(k) + f(1-f)
        out[..., -1] = (spec.s_x * U[..., spec.k] + src) / (spec.s_t * c)
    return out


def jacobian_batch(spec: ProblemSpec, U: np.ndarray, lam: float) -> np.ndarray:
    """Vectorized ``dG/dU``, shape (P, m, m)."""
    _check(spec)
    U = np.asarray(U, dtype=float)
    m = system_order(spec, lam)
    if U.shape[-1] != m:
        raise InvalidSpec(f"state must have {m} components, got {U.shape[-1]}")
    J = np.zeros(U.shape[:-1] + (m, m))
    idx = np.arange(m - 1)
    J[..., idx, idx + 1] = 1.0
    dsrc = NonlinearitySource.derivative(U[..., 0])
    c = speed_power(spec, lam)
    if m == spec.k and (spec.k > spec.l or c == 0.0):
        J[..., -1, 0] += -dsrc * spec.s_x
        if spec.l < m and c != 0.0:
            J[..., -1, spec.l] += spec.s_t * c * spec.s_x
    else:
        scale = 1.0 / (spec.s_t * c)
        J[..., -1, spec.k] += spec.s_x * scale
        J[..., -1, 0] += dsrc * scale
    return J


def rhs(spec: ProblemSpec, state, lam: float) -> np.ndarray:
    return rhs_batch(spec, np.asarray(state, dtype=float)[None, :], lam)[0]


def residual(spec: ProblemSpec, state, lam: float, derivative=None) -> np.ndarray:
    """Pointwise residual of the first-order system.

    Without ``derivative`` this is the vector field ``G(state)``, which
    vanishes exactly at the equilibria. With ``derivative`` (the sampled
    ``U'``) it returns ``U' - G(U)``, which vanishes wherever a sampled
    function satisfies the ODE.
    """
    g = rhs(spec, state, lam)
    if derivative is None:
        return g
    return np.asarray(derivative, dtype=float) - g


def jacobian(spec: ProblemSpec, state, lam: float) -> np.ndarray:
    return jacobian_batch(spec, np.asarray(state, dtype=float)[None, :], lam)[0]
