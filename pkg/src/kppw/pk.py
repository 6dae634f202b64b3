"""Exact construction of the operators ``P_k`` with polynomial-in-gamma coefficients.

``P_0[phi] = phi`` and ``P_{k+1}[phi] = (P_k[phi])' + (gamma - k) P_k[phi]``.
They satisfy ``d^k/dy^k [(y0-y)^gamma phi(s)] = (-1)^k (y0-y)^(gamma-k) P_k[phi](s)``
with ``s = ln(y0 - y)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = ["GammaPoly", "PkOperator", "pk_build", "pk_eval", "pk_apply", "falling_factorial"]


@dataclass(frozen=True)
class GammaPoly:
    """Integer polynomial ``c_0 + c_1 g + ... + c_d g^d`` (coefficients ascending)."""

    coeffs: tuple[int, ...] = ()

    def __post_init__(self):
        c = [int(x) for x in self.coeffs]
        if any(int(x) != x for x in self.coeffs):
            raise TypeError("coefficients must be integers")
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def const(cls, c: int) -> "GammaPoly":
        return cls((c,))

    @classmethod
    def gamma_minus(cls, k: int) -> "GammaPoly":
        return cls((-k, 1))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1  # -1 for the zero polynomial

    def is_zero(self) -> bool:
        return not self.coeffs

    def __add__(self, other: "GammaPoly") -> "GammaPoly":
        a, b = self.coeffs, other.coeffs
        n = max(len(a), len(b))
        return GammaPoly(tuple((a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0)
                               for i in range(n)))

    def __sub__(self, other: "GammaPoly") -> "GammaPoly":
        return self + GammaPoly(tuple(-c for c in other.coeffs))

    def __mul__(self, other: "GammaPoly") -> "GammaPoly":
        if self.is_zero() or other.is_zero():
            return GammaPoly()
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return GammaPoly(tuple(out))

    def __call__(self, gamma):
        """Exact value for int/Fraction arguments (Horner); float otherwise."""
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * gamma + c
        return acc

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        terms = []
        for p in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[p]
            if c == 0:
                continue
            mag = abs(c)
            mono = "" if p == 0 else ("g" if p == 1 else f"g^{p}")
            body = str(mag) if (mag != 1 or p == 0) else ""
            if body and mono:
                body += "*"
            sign = "-" if c < 0 else "+"
            terms.append((sign, body + mono))
        first_sign, first = terms[0]
        s = ("-" if first_sign == "-" else "") + first
        for sign, t in terms[1:]:
            s += f" {sign} {t}"
        return s


def falling_factorial(K: int) -> GammaPoly:
    """``g (g-1) ... (g-K+1)``."""
    p = GammaPoly.const(1)
    for j in range(K):
        p = p * GammaPoly.gamma_minus(j)
    return p


@dataclass(frozen=True)
class PkOperator:
    """``P_K[phi] = sum_j a_{K,j}(gamma) phi^(j)``; ``coeffs[j]`` is ``a_{K,j}``."""

    K: int
    coeffs: tuple[GammaPoly, ...]

    def check(self):
        assert len(self.coeffs) == self.K + 1
        assert self.coeffs[self.K] == GammaPoly.const(1)
        for j, a in enumerate(self.coeffs):
            assert a.degree == self.K - j, (self.K, j, a.degree)
        assert self.coeffs[0] == falling_factorial(self.K)

    def text(self) -> str:
        parts = []
        for j in range(self.K, -1, -1):
            d = "phi" if j == 0 else f"phi^({j})"
            parts.append(f"({self.coeffs[j]}) {d}")
        return f"P_{self.K}[phi] = " + " + ".join(parts)

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "variable": "gamma",
            "coefficients": {str(j): [str(c) for c in a.coeffs] for j, a in enumerate(self.coeffs)},
            "text": self.text(),
        }

    def to_json(self, indent=2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def _step(prev: tuple[GammaPoly, ...], k: int) -> tuple[GammaPoly, ...]:
    # a_{k+1,j} = a_{k,j-1} + (g - k) a_{k,j}
    zero = GammaPoly()
    shift = GammaPoly.gamma_minus(k)
    out = []
    for j in range(k + 2):
        lower = prev[j - 1] if j >= 1 else zero
        same = prev[j] * shift if j <= k else zero
        out.append(lower + same)
    return tuple(out)


@lru_cache(maxsize=None)
def pk_build(K: int) -> PkOperator:
    if K < 0:
        raise ValueError(f"K must be >= 0, got {K}")
    coeffs: tuple[GammaPoly, ...] = (GammaPoly.const(1),)
    for k in range(K):
        coeffs = _step(coeffs, k)
    return PkOperator(K, coeffs)


def pk_eval(op: PkOperator, gamma) -> np.ndarray:
    """Coefficient vector ``[a_{K,0}(gamma), ..., a_{K,K}(gamma)]`` as floats.

    Evaluation is exact for rational ``gamma`` and rounded once at the end.
    """
    g = Fraction(gamma)
    return np.array([float(a(g)) for a in op.coeffs])


def pk_apply(op: PkOperator, gamma, derivative_samples) -> float:
    """``sum_j a_{K,j}(gamma) phi^(j)`` for samples ``[phi, phi', ..., phi^(K)]``."""
    d = np.asarray(derivative_samples, dtype=float)
    if d.shape[0] != op.K + 1:
        raise ValueError(f"need {op.K + 1} derivative samples, got {d.shape[0]}")
    out = np.tensordot(pk_eval(op, gamma), d, axes=(0, 0))
    return float(out) if out.ndim == 0 else out
