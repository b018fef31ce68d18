"""Small exact helpers for 2x2 integer matrices and their conjugacy classes."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import gcd

import numpy as np

IDENTITY = ((1, 0), (0, 1))


def as_int_matrix(M) -> tuple[tuple[int, int], tuple[int, int]]:
    a = np.asarray(M)
    if a.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {a.shape}")
    if not np.all(np.asarray(a, dtype=float) == np.round(np.asarray(a, dtype=float))):
        raise ValueError(f"matrix has non-integer entries: {a.tolist()}")
    return ((int(a[0, 0]), int(a[0, 1])), (int(a[1, 0]), int(a[1, 1])))


def det(M) -> int:
    (a, b), (c, d) = as_int_matrix(M)
    return a * d - b * c


def trace(M) -> int:
    (a, _), (_, d) = as_int_matrix(M)
    return a + d


def matmul(A, B):
    (a, b), (c, d) = as_int_matrix(A)
    (e, f), (g, h) = as_int_matrix(B)
    return ((a * e + b * g, a * f + b * h), (c * e + d * g, c * f + d * h))


def inverse(M):
    """Exact inverse of a unimodular integer matrix."""
    (a, b), (c, d) = as_int_matrix(M)
    D = a * d - b * c
    if D not in (1, -1):
        raise ValueError(f"matrix is not unimodular (det={D})")
    return ((d * D, -b * D), (-c * D, a * D))


def transpose(M):
    (a, b), (c, d) = as_int_matrix(M)
    return ((a, c), (b, d))


def product(mats):
    out = IDENTITY
    for M in mats:
        out = matmul(out, M)
    return out


def round_to_integer(X, tol: float):
    """Nearest integer matrix and the max entrywise rounding deviation."""
    X = np.asarray(X, dtype=float)
    R = np.round(X)
    dev = float(np.max(np.abs(X - R)))
    return as_int_matrix(R), dev


def _content(M, shift: int) -> int:
    (a, b), (c, d) = as_int_matrix(M)
    return gcd(gcd(a - shift, b), gcd(c, d - shift))


def invariants(M) -> tuple[int, int, int, int]:
    """Conjugation invariants over GL(2,Z): det, trace and the entry gcd of
    ``M - I`` and ``M + I`` (each is preserved by ``P M P^-1``)."""
    return (det(M), trace(M), _content(M, 1), _content(M, -1))


@lru_cache(maxsize=None)
def _unimodular(bound: int):
    rng = range(-bound, bound + 1)
    out = []
    for a, b, c, d in itertools.product(rng, repeat=4):
        D = a * d - b * c
        if D in (1, -1):
            out.append(((a, b), (c, d)))
    return tuple(out)


def find_conjugator(A, B, bound: int = 5):
    """Return P with ``P A P^-1 == B`` and entries bounded by ``bound``, or None."""
    A = as_int_matrix(A)
    B = as_int_matrix(B)
    for P in _unimodular(bound):
        # P A == B P avoids computing the inverse for every candidate
        if matmul(P, A) == matmul(B, P):
            return P
    return None


@dataclass(frozen=True)
class ConjugacyVerdict:
    equivalent: bool
    decided: bool
    conjugator: tuple | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.equivalent


def conjugacy_search(A, B, bound: int = 5) -> ConjugacyVerdict:
    A = as_int_matrix(A)
    B = as_int_matrix(B)
    if det(A) not in (1, -1) or det(B) not in (1, -1):
        raise ValueError("conjugacy is only defined here for unimodular matrices")
    if invariants(A) != invariants(B):
        return ConjugacyVerdict(False, True, None, f"invariants differ: {invariants(A)} vs {invariants(B)}")
    P = find_conjugator(A, B, bound)
    if P is not None:
        return ConjugacyVerdict(True, True, P, "conjugator found")
    return ConjugacyVerdict(False, False, None, f"undecided within bound {bound}")


@dataclass(frozen=True)
class HolonomyClass:
    """Conjugacy class of a 2x2 unimodular integer matrix, with the loop that produced it."""

    representative: tuple
    loop: tuple = field(default=())

    def __post_init__(self):
        rep = as_int_matrix(self.representative)
        if det(rep) not in (1, -1):
            raise ValueError(f"holonomy must be unimodular, got det={det(rep)}")
        object.__setattr__(self, "representative", rep)
        object.__setattr__(self, "loop", tuple(self.loop))

    @property
    def determinant(self) -> int:
        return det(self.representative)

    @property
    def trace(self) -> int:
        return trace(self.representative)

    @property
    def is_identity(self) -> bool:
        return self.representative == IDENTITY

    def inverse(self) -> "HolonomyClass":
        return HolonomyClass(inverse(self.representative), tuple(reversed(self.loop)))

    def equivalent_to(self, other, bound: int = 5) -> bool:
        rep = other.representative if isinstance(other, HolonomyClass) else other
        return bool(conjugacy_search(self.representative, rep, bound))

    def to_dict(self) -> dict:
        return {
            "representative": [list(r) for r in self.representative],
            "determinant": self.determinant,
            "trace": self.trace,
            "invariants": list(invariants(self.representative)),
            "loop": [x if isinstance(x, (str, int)) else list(map(float, x)) for x in self.loop],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HolonomyClass":
        loop = tuple(tuple(x) if isinstance(x, list) else x for x in d.get("loop", ()))
        return cls(tuple(tuple(r) for r in d["representative"]), loop)
