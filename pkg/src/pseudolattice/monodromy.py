"""Integer transition cocycles between pseudo-charts and their loop holonomy."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import gl2z
from .charts import PseudoChart
from .errors import (
    CocycleViolation,
    InconsistentSamples,
    MissingEdge,
    NonIntegerTransition,
    NonUnimodular,
    NoOverlap,
    NotALoop,
)
from .geometry import Domain, as_points, domain_from_dict

TRANSITION_TOL = 0.2
SPREAD_TOL = 0.2


@dataclass(frozen=True)
class Covering:
    """Named open sets plus their overlap graph and triple overlaps.

    Build one with :func:`covering_from_domains` unless the edges are known.
    """

    opens: tuple  # ((identifier, Domain), ...)
    edges: tuple = ()  # ((i, j), ...) with i listed before j in ``opens``
    triples: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "opens", tuple((str(i), d) for i, d in self.opens))
        object.__setattr__(self, "edges", tuple(tuple(map(str, e)) for e in self.edges))
        object.__setattr__(self, "triples", tuple(tuple(map(str, t)) for t in self.triples))
        names = self.ids
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate open-set identifiers in {names}")
        for e in self.edges + self.triples:
            for x in e:
                if x not in names:
                    raise ValueError(f"unknown open set {x!r}")

    @property
    def ids(self) -> tuple:
        return tuple(i for i, _ in self.opens)

    def domain(self, ident: str) -> Domain:
        return dict(self.opens)[ident]

    def has_edge(self, i: str, j: str) -> bool:
        return (i, j) in self.edges or (j, i) in self.edges

    def contains(self, c) -> np.ndarray:
        pts = as_points(c)
        ok = np.zeros(len(pts), dtype=bool)
        for _, d in self.opens:
            ok |= d.contains(pts)
        return ok

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        b = np.array([d.bounds for _, d in self.opens])
        return (b[:, 0].min(), b[:, 1].max(), b[:, 2].min(), b[:, 3].max())

    def is_connected(self) -> bool:
        if not self.opens:
            return True
        seen, todo = {self.ids[0]}, [self.ids[0]]
        while todo:
            i = todo.pop()
            for a, b in self.edges:
                for x, y in ((a, b), (b, a)):
                    if x == i and y not in seen:
                        seen.add(y)
                        todo.append(y)
        return len(seen) == len(self.opens)

    def to_dict(self) -> dict:
        return {
            "opens": [{"id": i, "domain": d.to_dict()} for i, d in self.opens],
            "edges": [list(e) for e in self.edges],
            "triples": [list(t) for t in self.triples],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Covering":
        opens = tuple((o["id"], domain_from_dict(o["domain"])) for o in d["opens"])
        if "edges" not in d:
            return covering_from_domains(opens)
        return cls(opens, tuple(map(tuple, d["edges"])), tuple(map(tuple, d.get("triples", ()))))


def _probe(opens, resolution: int) -> np.ndarray:
    b = np.array([d.bounds for _, d in opens])
    xs = np.linspace(b[:, 0].min(), b[:, 1].max(), resolution)
    ys = np.linspace(b[:, 2].min(), b[:, 3].max(), resolution)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return np.c_[X.ravel(), Y.ravel()]


def covering_from_domains(opens: Sequence, resolution: int = 200) -> Covering:
    """Detect pairwise and triple overlaps by probing a grid over the covering."""
    opens = tuple((str(i), d) for i, d in opens)
    if not opens:
        return Covering(())
    pts = _probe(opens, resolution)
    member = {i: d.contains(pts) for i, d in opens}
    ids = [i for i, _ in opens]
    edges = tuple((a, b) for a, b in itertools.combinations(ids, 2) if np.any(member[a] & member[b]))
    triples = tuple(
        (a, b, c) for a, b, c in itertools.combinations(ids, 3) if np.any(member[a] & member[b] & member[c])
    )
    return Covering(opens, edges, triples)


def _edge_key(i: str, j: str) -> str:
    return f"{i}->{j}"


@dataclass
class TransitionCocycle:
    """Integer transition matrices ``M_ij`` on every directed edge of a covering."""

    covering: Covering
    matrices: dict = field(default_factory=dict)  # (i, j) -> integer matrix
    pre_round_deviation: dict = field(default_factory=dict)  # (i, j) -> float
    spread: dict = field(default_factory=dict)
    triple_checks: dict = field(default_factory=dict)  # (i, j, k) -> bool

    def matrix(self, i: str, j: str):
        if i == j:
            return gl2z.IDENTITY
        try:
            return self.matrices[(i, j)]
        except KeyError:
            raise MissingEdge(f"no transition between {i!r} and {j!r}", edge=(i, j)) from None

    def to_dict(self) -> dict:
        return {
            "covering": self.covering.to_dict(),
            "matrices": {_edge_key(*e): [list(r) for r in M] for e, M in sorted(self.matrices.items())},
            "pre_round_deviation": {_edge_key(*e): v for e, v in sorted(self.pre_round_deviation.items())},
            "spread": {_edge_key(*e): v for e, v in sorted(self.spread.items())},
            "triple_checks": {",".join(t): ok for t, ok in sorted(self.triple_checks.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TransitionCocycle":
        def edges(m):
            return {tuple(k.split("->")): v for k, v in m.items()}

        mats = {e: gl2z.as_int_matrix(M) for e, M in edges(d["matrices"]).items()}
        trip = {tuple(k.split(",")): bool(v) for k, v in d.get("triple_checks", {}).items()}
        return cls(
            Covering.from_dict(d["covering"]),
            mats,
            edges(d.get("pre_round_deviation", {})),
            edges(d.get("spread", {})),
            trip,
        )


def shared_points(pc_i: PseudoChart, pc_j: PseudoChart) -> np.ndarray:
    """Anchors of either chart lying in both chart domains (deduplicated)."""
    pts = np.vstack([pc_i.anchors, pc_j.anchors])
    ok = pc_i.domain.contains(pts) & pc_j.domain.contains(pts)
    pts = pts[ok]
    if len(pts) == 0:
        return pts
    return np.unique(np.round(pts, 12), axis=0)


@dataclass(frozen=True)
class Transition:
    matrix: tuple
    deviation: float
    spread: float
    samples: int


def transition_details(pc_i: PseudoChart, pc_j: PseudoChart, samples: int = 16) -> Transition:
    if samples < 1:
        raise ValueError("samples must be positive")
    pts = shared_points(pc_i, pc_j)
    if len(pts) == 0:
        raise NoOverlap(f"pseudo-charts {pc_i.name!r} and {pc_j.name!r} share no evaluation points")
    if len(pts) > samples:
        pts = pts[np.linspace(0, len(pts) - 1, samples).round().astype(int)]
    Di = pc_i.differential(pts)
    Dj = pc_j.differential(pts)
    raw = Di @ np.linalg.inv(Dj)
    mean = raw.mean(axis=0)
    spread = float(np.max(np.abs(raw - mean)))
    where = f"between {pc_i.name!r} and {pc_j.name!r}"
    if spread >= SPREAD_TOL:
        raise InconsistentSamples(f"transition {where} varies by {spread:.3g} across samples", spread=spread)
    M, _ = gl2z.round_to_integer(mean, TRANSITION_TOL)
    dev = float(np.max(np.abs(raw - np.asarray(M, dtype=float))))
    if dev >= TRANSITION_TOL:
        raise NonIntegerTransition(f"transition {where} is {dev:.3g} away from an integer matrix", deviation=dev)
    if gl2z.det(M) not in (1, -1):
        raise NonUnimodular(f"transition {where} rounds to {M} with det {gl2z.det(M)}")
    return Transition(M, dev, spread, len(pts))


def transition_matrix(pc_i: PseudoChart, pc_j: PseudoChart, samples: int = 16):
    """Integer matrix nearest to ``d f_i (d f_j)^-1`` averaged over shared points."""
    return transition_details(pc_i, pc_j, samples).matrix


def verify_cocycle(cocycle: TransitionCocycle) -> TransitionCocycle:
    """Check antisymmetry and the triple-overlap identity exactly; raise on failure."""
    for (i, j), M in cocycle.matrices.items():
        back = cocycle.matrices.get((j, i))
        if back is not None and gl2z.matmul(M, back) != gl2z.IDENTITY:
            raise CocycleViolation(f"M[{j},{i}] is not the inverse of M[{i},{j}]", edge=(i, j))
    checks = {}
    for a, b, c in cocycle.covering.triples:
        for i, j, k in itertools.permutations((a, b, c)):
            lhs = cocycle.matrix(i, k)
            rhs = gl2z.matmul(cocycle.matrix(i, j), cocycle.matrix(j, k))
            if lhs != rhs:
                raise CocycleViolation(
                    f"cocycle identity fails on triple ({i}, {j}, {k}): {lhs} != {rhs}", triple=(i, j, k)
                )
        checks[(a, b, c)] = True
    cocycle.triple_checks = checks
    return cocycle


def build_cocycle(charts: Mapping[str, PseudoChart], covering: Covering, samples: int = 16) -> TransitionCocycle:
    """Transition matrices on every edge (both directions), then exact checks."""
    cocycle = TransitionCocycle(covering)
    for i, j in covering.edges:
        for a, b in ((i, j), (j, i)):
            if a not in charts or b not in charts:
                raise MissingEdge(f"edge ({a}, {b}) lacks a fitted pseudo-chart", edge=(a, b))
            t = transition_details(charts[a], charts[b], samples)
            cocycle.matrices[(a, b)] = t.matrix
            cocycle.pre_round_deviation[(a, b)] = t.deviation
            cocycle.spread[(a, b)] = t.spread
    return verify_cocycle(cocycle)


def _normalise_loop(loop) -> list:
    ids = [str(x) for x in loop]
    if len(ids) >= 2 and ids[0] == ids[-1]:
        ids = ids[:-1]
    if not ids:
        raise NotALoop("a loop needs at least one open set")
    return ids


def holonomy(cocycle: TransitionCocycle, loop) -> gl2z.HolonomyClass:
    """Ordered product ``M_{l0 l1} M_{l1 l2} ... M_{ln l0}`` around a cyclic loop."""
    ids = _normalise_loop(loop)
    known = set(cocycle.covering.ids)
    for x in ids:
        if x not in known:
            raise NotALoop(f"{x!r} is not an open set of the covering")
    mats = [cocycle.matrix(a, b) for a, b in zip(ids, ids[1:] + ids[:1])]
    return gl2z.HolonomyClass(gl2z.product(mats), tuple(ids))


def conjugacy_equivalent(A, B, bound: int = 5) -> bool:
    return bool(gl2z.conjugacy_search(A, B, bound))


def adjoint_compare(spectral: gl2z.HolonomyClass, classical: gl2z.HolonomyClass, bound: int = 5) -> bool:
    """True when the spectral class is that of the transpose-inverse of the classical one."""
    target = gl2z.transpose(gl2z.inverse(classical.representative))
    return conjugacy_equivalent(spectral.representative, target, bound)


def lambda_invariance_check(model_factory, lambdas, covering: Covering, loop, params, settings=None) -> bool:
    """Run the spectral pipeline per lambda; true iff all edge matrices agree exactly.

    Frames are fixed by the first lambda's pseudo-charts so that the
    comparison is between matrices in the same alignment.
    """
    from .pipeline import SpectralSettings, spectral_monodromy

    settings = settings or SpectralSettings()
    reference = None
    first = None
    for lam in lambdas:
        try:
            run = spectral_monodromy(model_factory(lam), covering, loop, settings, params, reference)
        except Exception as exc:
            if hasattr(exc, "context"):
                exc.context["lam"] = lam
            exc.args = (f"lambda={lam}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
            raise
        if first is None:
            first, reference = run.cocycle.matrices, run.charts
        elif run.cocycle.matrices != first:
            return False
    return True
