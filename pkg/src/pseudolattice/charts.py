"""Recover lattice charts from a spectrum point cloud.

``fit_micro_chart`` turns the points of one good rectangle into integer
labels plus an affine (optionally quadratic) map k -> chi^-1(mu).
``assemble_pseudo_chart`` aligns many such charts to a common integer frame
and fits a smooth leading term f0 with f0(chi^-1(mu)) ~ h k.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import gl2z
from .errors import (
    AlignmentAmbiguity,
    ChainBroken,
    DegenerateBasis,
    DegenerateLeadingTerm,
    InsufficientPoints,
    NoConvergence,
    OutsideDomain,
    PseudoLatticeError,
)
from .geometry import Domain, Rect, domain_from_dict
from .spectrum import GoodRectangle, SpectrumCloud

MIN_POINTS = 6


@dataclass(frozen=True)
class FitOptions:
    neighbours: int = 8
    cluster: float = 0.1  # cluster radius relative to the shortest difference
    min_sin: float = 0.05
    max_iter: int = 10
    quadratic: bool = True
    rel_tol: float = 1e-3  # residual tolerance relative to the shortest basis vector


@dataclass
class MicroChart:
    rectangle: GoodRectangle | None
    labels: np.ndarray  # (n, 2) integer labels, (0, 0) nearest the centre
    A: np.ndarray  # dx/dk at k = 0, x = chi^-1(mu)
    b: np.ndarray  # x at k = 0
    residual: float
    relative_residual: float
    quadratic: np.ndarray | None  # (2, 3) coefficients of k1^2, k1 k2, k2^2
    points: np.ndarray  # chi^-1 coordinates of the fitted points
    iterations: int = 0
    index: np.ndarray | None = None  # positions of the points in the source cloud

    def predict(self, k) -> np.ndarray:
        k = np.atleast_2d(np.asarray(k, dtype=float))
        x = k @ self.A.T + self.b
        if self.quadratic is not None:
            x = x + _quad_features(k) @ self.quadratic.T
        return x

    def relabel(self, M, n=(0, 0)) -> "MicroChart":
        """Same points with labels k -> M k + n, refit in the new labels."""
        M = np.asarray(M, dtype=float)
        labels = np.rint(self.labels @ M.T + np.asarray(n, dtype=float)).astype(np.int64)
        quad = self.quadratic is not None
        coef, *_ = np.linalg.lstsq(_design(labels.astype(float), quad), self.points, rcond=None)
        Q = coef[3:6].T if quad else None
        return MicroChart(self.rectangle, labels, coef[1:3].T, coef[0], self.residual, self.relative_residual, Q, self.points, self.iterations, self.index)

    def summary(self) -> dict:
        return {
            "rectangle": None if self.rectangle is None else self.rectangle.to_dict(),
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "residual": self.residual,
            "relative_residual": self.relative_residual,
            "points": int(len(self.labels)),
            "iterations": self.iterations,
        }


def _quad_features(k):
    return np.c_[k[:, 0] ** 2, k[:, 0] * k[:, 1], k[:, 1] ** 2]


def gauss_reduce(u, v, max_steps: int = 100):
    """Lagrange-Gauss reduction of a planar lattice basis."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u @ u > v @ v:
        u, v = v, u
    for _ in range(max_steps):
        m = np.round((u @ v) / (u @ u))
        if m == 0:
            break
        v = v - m * u
        if v @ v < u @ u:
            u, v = v, u
        else:
            break
    return u, v


def _canonical(u, v):
    """Order and sign a reduced basis: first vector closest to the E-axis with
    positive E, second with positive G (positive E if horizontal)."""
    cu = abs(u[0]) / np.linalg.norm(u)
    cv = abs(v[0]) / np.linalg.norm(v)
    if cv > cu + 1e-12:
        u, v = v, u
    if u[0] < 0 or (u[0] == 0 and u[1] < 0):
        u = -u
    if v[1] < 0 or (v[1] == 0 and v[0] < 0):
        v = -v
    return u, v


def estimate_basis(x: np.ndarray, opts: FitOptions = FitOptions()):
    """Two lattice vectors from nearest-neighbour difference clusters."""
    n = len(x)
    kq = min(opts.neighbours + 1, n)
    tree = cKDTree(x)
    dist, idx = tree.query(x, k=kq)
    diffs = (x[idx[:, 1:]] - x[:, None, :]).reshape(-1, 2)
    lens = np.linalg.norm(diffs, axis=1)
    good = lens > 0
    diffs, lens = diffs[good], lens[good]
    if len(diffs) == 0:
        raise DegenerateBasis("all points coincide")
    shortest = lens.min()
    first = diffs[np.argmin(lens)]
    group = diffs * np.where(diffs @ first < 0, -1.0, 1.0)[:, None]
    v1 = group[np.linalg.norm(group - first, axis=1) <= opts.cluster * shortest].mean(axis=0)
    # second vector: shortest difference that is not a multiple of v1
    proj = np.round((diffs @ v1) / (v1 @ v1))
    off = np.linalg.norm(diffs - proj[:, None] * v1[None, :], axis=1)
    indep = off > opts.cluster * np.linalg.norm(v1)
    if not np.any(indep):
        raise DegenerateBasis("all difference vectors are parallel")
    d2, l2 = diffs[indep], lens[indep]
    second = d2[np.argmin(l2)]
    g2 = d2 * np.where(d2 @ second < 0, -1.0, 1.0)[:, None]
    g2 = g2[np.linalg.norm(g2 - second, axis=1) <= opts.cluster * np.linalg.norm(second)]
    v2 = g2.mean(axis=0)
    sin = abs(v1[0] * v2[1] - v1[1] * v2[0]) / (np.linalg.norm(v1) * np.linalg.norm(v2))
    if sin < opts.min_sin:
        raise DegenerateBasis(f"shortest independent differences are nearly parallel (|sin| = {sin:.3g})", sin=sin)
    return v1, v2


def _design(k, quadratic):
    cols = [np.ones(len(k)), k[:, 0], k[:, 1]]
    if quadratic:
        cols += [k[:, 0] ** 2, k[:, 0] * k[:, 1], k[:, 1] ** 2]
    return np.column_stack(cols)


def fit_micro_chart(
    cloud: SpectrumCloud,
    h: float,
    eps: float,
    rect: GoodRectangle | None = None,
    options: FitOptions | None = None,
) -> MicroChart:
    """Fit integer labels and an affine lattice map to the points of one rectangle."""
    opts = options or FitOptions()
    pts = np.c_[cloud.points.real, cloud.points.imag / eps]
    n = len(pts)
    if n < MIN_POINTS:
        raise InsufficientPoints(f"{n} points in rectangle, need at least {MIN_POINTS}", points=n)
    if rect is not None:
        centre = np.array([rect.anchor[0], rect.anchor[1]])
    else:
        centre = pts.mean(axis=0)
    # work in units of h about the centre for conditioning
    x = (pts - centre) / h
    v1, v2 = estimate_basis(x, opts)
    u, v = _canonical(*gauss_reduce(v1, v2))
    B = np.column_stack([u, v])
    if abs(np.linalg.det(B)) < 1e-300:
        raise DegenerateBasis("lattice basis is singular")
    origin = int(np.argmin(np.linalg.norm(x, axis=1)))
    x0 = x[origin]
    labels = np.rint((x - x0) @ np.linalg.inv(B).T).astype(np.int64)
    A, b, Q = B, x0, None
    use_quad = False
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        use_quad = opts.quadratic and n >= 12 and it > 1
        D = _design(labels.astype(float), use_quad)
        coef, *_ = np.linalg.lstsq(D, x, rcond=None)
        b = coef[0]
        A = coef[1:3].T
        Q = coef[3:6].T if use_quad else None
        if abs(np.linalg.det(A)) < 1e-12 * np.linalg.norm(A) ** 2:
            raise DegenerateBasis("fitted affine part is singular")
        lin = x - b
        if Q is not None:
            lin = lin - _quad_features(labels.astype(float)) @ Q.T
        new = np.rint(lin @ np.linalg.inv(A).T).astype(np.int64)
        if np.array_equal(new, labels) and (use_quad or not opts.quadratic or n < 12):
            converged = True
            break
        labels = new
    if not converged:
        raise NoConvergence(f"labels did not stabilize within {opts.max_iter} passes", iterations=it)
    if len(np.unique(labels, axis=0)) != n:
        raise NoConvergence("two points received the same label")
    D = _design(labels.astype(float), use_quad)
    fitted = D @ np.vstack([b, A.T] + ([Q.T] if Q is not None else []))
    resid = float(np.max(np.linalg.norm(x - fitted, axis=1)))
    shortest = float(min(np.linalg.norm(A[:, 0]), np.linalg.norm(A[:, 1])))
    rel = resid / shortest
    if rel > opts.rel_tol:
        raise NoConvergence(
            f"residual {rel:.3g} of the lattice spacing exceeds tolerance {opts.rel_tol}",
            relative_residual=rel,
        )
    # labels relative to the point nearest the rectangle centre
    shift = labels[origin].copy()
    labels = labels - shift
    kf = shift.astype(float)
    b_new = b + A @ kf
    A_new = A.copy()
    if Q is not None:
        # x = b + A (k + s) + Q(k + s): re-expand about the new origin
        q = Q
        s1, s2 = kf
        A_new = A_new + np.column_stack([2 * q[:, 0] * s1 + q[:, 1] * s2, q[:, 1] * s1 + 2 * q[:, 2] * s2])
        b_new = b_new + _quad_features(kf[None, :])[0] @ q.T
    return MicroChart(
        rectangle=rect,
        labels=labels,
        A=A_new * h,
        b=centre + b_new * h,
        residual=resid * h,
        relative_residual=rel,
        quadratic=None if Q is None else Q * h,
        points=pts,
        iterations=it,
    )


# ---------------------------------------------------------------------------
# pseudo-charts
# ---------------------------------------------------------------------------


def _poly_terms(degree: int):
    return [(a - b, b) for a in range(1, degree + 1) for b in range(a + 1)]


@dataclass
class LeadingTerm:
    """Polynomial map R^2 -> R^2 in scaled coordinates u = (x - shift) / scale."""

    degree: int
    shift: np.ndarray
    scale: float
    coef: np.ndarray  # (n_terms, 2), terms from _poly_terms (no constant)
    constant: np.ndarray

    def _features(self, x):
        u = (np.atleast_2d(x) - self.shift) / self.scale
        return np.column_stack([u[:, 0] ** a * u[:, 1] ** b for a, b in _poly_terms(self.degree)])

    def __call__(self, x) -> np.ndarray:
        return self._features(x) @ self.coef + self.constant

    def differential(self, x) -> np.ndarray:
        u = (np.atleast_2d(x) - self.shift) / self.scale
        dE = np.column_stack([a * u[:, 0] ** max(a - 1, 0) * u[:, 1] ** b if a else np.zeros(len(u)) for a, b in _poly_terms(self.degree)])
        dG = np.column_stack([b * u[:, 0] ** a * u[:, 1] ** max(b - 1, 0) if b else np.zeros(len(u)) for a, b in _poly_terms(self.degree)])
        J = np.empty((len(u), 2, 2))
        J[:, :, 0] = dE @ self.coef / self.scale
        J[:, :, 1] = dG @ self.coef / self.scale
        return J

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "shift": self.shift.tolist(),
            "scale": self.scale,
            "terms": [list(t) for t in _poly_terms(self.degree)],
            "coef": self.coef.tolist(),
            "constant": self.constant.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "LeadingTerm":
        return cls(int(d["degree"]), np.asarray(d["shift"]), float(d["scale"]), np.asarray(d["coef"]), np.asarray(d["constant"]))


@dataclass
class PseudoChart:
    domain: Domain
    anchors: np.ndarray
    micro_charts: list
    frames: list  # integer matrix per anchor, own labels -> common labels
    leading_term: LeadingTerm
    alignment_frame: tuple
    h: float
    eps: float
    name: str = ""
    alignment_deviation: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fit_residual: float = 0.0

    def differential(self, c) -> np.ndarray:
        return self.leading_term.differential(c)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "domain": self.domain.to_dict(),
            "anchors": self.anchors.tolist(),
            "frames": [[list(r) for r in F] for F in self.frames],
            "alignment_frame": [list(r) for r in self.alignment_frame],
            "alignment_deviation": np.asarray(self.alignment_deviation).tolist(),
            "leading_term": self.leading_term.to_dict(),
            "fit_residual": self.fit_residual,
            "h": self.h,
            "eps": self.eps,
            "micro_charts": [m.summary() for m in self.micro_charts],
        }

    @classmethod
    def from_dict(cls, d) -> "PseudoChart":
        return cls(
            domain=domain_from_dict(d["domain"]),
            anchors=np.asarray(d["anchors"], dtype=float),
            micro_charts=[],
            frames=[tuple(tuple(r) for r in F) for F in d["frames"]],
            leading_term=LeadingTerm.from_dict(d["leading_term"]),
            alignment_frame=tuple(tuple(r) for r in d["alignment_frame"]),
            h=float(d["h"]),
            eps=float(d["eps"]),
            name=d.get("name", ""),
            alignment_deviation=np.asarray(d.get("alignment_deviation", [])),
            fit_residual=float(d.get("fit_residual", 0.0)),
        )


def _anchor_graph(anchors: np.ndarray, radius: float):
    tree = cKDTree(anchors)
    return [set(tree.query_ball_point(a, radius)) - {i} for i, a in enumerate(anchors)]


def _connected(adj, start=0) -> set:
    seen = {start}
    todo = deque([start])
    while todo:
        i = todo.popleft()
        for j in adj[i]:
            if j not in seen:
                seen.add(j)
                todo.append(j)
    return seen


def _round_frame(X, what: str, tol: float = 0.2):
    M, _ = gl2z.round_to_integer(X, tol)
    dev = float(np.max(np.abs(np.asarray(X) - np.asarray(M, dtype=float))))
    if dev >= tol:
        raise AlignmentAmbiguity(f"{what}: no integer matrix within {tol} (deviation {dev:.3g})", deviation=dev)
    if gl2z.det(M) not in (1, -1):
        raise AlignmentAmbiguity(f"{what}: nearest integer matrix {M} is not unimodular")
    return M, dev


def assemble_pseudo_chart(
    cloud: SpectrumCloud,
    anchors,
    h: float,
    eps: float,
    C: float = 10.0,
    delta: float | None = None,
    degree: int = 3,
    link_radius: float = 0.05,
    frame=None,
    reference: int | None = None,
    domain: Domain | None = None,
    ridge: float = 1e-8,
    fit_options: FitOptions | None = None,
    tol: float = 0.2,
    name: str = "",
    micro_charts=None,
) -> PseudoChart:
    """Fit, align and merge micro-charts at ``anchors`` into one pseudo-chart.

    ``frame`` optionally fixes the integer frame of the reference rectangle
    by a target differential (e.g. an action-map Jacobian or another
    pseudo-chart's differential at the reference anchor).  Already fitted
    ``micro_charts`` (one per anchor) skip the per-rectangle fits.
    """
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    m = len(anchors)
    if m < 3:
        raise InsufficientPoints(f"need at least 3 anchors, got {m}")
    delta = cloud.delta if delta is None else delta
    adj = _anchor_graph(anchors, link_radius)
    if reference is None:
        centre = anchors.mean(axis=0)
        reference = int(np.argmin(np.linalg.norm(anchors - centre, axis=1)))
    reach = _connected(adj, reference)
    if len(reach) != m:
        missing = sorted(set(range(m)) - reach)
        raise ChainBroken(
            f"anchor overlap graph is disconnected: {len(missing)} of {m} anchors unreachable",
            unreachable=[anchors[i].tolist() for i in missing[:5]],
        )

    if micro_charts is not None:
        if len(micro_charts) != m:
            raise ValueError(f"{len(micro_charts)} micro-charts for {m} anchors")
        anchors_iter = ()
        charts = list(micro_charts)
    else:
        anchors_iter = anchors
        charts = []
    for a in anchors_iter:
        rect = GoodRectangle((float(a[0]), float(a[1])), eps, h, delta, C)
        sub = cloud.restrict(rect)
        try:
            charts.append(fit_micro_chart(sub, h, eps, rect, fit_options))
        except PseudoLatticeError as exc:
            exc.context.setdefault("anchor", a.tolist())
            exc.args = (f"rectangle at anchor ({a[0]:.6g}, {a[1]:.6g}): {exc.args[0]}",)
            raise

    frames = [None] * m
    dev = np.zeros(m)
    if frame is not None:
        T, dev[reference] = _round_frame(np.asarray(frame, dtype=float) @ charts[reference].A / h, "reference frame", tol)
    else:
        T = gl2z.IDENTITY
    frames[reference] = T

    # Prim-style sweep: always attach the unaligned anchor closest to an aligned one
    aligned = [reference]
    pending = set(range(m)) - {reference}
    tree_dist = np.full(m, np.inf)
    parent = np.full(m, -1)

    def relax(i):
        for j in adj[i]:
            if j in pending:
                d = np.linalg.norm(anchors[i] - anchors[j])
                if d < tree_dist[j]:
                    tree_dist[j] = d
                    parent[j] = i

    relax(reference)
    while pending:
        j = min(pending, key=lambda q: (tree_dist[q], q))
        i = int(parent[j])
        Ai = charts[i].A @ np.linalg.inv(np.asarray(frames[i], dtype=float))
        X = np.linalg.inv(Ai) @ charts[j].A
        frames[j], dev[j] = _round_frame(X, f"aligning anchor {anchors[j].tolist()} to {anchors[i].tolist()}", tol)
        pending.discard(j)
        aligned.append(j)
        relax(j)

    lead, resid = _fit_leading_term(charts, frames, h, degree, ridge, reference)
    dets = np.linalg.det(lead.differential(anchors))
    if np.any(np.sign(dets) != np.sign(dets[0])) or np.min(np.abs(dets)) < 1e-8:
        raise DegenerateLeadingTerm("fitted leading term is not a diffeomorphism on the anchors", dets=dets.tolist())
    if domain is None:
        w = h**delta / C
        domain = Rect(anchors[:, 0].min() - w, anchors[:, 0].max() + w, anchors[:, 1].min() - w, anchors[:, 1].max() + w)
    return PseudoChart(domain, anchors, charts, frames, lead, frames[reference], h, eps, name, dev, resid)


def _fit_leading_term(charts, frames, h, degree, ridge, reference):
    xs, ys, owner, weights = [], [], [], []
    for r, (mc, T) in enumerate(zip(charts, frames)):
        k = mc.labels @ np.asarray(T, dtype=float).T
        xs.append(mc.points)
        ys.append(h * k)
        owner.append(np.full(len(k), r))
        weights.append(np.full(len(k), 1.0 / np.sqrt(len(k))))
    x = np.vstack(xs)
    y = np.vstack(ys)
    owner = np.concatenate(owner)
    wts = np.concatenate(weights)
    shift = x.mean(axis=0)
    scale = float(np.max(np.abs(x - shift))) or 1.0
    lead = LeadingTerm(degree, shift, scale, np.zeros((len(_poly_terms(degree)), 2)), np.zeros(2))
    F = lead._features(x)
    R = len(charts)
    ind = np.zeros((len(x), R))
    ind[np.arange(len(x)), owner] = 1.0
    D = np.hstack([F, ind]) * wts[:, None]
    Y = y * wts[:, None]
    nf = F.shape[1]
    # ridge relative to the information left after removing per-rectangle intercepts
    Fw = F * wts[:, None]
    means = np.zeros((R, nf))
    np.add.at(means, owner, Fw * wts[:, None])
    means /= np.bincount(owner, weights=wts**2, minlength=R)[:, None]
    within = Fw - means[owner] * wts[:, None]
    scale_ridge = ridge * float(np.trace(within.T @ within)) / nf
    reg = np.zeros((nf, nf + R))
    reg[:, :nf] = np.sqrt(scale_ridge) * np.eye(nf)
    D = np.vstack([D, reg])
    Y = np.vstack([Y, np.zeros((nf, 2))])
    sol, *_ = np.linalg.lstsq(D, Y, rcond=None)
    coef = sol[:nf]
    intercepts = sol[nf:]
    pred = F @ coef + intercepts[owner]
    resid = float(np.max(np.abs(pred - y)))
    return LeadingTerm(degree, shift, scale, coef, intercepts[reference]), resid


def leading_term_differential(pc: PseudoChart, c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if not pc.domain.contains(c)[0]:
        raise OutsideDomain(f"{c.tolist()} is outside the pseudo-chart domain")
    J = pc.leading_term.differential(c[None, :])[0]
    if abs(np.linalg.det(J)) < 1e-12:
        raise DegenerateLeadingTerm(f"leading term is singular at {c.tolist()}")
    return J
