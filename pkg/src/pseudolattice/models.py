"""Integrable and quasi-integrable systems described in value space.

A model is the data needed downstream: the regular region of the (E, G)
plane, local action maps c -> xi with their Jacobians, the inverse maps
xi -> c, frequencies and torus averages.  Chart domains are identified by
short strings; each identifier selects one smooth branch of the action map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import _champagne, gl2z
from .errors import (
    NonIntegerTransition,
    NonUnimodular,
    NoOverlap,
    OpenLoop,
    OutsideRegularRegion,
    SingularMatrix,
)
from .geometry import Disk, Domain, Rect, Region, as_points

TWO_PI = 2.0 * np.pi

ActionFn = Callable[[np.ndarray, str], tuple[np.ndarray, np.ndarray]]
ValueFn = Callable[[np.ndarray, str, "np.ndarray | None"], np.ndarray]


@dataclass(frozen=True)
class SymbolModel:
    """Value-space description of a (possibly perturbed) integrable system.

    ``action_provider(c, domain)`` returns ``(xi, J)`` with ``xi`` of shape
    (n, 2) and ``J`` of shape (n, 2, 2), the Jacobian of the inverse action
    map.  ``value_provider(xi, domain, guess)`` inverts it.
    """

    name: str
    region: Region
    critical_values: tuple[tuple[float, float], ...]
    domains: tuple[str, ...]
    action_provider: ActionFn = field(repr=False)
    value_provider: ValueFn = field(repr=False)
    domain_selector: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    cut_distance: Callable[[np.ndarray, str], np.ndarray] | None = field(default=None, repr=False)
    maslov: Mapping[str, tuple[int, int]] = field(default_factory=dict)
    action_offset: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    lam: float = 0.0
    p1_average_provider: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]] | None = field(default=None, repr=False)
    exclusion_radius: float = 0.05
    params: Mapping[str, object] = field(default_factory=dict)

    # -- chart-domain bookkeeping -------------------------------------------
    def domain_of(self, c) -> str:
        return str(self.domain_selector(as_points(c))[0])

    def eta(self, domain: str) -> np.ndarray:
        return np.asarray(self.maslov.get(domain, (0, 0)), dtype=float)

    def tau(self, domain: str) -> np.ndarray:
        return np.asarray(self.action_offset.get(domain, (0.0, 0.0)), dtype=float)

    def near_critical(self, c, radius: float = 0.0) -> np.ndarray:
        pts = as_points(c)
        hit = np.zeros(len(pts), dtype=bool)
        for cv in self.critical_values:
            hit |= np.hypot(pts[:, 0] - cv[0], pts[:, 1] - cv[1]) < self.exclusion_radius + radius
        return hit

    def is_regular(self, c) -> np.ndarray:
        return self.region.contains(c) & ~self.near_critical(c)

    def check_regular(self, c, domain: str | None = None) -> np.ndarray:
        pts = as_points(c)
        bad = ~self.is_regular(pts)
        if domain is not None and self.cut_distance is not None:
            bad |= self.cut_distance(pts, domain) <= 0
        if np.any(bad):
            raise OutsideRegularRegion(
                f"{int(bad.sum())} value(s) outside the regular region of {self.name}",
                first=pts[bad][0].tolist(),
            )
        return pts

    # -- providers ------------------------------------------------------------
    def actions(self, c, domain: str | None = None):
        pts = self.check_regular(c, domain)
        dom = domain or self.domain_of(pts[0])
        return self.action_provider(pts, dom)

    def values(self, xi, domain: str, guess=None) -> np.ndarray:
        """Inverse action map xi -> c = (p(xi), <q>(xi))."""
        return self.value_provider(as_points(xi), domain, None if guess is None else as_points(guess))

    def energy(self, xi, domain: str, guess=None) -> np.ndarray:
        return self.values(xi, domain, guess)[:, 0]

    def average_q(self, xi, domain: str, guess=None) -> np.ndarray:
        return self.values(xi, domain, guess)[:, 1]

    def frequency_at(self, c, domain: str | None = None) -> np.ndarray:
        """Unperturbed frequency at regular values: first row of (dphi^-1)^-1."""
        _, J = self.actions(c, domain)
        return np.linalg.inv(J)[:, 0, :]

    def frequency(self, xi, domain: str, guess=None) -> np.ndarray:
        c = self.values(xi, domain, guess)
        return self.frequency_at(c, domain)

    def p1_average(self, xi):
        """``(<p1>(xi), grad <p1>(xi))``; zero when no perturbation is set."""
        xi = as_points(xi)
        if self.p1_average_provider is None:
            return np.zeros(len(xi)), np.zeros_like(xi)
        return self.p1_average_provider(xi)

    def perturbed_frequency(self, xi, domain: str, guess=None) -> np.ndarray:
        _, grad = self.p1_average(xi)
        return self.frequency(xi, domain, guess) + self.lam * grad

    def with_perturbation(self, lam: float, p1_average=None) -> "SymbolModel":
        from dataclasses import replace

        provider = p1_average if p1_average is not None else self.p1_average_provider
        return replace(self, lam=float(lam), p1_average_provider=provider)

    def with_metadata(self, maslov=None, action_offset=None) -> "SymbolModel":
        from dataclasses import replace

        return replace(
            self,
            maslov=dict(maslov) if maslov is not None else self.maslov,
            action_offset=dict(action_offset) if action_offset is not None else self.action_offset,
        )


# ---------------------------------------------------------------------------
# concrete models
# ---------------------------------------------------------------------------


def _single_domain(pts):
    return np.full(len(pts), "global", dtype=object)


def _square_p1(index: int):
    def provider(xi):
        grad = np.zeros_like(xi)
        grad[:, index] = 2.0 * xi[:, index]
        return xi[:, index] ** 2, grad

    return provider


def flat_model(shear, offset=(0.0, 0.0), bounds: float = 5.0) -> SymbolModel:
    """Globally affine action map xi = shear @ c + offset, no critical values."""
    S = np.asarray(shear, dtype=float)
    if S.shape != (2, 2):
        raise ValueError("shear must be 2x2")
    if abs(np.linalg.det(S)) < 1e-14:
        raise SingularMatrix(f"shear {S.tolist()} is singular")
    o = np.asarray(offset, dtype=float)
    S_inv = np.linalg.inv(S)

    def action(pts, dom):
        return pts @ S.T + o, np.broadcast_to(S, (len(pts), 2, 2)).copy()

    def value(xi, dom, guess):
        return (xi - o) @ S_inv.T

    return SymbolModel(
        name="flat",
        region=Region(Rect(-bounds, bounds, -bounds, bounds)),
        critical_values=(),
        domains=("global",),
        action_provider=action,
        value_provider=value,
        domain_selector=_single_domain,
        p1_average_provider=_square_p1(0),
        params={"shear": S.tolist(), "offset": o.tolist()},
    )


def kinetic_model(bounds: float = 4.0) -> SymbolModel:
    """p(xi) = |xi|^2 / 2 with <q> = xi_2, valid where 2E > G^2 and xi_1 > 0."""

    def action(pts, dom):
        r = np.sqrt(2.0 * pts[:, 0] - pts[:, 1] ** 2)
        J = np.zeros((len(pts), 2, 2))
        J[:, 0, 0] = 1.0 / r
        J[:, 0, 1] = -pts[:, 1] / r
        J[:, 1, 1] = 1.0
        return np.c_[r, pts[:, 1]], J

    def value(xi, dom, guess):
        return np.c_[0.5 * (xi[:, 0] ** 2 + xi[:, 1] ** 2), xi[:, 1]]

    def interior(pts):
        return 2.0 * pts[:, 0] - pts[:, 1] ** 2 > 1e-3

    return SymbolModel(
        name="kinetic",
        region=Region(Rect(0.0, bounds, -bounds, bounds), interior=interior),
        critical_values=(),
        domains=("global",),
        action_provider=action,
        value_provider=value,
        domain_selector=_single_domain,
        p1_average_provider=_square_p1(0),
    )


# Champagne bottle --------------------------------------------------------------
#
# The radial action I_r(E, j) is smooth away from j = 0 for E > 0 (rotation
# angle jumps by 2 pi) and is smooth across j = 0 for E < 0.  Adding
# max(-j, 0) to it gives a branch smooth everywhere except the negative
# E-axis; I_r itself is smooth except on the positive E-axis.  The sector
# facing the positive E-axis uses the first branch, the other three sectors
# use the second one.

CHAMPAGNE_SECTORS = ("E+", "G+", "E-", "G-")


def _sector_of(pts):
    ang = np.degrees(np.arctan2(pts[:, 1], pts[:, 0]))
    idx = np.floor(np.mod(ang + 45.0, 360.0) / 90.0).astype(int) % 4
    return np.array(CHAMPAGNE_SECTORS, dtype=object)[idx]


def _uses_shift(domain: str) -> bool:
    if domain not in CHAMPAGNE_SECTORS:
        raise KeyError(f"unknown champagne-bottle chart domain {domain!r}")
    return domain == "E+"


def _champagne_cut_distance(pts, domain):
    """Distance from each point to the half-line where the branch is singular."""
    E, j = pts[:, 0], pts[:, 1]
    # singular half-line: E <= 0 for the shifted branch, E >= 0 otherwise
    toward = (E < 0) if _uses_shift(domain) else (E > 0)
    return np.where(toward, np.abs(j), np.hypot(E, j))


def champagne_actions(pts, domain, nodes: int = 128):
    E, j = pts[:, 0], pts[:, 1]
    action, period, rot = _champagne.radial_integrals(E, j, nodes)
    shift = _uses_shift(domain)
    s = np.maximum(-j, 0.0) if shift else 0.0
    ds = np.where(j < 0, -1.0, 0.0) if shift else 0.0
    xi = np.c_[action + s, j]
    J = np.zeros((len(pts), 2, 2))
    J[:, 0, 0] = period / TWO_PI
    J[:, 0, 1] = -rot / TWO_PI + ds
    J[:, 1, 1] = 1.0
    return xi, J


def _champagne_values(xi, domain, guess, nodes: int = 128, tol: float = 1e-14):
    j = xi[:, 1].copy()
    target = xi[:, 0] - (np.maximum(-j, 0.0) if _uses_shift(domain) else 0.0)

    def radial(E):
        a, T, _ = _champagne.radial_integrals(E, j, nodes)
        return a, T

    if guess is not None:
        E = guess[:, 0].astype(float).copy()
    else:
        # I_r increases with E from 0 at the bottom of the image
        lo = _champagne.energy_floor(j) + 1e-12
        hi = np.maximum(lo + 0.5, 3.0)
        while True:
            a, _ = radial(hi)
            if np.all(a > target):
                break
            hi = np.where(a > target, hi, 2 * hi)
        for _ in range(48):
            mid = 0.5 * (lo + hi)
            above = radial(mid)[0] > target
            hi, lo = np.where(above, mid, hi), np.where(above, lo, mid)
        E = 0.5 * (lo + hi)
    for _ in range(30):
        a, T = radial(E)
        step = (a - target) / (T / TWO_PI)
        E = E - step
        if np.max(np.abs(step)) < tol:
            break
    return np.c_[E, j]


def champagne_bottle(
    exclusion_radius: float = 0.05,
    nodes: int = 128,
    e_max: float = 2.0,
    g_max: float = 1.5,
) -> SymbolModel:
    """Champagne bottle H = |p|^2/2 - r^2 + r^4 with q the angular momentum.

    Focus-focus critical value at (0, 0); the image of the momentum map is
    bounded below by the relative equilibria E = energy_floor(j).
    """

    def interior(pts):
        return _champagne.regularity_margin(pts[:, 0], pts[:, 1]) > 1e-10

    def action(pts, dom):
        return champagne_actions(pts, dom, nodes)

    def value(xi, dom, guess):
        return _champagne_values(xi, dom, guess, nodes)

    def p1(xi):
        grad = np.zeros_like(xi)
        grad[:, 1] = 2.0 * xi[:, 1]
        return xi[:, 1] ** 2, grad

    return SymbolModel(
        name="champagne_bottle",
        region=Region(Rect(-0.25, e_max, -g_max, g_max), interior=interior),
        critical_values=((0.0, 0.0),),
        domains=CHAMPAGNE_SECTORS,
        action_provider=action,
        value_provider=value,
        domain_selector=_sector_of,
        cut_distance=_champagne_cut_distance,
        p1_average_provider=p1,
        exclusion_radius=exclusion_radius,
        params={"nodes": nodes},
    )


def model_from_config(cfg: Mapping) -> SymbolModel:
    """Build a model from a JSON-style dict (``{"name": ..., ...}``)."""
    name = cfg.get("name", "flat")
    if name == "flat":
        model = flat_model(cfg.get("shear", [[1.0, 0.0], [0.0, 1.0]]), cfg.get("offset", [0.0, 0.0]))
    elif name in ("champagne", "champagne_bottle"):
        model = champagne_bottle(
            exclusion_radius=float(cfg.get("exclusion_radius", 0.05)),
            nodes=int(cfg.get("quadrature_nodes", 128)),
        )
    elif name == "kinetic":
        model = kinetic_model()
    else:
        raise ValueError(f"unknown model {name!r}")
    if "maslov" in cfg or "action_offset" in cfg:
        doms = model.domains
        eta = cfg.get("maslov")
        tau = cfg.get("action_offset")
        model = model.with_metadata(
            {d: tuple(eta) for d in doms} if eta is not None else None,
            {d: tuple(tau) for d in doms} if tau is not None else None,
        )
    return model


# ---------------------------------------------------------------------------
# action charts and classical monodromy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ActionChart:
    model: SymbolModel = field(repr=False)
    domain: Domain
    domain_id: str

    @property
    def maslov(self) -> np.ndarray:
        return self.model.eta(self.domain_id)

    @property
    def action_offset(self) -> np.ndarray:
        return self.model.tau(self.domain_id)

    def action_map(self, c) -> np.ndarray:
        return self.model.actions(c, self.domain_id)[0]

    def differential(self, c) -> np.ndarray:
        return self.model.actions(c, self.domain_id)[1]

    def inverse_map(self, xi, guess=None) -> np.ndarray:
        return self.model.values(xi, self.domain_id, guess)

    def frequency(self, xi, guess=None) -> np.ndarray:
        return self.model.frequency(xi, self.domain_id, guess)

    def sample(self, n: int, seed: int = 0) -> np.ndarray:
        """Up to ``n`` deterministic interior points of the chart domain."""
        x0, x1, y0, y1 = self.domain.bounds
        rng = np.random.default_rng(seed)
        out = np.empty((0, 2))
        for _ in range(50):
            cand = np.c_[rng.uniform(x0, x1, 4 * n), rng.uniform(y0, y1, 4 * n)]
            cand = cand[self.domain.contains(cand) & self.model.is_regular(cand)]
            out = np.vstack([out, cand])
            if len(out) >= n:
                break
        return out[:n]


def action_chart_at(model: SymbolModel, c, radius: float, domain_id: str | None = None) -> ActionChart:
    c = np.asarray(c, dtype=float)
    if radius <= 0:
        raise ValueError("radius must be positive")
    dom = domain_id or model.domain_of(c)
    if np.any(model.near_critical(c, radius)):
        raise OutsideRegularRegion(f"disk of radius {radius} at {c.tolist()} meets a critical exclusion zone")
    if not model.region.contains_disk(c, radius):
        raise OutsideRegularRegion(f"disk of radius {radius} at {c.tolist()} leaves the regular region")
    if model.cut_distance is not None and model.cut_distance(c[None, :], dom)[0] <= radius:
        raise OutsideRegularRegion(f"disk at {c.tolist()} crosses the branch cut of chart domain {dom}")
    return ActionChart(model, Disk((float(c[0]), float(c[1])), float(radius)), dom)


def _overlap_points(chart_i: ActionChart, chart_j: ActionChart, n: int) -> np.ndarray:
    x0 = max(chart_i.domain.bounds[0], chart_j.domain.bounds[0])
    x1 = min(chart_i.domain.bounds[1], chart_j.domain.bounds[1])
    y0 = max(chart_i.domain.bounds[2], chart_j.domain.bounds[2])
    y1 = min(chart_i.domain.bounds[3], chart_j.domain.bounds[3])
    if x0 >= x1 or y0 >= y1:
        return np.empty((0, 2))
    m = max(4, int(np.ceil(np.sqrt(8 * n))))
    gx, gy = np.meshgrid(np.linspace(x0, x1, m + 2)[1:-1], np.linspace(y0, y1, m + 2)[1:-1])
    cand = np.c_[gx.ravel(), gy.ravel()]
    ok = chart_i.domain.contains(cand) & chart_j.domain.contains(cand) & chart_i.model.is_regular(cand)
    for ch in (chart_i, chart_j):
        if ch.model.cut_distance is not None:
            ok &= ch.model.cut_distance(cand, ch.domain_id) > 0
    cand = cand[ok]
    if len(cand) > n:
        cand = cand[np.linspace(0, len(cand) - 1, n).astype(int)]
    return cand


def classical_transition(chart_i: ActionChart, chart_j: ActionChart, overlap_samples: int = 16, tol: float = 0.1):
    """Integer matrix M and vector C with phi_i^-1 = M phi_j^-1 + C on the overlap."""
    pts = _overlap_points(chart_i, chart_j, overlap_samples)
    if len(pts) < overlap_samples:
        raise NoOverlap(f"overlap has {len(pts)} usable points, need {overlap_samples}")
    xi_i, J_i = chart_i.model.actions(pts, chart_i.domain_id)
    xi_j, J_j = chart_j.model.actions(pts, chart_j.domain_id)
    raw = J_i @ np.linalg.inv(J_j)
    M, _ = gl2z.round_to_integer(raw.mean(axis=0), tol)
    dev = float(np.max(np.abs(raw - np.asarray(M, dtype=float))))
    if dev >= tol:
        raise NonIntegerTransition(f"transition deviates from an integer matrix by {dev:.3g}", deviation=dev)
    if gl2z.det(M) not in (1, -1):
        raise NonUnimodular(f"transition {M} has det {gl2z.det(M)}")
    C = (xi_i - xi_j @ np.asarray(M, dtype=float).T).mean(axis=0)
    return M, C


def classical_holonomy(model: SymbolModel, loop, radius: float, overlap_samples: int = 16) -> gl2z.HolonomyClass:
    """Ordered product of transitions between action charts centred on loop points."""
    pts = np.asarray(loop, dtype=float)
    if len(pts) < 3 or not np.allclose(pts[0], pts[-1]):
        raise OpenLoop("loop must have at least two distinct points and end where it starts")
    charts = [action_chart_at(model, p, radius) for p in pts[:-1]]
    charts.append(charts[0])
    mats = [classical_transition(a, b, overlap_samples)[0] for a, b in zip(charts[:-1], charts[1:])]
    return gl2z.HolonomyClass(gl2z.product(mats), tuple(ch.domain_id for ch in charts))


def circle_loop(center, radius: float, points: int, start_angle: float = 0.0) -> np.ndarray:
    """Counter-clockwise closed polygon (first point repeated at the end)."""
    t = np.deg2rad(start_angle) + np.linspace(0.0, 2 * np.pi, points + 1)
    loop = np.c_[center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)]
    loop[-1] = loop[0]
    return loop


@dataclass(frozen=True)
class IsoenergeticReport:
    ok: bool
    min_abs_det: float
    failing: tuple

    def __bool__(self) -> bool:
        return self.ok


def isoenergetic_check(model: SymbolModel, chart: ActionChart, samples: int = 16, tol: float = 1e-8, step: float = 1e-4):
    """Kolmogorov nondegeneracy: det d(omega)/d(xi) away from zero on the chart image."""
    c = chart.sample(samples)
    xi = chart.action_map(c)
    scale = max(1.0, float(np.max(np.abs(xi))))
    hstep = step * scale
    dets = []
    for x, c0 in zip(xi, c):
        cols = []
        for k in range(2):
            e = np.zeros(2)
            e[k] = hstep
            plus = model.frequency(x + e, chart.domain_id, c0)
            minus = model.frequency(x - e, chart.domain_id, c0)
            cols.append((plus - minus)[0] / (2 * hstep))
        dets.append(np.linalg.det(np.column_stack(cols)))
    dets = np.asarray(dets)
    bad = np.abs(dets) <= tol
    return IsoenergeticReport(bool(not np.any(bad)), float(np.min(np.abs(dets))), tuple(map(tuple, c[bad])))
