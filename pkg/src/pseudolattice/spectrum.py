"""Synthetic semiclassical spectra inside good rectangles.

Eigenvalues in a good rectangle around E + i eps G are generated as

    mu_k = p(xi_k) + i eps <q>(xi_k) + corrections + jitter,
    xi_k = h (k - eta/4) - tau,

i.e. the image of a shifted square lattice under the value map xi -> c
followed by chi(u) = u_1 + i eps u_2.  For a perturbed model p is replaced
by p + lam <p1>.
"""

from __future__ import annotations

import csv
import io as _io
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .diophantine import DiophantineParams, check_lambda, good_mask
from .errors import RegimeViolation
from .geometry import Rect
from .models import ActionChart, SymbolModel

CSV_COLUMNS = ("re", "im", "k1", "k2", "anchor_E", "anchor_G")


class EmptyRectangle(UserWarning):
    """No lattice point landed in a requested rectangle."""


def check_regime(h: float, eps: float, delta: float, slack: float = 0.1) -> None:
    """Enforce 0 < h < eps <= h^delta (the upper bound with relative slack)."""
    if not (0 < delta < 1):
        raise RegimeViolation(f"delta must lie in (0, 1), got {delta}", h=h, eps=eps, delta=delta)
    if not (h > 0 and eps > 0):
        raise RegimeViolation(f"h and eps must be positive (h={h}, eps={eps})", h=h, eps=eps, delta=delta)
    if h >= eps:
        raise RegimeViolation(f"need h << eps, got h={h} >= eps={eps}", h=h, eps=eps, delta=delta)
    if eps > (1 + slack) * h**delta:
        raise RegimeViolation(f"need eps <= h^delta, got eps={eps} > h^delta={h**delta:.3g}", h=h, eps=eps, delta=delta)


@dataclass(frozen=True)
class GoodRectangle:
    anchor: tuple[float, float]
    eps: float
    h: float
    delta: float
    C: float = 10.0

    @property
    def half_width(self) -> float:
        return self.h**self.delta / self.C

    @property
    def half_height(self) -> float:
        return self.eps * self.half_width

    @property
    def center(self) -> complex:
        return complex(self.anchor[0], self.eps * self.anchor[1])

    def contains(self, mu) -> np.ndarray:
        mu = np.asarray(mu, dtype=complex)
        c = self.center
        return (np.abs(mu.real - c.real) <= self.half_width) & (np.abs(mu.imag - c.imag) <= self.half_height)

    def value_box(self) -> Rect:
        """The rectangle in chi^-1 coordinates (E, G)."""
        E, G = self.anchor
        w = self.half_width
        return Rect(E - w, E + w, G - w, G + w)

    def to_dict(self) -> dict:
        return {"anchor": list(self.anchor), "eps": self.eps, "h": self.h, "delta": self.delta, "C": self.C}

    @classmethod
    def from_dict(cls, d) -> "GoodRectangle":
        return cls(tuple(d["anchor"]), d["eps"], d["h"], d["delta"], d.get("C", 10.0))


def good_rectangle(a, eps: float, h: float, delta: float, C: float = 10.0) -> GoodRectangle:
    check_regime(h, eps, delta)
    if C < 1:
        raise ValueError(f"C must be at least 1, got {C}")
    return GoodRectangle((float(a[0]), float(a[1])), float(eps), float(h), float(delta), float(C))


@dataclass(frozen=True)
class SynthesisOptions:
    """Jitter and lower-order symbol terms.

    The correction added to every eigenvalue is
    ``(eps2_coeff * eps^2 + h_coeff * h) * (1 + slope . (E, G))``; the default
    slope of zero gives constant shifts.  ``jitter_exponent=None`` disables
    the O(h^N) noise.
    """

    jitter_exponent: int | None = 8
    eps2_coeff: complex = 0.0
    h_coeff: complex = 0.0
    correction_slope: tuple[float, float] = (0.0, 0.0)
    seed: int = 0

    def correction(self, c: np.ndarray, eps: float, h: float) -> np.ndarray:
        base = complex(self.eps2_coeff) * eps**2 + complex(self.h_coeff) * h
        if base == 0:
            return np.zeros(len(c), dtype=complex)
        s = np.asarray(self.correction_slope, dtype=float)
        return base * (1.0 + c @ s)

    def to_dict(self) -> dict:
        return {
            "jitter_exponent": self.jitter_exponent,
            "eps2_coeff": [complex(self.eps2_coeff).real, complex(self.eps2_coeff).imag],
            "h_coeff": [complex(self.h_coeff).real, complex(self.h_coeff).imag],
            "correction_slope": list(self.correction_slope),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d) -> "SynthesisOptions":
        def cplx(v):
            return complex(*v) if isinstance(v, (list, tuple)) else complex(v)

        return cls(
            jitter_exponent=d.get("jitter_exponent", 8),
            eps2_coeff=cplx(d.get("eps2_coeff", 0.0)),
            h_coeff=cplx(d.get("h_coeff", 0.0)),
            correction_slope=tuple(d.get("correction_slope", (0.0, 0.0))),
            seed=int(d.get("seed", 0)),
        )


@dataclass
class SpectrumCloud:
    points: np.ndarray
    h: float
    eps: float
    delta: float
    lam: float = 0.0
    jitter_exponent: int | None = None
    labels: np.ndarray | None = None
    anchors: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex).reshape(-1)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1, 2)
        if self.anchors is not None:
            self.anchors = np.asarray(self.anchors, dtype=float).reshape(-1, 2)

    def __len__(self) -> int:
        return len(self.points)

    def chi_inverse(self) -> np.ndarray:
        """Points as (Re mu, Im mu / eps)."""
        return np.c_[self.points.real, self.points.imag / self.eps]

    def select(self, mask) -> "SpectrumCloud":
        mask = np.asarray(mask)
        return replace(
            self,
            points=self.points[mask],
            labels=None if self.labels is None else self.labels[mask],
            anchors=None if self.anchors is None else self.anchors[mask],
        )

    def restrict(self, rect: GoodRectangle) -> "SpectrumCloud":
        return self.select(rect.contains(self.points))

    @property
    def empty(self) -> bool:
        return len(self.points) == 0

    # -- serialization -----------------------------------------------------
    def to_csv_text(self) -> str:
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for i, z in enumerate(self.points):
            k = ("", "") if self.labels is None else (int(self.labels[i, 0]), int(self.labels[i, 1]))
            an = ("", "") if self.anchors is None else (repr(float(self.anchors[i, 0])), repr(float(self.anchors[i, 1])))
            w.writerow((repr(float(z.real)), repr(float(z.imag)), *k, *an))
        return buf.getvalue()

    @classmethod
    def from_csv_text(cls, text: str, h: float, eps: float, delta: float, lam: float = 0.0, **kw) -> "SpectrumCloud":
        reader = csv.DictReader(_io.StringIO(text))
        if reader.fieldnames is None or not {"re", "im"} <= set(reader.fieldnames):
            raise ValueError("spectrum CSV needs at least the columns re, im")
        pts, labels, anchors = [], [], []
        has_k = {"k1", "k2"} <= set(reader.fieldnames)
        has_a = {"anchor_E", "anchor_G"} <= set(reader.fieldnames)
        for row in reader:
            pts.append(complex(float(row["re"]), float(row["im"])))
            if has_k and row["k1"] not in ("", None) and row["k2"] not in ("", None):
                labels.append((int(row["k1"]), int(row["k2"])))
            else:
                has_k = False
            if has_a and row["anchor_E"] not in ("", None) and row["anchor_G"] not in ("", None):
                anchors.append((float(row["anchor_E"]), float(row["anchor_G"])))
            else:
                has_a = False
        return cls(
            np.asarray(pts, dtype=complex),
            h,
            eps,
            delta,
            lam,
            labels=np.asarray(labels) if has_k and labels else None,
            anchors=np.asarray(anchors) if has_a and anchors else None,
            **kw,
        )

    def metadata(self) -> dict:
        return {
            "h": self.h,
            "eps": self.eps,
            "delta": self.delta,
            "lam": self.lam,
            "jitter_exponent": self.jitter_exponent,
            "count": len(self),
            "provenance": self.provenance,
            "warnings": list(self.warnings),
        }

    def to_dict(self) -> dict:
        d = self.metadata()
        d["points"] = [[float(z.real), float(z.imag)] for z in self.points]
        d["labels"] = None if self.labels is None else self.labels.tolist()
        d["anchors"] = None if self.anchors is None else self.anchors.tolist()
        return d


# ---------------------------------------------------------------------------
# synthesis
# ---------------------------------------------------------------------------


def _jitter(n: int, h: float, N: int | None, rng: np.random.Generator) -> np.ndarray:
    if N is None or n == 0:
        return np.zeros(n, dtype=complex)
    r = h**N / np.sqrt(2.0)
    return rng.uniform(-r, r, n) + 1j * rng.uniform(-r, r, n)


def _lattice_candidates(model: SymbolModel, domain: str, centre: np.ndarray, w: float, h: float):
    """Integer labels whose lattice points may land in the box of half-size w."""
    xi_a, J = model.actions(centre[None, :], domain)
    xi_a, J = xi_a[0], J[0]
    Jinv = np.linalg.inv(J)
    shift = -h * model.eta(domain) / 4.0 - model.tau(domain)
    box = 1.25 * w + 2 * h * np.abs(Jinv).sum()
    corners = np.array([[s1, s2] for s1 in (-1, 1) for s2 in (-1, 1)], dtype=float) * box
    xi_c = xi_a + corners @ J.T
    lo = np.floor((xi_c.min(axis=0) - shift) / h).astype(np.int64) - 1
    hi = np.ceil((xi_c.max(axis=0) - shift) / h).astype(np.int64) + 1
    k1, k2 = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing="ij")
    k = np.c_[k1.ravel(), k2.ravel()]
    xi = h * k + shift
    guess = centre + (xi - xi_a) @ Jinv.T
    keep = np.all(np.abs(guess - centre) <= box, axis=1)
    return k[keep], xi[keep], guess[keep]


def _leading_values(model: SymbolModel, domain: str, c: np.ndarray, lam: float, options: SynthesisOptions, eps: float, h: float):
    """chi^-1 of the eigenvalue symbol evaluated on the tori at values ``c``."""
    out = c.copy()
    if lam:
        xi, _ = model.actions(c, domain)
        out[:, 0] += lam * model.p1_average(xi)[0]
    corr = options.correction(c, eps, h)
    out[:, 0] += corr.real
    out[:, 1] += corr.imag / eps
    return out


def source_values(model: SymbolModel, domain: str, anchors, lam: float, options: SynthesisOptions, eps: float, h: float, iterations: int = 50):
    """Values c whose eigenvalue symbol lands exactly on the rectangle centres.

    With no perturbation and no corrections this is the anchor itself."""
    a = np.atleast_2d(np.asarray(anchors, dtype=float))
    c = a.copy()
    for _ in range(iterations):
        step = a - _leading_values(model, domain, c, lam, options, eps, h)
        c = c + step
        if np.max(np.abs(step)) < 1e-15:
            break
    return c


def _exact_points(model: SymbolModel, domain: str, centres, rects, lam: float, options: SynthesisOptions):
    """Exact (jitter-free) eigenvalues for several rectangles sharing a chart domain.

    ``centres`` are unperturbed values at which the enumeration is linearized.
    Returns (mu, labels, rect index)."""
    ks, xis, guesses, owner = [], [], [], []
    for i, (c0, rect) in enumerate(zip(centres, rects)):
        k, xi, guess = _lattice_candidates(model, domain, np.asarray(c0, dtype=float), rect.half_width, rect.h)
        ks.append(k)
        xis.append(xi)
        guesses.append(guess)
        owner.append(np.full(len(k), i))
    if not ks or sum(len(k) for k in ks) == 0:
        return np.empty(0, complex), np.empty((0, 2), np.int64), np.empty(0, int)
    k = np.concatenate(ks)
    xi = np.concatenate(xis)
    guess = np.concatenate(guesses)
    owner = np.concatenate(owner)
    with np.errstate(invalid="ignore"):
        c = model.values(xi, domain, guess)
    finite = np.all(np.isfinite(c), axis=1)
    k, xi, c, owner = k[finite], xi[finite], c[finite], owner[finite]
    eps, h = rects[0].eps, rects[0].h
    energy = c[:, 0].copy()
    if lam:
        p1, _ = model.p1_average(xi)
        energy = energy + lam * p1
    mu = energy + 1j * eps * c[:, 1] + options.correction(c, eps, h)
    inside = np.zeros(len(mu), dtype=bool)
    for i, rect in enumerate(rects):
        sel = owner == i
        inside[sel] = rect.contains(mu[sel])
    return mu[inside], k[inside], owner[inside]


def _finish(mu, labels, anchors, rect, lam, options, provenance, h_eps_delta, rng=None) -> SpectrumCloud:
    h, eps, delta = h_eps_delta
    rng = rng if rng is not None else np.random.default_rng(options.seed)
    warn = ()
    if len(mu) == 0:
        warn = ("empty rectangle: no lattice point landed inside",)
        warnings.warn(warn[0], EmptyRectangle, stacklevel=3)
    pts = mu + _jitter(len(mu), h, options.jitter_exponent, rng)
    return SpectrumCloud(pts, h, eps, delta, lam, options.jitter_exponent, labels, anchors, provenance, warn)


def synthesize_rectangle(chart: ActionChart, a, rect: GoodRectangle, options: SynthesisOptions | None = None) -> SpectrumCloud:
    """Eigenvalues of the integrable leading term inside one good rectangle."""
    options = options or SynthesisOptions()
    model = chart.model
    a = np.asarray(a, dtype=float)
    if not chart.domain.contains(a)[0]:
        raise ValueError(f"anchor {a.tolist()} is not in the chart domain")
    try:
        centre = source_values(model, chart.domain_id, a, 0.0, options, rect.eps, rect.h)[0]
        mu, k, _ = _exact_points(model, chart.domain_id, [centre], [rect], 0.0, options)
    except Exception as exc:  # anchor far outside the model range
        from .errors import OutsideRegularRegion

        if not isinstance(exc, OutsideRegularRegion):
            raise
        mu, k = np.empty(0, complex), np.empty((0, 2), np.int64)
    prov = {"model": model.name, "domain": chart.domain_id, "anchors": [a.tolist()], "rectangle": rect.to_dict()}
    anchors = np.tile(a, (len(mu), 1))
    return _finish(mu, k, anchors, rect, 0.0, options, prov, (rect.h, rect.eps, rect.delta))


def kam_synthesize(
    model: SymbolModel,
    chart: ActionChart,
    a,
    rect: GoodRectangle,
    params: DiophantineParams,
    options: SynthesisOptions | None = None,
) -> SpectrumCloud:
    """Eigenvalues of p + lam <p1> + i eps <q> inside the rectangle around E + i eps K."""
    check_lambda(model.lam, params)
    options = options or SynthesisOptions()
    a = np.asarray(a, dtype=float)
    centre = source_values(model, chart.domain_id, a, model.lam, options, rect.eps, rect.h)[0]
    mu, k, _ = _exact_points(model, chart.domain_id, [centre], [rect], model.lam, options)
    prov = {
        "model": model.name,
        "domain": chart.domain_id,
        "anchors": [a.tolist()],
        "rectangle": rect.to_dict(),
        "lam": model.lam,
    }
    anchors = np.tile(a, (len(mu), 1))
    return _finish(mu, k, anchors, rect, model.lam, options, prov, (rect.h, rect.eps, rect.delta))


def band_anchors(
    model: SymbolModel,
    region,
    params: DiophantineParams | None,
    grid: int,
    half_width: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Grid anchors in ``region`` whose whole rectangle is regular and, when
    ``params`` is given, that pass the good-value (and KAM) filters."""
    E0, E1, G0, G1 = region.bounds
    gE, gG = (grid, grid) if np.isscalar(grid) else grid
    Es = np.linspace(E0, E1, int(gE) + 2)[1:-1]
    Gs = np.linspace(G0, G1, int(gG) + 2)[1:-1]
    EE, GG = np.meshgrid(Es, Gs, indexing="ij")
    pts = np.c_[EE.ravel(), GG.ravel()]
    ok = region.contains(pts) & model.is_regular(pts) & ~model.near_critical(pts, 1.5 * half_width)
    for sE in (-1, 1):
        for sG in (-1, 1):
            ok &= model.region.contains(pts + 1.5 * half_width * np.array([sE, sG]))
    pts = pts[ok]
    domains = np.asarray(model.domain_selector(pts), dtype=object) if len(pts) else np.empty(0, dtype=object)
    if model.cut_distance is not None and len(pts):
        far = np.array([model.cut_distance(p[None, :], d)[0] > 2 * half_width for p, d in zip(pts, domains)])
        pts, domains = pts[far], domains[far]
    if params is not None and len(pts):
        step = float(Gs[1] - Gs[0]) if len(Gs) > 1 else half_width
        keep = good_mask(model, pts, params, step, domains)
        pts, domains = pts[keep], domains[keep]
    return pts, domains


def deduplicate(mu_exact: np.ndarray, eps: float, h: float, tol: float = 1e-6) -> np.ndarray:
    """Indices of first occurrences of coincident points (in chi^-1 coordinates)."""
    if len(mu_exact) == 0:
        return np.empty(0, dtype=int)
    pts = np.c_[mu_exact.real, mu_exact.imag / eps]
    tree = cKDTree(pts)
    drop = np.zeros(len(pts), dtype=bool)
    for i, j in tree.query_pairs(tol * h):
        drop[max(i, j)] = True
    return np.flatnonzero(~drop)


def synthesize_band(
    model: SymbolModel,
    region,
    eps: float,
    h: float,
    delta: float,
    params: DiophantineParams | None,
    grid,
    C: float = 10.0,
    options: SynthesisOptions | None = None,
    anchors=None,
) -> SpectrumCloud:
    """Union of rectangle spectra over all good anchors in ``region``.

    Anchors default to a ``grid`` x ``grid`` lattice filtered by the good-value
    test (plus KAM clauses when ``model.lam > 0``); ``params=None`` skips the
    filtering.  Points shared by overlapping rectangles are kept once.
    """
    check_regime(h, eps, delta)
    options = options or SynthesisOptions()
    if params is not None:
        check_lambda(model.lam, params)
    w = h**delta / C
    if anchors is None:
        pts, domains = band_anchors(model, region, params, grid, w)
    else:
        pts = np.atleast_2d(np.asarray(anchors, dtype=float))
        domains = np.asarray(model.domain_selector(pts), dtype=object)
    # deterministic order: by anchor (E then G)
    order = np.lexsort((pts[:, 1], pts[:, 0])) if len(pts) else np.empty(0, int)
    pts, domains = pts[order], domains[order]
    mus, labels, owners = [], [], []
    for dom in dict.fromkeys(domains.tolist()):
        sel = np.flatnonzero(domains == dom)
        rects = [GoodRectangle(tuple(p), eps, h, delta, C) for p in pts[sel]]
        centres = source_values(model, dom, pts[sel], model.lam, options, eps, h)
        mu, k, own = _exact_points(model, dom, centres, rects, model.lam, options)
        mus.append(mu)
        labels.append(k)
        owners.append(sel[own])
    if mus:
        mu = np.concatenate(mus)
        k = np.concatenate(labels)
        own = np.concatenate(owners)
        order = np.lexsort((k[:, 1], k[:, 0], own))
        mu, k, own = mu[order], k[order], own[order]
        keep = deduplicate(mu, eps, h)
        mu, k, own = mu[keep], k[keep], own[keep]
    else:
        mu, k, own = np.empty(0, complex), np.empty((0, 2), np.int64), np.empty(0, int)
    prov = {
        "model": model.name,
        "region": region.to_dict() if hasattr(region, "to_dict") else str(region),
        "anchors": pts.tolist(),
        "anchor_domains": domains.tolist(),
        "C": C,
        "params": None if params is None else params.to_dict(),
        "options": options.to_dict(),
        "lam": model.lam,
    }
    cloud = _finish(mu, k, pts[own] if len(own) else np.empty((0, 2)), None, model.lam, options, prov, (h, eps, delta))
    if len(pts) == 0:
        cloud.warnings = cloud.warnings + ("no good anchors in region",)
    return cloud
