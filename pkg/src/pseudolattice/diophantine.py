"""Diophantine frequency tests, good-value filters and bad-set measure.

The condition |<omega, k>| >= alpha / |k|^(1+d) is checked for all nonzero
integer k with |k|_inf <= k_max, |k| Euclidean.  Small |k| are enumerated
directly; beyond that, any violation must come from a continued-fraction
convergent of the frequency ratio (Legendre's theorem), so only convergent
denominators are tested.  Everything is vectorized over many frequencies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySegment, InvalidParameter, LambdaTooLarge
from .geometry import Rect
from .models import ActionChart, SymbolModel


@dataclass(frozen=True)
class DiophantineParams:
    alpha: float
    d: float = 1.0
    k_max: int = 10_000

    def __post_init__(self):
        if not (self.alpha > 0):
            raise InvalidParameter(f"alpha must be positive, got {self.alpha}")
        if not (self.d > 0):
            raise InvalidParameter(f"d must be positive, got {self.d}")
        if int(self.k_max) < 8:
            raise InvalidParameter(f"k_max must be at least 8, got {self.k_max}")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "d": self.d, "k_max": int(self.k_max)}


@dataclass(frozen=True)
class DiophantineResult:
    ok: bool
    k_max: int
    worst_k: tuple[int, int]
    worst_ratio: float  # min over k of |<omega,k>| |k|^(1+d) / alpha

    def __bool__(self) -> bool:
        return self.ok


def _check_params(alpha, d):
    if not (alpha > 0):
        raise InvalidParameter(f"alpha must be positive, got {alpha}")
    if not (d > 0):
        raise InvalidParameter(f"d must be positive, got {d}")


def _ratio(a, b, k1, k2, d):
    norm = np.hypot(k1, k2)
    return np.abs(k1 * a + k2 * b) * norm ** (1.0 + d)


def diophantine_scan(omegas, alpha: float, d: float = 1.0, k_max: int = 10_000):
    """Vectorized test.  Returns ``(ok, worst_ratio, worst_k)`` arrays where
    ``worst_ratio`` is min |<omega,k>| |k|^(1+d) / alpha over the scanned k."""
    _check_params(alpha, d)
    om = np.atleast_2d(np.asarray(omegas, dtype=float))
    n = len(om)
    # put the larger component second so that |k_1| bounds |k_2|
    swap = np.abs(om[:, 0]) > np.abs(om[:, 1])
    a = np.where(swap, om[:, 1], om[:, 0])
    b = np.where(swap, om[:, 0], om[:, 1])
    best = np.full(n, np.inf)
    best_k = np.zeros((n, 2), dtype=np.int64)

    def consider(k1, k2):
        nonlocal best, best_k
        valid = ((k1 != 0) | (k2 != 0)) & (np.abs(k1) <= k_max) & (np.abs(k2) <= k_max)
        r = np.where(valid, _ratio(a[:, None], b[:, None], k1, k2, d), np.inf)
        idx = np.argmin(r, axis=1)
        rmin = r[np.arange(n), idx]
        better = rmin < best
        best = np.where(better, rmin, best)
        kk = np.c_[np.take_along_axis(np.broadcast_to(k1, r.shape), idx[:, None], 1)[:, 0],
                   np.take_along_axis(np.broadcast_to(k2, r.shape), idx[:, None], 1)[:, 0]]
        best_k = np.where(better[:, None], kk, best_k)

    big = np.abs(b)
    safe_b = np.where(big > 0, big, 1.0)
    x = np.where(big > 0, a / np.where(b != 0, b, 1.0), 0.0)

    # k_1 = 0 gives |k_2 b|, minimal at k_2 = 1
    consider(np.zeros((n, 1), dtype=np.int64), np.ones((n, 1), dtype=np.int64))

    centre1 = np.round(-x).astype(np.int64)[:, None]
    consider(np.ones((n, 3), dtype=np.int64), centre1 + np.arange(-1, 2))

    # Only k with ratio below min(alpha, best so far) matter, which keeps the
    # window small even for huge alpha.  Enumerate small k_1 directly.
    thr = np.minimum(alpha, best) / safe_b
    k0 = int(min(k_max, max(64, np.ceil(np.max((2 * thr) ** (1.0 / d))))))
    width = int(min(k_max, np.ceil(np.max(thr)) + 1))
    k1 = np.arange(1, k0 + 1, dtype=np.int64)
    offsets = np.arange(-width, width + 1, dtype=np.int64)
    centre = np.round(-x[:, None] * k1[None, :]).astype(np.int64)
    for off in offsets:
        consider(np.broadcast_to(k1, (n, k0)), centre + off)

    # convergent denominators above k0 (Legendre's theorem covers the rest)
    frac = np.abs(x).copy()
    q_prev = np.zeros(n, dtype=np.int64)
    q = np.ones(n, dtype=np.int64)
    active = big > 0
    for _ in range(64):
        if not np.any(active):
            break
        ipart = np.floor(frac)
        rest = frac - ipart
        done = rest < 1e-15
        active &= ~done
        frac = np.where(active, 1.0 / np.where(rest > 0, rest, 1.0), frac)
        step = np.floor(frac).astype(np.int64)
        q_next = np.where(active, step * q + q_prev, q)
        q_prev = np.where(active, q, q_prev)
        q = q_next
        active &= q <= k_max
        test = active & (q > k0)
        if np.any(test):
            kq = np.where(test, q, 0)[:, None]
            k2 = np.round(-x[:, None] * kq).astype(np.int64)
            consider(kq, k2)

    worst = best / alpha
    k_out = np.where(swap[:, None], best_k[:, ::-1], best_k)
    return worst >= 1.0, worst, k_out


def is_diophantine(omega, params: DiophantineParams) -> DiophantineResult:
    ok, worst, k = diophantine_scan(np.asarray(omega, dtype=float)[None, :], params.alpha, params.d, params.k_max)
    return DiophantineResult(bool(ok[0]), int(params.k_max), (int(k[0, 0]), int(k[0, 1])), float(worst[0]))


# ---------------------------------------------------------------------------
# good values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GoodValues:
    """Sampled G (or K) values on a segment plus per-clause survival masks."""

    E: float
    grid: np.ndarray
    mask: np.ndarray
    clauses: dict

    @property
    def values(self) -> np.ndarray:
        return self.grid[self.mask]

    def tolist(self) -> list[float]:
        return [float(v) for v in self.values]

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __iter__(self):
        return iter(self.tolist())


def segment_grid(model: SymbolModel, chart: ActionChart, E: float, grid: int) -> np.ndarray:
    if grid is None or grid <= 0:
        raise EmptySegment("grid must be positive")
    _, _, y0, y1 = chart.domain.bounds
    fine = np.linspace(y0, y1, 4 * grid + 1)
    pts = np.c_[np.full_like(fine, E), fine]
    ok = chart.domain.contains(pts) & model.region.contains(pts)
    if not np.any(ok):
        raise EmptySegment(f"the line E = {E} misses the chart domain")
    lo, hi = fine[ok].min(), fine[ok].max()
    G = np.linspace(lo, hi, grid)
    pts = np.c_[np.full_like(G, E), G]
    G = G[chart.domain.contains(pts) & model.region.contains(pts)]
    if len(G) == 0:
        raise EmptySegment(f"the line E = {E} misses the chart domain")
    return G


def good_clauses(model: SymbolModel, domain: str, pts: np.ndarray, params: DiophantineParams, step: float):
    """Four good-value clauses at values ``pts`` (one bool array per clause).

    The frequency derivative is taken along G at fixed E with step ``step``.
    """
    n = len(pts)
    far = np.ones(n, dtype=bool)
    for cv in model.critical_values:
        far &= np.hypot(pts[:, 0] - cv[0], pts[:, 1] - cv[1]) >= params.alpha
    dioph = np.zeros(n, dtype=bool)
    dq = np.zeros(n, dtype=bool)
    dw = np.zeros(n, dtype=bool)
    usable = far & model.is_regular(pts)
    if model.cut_distance is not None:
        usable &= model.cut_distance(pts, domain) > step
    if np.any(usable):
        sub = pts[usable]
        _, J = model.actions(sub, domain)
        inv = np.linalg.inv(J)
        omega = inv[:, 0, :]
        dioph[usable] = diophantine_scan(omega, params.alpha, params.d, params.k_max)[0]
        dq[usable] = np.linalg.norm(inv[:, 1, :], axis=1) >= params.alpha
        shifted = np.concatenate([sub + [0.0, step], sub - [0.0, step]])
        ok_shift = model.is_regular(shifted)
        if model.cut_distance is not None:
            ok_shift &= model.cut_distance(shifted, domain) > 0
        deriv = np.full(len(sub), np.inf)
        both = ok_shift[: len(sub)] & ok_shift[len(sub):]
        if np.any(both):
            w_plus = model.frequency_at(shifted[: len(sub)][both], domain)
            w_minus = model.frequency_at(shifted[len(sub):][both], domain)
            deriv[both] = np.linalg.norm(w_plus - w_minus, axis=1) / (2 * step)
        dw[usable] = deriv >= params.alpha
    return {"critical": far, "diophantine": dioph, "dq": dq, "domega": dw}


def good_values(model: SymbolModel, chart: ActionChart, E: float, params: DiophantineParams, grid: int) -> GoodValues:
    """Grid values G on {E} x chart.domain passing all four exclusions."""
    G = segment_grid(model, chart, E, grid)
    step = float(G[1] - G[0]) if len(G) > 1 else 1e-4
    pts = np.c_[np.full_like(G, E), G]
    clauses = good_clauses(model, chart.domain_id, pts, params, step)
    mask = clauses["critical"] & clauses["diophantine"] & clauses["dq"] & clauses["domega"]
    return GoodValues(float(E), G, mask, clauses)


def perturbed_values(model: SymbolModel, domain: str, E, K, iterations: int = 30) -> np.ndarray:
    """Unperturbed values c with p(xi(c)) + lam <p1>(xi(c)) = E and <q> = K."""
    K = np.atleast_1d(np.asarray(K, dtype=float))
    E = np.broadcast_to(np.asarray(E, dtype=float), K.shape)
    Ec = E.copy()
    if model.lam == 0:
        return np.c_[Ec, K]
    for _ in range(iterations):
        xi, _ = model.actions(np.c_[Ec, K], domain)
        p1, _ = model.p1_average(xi)
        new = E - model.lam * p1
        converged = np.max(np.abs(new - Ec)) < 1e-15
        Ec = new
        if converged:
            break
    return np.c_[Ec, K]


def kam_clause(model: SymbolModel, domain: str, values: np.ndarray, params: DiophantineParams) -> np.ndarray:
    """KAM conditions at perturbed good values (E, K): Diophantine omega_lam,
    |d<q>| >= alpha/2 and omega_lam, d<q> linearly independent."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    out = np.zeros(len(values), dtype=bool)
    if len(values) == 0:
        return out
    c_lam = perturbed_values(model, domain, values[:, 0], values[:, 1])
    ok = model.is_regular(c_lam)
    if model.cut_distance is not None:
        ok &= model.cut_distance(c_lam, domain) > 0
    if not np.any(ok):
        return out
    xi, J = model.actions(c_lam[ok], domain)
    inv = np.linalg.inv(J)
    _, grad = model.p1_average(xi)
    omega = inv[:, 0, :] + model.lam * grad
    dq = inv[:, 1, :]
    res = diophantine_scan(omega, params.alpha, params.d, params.k_max)[0]
    res &= np.linalg.norm(dq, axis=1) >= params.alpha / 2
    res &= np.abs(omega[:, 0] * dq[:, 1] - omega[:, 1] * dq[:, 0]) >= 1e-8
    out[ok] = res
    return out


def good_mask(model: SymbolModel, pts, params: DiophantineParams, step: float, domains=None) -> np.ndarray:
    """Combined good-value (and, for lam > 0, KAM) mask at arbitrary values,
    each evaluated in the chart domain that contains it."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if domains is None:
        domains = model.domain_selector(pts)
    domains = np.asarray(domains, dtype=object)
    mask = np.zeros(len(pts), dtype=bool)
    for dom in dict.fromkeys(domains.tolist()):
        sel = domains == dom
        cl = good_clauses(model, dom, pts[sel], params, step)
        m = cl["critical"] & cl["diophantine"] & cl["dq"] & cl["domega"]
        if model.lam > 0 and np.any(m):
            idx = np.flatnonzero(m)
            m[idx] = kam_clause(model, dom, pts[sel][idx], params)
        mask[sel] = m
    return mask


def check_lambda(lam: float, params: DiophantineParams):
    if lam > params.alpha**2 / 10:
        raise LambdaTooLarge(f"lambda = {lam} exceeds alpha^2/10 = {params.alpha**2 / 10}")


def kam_good_values(model: SymbolModel, chart: ActionChart, a, params: DiophantineParams, grid: int) -> GoodValues:
    """Good K values on the deformed energy curve p + lam <p1> = E."""
    check_lambda(model.lam, params)
    E = float(a[0])
    base = good_values(model, chart, E, params, grid)
    G = base.grid
    step = float(G[1] - G[0]) if len(G) > 1 else 1e-4
    at_anchor = good_clauses(model, chart.domain_id, np.asarray([a], dtype=float), params, step)
    if not all(v[0] for v in at_anchor.values()):
        failed = [k for k, v in at_anchor.items() if not v[0]]
        raise ValueError(f"anchor {tuple(a)} is not a good value (fails {failed})")
    mask = base.mask.copy()
    kam = np.zeros_like(mask)
    cand = np.flatnonzero(mask)
    kam[cand] = kam_clause(model, chart.domain_id, np.c_[np.full(len(cand), E), G[cand]], params)
    clauses = dict(base.clauses)
    clauses["kam"] = kam
    return GoodValues(E, G, mask & kam, clauses)


# ---------------------------------------------------------------------------
# measure of the bad set
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BadFraction:
    fraction: float
    stderr: float
    samples: int
    alpha: float

    def __float__(self) -> float:
        return self.fraction


def bad_fraction(box: Rect, params: DiophantineParams, samples: int, seed: int = 0, chunk: int = 20_000) -> BadFraction:
    """Monte-Carlo fraction of frequencies in ``box`` failing the Diophantine test."""
    if samples <= 0:
        raise InvalidParameter("samples must be positive")
    if not (box.E1 > box.E0 and box.G1 > box.G0):
        raise InvalidParameter("box must have positive area")
    rng = np.random.default_rng(seed)
    bad = 0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        om = np.c_[rng.uniform(box.E0, box.E1, m), rng.uniform(box.G0, box.G1, m)]
        ok, _, _ = diophantine_scan(om, params.alpha, params.d, params.k_max)
        bad += int(np.count_nonzero(~ok))
        done += m
    frac = bad / samples
    return BadFraction(frac, float(np.sqrt(frac * (1 - frac) / samples)), samples, params.alpha)
