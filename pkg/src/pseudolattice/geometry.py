"""Planar domains in the (E, G) value plane.

Every domain answers ``contains`` for an ``(n, 2)`` array of points, reports
an axis-aligned bounding box, and round-trips through a plain dict so it can
live in JSON configs and chart files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def as_points(c) -> np.ndarray:
    pts = np.asarray(c, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[-1] != 2:
        raise ValueError(f"expected points with 2 coordinates, got shape {pts.shape}")
    return pts


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float

    def contains(self, c) -> np.ndarray:
        pts = as_points(c)
        return np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1]) < self.radius

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        x, y = self.center
        r = self.radius
        return (x - r, x + r, y - r, y + r)

    def meets_disk(self, center, radius) -> bool:
        return float(np.hypot(self.center[0] - center[0], self.center[1] - center[1])) < self.radius + radius

    def to_dict(self) -> dict:
        return {"kind": "disk", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Rect:
    E0: float
    E1: float
    G0: float
    G1: float

    def contains(self, c) -> np.ndarray:
        pts = as_points(c)
        return (pts[:, 0] > self.E0) & (pts[:, 0] < self.E1) & (pts[:, 1] > self.G0) & (pts[:, 1] < self.G1)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.E0, self.E1, self.G0, self.G1)

    def to_dict(self) -> dict:
        return {"kind": "rect", "E": [self.E0, self.E1], "G": [self.G0, self.G1]}


@dataclass(frozen=True)
class AnnularSector:
    """Points with radius in ``(r0, r1)`` about ``center`` and polar angle in
    the counter-clockwise arc ``[theta0, theta1]`` (degrees, any winding)."""

    center: tuple[float, float]
    r0: float
    r1: float
    theta0: float = 0.0
    theta1: float = 360.0

    def contains(self, c) -> np.ndarray:
        pts = as_points(c)
        dx = pts[:, 0] - self.center[0]
        dy = pts[:, 1] - self.center[1]
        r = np.hypot(dx, dy)
        inside = (r > self.r0) & (r < self.r1)
        span = self.theta1 - self.theta0
        if span >= 360.0:
            return inside
        ang = np.degrees(np.arctan2(dy, dx))
        rel = np.mod(ang - self.theta0, 360.0)
        return inside & (rel <= span)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        x, y = self.center
        return (x - self.r1, x + self.r1, y - self.r1, y + self.r1)

    def to_dict(self) -> dict:
        return {
            "kind": "sector",
            "center": list(self.center),
            "r": [self.r0, self.r1],
            "theta": [self.theta0, self.theta1],
        }


Domain = Disk | Rect | AnnularSector


def domain_from_dict(d: dict) -> Domain:
    kind = d["kind"]
    if kind == "disk":
        return Disk(tuple(d["center"]), float(d["radius"]))
    if kind == "rect":
        return Rect(*map(float, d["E"]), *map(float, d["G"]))
    if kind in ("sector", "annulus"):
        theta = d.get("theta", [0.0, 360.0])
        return AnnularSector(tuple(d["center"]), float(d["r"][0]), float(d["r"][1]), float(theta[0]), float(theta[1]))
    raise ValueError(f"unknown domain kind {kind!r}")


@dataclass(frozen=True)
class Region:
    """Outer rectangle minus excluded disks, optionally cut further by a
    model-specific predicate (e.g. the image boundary of the momentum map)."""

    outer: Rect
    holes: tuple[Disk, ...] = ()
    interior: object = field(default=None, compare=False, repr=False)

    def contains(self, c) -> np.ndarray:
        pts = as_points(c)
        ok = self.outer.contains(pts)
        for hole in self.holes:
            ok &= ~hole.contains(pts)
        if self.interior is not None:
            ok &= self.interior(pts)
        return ok

    def contains_disk(self, center, radius, samples: int = 48) -> bool:
        center = np.asarray(center, dtype=float)
        for hole in self.holes:
            if hole.meets_disk(center, radius):
                return False
        t = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
        ring = [center[None, :]]
        for frac in (0.5, 1.0):
            ring.append(center + frac * radius * np.c_[np.cos(t), np.sin(t)])
        return bool(np.all(self.contains(np.vstack(ring))))
