"""Radial quadrature for H = |p|^2/2 - r^2 + r^4 with angular momentum j.

Everything is written in u = r^2, where the radial motion lives between the
two positive roots u_minus < u_plus of

    g(u) = -2u^3 + 2u^2 + 2Eu - j^2,

and u_3 = 1 - u_minus - u_plus is the remaining (negative) root.  The
substitution u = m - s cos(theta) removes the inverse square-root endpoint
singularities, so plain Gauss-Legendre nodes converge geometrically.
All functions are vectorized over arrays of (E, j).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

_BISECT_STEPS = 64
_NEWTON_STEPS = 4
_TINY_J = 1e-150


@lru_cache(maxsize=8)
def _nodes(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    theta = 0.5 * np.pi * (x + 1.0)
    w_theta = 0.5 * np.pi * w
    phi = 0.25 * np.pi * (x + 1.0)
    w_phi = 0.25 * np.pi * w
    return theta, w_theta, phi, w_phi


def g(u, E, j):
    return -2.0 * u**3 + 2.0 * u**2 + 2.0 * E * u - j * j


def _dg(u, E):
    return -6.0 * u**2 + 4.0 * u + 2.0 * E


def peak(E):
    """Location of the maximum of g on u > 0."""
    return (1.0 + np.sqrt(1.0 + 3.0 * np.asarray(E, dtype=float))) / 3.0


def regularity_margin(E, j):
    """g at its positive maximum; a value (E, j) is a regular torus iff > 0."""
    E = np.asarray(E, dtype=float)
    j = np.asarray(j, dtype=float)
    disc = 1.0 + 3.0 * E
    out = np.full(np.broadcast(E, j).shape, -np.inf)
    ok = disc > 0
    if np.any(ok):
        Eb, jb = np.broadcast_arrays(E, j)
        u = peak(Eb[ok])
        out[ok] = g(u, Eb[ok], jb[ok])
    return out


def energy_floor(j):
    """Minimum energy reachable at angular momentum j (bottom of the image)."""
    j = np.abs(np.asarray(j, dtype=float))
    # stationary point of the effective potential: 4u^3 - 2u^2 - j^2 = 0
    lo = np.full(j.shape, 0.5)
    hi = np.full(j.shape, 0.5) + np.cbrt(j * j / 4.0) + 1.0
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        pos = 4 * mid**3 - 2 * mid**2 - j * j > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    u = 0.5 * (lo + hi)
    return j * j / (2 * u) - u + u * u


def _bisect(lo, hi, E, j, increasing: bool):
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        pos = g(mid, E, j) > 0
        if increasing:
            hi, lo = np.where(pos, mid, hi), np.where(pos, lo, mid)
        else:
            lo, hi = np.where(pos, mid, lo), np.where(pos, hi, mid)
    u = 0.5 * (lo + hi)
    for _ in range(_NEWTON_STEPS):
        d = _dg(u, E)
        step = np.where(d != 0, g(u, E, j) / np.where(d != 0, d, 1.0), 0.0)
        cand = u - step
        u = np.where((cand >= lo) & (cand <= hi), cand, u)
    return u


def turning_points(E, j):
    """Return (u_minus, u_plus, u_3) for arrays of regular (E, j)."""
    E = np.asarray(E, dtype=float)
    j = np.asarray(j, dtype=float)
    us = peak(E)
    zero_j = j == 0
    # g(0) = -j^2 <= 0 and g(us) > 0: the inner root is in [0, us]
    um = _bisect(np.zeros_like(E), us, E, j, increasing=True)
    up = _bisect(us, us + 1.0 + np.abs(E), E, j, increasing=False)
    # j = 0 is exact: g = 2u(-u^2 + u + E)
    disc = np.sqrt(np.maximum(1.0 + 4.0 * E, 0.0))
    um = np.where(zero_j, np.where(E >= 0, 0.0, 0.5 * (1.0 - disc)), um)
    up = np.where(zero_j, 0.5 * (1.0 + disc), up)
    return um, up, 1.0 - um - up


def radial_integrals(E, j, nodes: int = 128):
    """Radial action, period and rotation angle at arrays of (E, j).

    Returns ``(I_r, T, Theta)`` with dI_r/dE = T/(2 pi) and
    dI_r/dj = -Theta/(2 pi).  At j = 0 the rotation angle is the one-sided
    limit j -> 0+ (pi above the focus-focus energy, 0 below).
    """
    E = np.atleast_1d(np.asarray(E, dtype=float))
    j = np.atleast_1d(np.asarray(j, dtype=float))
    E, j = np.broadcast_arrays(E, j)
    theta, w_theta, phi, w_phi = _nodes(nodes)

    um, up, u3 = turning_points(E, j)
    m = 0.5 * (um + up)[:, None]
    s = 0.5 * (up - um)[:, None]
    u = m - s * np.cos(theta)[None, :]
    f = 1.0 / np.sqrt(2.0 * (u - u3[:, None]))
    period = f @ w_theta
    area = (f * (-2.0 * u**2 + 2.0 * u + 2.0 * E[:, None])) @ w_theta

    # below |j| ~ 1e-150 the inner turning point underflows; use the limit
    rot = np.where(E > 0, np.pi * np.where(j < 0, -1.0, 1.0), 0.0)
    nz = np.abs(j) > _TINY_J
    if np.any(nz):
        a2 = (um[nz] / up[nz])[:, None]
        D = np.cos(phi)[None, :] ** 2 + a2 * np.sin(phi)[None, :] ** 2
        uu = um[nz][:, None] / D
        inner = (1.0 / np.sqrt(2.0 * (uu - u3[nz][:, None]))) @ w_phi
        rot = rot.copy()
        rot[nz] = 2.0 * j[nz] / np.sqrt(um[nz] * up[nz]) * inner

    action = (area - j * rot) / (2.0 * np.pi)
    return action, period, rot
