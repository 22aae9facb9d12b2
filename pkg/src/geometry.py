"""
Planar geometry shared by scene generation and the validity oracle.

Everything here works in normalized table coordinates ([0,1]², y pointing up)
and is vectorised over many control points at once.
"""

from typing import Iterable, NamedTuple

import numpy as np

P_INIT = np.array([0.1, 0.1])
P_F = np.array([0.9, 0.9])

# Cutlery is a rectangle whose half-width is this fraction of its half-length.
CUTLERY_ASPECT = 1.0 / 6.0

DENSE_SAMPLES = 200
# Minimum clearance a careful (or, for glasses, normal) path keeps from objects.
CLEARANCE_DELTA = 0.03
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
_POLISH_ITERS = 32


class Footprint(NamedTuple):
    """Flat outline of one object: a disk, or an oriented rectangle."""

    cx: float
    cy: float
    radius: float
    angle: float
    rectangular: bool


def bezier_points(thetas: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """
    Evaluate the quadratic Bezier for many control points at many parameters.

    Args:
        thetas: control points, shape (N, 2)
        ts: curve parameters, shape (S,)

    Returns:
        Points of shape (N, S, 2).
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    ts = np.asarray(ts, dtype=np.float64)
    a = ((1.0 - ts) ** 2)[None, :, None]
    b = (2.0 * (1.0 - ts) * ts)[None, :, None]
    c = (ts**2)[None, :, None]
    return a * P_INIT + b * thetas[:, None, :] + c * P_F


def _bezier_rowwise(thetas: np.ndarray, ts: np.ndarray) -> np.ndarray:
    # one parameter per control point: (N,2), (N,) -> (N,2)
    a = ((1.0 - ts) ** 2)[:, None]
    b = (2.0 * (1.0 - ts) * ts)[:, None]
    c = (ts**2)[:, None]
    return a * P_INIT + b * thetas + c * P_F


def footprint_distance(points: np.ndarray, fp: Footprint) -> np.ndarray:
    """
    Signed distance from points to a footprint (negative inside).

    Disks use distance-to-center minus radius; rectangles use the exact
    point-to-oriented-box distance.
    """
    d = np.asarray(points, dtype=np.float64) - np.array([fp.cx, fp.cy])
    if not fp.rectangular:
        return np.hypot(d[..., 0], d[..., 1]) - fp.radius
    cos_a, sin_a = np.cos(fp.angle), np.sin(fp.angle)
    u = d[..., 0] * cos_a + d[..., 1] * sin_a
    w = -d[..., 0] * sin_a + d[..., 1] * cos_a
    qx = np.abs(u) - fp.radius
    qy = np.abs(w) - fp.radius * CUTLERY_ASPECT
    outside = np.hypot(np.maximum(qx, 0.0), np.maximum(qy, 0.0))
    inside = np.minimum(np.maximum(qx, qy), 0.0)
    return outside + inside


def clearance(
    thetas: np.ndarray, fp: Footprint, samples: int = DENSE_SAMPLES
) -> np.ndarray:
    """
    Minimum footprint distance along each curve.

    The curve is sampled densely, then the bracket around the sampled minimum
    is polished by golden-section search.

    Args:
        thetas: control points, shape (N, 2)
        fp: footprint to measure against
        samples: number of dense intervals along the curve

    Returns:
        Clearance per control point, shape (N,).
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    ts = np.linspace(0.0, 1.0, samples + 1)
    dist = footprint_distance(bezier_points(thetas, ts), fp)
    k = np.argmin(dist, axis=1)
    sampled = dist[np.arange(len(thetas)), k]

    lo = ts[np.maximum(k - 1, 0)]
    hi = ts[np.minimum(k + 1, samples)]
    for _ in range(_POLISH_ITERS):
        c = hi - _GOLDEN * (hi - lo)
        d = lo + _GOLDEN * (hi - lo)
        fc = footprint_distance(_bezier_rowwise(thetas, c), fp)
        fd = footprint_distance(_bezier_rowwise(thetas, d), fp)
        left = fc < fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
    polished = footprint_distance(_bezier_rowwise(thetas, 0.5 * (lo + hi)), fp)
    return np.minimum(sampled, polished)


def min_clearance(
    thetas: np.ndarray, footprints: Iterable[Footprint], samples: int = DENSE_SAMPLES
) -> np.ndarray:
    """Smallest clearance over all footprints; +inf when there are none."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    best = np.full(len(thetas), np.inf)
    for fp in footprints:
        best = np.minimum(best, clearance(thetas, fp, samples))
    return best
