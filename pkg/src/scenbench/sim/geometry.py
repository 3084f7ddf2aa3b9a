"""Polylines, route projection and oriented-box collision tests."""
from __future__ import annotations

import math

import numpy as np

from .vehicle import VehicleState


class Polyline:
    """Piecewise-linear curve with arc-length bookkeeping."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ValueError("polyline needs at least two 2D points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite polyline point")
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len <= 0):
            raise ValueError("degenerate polyline: repeated consecutive points")
        self.points = pts
        self._sx = pts[:-1, 0].copy()
        self._sy = pts[:-1, 1].copy()
        self._vx = seg[:, 0].copy()
        self._vy = seg[:, 1].copy()
        self._len2 = seg_len ** 2
        self.seg_len = seg_len
        self.cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        self.length = float(self.cum[-1])

    def project(self, x: float, y: float) -> tuple[float, float, float]:
        """Return (arc length, signed lateral offset, distance) of the nearest point.

        The lateral offset is positive to the left of the direction of travel.
        """
        dx = x - self._sx
        dy = y - self._sy
        t = (dx * self._vx + dy * self._vy) / self._len2
        np.clip(t, 0.0, 1.0, out=t)
        ex = dx - t * self._vx
        ey = dy - t * self._vy
        d2 = ex * ex + ey * ey
        i = int(np.argmin(d2))
        s = float(self.cum[i] + t[i] * self.seg_len[i])
        dist = math.sqrt(float(d2[i]))
        cross = self._vx[i] * dy[i] - self._vy[i] * dx[i]
        return s, (dist if cross >= 0 else -dist), dist

    def project_many(self, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised (arc length, distance) for an (n, 2) array of points."""
        xy = np.asarray(xy, dtype=float)
        dx = xy[:, 0:1] - self._sx[None, :]
        dy = xy[:, 1:2] - self._sy[None, :]
        t = np.clip((dx * self._vx + dy * self._vy) / self._len2, 0.0, 1.0)
        ex = dx - t * self._vx
        ey = dy - t * self._vy
        d2 = ex * ex + ey * ey
        i = np.argmin(d2, axis=1)
        rows = np.arange(len(xy))
        s = self.cum[i] + t[rows, i] * self.seg_len[i]
        return s, np.sqrt(d2[rows, i])

    def point_at(self, s: float) -> tuple[float, float, float]:
        """Point and tangent heading at arc length ``s`` (clamped to the ends)."""
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.cum, s, side="right")) - 1
        i = min(max(i, 0), len(self.seg_len) - 1)
        t = (s - self.cum[i]) / self.seg_len[i]
        return (float(self._sx[i] + t * self._vx[i]), float(self._sy[i] + t * self._vy[i]),
                math.atan2(self._vy[i], self._vx[i]))


def _as_polyline(route) -> Polyline:
    if isinstance(route, Polyline):
        return route
    poly = getattr(route, "polyline", None)
    if poly is not None:
        return poly
    return Polyline(route)


def lateral_deviation(position, route) -> float:
    """Distance from ``position`` to the nearest point of the route polyline."""
    return _as_polyline(route).project(float(position[0]), float(position[1]))[2]


def route_progress(position, route) -> float:
    """Fraction of route length covered by the projection of ``position``."""
    poly = _as_polyline(route)
    s = poly.project(float(position[0]), float(position[1]))[0]
    return min(max(s / poly.length, 0.0), 1.0)


def box_corners(state: VehicleState) -> np.ndarray:
    c, s = math.cos(state.heading), math.sin(state.heading)
    hl, hw = state.half_length, state.half_width
    local = ((hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw))
    return np.array([(state.x + c * a - s * b, state.y + s * a + c * b) for a, b in local])


def detect_collision(a: VehicleState, b: VehicleState) -> bool:
    """Separating-axis overlap test for two oriented boxes; touching counts."""
    dx = b.x - a.x
    dy = b.y - a.y
    reach = math.hypot(a.half_length, a.half_width) + math.hypot(b.half_length, b.half_width)
    if dx * dx + dy * dy > reach * reach:
        return False
    ca, sa = math.cos(a.heading), math.sin(a.heading)
    cb, sb = math.cos(b.heading), math.sin(b.heading)
    axes = ((ca, sa), (-sa, ca), (cb, sb), (-sb, cb))
    for ux, uy in axes:
        ra = a.half_length * abs(ux * ca + uy * sa) + a.half_width * abs(-ux * sa + uy * ca)
        rb = b.half_length * abs(ux * cb + uy * sb) + b.half_width * abs(-ux * sb + uy * cb)
        if abs(dx * ux + dy * uy) > ra + rb:
            return False
    return True


def segments_cross(p0, p1, q0, q1) -> bool:
    """True if closed segments p0-p1 and q0-q1 intersect."""
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q0, q1, p0)
    d2 = orient(q0, q1, p1)
    d3 = orient(p0, p1, q0)
    d4 = orient(p0, p1, q1)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True
    # endpoint touching the stop line counts once the mover lands on it
    return (d2 == 0 and min(q0[0], q1[0]) <= p1[0] <= max(q0[0], q1[0])
            and min(q0[1], q1[1]) <= p1[1] <= max(q0[1], q1[1]) and d1 != 0)


def point_in_polygon(x: float, y: float, poly: np.ndarray) -> bool:
    inside = False
    n = len(poly)
    j = n - 1
    for i in range(n):
        xi, yi = poly[i]
        xj, yj = poly[j]
        if (yi > y) != (yj > y) and x < (xj - xi) * (y - yi) / (yj - yi) + xi:
            inside = not inside
        j = i
    return inside
