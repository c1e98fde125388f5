"""Planar geometry primitives shared by the simulator.

Conventions: points are (x, y) float pairs, angles are radians, polygons are
convex with vertices in counter-clockwise order. Ray directions are unit
vectors; all distances are in meters.
"""
from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, TWO_PI)
    if wrapped <= 0.0:
        wrapped += TWO_PI
    return wrapped - math.pi


def angle_diff(a: float, b: float) -> float:
    """Signed smallest difference a - b, wrapped to (-pi, pi]."""
    return wrap_angle(a - b)


def point_segment_distance(px: float, py: float, ax: float, ay: float,
                           bx: float, by: float) -> float:
    ex, ey = bx - ax, by - ay
    seg_len_sq = ex * ex + ey * ey
    if seg_len_sq == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * ex + (py - ay) * ey) / seg_len_sq
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * ex), py - (ay + t * ey))


def point_in_convex_polygon(px: float, py: float, verts: np.ndarray) -> bool:
    """Inclusive containment test for a CCW convex polygon (n, 2)."""
    x0, y0 = verts[:, 0], verts[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    cross = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
    return bool(np.all(cross >= 0.0))


def point_polygon_distance(px: float, py: float, verts: np.ndarray) -> float:
    """Distance from a point to a convex polygon; 0.0 inside."""
    if point_in_convex_polygon(px, py, verts):
        return 0.0
    n = len(verts)
    best = math.inf
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        best = min(best, point_segment_distance(px, py, ax, ay, bx, by))
    return best


def is_convex_ccw(verts: np.ndarray) -> bool:
    """True if the polygon is convex with CCW winding and no repeated edges."""
    n = len(verts)
    if n < 3:
        return False
    x, y = verts[:, 0], verts[:, 1]
    ex, ey = np.roll(x, -1) - x, np.roll(y, -1) - y
    cross = ex * np.roll(ey, -1) - ey * np.roll(ex, -1)
    if np.any(ex * ex + ey * ey == 0.0):
        return False
    return bool(np.all(cross > 0.0))


def ray_segments_hits(origin: np.ndarray, dirs: np.ndarray,
                      seg_p: np.ndarray, seg_e: np.ndarray) -> np.ndarray:
    """First-hit distance of each ray against a set of segments.

    origin: (2,); dirs: (m, 2) unit directions; seg_p: (n, 2) segment starts;
    seg_e: (n, 2) segment extents (end - start). Returns (m,) distances,
    inf where a ray misses every segment.
    """
    m = dirs.shape[0]
    if seg_p.shape[0] == 0:
        return np.full(m, np.inf)
    rel = seg_p - origin  # (n, 2)
    # c[i, j] = cross(dir_i, e_j); rows rays, cols segments
    c = dirs[:, 0:1] * seg_e[:, 1] - dirs[:, 1:2] * seg_e[:, 0]
    cross_rel_e = rel[:, 0] * seg_e[:, 1] - rel[:, 1] * seg_e[:, 0]  # (n,)
    cross_rel_d = (dirs[:, 0:1] * rel[:, 1]) - (dirs[:, 1:2] * rel[:, 0])
    # u = cross(rel, d)/cross(d, e); cross(rel, d) = -cross(d, rel)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cross_rel_e / c
        u = -cross_rel_d / c
    valid = (np.abs(c) > 1e-12) & (t >= 0.0) & (u >= 0.0) & (u <= 1.0)
    t = np.where(valid, t, np.inf)
    return t.min(axis=1)


def ray_circles_hits(origin: np.ndarray, dirs: np.ndarray,
                     centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """First-hit distance of each ray against a set of circles.

    Rays starting inside a circle report 0.0 (origin already occupied).
    """
    m = dirs.shape[0]
    if centers.shape[0] == 0:
        return np.full(m, np.inf)
    f = origin - centers  # (n, 2)
    b = dirs @ f.T  # (m, n): f . d per ray/circle
    cterm = np.sum(f * f, axis=1) - radii * radii  # (n,)
    disc = b * b - cterm
    sq = np.sqrt(np.maximum(disc, 0.0))
    t_near = -b - sq
    t_far = -b + sq
    hit = disc >= 0.0
    inside = hit & (t_near < 0.0) & (t_far >= 0.0)
    t = np.where(hit & (t_near >= 0.0), t_near, np.inf)
    t = np.where(inside, 0.0, t)
    return t.min(axis=1)
