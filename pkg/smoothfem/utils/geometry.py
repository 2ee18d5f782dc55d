import logging

import numpy as np
from scipy.spatial import cKDTree

from smoothfem.errors import LocateError
from smoothfem.utils.shape import bilinear_basis, jacobians, solve2

logger = logging.getLogger('geometry')


def signed_area(polygon):
    """Shoelace area, positive for counterclockwise vertex order"""
    polygon = np.asarray(polygon, dtype=float)
    if len(polygon) < 3:
        return 0.0
    x = polygon[:, 0]
    y = polygon[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_area(polygon):
    return abs(signed_area(polygon))


def triangle_areas(triangles):
    """Signed areas of a stack of triangles (T, 3, 2)"""
    a = triangles[:, 1] - triangles[:, 0]
    b = triangles[:, 2] - triangles[:, 0]
    return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])


def corner_crosses(polygon):
    """Cross products at each corner of a polygon (positive when turning left)"""
    polygon = np.asarray(polygon, dtype=float)
    incoming = polygon - np.roll(polygon, 1, axis=0)
    outgoing = np.roll(polygon, -1, axis=0) - polygon
    return incoming[:, 0] * outgoing[:, 1] - incoming[:, 1] * outgoing[:, 0]


def is_convex(polygon, tol=0.0):
    """True when every corner turns left, i.e. strictly convex and CCW"""
    return bool(np.all(corner_crosses(polygon) > tol))


def clip_convex(subject, clip, rel_tol=1e-14):
    """Sutherland-Hodgman clip of `subject` against the convex CCW polygon `clip`.

    Vertices within a relative tolerance of a clip edge count as inside so
    that coincident cells clip to themselves instead of vanishing.
    """
    if isinstance(subject, np.ndarray):
        subject = subject.tolist()
    if isinstance(clip, np.ndarray):
        clip = clip.tolist()
    output = [tuple(p) for p in subject]
    if not output or not clip:
        return []

    extent = max(max(abs(c) for p in clip for c in p), 1.0)
    a = clip[-1]
    for b in clip:
        if not output:
            return []
        ex, ey = b[0] - a[0], b[1] - a[1]
        eps = rel_tol * extent * (abs(ex) + abs(ey))
        candidates = output
        output = []
        s = candidates[-1]
        ds = ex * (s[1] - a[1]) - ey * (s[0] - a[0])
        for e in candidates:
            de = ex * (e[1] - a[1]) - ey * (e[0] - a[0])
            if de >= -eps:
                if ds < -eps:
                    t = ds / (ds - de)
                    output.append((s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1])))
                output.append(e)
            elif ds > eps:
                t = ds / (ds - de)
                output.append((s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1])))
            s, ds = e, de
        a = b
    return output


def overlap_area(subject, clip):
    polygon = clip_convex(subject, clip)
    if len(polygon) < 3:
        return 0.0
    return polygon_area(polygon)


def bilinear_points(quad, natural):
    """Map natural points (P, 2) through the bilinear map of a quad (4, 2)"""
    values, grads = bilinear_basis(natural)
    points = values @ np.asarray(quad, dtype=float)
    detj = jacobians(np.asarray(quad, dtype=float)[None], grads)
    return points, detj[..., 0, 0] * detj[..., 1, 1] - detj[..., 0, 1] * detj[..., 1, 0]


def triangle_points(triangle, reference):
    """Map reference-triangle points (P, 2) onto a physical triangle; returns points and |J|"""
    triangle = np.asarray(triangle, dtype=float)
    reference = np.atleast_2d(reference)
    e1 = triangle[1] - triangle[0]
    e2 = triangle[2] - triangle[0]
    points = triangle[0] + reference[:, :1] * e1 + reference[:, 1:2] * e2
    return points, e1[0] * e2[1] - e1[1] * e2[0]


class PointLocator:
    """Finds the element containing each query point.

    Candidates come from a KD-tree over element centers; the containing
    element is confirmed by inverting the element map (closed form for
    triangles, damped Newton on the corner bilinear map for quads).
    Among several containing elements the lowest index wins.
    """

    def __init__(self, vertices, corners, tolerance=1e-10, max_iterations=50, newton_tol=1e-12):
        self.coords = np.asarray(vertices, dtype=float)[np.asarray(corners)]
        self.corner_count = self.coords.shape[1]
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.newton_tol = newton_tol

        centers = self.coords.mean(axis=1)
        self.radius = float(np.max(np.linalg.norm(self.coords - centers[:, None, :], axis=2)))
        self.lower = self.coords.min(axis=1)
        self.upper = self.coords.max(axis=1)
        span = self.upper.max(axis=0) - self.lower.min(axis=0)
        self.slack = 1e-12 * max(float(np.max(span)), 1.0)
        self._tree = cKDTree(centers)

    def _candidates(self, points):
        lists = self._tree.query_ball_point(points, r=self.radius * (1.0 + 1e-9) + self.slack)
        counts = np.array([len(c) for c in lists], dtype=int)
        if counts.sum() == 0:
            return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
        point_ids = np.repeat(np.arange(len(points)), counts)
        element_ids = np.concatenate([np.asarray(c, dtype=int) for c in lists if len(c)])
        p = points[point_ids]
        keep = np.all((p >= self.lower[element_ids] - self.slack) &
                      (p <= self.upper[element_ids] + self.slack), axis=1)
        return point_ids[keep], element_ids[keep]

    def _triangle_natural(self, points, element_ids):
        coords = self.coords[element_ids]
        jac = np.stack([coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0]], axis=-1)
        natural = solve2(jac, points - coords[:, 0])
        lam = np.column_stack([1.0 - natural.sum(axis=1), natural])
        inside = np.all(lam >= -self.tolerance, axis=1)
        return natural, inside, np.ones(len(points), dtype=bool)

    def _quad_natural(self, points, element_ids):
        coords = self.coords[element_ids]
        natural = np.zeros((len(points), 2))
        active = np.ones(len(points), dtype=bool)
        converged = np.zeros(len(points), dtype=bool)
        for iteration in range(self.max_iterations):
            if not active.any():
                break
            idx = np.flatnonzero(active)
            values, grads = bilinear_basis(natural[idx])
            mapped = np.einsum('pn,pnd->pd', values, coords[idx])
            jac = jacobians(coords[idx], grads)
            step = solve2(jac, points[idx] - mapped)
            norm = np.linalg.norm(step, axis=1)
            bad = ~np.isfinite(norm)
            damping = np.where(norm > 1.0, 1.0 / np.where(norm > 0, norm, 1.0), 1.0)
            natural[idx] = natural[idx] + step * damping[:, None]
            done = (norm <= self.newton_tol) & ~bad
            converged[idx[done]] = True
            active[idx[done | bad]] = False
            # Far outside the reference square the candidate cannot contain the point
            runaway = np.any(np.abs(natural[idx]) > 10.0, axis=1)
            active[idx[runaway]] = False
        logger.debug(f"Inverse map converged for {converged.sum()} of {len(points)} candidates")
        inside = converged & np.all(np.abs(natural) <= 1.0 + self.tolerance, axis=1)
        return natural, inside, converged

    def locate(self, points):
        """Return element indices (P,) and natural coordinates (P, 2)"""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        point_ids, element_ids = self._candidates(points)
        if self.corner_count == 3:
            natural, inside, converged = self._triangle_natural(points[point_ids], element_ids)
        else:
            natural, inside, converged = self._quad_natural(points[point_ids], element_ids)

        elements = np.full(len(points), -1, dtype=int)
        result = np.zeros((len(points), 2))
        hits = np.flatnonzero(inside)
        # Lowest element index first so the first hit per point wins
        order = hits[np.lexsort((element_ids[hits], point_ids[hits]))]
        first = np.unique(point_ids[order], return_index=True)[1]
        chosen = order[first]
        elements[point_ids[chosen]] = element_ids[chosen]
        result[point_ids[chosen]] = natural[chosen]

        missing = np.flatnonzero(elements < 0)
        if len(missing):
            p = missing[0]
            stalled = np.any((point_ids == p) & ~converged)
            if stalled:
                raise LocateError(f"inverse map did not converge near point ({points[p, 0]!r}, {points[p, 1]!r})",
                                  point=tuple(points[p]))
            raise LocateError(f"point ({points[p, 0]!r}, {points[p, 1]!r}) lies outside the mesh",
                              point=tuple(points[p]))
        return elements, result

    def natural_in(self, points, element_ids):
        """Natural coordinates of points inside known elements"""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        element_ids = np.asarray(element_ids, dtype=int)
        if self.corner_count == 3:
            natural, inside, converged = self._triangle_natural(points, element_ids)
        else:
            natural, inside, converged = self._quad_natural(points, element_ids)
        if not np.all(converged):
            p = int(np.flatnonzero(~converged)[0])
            raise LocateError(f"inverse map did not converge in element {element_ids[p]}",
                              point=tuple(points[p]))
        return natural
