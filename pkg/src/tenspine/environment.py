"""Obstacle environment and the simulated infrared distance sensor."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class SphereObstacle:
    center: tuple
    radius: float
    thermal: float = 0.0

    def ray_hit(self, origin, direction):
        oc = np.asarray(self.center, float) - origin
        proj = float(oc @ direction)
        d2 = float(oc @ oc) - proj * proj
        r2 = self.radius * self.radius
        if d2 > r2:
            return None
        half = math.sqrt(r2 - d2)
        t = proj - half
        if t < 1e-9:
            t = proj + half
        return t if t > 1e-9 else None


@dataclass(frozen=True)
class BoxObstacle:
    lo: tuple
    hi: tuple
    thermal: float = 0.0

    def ray_hit(self, origin, direction):
        lo = np.asarray(self.lo, float)
        hi = np.asarray(self.hi, float)
        tmin, tmax = -math.inf, math.inf
        for k in range(3):
            if abs(direction[k]) < 1e-15:
                if origin[k] < lo[k] or origin[k] > hi[k]:
                    return None
                continue
            t1 = (lo[k] - origin[k]) / direction[k]
            t2 = (hi[k] - origin[k]) / direction[k]
            if t1 > t2:
                t1, t2 = t2, t1
            tmin = max(tmin, t1)
            tmax = min(tmax, t2)
        if tmax < max(tmin, 1e-9):
            return None
        return tmin if tmin > 1e-9 else tmax


@dataclass(frozen=True)
class WallObstacle:
    """Infinite plane through ``point`` with outward ``normal``."""

    point: tuple
    normal: tuple
    thermal: float = 0.0

    def ray_hit(self, origin, direction):
        nrm = np.asarray(self.normal, float)
        nrm = nrm / np.linalg.norm(nrm)
        denom = float(direction @ nrm)
        if abs(denom) < 1e-15:
            return None
        t = float((np.asarray(self.point, float) - origin) @ nrm) / denom
        return t if t > 1e-9 else None


@dataclass
class Environment:
    """Immutable-by-convention obstacle snapshot used for ray queries."""

    obstacles: list = field(default_factory=list)
    max_range: float = 500.0

    def add(self, obstacle):
        self.obstacles.append(obstacle)

    def clear(self):
        self.obstacles.clear()

    def raycast(self, origin, direction):
        """(distance, thermal) of the nearest hit within range, else None."""
        origin = np.asarray(origin, float)
        direction = np.asarray(direction, float)
        norm = np.linalg.norm(direction)
        if norm == 0:
            raise ParameterError("ray direction must be nonzero")
        direction = direction / norm
        best = None
        for ob in self.obstacles:
            t = ob.ray_hit(origin, direction)
            if t is not None and t <= self.max_range:
                if best is None or t < best[0]:
                    best = (float(t), float(ob.thermal))
        return best
