"""Two-user rate regions as down-closed convex polygons in the positive quadrant.

Coordinates may be floats or :class:`fractions.Fraction`; with fractions every
operation here is exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

Point = tuple  # (R1, R2)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: Iterable[Point]) -> list[Point]:
    """Andrew's monotone chain; counter-clockwise, collinear points dropped."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts
    lower: list[Point] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Point] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _zero(x):
    return Fraction(0) if isinstance(x, (int, Fraction)) else 0.0


def _clean(x):
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, Fraction):
        return x
    x = float(x)
    return 0.0 if x == 0 else x


@dataclass(frozen=True)
class RateRegion:
    """Down-closed convex region ``{R >= 0 : R <= some point of conv(corners)}``.

    ``vertices`` lists the polygon corners counter-clockwise starting at the
    origin. The region always contains the origin.
    """

    vertices: tuple[Point, ...]

    @classmethod
    def from_points(cls, points: Iterable[Point]) -> "RateRegion":
        """Comprehensive convex hull of achievable points (time sharing + rate reduction)."""
        cand = []
        for r1, r2 in points:
            r1, r2 = _clean(r1), _clean(r2)
            if r1 < 0 or r2 < 0:
                raise ValueError(f"negative rate in ({r1}, {r2})")
            z1, z2 = _zero(r1), _zero(r2)
            cand += [(r1, r2), (r1, z2), (z1, r2)]
        if not cand:
            cand = [(Fraction(0), Fraction(0))]
        z = _zero(cand[0][0])
        cand.append((z, z))
        hull = convex_hull(cand)
        # rotate so the origin comes first
        start = min(range(len(hull)), key=lambda i: (hull[i][0] + hull[i][1], hull[i][1]))
        return cls(tuple(hull[start:] + hull[:start]))

    @classmethod
    def from_constraints(cls, constraints: Sequence[tuple]) -> "RateRegion":
        """Region ``{R >= 0 : a1 R1 + a2 R2 <= b for each (a1, a2, b)}``.

        Coefficients must be nonnegative; negative bounds are clipped at zero
        so the region always contains the origin.
        """
        if not constraints:
            raise ValueError("unbounded region")
        lines = []
        for a1, a2, b in constraints:
            if a1 < 0 or a2 < 0 or (a1 == 0 and a2 == 0):
                raise ValueError(f"unsupported constraint ({a1}, {a2}, {b})")
            b = _clean(b)
            lines.append((_clean(a1), _clean(a2), b if b > 0 else _zero(b)))
        z = _zero(lines[0][2]) if lines else Fraction(0)
        one = z + 1
        lines += [(-one, z, z), (z, -one, z)]
        tol = 0 if all(isinstance(c, Fraction) for ln in lines for c in ln) else 1e-12

        def feasible(p):
            return all(a1 * p[0] + a2 * p[1] <= b + tol * (1 + abs(b)) for a1, a2, b in lines)

        pts = []
        for (a1, a2, b), (c1, c2, d) in combinations(lines, 2):
            det = a1 * c2 - a2 * c1
            if det == 0:
                continue
            p = ((b * c2 - a2 * d) / det, (a1 * d - b * c1) / det)
            if feasible(p):
                pts.append((max(p[0], z), max(p[1], z)))
        return cls.from_points(pts)

    @property
    def pareto(self) -> list[Point]:
        """Vertices on the upper-right boundary, sorted by increasing R1."""
        pts = [p for p in self.vertices if not (p[0] == 0 and p[1] == 0)]
        out = []
        for p in pts:
            dominated = any(q != p and q[0] >= p[0] and q[1] >= p[1] for q in pts)
            if not dominated:
                out.append(p)
        return sorted(out)

    def constraints(self) -> list[tuple]:
        """Half-planes ``a1 R1 + a2 R2 <= b`` of the boundary, normalized to max(a) = 1."""
        out = []
        v = list(self.vertices)
        n = len(v)
        for i in range(n):
            p, q = v[i], v[(i + 1) % n]
            a1, a2 = q[1] - p[1], p[0] - q[0]
            if a1 < 0 or a2 < 0 or (a1 == 0 and a2 == 0):
                continue  # axis edges
            m = max(a1, a2)
            a1, a2 = a1 / m, a2 / m
            out.append((a1, a2, a1 * p[0] + a2 * p[1]))
        return out

    def contains(self, point: Point, tol: float = 1e-9) -> bool:
        r1, r2 = point
        if r1 < -tol or r2 < -tol:
            return False
        if r1 > self.max_rate(0) + tol or r2 > self.max_rate(1) + tol:
            return False
        return all(a1 * r1 + a2 * r2 <= b + tol for a1, a2, b in self.constraints())

    def contains_region(self, other: "RateRegion", tol: float = 1e-9) -> bool:
        return all(self.contains(p, tol) for p in other.vertices)

    def max_rate(self, user: int):
        return max(p[user] for p in self.vertices)

    def max_sum(self):
        return max(p[0] + p[1] for p in self.vertices)

    def union_hull(self, *others: "RateRegion") -> "RateRegion":
        """Time-sharing hull of this region and ``others``."""
        pts = list(self.vertices)
        for o in others:
            pts += list(o.vertices)
        return RateRegion.from_points(pts)

    def extend(self, r0) -> "RateRegion":
        """Minkowski sum with the simplex ``{D >= 0 : D1 + D2 <= r0}``."""
        if r0 < 0:
            raise ValueError("link rate must be nonnegative")
        r0 = _clean(r0)
        pts = []
        for r1, r2 in self.vertices:
            pts += [(r1, r2), (r1 + r0, r2), (r1, r2 + r0)]
        return RateRegion.from_points(pts)

    def same_as(self, other: "RateRegion", tol: float = 0) -> bool:
        a, b = sorted(self.vertices), sorted(other.vertices)
        if len(a) != len(b):
            return False
        return all(abs(p[0] - q[0]) <= tol and abs(p[1] - q[1]) <= tol for p, q in zip(a, b))


def relay_extended_region(base: RateRegion, r0) -> RateRegion:
    """``{(C1 + D1, C2 + D2) : (C1, C2) in base, D1 + D2 <= r0, D >= 0}``."""
    return base.extend(r0)
