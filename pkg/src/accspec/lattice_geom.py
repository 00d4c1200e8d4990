"""Time-frequency lattices in the plane, compact masks and lattice boundary counts.

Lattice points are carried as integer coefficient pairs ``(i, j)`` relative to
the generator, so set operations are exact.  Real coordinates are only formed
when a geometric predicate has to be evaluated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidLatticeError, InvalidMaskError

# containment tolerance, biased toward inclusion
GEOM_TOL = 1e-9
DET_TOL = 1e-12


def gauss_reduce(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lagrange-Gauss reduction of a planar basis; returns (shortest, second)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u @ u > v @ v:
        u, v = v, u
    for _ in range(10_000):
        m = round(float(u @ v) / float(u @ u))
        v = v - m * u
        if v @ v >= u @ u:
            return u, v
        u, v = v, u
    raise InvalidLatticeError("Lagrange-Gauss reduction did not terminate")


@dataclass(frozen=True, eq=False)
class Lattice2:
    """Full-rank lattice in the (time, frequency) plane.

    ``generator`` has the basis vectors as columns, so the point with
    integer coefficients ``(i, j)`` is ``generator @ (i, j)``.
    """

    generator: np.ndarray
    det: float = field(init=False)
    l_min: float = field(init=False)
    l_fund: float = field(init=False)
    reduced: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        G = np.array(self.generator, dtype=float)
        if G.shape != (2, 2) or not np.all(np.isfinite(G)):
            raise InvalidLatticeError(f"generator must be a finite 2x2 matrix, got {G!r}")
        det = abs(float(np.linalg.det(G)))
        if det < DET_TOL:
            raise InvalidLatticeError(f"degenerate generator, |det| = {det:.3e}")
        G.setflags(write=False)
        object.__setattr__(self, "generator", G)
        object.__setattr__(self, "det", det)
        u, v = gauss_reduce(G[:, 0], G[:, 1])
        R = np.column_stack([u, v])
        R.setflags(write=False)
        object.__setattr__(self, "reduced", R)
        object.__setattr__(self, "l_min", float(np.hypot(*u)))
        object.__setattr__(
            self, "l_fund", float(max(np.hypot(*(u + v)), np.hypot(*(u - v))))
        )

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "Lattice2":
        return cls(np.asarray(rows, dtype=float))

    @classmethod
    def diag(cls, a: float, b: float) -> "Lattice2":
        return cls(np.diag([float(a), float(b)]))

    @property
    def density(self) -> float:
        return 1.0 / self.det

    def coords(self, pts: np.ndarray) -> np.ndarray:
        """Map integer coefficient pairs (K, 2) to real points (K, 2)."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        return pts @ self.generator.T

    def to_dict(self) -> dict:
        return {"generator": self.generator.tolist()}

    def __eq__(self, other):
        return isinstance(other, Lattice2) and np.array_equal(self.generator, other.generator)

    def __hash__(self):
        return hash(self.generator.tobytes())


def _as_lattice(lat) -> Lattice2:
    if isinstance(lat, Lattice2):
        return lat
    return Lattice2(np.asarray(lat, dtype=float))


def enumerate_in_box(lat: Lattice2, box_lo, box_hi) -> np.ndarray:
    """All lattice points in the closed box ``box_lo <= x <= box_hi``.

    Returns integer coefficients (K, 2), sorted lexicographically.
    """
    lat = _as_lattice(lat)
    lo = np.asarray(box_lo, dtype=float)
    hi = np.asarray(box_hi, dtype=float)
    if not np.all(lo < hi):
        raise ValueError(f"box_lo must be < box_hi componentwise, got {lo}, {hi}")
    Ginv = np.linalg.inv(lat.generator)
    corners = np.array([[lo[0], lo[1]], [lo[0], hi[1]], [hi[0], lo[1]], [hi[0], hi[1]]])
    c = corners @ Ginv.T
    cmin = np.floor(c.min(axis=0)) - 1
    cmax = np.ceil(c.max(axis=0)) + 1
    ii = np.arange(int(cmin[0]), int(cmax[0]) + 1, dtype=np.int64)
    jj = np.arange(int(cmin[1]), int(cmax[1]) + 1, dtype=np.int64)
    I, J = np.meshgrid(ii, jj, indexing="ij")
    pts = np.column_stack([I.ravel(), J.ravel()])
    xy = lat.coords(pts)
    keep = np.all((xy >= lo - GEOM_TOL) & (xy <= hi + GEOM_TOL), axis=1)
    return pts[keep]


def enumerate_in_disk(lat: Lattice2, radius: float, center=(0.0, 0.0)) -> np.ndarray:
    """Lattice points with ``|x - center| <= radius`` (closed), lexicographic."""
    c = np.asarray(center, dtype=float)
    r = max(float(radius), GEOM_TOL)
    pts = enumerate_in_box(lat, c - r, c + r)
    d = np.hypot(*(lat.coords(pts) - c).T)
    return pts[d <= radius + GEOM_TOL]


def shortest_vector(lat: Lattice2) -> float:
    """Length of the shortest nonzero lattice vector, by enumeration."""
    lat = _as_lattice(lat)
    cols = np.hypot(lat.generator[0], lat.generator[1])
    r = 2.0 * float(cols.min())
    pts = enumerate_in_disk(lat, r)
    pts = pts[np.any(pts != 0, axis=1)]
    return float(np.hypot(*lat.coords(pts).T).min())


def fundamental_diameter(lat: Lattice2) -> float:
    """Diameter of the fundamental parallelogram of the Gauss-reduced basis."""
    return _as_lattice(lat).l_fund


# ---------------------------------------------------------------- masks


class Mask:
    """Compact region of the plane.  Subclasses: Ball, Rect, ConvexPolygon."""

    def contains(self, xy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def boundary_distance(self, xy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def spec(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Ball(Mask):
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise InvalidMaskError(f"ball radius must be >= 0, got {self.radius}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius", float(self.radius))

    def _dist_center(self, xy):
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return np.hypot(xy[:, 0] - self.center[0], xy[:, 1] - self.center[1])

    def contains(self, xy):
        return self._dist_center(xy) <= self.radius + GEOM_TOL

    def boundary_distance(self, xy):
        return np.abs(self._dist_center(xy) - self.radius)

    def bbox(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def spec(self):
        return f"ball:{self.center[0]:g},{self.center[1]:g},{self.radius:g}"


def _segment_distance(xy: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    t = np.clip(((xy - a) @ ab) / (ab @ ab), 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.hypot(*(xy - proj).T)


@dataclass(frozen=True)
class ConvexPolygon(Mask):
    """Strictly convex polygon, vertices in counterclockwise order."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != 2 or len(V) < 3:
            raise InvalidMaskError("polygon needs at least 3 vertices")
        E = np.roll(V, -1, axis=0) - V
        cross = E[:, 0] * np.roll(E, -1, axis=0)[:, 1] - E[:, 1] * np.roll(E, -1, axis=0)[:, 0]
        if not np.all(cross > 0):
            raise InvalidMaskError("polygon vertices must be strictly convex and counterclockwise")
        object.__setattr__(self, "vertices", tuple(tuple(map(float, v)) for v in V))

    @property
    def _V(self):
        return np.asarray(self.vertices, dtype=float)

    def contains(self, xy):
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        V = self._V
        inside = np.ones(len(xy), dtype=bool)
        for a, b in zip(V, np.roll(V, -1, axis=0)):
            e = b - a
            # signed distance to the supporting line, positive inside
            s = (e[0] * (xy[:, 1] - a[1]) - e[1] * (xy[:, 0] - a[0])) / np.hypot(*e)
            inside &= s >= -GEOM_TOL
        return inside

    def boundary_distance(self, xy):
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        V = self._V
        d = np.full(len(xy), np.inf)
        for a, b in zip(V, np.roll(V, -1, axis=0)):
            d = np.minimum(d, _segment_distance(xy, a, b))
        return d

    def bbox(self):
        V = self._V
        return V.min(axis=0), V.max(axis=0)

    def spec(self):
        return "poly:" + ",".join(f"{x:g},{y:g}" for x, y in self.vertices)


@dataclass(frozen=True)
class Rect(Mask):
    lo: tuple[float, float]
    hi: tuple[float, float]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if not (lo[0] < hi[0] and lo[1] < hi[1]):
            raise InvalidMaskError(f"rect needs lo < hi componentwise, got {lo}, {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def _poly(self):
        (x0, y0), (x1, y1) = self.lo, self.hi
        return ConvexPolygon(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))

    def contains(self, xy):
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return np.all((xy >= lo - GEOM_TOL) & (xy <= hi + GEOM_TOL), axis=1)

    def boundary_distance(self, xy):
        return self._poly().boundary_distance(xy)

    def bbox(self):
        return np.asarray(self.lo), np.asarray(self.hi)

    def spec(self):
        return f"rect:{self.lo[0]:g},{self.lo[1]:g},{self.hi[0]:g},{self.hi[1]:g}"


def parse_mask(spec: str) -> Mask:
    """Parse ``ball:cx,cy,R``, ``rect:x0,y0,x1,y1`` or ``poly:x1,y1,x2,y2,...``."""
    kind, _, rest = spec.strip().partition(":")
    try:
        vals = [float(v) for v in rest.split(",")] if rest else []
    except ValueError as exc:
        raise InvalidMaskError(f"bad mask spec {spec!r}") from exc
    kind = kind.lower()
    if kind == "ball" and len(vals) == 3:
        return Ball((vals[0], vals[1]), vals[2])
    if kind == "rect" and len(vals) == 4:
        return Rect((vals[0], vals[1]), (vals[2], vals[3]))
    if kind == "poly" and len(vals) >= 6 and len(vals) % 2 == 0:
        return ConvexPolygon(tuple(zip(vals[0::2], vals[1::2])))
    raise InvalidMaskError(f"bad mask spec {spec!r}")


def boundary_distance(mask: Mask, z) -> float | np.ndarray:
    """Distance from ``z`` (a point or (K, 2) array) to the mask boundary."""
    arr = np.asarray(z, dtype=float)
    d = mask.boundary_distance(arr)
    return float(d[0]) if arr.ndim == 1 else d


def _candidates(mask: Mask, lat: Lattice2, pad: float) -> np.ndarray:
    lo, hi = mask.bbox()
    pad = max(pad, GEOM_TOL)
    return enumerate_in_box(lat, np.asarray(lo) - pad, np.asarray(hi) + pad)


def boundary_count(mask: Mask, lat: Lattice2, r: float) -> tuple[int, np.ndarray]:
    """Lattice points within closed distance ``r`` of the mask boundary."""
    if r < 0:
        raise ValueError("r must be >= 0")
    pts = _candidates(mask, lat, r + lat.l_fund)
    d = mask.boundary_distance(lat.coords(pts))
    hit = pts[d <= r + GEOM_TOL]
    return len(hit), hit


def points_in_mask(mask: Mask, lat: Lattice2) -> np.ndarray:
    """Lattice points inside the closed mask, lexicographic order."""
    pts = _candidates(mask, lat, lat.l_fund)
    return pts[mask.contains(lat.coords(pts))]


def points_near_mask(mask: Mask, lat: Lattice2, pad: float) -> np.ndarray:
    """Lattice points of ``mask + B(0, pad)``, lexicographic order."""
    pts = _candidates(mask, lat, pad + lat.l_fund)
    xy = lat.coords(pts)
    keep = mask.contains(xy) | (mask.boundary_distance(xy) <= pad + GEOM_TOL)
    return pts[keep]


def as_point_set(pts: Iterable) -> set[tuple[int, int]]:
    return {(int(p[0]), int(p[1])) for p in pts}


def symmetric_difference_count(a: Iterable, b: Iterable) -> int:
    return len(as_point_set(a) ^ as_point_set(b))


@dataclass(eq=False)
class LatticeField:
    """Finite map from lattice points to real values."""

    lattice: Lattice2
    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.int64).reshape(-1, 2)
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if len(self.points) != len(self.values):
            raise ValueError("points and values must align")
        if len(as_point_set(self.points)) != len(self.points):
            raise ValueError("field points must be pairwise distinct")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def __len__(self):
        return len(self.points)

    @property
    def xy(self) -> np.ndarray:
        return self.lattice.coords(self.points)

    def as_dict(self) -> dict[tuple[int, int], float]:
        return {(int(i), int(j)): float(v) for (i, j), v in zip(self.points, self.values)}

    def to_csv(self, path) -> None:
        write_points_csv(path, self.lattice, self.points, values=self.values)


def write_points_csv(path, lat: Lattice2, pts: np.ndarray, values=None) -> None:
    """Write (i, j, x, y[, value]) rows."""
    pts = np.asarray(pts, dtype=np.int64).reshape(-1, 2)
    xy = lat.coords(pts)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "x", "y"] + (["value"] if values is not None else []))
        for k, ((i, j), (x, y)) in enumerate(zip(pts, xy)):
            row = [int(i), int(j), repr(float(x)), repr(float(y))]
            if values is not None:
                row.append(repr(float(values[k])))
            w.writerow(row)


def read_points_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([[int(r["i"]), int(r["j"])] for r in rows], dtype=np.int64).reshape(-1, 2)


def time_quantum(lat: Lattice2, max_den: int = 1000) -> float | None:
    """Smallest q > 0 with every lattice time coordinate an integer multiple of q.

    Returns None when the time row is not (numerically) rational.
    """
    from fractions import Fraction

    row = [float(v) for v in lat.generator[0] if abs(v) > 1e-15]
    if not row:
        return None
    base = abs(row[0])
    fracs = []
    for v in row:
        f = Fraction(v / base).limit_denominator(max_den)
        if abs(float(f) - v / base) > 1e-12:
            return None
        fracs.append(abs(f))
    den = math.lcm(*(f.denominator for f in fracs))
    num = math.gcd(*(f.numerator * (den // f.denominator) for f in fracs))
    return base * num / den
