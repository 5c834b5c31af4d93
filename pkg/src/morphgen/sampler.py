"""Design points on the barycentric simplex.

Three-basis designs are drawn on a unit equilateral triangle ("barycentric
map") with basis 1 at (0, 0), basis 2 at (1, 0) and basis 3 at (1/2, √3/2).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .interp import BarycentricWeights, validate_weights

__all__ = [
    "DesignPoint",
    "SamplingPlan",
    "simplex_grid",
    "random_plan",
    "to_cartesian",
    "from_cartesian",
    "incircle_split",
    "distance_to_vertices",
    "MAP_VERTICES",
    "INCIRCLE_CENTER",
    "INCIRCLE_RADIUS",
]

SQRT3 = math.sqrt(3.0)
MAP_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, SQRT3 / 2.0]])
INCIRCLE_CENTER = (0.5, SQRT3 / 6.0)
INCIRCLE_RADIUS = SQRT3 / 6.0

LATTICE = "lattice"
RANDOM = "random"
INCIRCLE_TRAIN = "incircle-train"
INCIRCLE_TEST = "incircle-test"
SCHEMES = (LATTICE, RANDOM, INCIRCLE_TRAIN, INCIRCLE_TEST)


def _require_three(w):
    if len(w) != 3:
        raise ValidationError(f"barycentric map needs exactly 3 bases, got {len(w)}")


def to_cartesian(w):
    """Map 3 barycentric weights to the unit equilateral triangle."""
    w = validate_weights(w)
    _require_three(w)
    return (w[1] + 0.5 * w[2], SQRT3 / 2.0 * w[2])


def from_cartesian(xy):
    x, y = (float(c) for c in xy)
    w3 = 2.0 * y / SQRT3
    w2 = x - 0.5 * w3
    return validate_weights((1.0 - w2 - w3, w2, w3))


def distance_to_vertices(w):
    """Map-space distance from ``w`` to each of the three basis corners."""
    xy = np.asarray(to_cartesian(w))
    return tuple(float(d) for d in np.linalg.norm(MAP_VERTICES - xy, axis=1))


@dataclass(frozen=True)
class DesignPoint:
    id: int
    weights: BarycentricWeights
    map_xy: tuple = None

    def to_dict(self):
        return {
            "id": self.id,
            "weights": list(self.weights.w),
            "map_xy": None if self.map_xy is None else list(self.map_xy),
        }


def _point(i, w):
    w = validate_weights(w)
    return DesignPoint(i, w, to_cartesian(w) if len(w) == 3 else None)


@dataclass(frozen=True)
class SamplingPlan:
    points: tuple
    scheme: str
    seed: int = None
    samples_per_dim: int = None
    n_bases: int = field(default=None)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValidationError(f"unknown scheme {self.scheme!r}")
        pts = tuple(self.points)
        if [p.id for p in pts] != list(range(len(pts))):
            raise ValidationError("design point ids must be contiguous from 0")
        object.__setattr__(self, "points", pts)
        if self.n_bases is None and pts:
            object.__setattr__(self, "n_bases", len(pts[0].weights))

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def weights(self):
        return np.array([p.weights.w for p in self.points])

    @property
    def map_xy(self):
        return np.array([p.map_xy for p in self.points])

    def to_dict(self):
        return {
            "scheme": self.scheme,
            "seed": self.seed,
            "samples_per_dim": self.samples_per_dim,
            "n_bases": self.n_bases,
            "points": [p.to_dict() for p in self.points],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        pts = tuple(_point(p["id"], p["weights"]) for p in d["points"])
        return cls(pts, d["scheme"], d.get("seed"), d.get("samples_per_dim"), d.get("n_bases"))


def _compositions(n, m):
    # non-negative integer n-tuples summing to m, lexicographically descending
    if n == 1:
        yield (m,)
        return
    for first in range(m, -1, -1):
        for rest in _compositions(n - 1, m - first):
            yield (first,) + rest


def simplex_grid(n_bases, samples_per_dim):
    """Regular lattice with ``samples_per_dim`` points along each simplex edge.

    Weights are ``(i_1, ..., i_n) / m`` with ``m = samples_per_dim - 1``; for
    three bases that is ``samples_per_dim * (samples_per_dim + 1) / 2`` points.
    """
    if n_bases < 2:
        raise ValidationError("need at least 2 bases")
    if samples_per_dim < 2:
        raise ValidationError("samples_per_dim must be >= 2")
    m = samples_per_dim - 1
    pts = tuple(_point(i, np.asarray(c) / m) for i, c in enumerate(_compositions(n_bases, m)))
    return SamplingPlan(pts, LATTICE, samples_per_dim=samples_per_dim, n_bases=n_bases)


def random_plan(n_bases, count, seed):
    """Uniform (flat Dirichlet) draws on the simplex from a seeded Philox stream."""
    if n_bases < 2:
        raise ValidationError("need at least 2 bases")
    if count < 1:
        raise ValidationError("count must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    e = rng.standard_exponential((count, n_bases))
    w = e / e.sum(axis=1, keepdims=True)
    pts = tuple(_point(i, row) for i, row in enumerate(w))
    return SamplingPlan(pts, RANDOM, seed=seed, n_bases=n_bases)


def in_incircle(xy):
    x, y = xy
    return math.hypot(x - INCIRCLE_CENTER[0], y - INCIRCLE_CENTER[1]) <= INCIRCLE_RADIUS


def incircle_split(plan):
    """Points inside (or on) the map's inscribed circle train; the rest test.

    Ids are renumbered from 0 within each split.
    """
    if plan.n_bases != 3:
        raise ValidationError("incircle split needs a 3-basis plan")
    train, test = [], []
    for p in plan:
        (train if in_incircle(p.map_xy) else test).append(p.weights)

    def make(ws, scheme):
        pts = tuple(_point(i, w) for i, w in enumerate(ws))
        return SamplingPlan(pts, scheme, plan.seed, plan.samples_per_dim, 3)

    return make(train, INCIRCLE_TRAIN), make(test, INCIRCLE_TEST)
