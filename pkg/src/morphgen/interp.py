"""Convex (barycentric) combination of basis signed distance fields."""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .sdf import ScalarField

__all__ = ["BarycentricWeights", "validate_weights", "interpolate"]

SUM_TOL = 1e-12
RENORMALIZE_TOL = 1e-9
NEGATIVE_TOL = 1e-12


@dataclass(frozen=True)
class BarycentricWeights:
    """Non-negative weights summing to one; build through :func:`validate_weights`."""

    w: tuple

    def __post_init__(self):
        w = tuple(float(x) for x in self.w)
        if len(w) < 1:
            raise ValidationError("need at least one weight")
        if min(w) < 0 or abs(sum(w) - 1.0) > SUM_TOL:
            raise ValidationError(f"not barycentric: {w}")
        object.__setattr__(self, "w", w)

    def __len__(self):
        return len(self.w)

    def __iter__(self):
        return iter(self.w)

    def __getitem__(self, i):
        return self.w[i]

    def as_array(self):
        return np.asarray(self.w)


def validate_weights(w, renormalize=True):
    """Check barycentric constraints and return :class:`BarycentricWeights`.

    Components down to ``-1e-12`` are clipped to zero. A sum within ``1e-9``
    of one is renormalized when ``renormalize`` is true.
    """
    if isinstance(w, BarycentricWeights):
        return w
    a = np.asarray(w, dtype=np.float64).ravel()
    if a.size == 0:
        raise ValidationError("need at least one weight")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"non-finite weight in {a.tolist()}")
    neg = np.flatnonzero(a < -NEGATIVE_TOL)
    if neg.size:
        i = int(neg[0])
        raise ValidationError(f"negative component w[{i}] = {a[i]!r}")
    a = np.clip(a, 0.0, None)
    total = a.sum()
    if abs(total - 1.0) > SUM_TOL:
        if renormalize and abs(total - 1.0) <= RENORMALIZE_TOL:
            a = a / total
        else:
            raise ValidationError(f"weights sum to {float(total)!r}, not 1")
    return BarycentricWeights(tuple(a))


def interpolate(fields, w):
    """Pointwise weighted sum of basis fields sharing one grid.

    A weight of exactly one on a single basis reproduces that field's values
    bit-for-bit (accumulation is in float64).
    """
    fields = list(fields)
    w = validate_weights(w)
    if len(fields) != len(w):
        raise ValidationError(f"{len(fields)} fields but {len(w)} weights")
    if not fields:
        raise ValidationError("no fields to interpolate")
    spec = fields[0].spec
    for i, f in enumerate(fields[1:], start=1):
        if f.spec != spec:
            raise ValidationError(f"field {i} grid {f.spec} differs from field 0 grid {spec}")
    out = np.zeros(spec.dims, dtype=np.float64)
    for wi, f in zip(w, fields):
        out += wi * f.values.astype(np.float64)
    return ScalarField(spec, out)
