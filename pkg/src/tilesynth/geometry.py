"""Boxes, affine maps, and exact interval propagation.

Everything here is a plain value: boxes are products of closed intervals,
affine maps are dense matrices with an offset, and the parametric variants
carry per-coordinate bounds that are affine functions of a single
nonnegative extension parameter ``a``:

    lo(a) = lo0 + lo1 * a        hi(a) = hi0 + hi1 * a

with lo1 <= 0 <= hi1, so growing ``a`` can only widen a box.  Under that
restriction the endpoint chosen by the sign of a matrix entry never flips
over a >= 0, which keeps image bounds affine in ``a`` and lets one-variable
inclusion maximisation be solved in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Interval",
    "Box",
    "ParamBox",
    "AffineMap",
    "DimensionError",
    "image_bounds",
    "image_bounds_param",
    "compose",
    "box_inclusion",
    "max_param_inclusion",
    "max_param_inclusion_param",
]


class DimensionError(ValueError):
    """Raised when operand dimensions are inconsistent."""


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] of reals; degenerate width is allowed."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ValueError("interval endpoints must be finite")
        if self.lo > self.hi:
            raise ValueError(f"interval lower bound {self.lo} exceeds upper {self.hi}")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol


class Box:
    """Axis-aligned product of closed intervals, stored as lo/hi vectors."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        lo = _as_float_array(lo, "lo")
        hi = _as_float_array(hi, "hi")
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise DimensionError("lo and hi must be 1-d arrays of equal length")
        if lo.size < 1:
            raise DimensionError("boxes must have at least one dimension")
        if np.any(lo > hi):
            raise ValueError("box has an empty coordinate interval (lo > hi)")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_intervals(cls, intervals: Iterable[Interval]) -> "Box":
        ivs = list(intervals)
        return cls([iv.lo for iv in ivs], [iv.hi for iv in ivs])

    @classmethod
    def from_bounds(cls, bounds: Sequence[Sequence[float]]) -> "Box":
        """Build from [[lo, hi], ...] rows."""
        arr = np.asarray(bounds, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise DimensionError("bounds must be an (n, 2) array of [lo, hi] rows")
        return cls(arr[:, 0], arr[:, 1])

    @property
    def dims(self) -> int:
        return self.lo.size

    @property
    def intervals(self) -> list[Interval]:
        return [Interval(float(l), float(h)) for l, h in zip(self.lo, self.hi)]

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains_point(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != self.lo.shape:
            raise DimensionError("point dimension mismatch")
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def vertices(self) -> Iterable[np.ndarray]:
        """All 2^n corner points; only sensible for small n."""
        for bits in product((0, 1), repeat=self.dims):
            yield np.where(np.asarray(bits, dtype=bool), self.hi, self.lo)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Uniform samples, shape (count, dims)."""
        return rng.uniform(self.lo, self.hi, size=(count, self.dims))

    def concat(self, other: "Box") -> "Box":
        return Box(np.concatenate([self.lo, other.lo]),
                   np.concatenate([self.hi, other.hi]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Box):
            return NotImplemented
        return (self.lo.shape == other.lo.shape
                and bool(np.all(self.lo == other.lo))
                and bool(np.all(self.hi == other.hi)))

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    def __repr__(self) -> str:
        parts = ", ".join(f"[{l:g}, {h:g}]" for l, h in zip(self.lo, self.hi))
        return f"Box({parts})"


class ParamBox:
    """Box whose bounds are affine in the extension parameter a >= 0.

    Coordinate j spans [lo0[j] + lo1[j]*a, hi0[j] + hi1[j]*a].  Validity
    requires lo1 <= 0 <= hi1 (widening-only) and lo0 <= hi0, so the box is
    non-empty for every a >= 0.
    """

    __slots__ = ("lo0", "lo1", "hi0", "hi1")

    def __init__(self, lo0, lo1, hi0, hi1):
        lo0 = _as_float_array(lo0, "lo0")
        lo1 = _as_float_array(lo1, "lo1")
        hi0 = _as_float_array(hi0, "hi0")
        hi1 = _as_float_array(hi1, "hi1")
        if not (lo0.shape == lo1.shape == hi0.shape == hi1.shape) or lo0.ndim != 1:
            raise DimensionError("parametric bound arrays must share one 1-d shape")
        if np.any(lo0 > hi0):
            raise ValueError("parametric box empty at a = 0")
        if np.any(lo1 > 0.0) or np.any(hi1 < 0.0):
            raise ValueError("extension coefficients must widen the box (lo1 <= 0 <= hi1)")
        for arr in (lo0, lo1, hi0, hi1):
            arr.setflags(write=False)
        object.__setattr__(self, "lo0", lo0)
        object.__setattr__(self, "lo1", lo1)
        object.__setattr__(self, "hi0", hi0)
        object.__setattr__(self, "hi1", hi1)

    @classmethod
    def from_box(cls, box: Box) -> "ParamBox":
        z = np.zeros(box.dims)
        return cls(box.lo, z, box.hi, z)

    @property
    def dims(self) -> int:
        return self.lo0.size

    def at(self, a: float) -> Box:
        """Specialise at a fixed parameter value."""
        if a < 0:
            raise ValueError("extension parameter must be nonnegative")
        return Box(self.lo0 + self.lo1 * a, self.hi0 + self.hi1 * a)

    def concat(self, other: "ParamBox") -> "ParamBox":
        return ParamBox(np.concatenate([self.lo0, other.lo0]),
                        np.concatenate([self.lo1, other.lo1]),
                        np.concatenate([self.hi0, other.hi0]),
                        np.concatenate([self.hi1, other.hi1]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParamBox):
            return NotImplemented
        return all(bool(np.all(getattr(self, f) == getattr(other, f)))
                   for f in ("lo0", "lo1", "hi0", "hi1"))

    def __hash__(self):
        return hash(tuple(getattr(self, f).tobytes() for f in ("lo0", "lo1", "hi0", "hi1")))

    def __repr__(self) -> str:
        parts = ", ".join(
            f"[{l0:g}{l1:+g}a, {h0:g}{h1:+g}a]"
            for l0, l1, h0, h1 in zip(self.lo0, self.lo1, self.hi0, self.hi1))
        return f"ParamBox({parts})"


@dataclass(frozen=True)
class AffineMap:
    """x |-> matrix @ x + offset."""

    matrix: np.ndarray
    offset: np.ndarray
    _pos: np.ndarray = field(init=False, repr=False, compare=False)
    _neg: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = _as_float_array(self.matrix, "matrix")
        c = _as_float_array(self.offset, "offset")
        if m.ndim != 2:
            raise DimensionError("matrix must be 2-d")
        if c.ndim != 1 or c.size != m.shape[0]:
            raise DimensionError("offset length must equal the matrix row count")
        m.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "offset", c)
        pos = np.maximum(m, 0.0)
        neg = np.minimum(m, 0.0)
        pos.setflags(write=False)
        neg.setflags(write=False)
        object.__setattr__(self, "_pos", pos)
        object.__setattr__(self, "_neg", neg)

    @classmethod
    def identity(cls, n: int) -> "AffineMap":
        return cls(np.eye(n), np.zeros(n))

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.matrix @ x + self.offset

    def __eq__(self, other) -> bool:
        if not isinstance(other, AffineMap):
            return NotImplemented
        return (self.matrix.shape == other.matrix.shape
                and bool(np.all(self.matrix == other.matrix))
                and bool(np.all(self.offset == other.offset)))

    def __hash__(self):
        return hash((self.matrix.tobytes(), self.offset.tobytes()))


def image_bounds(m: AffineMap, box: Box) -> Box:
    """Exact coordinate-wise range of {Mx + c : x in box}.

    Each output coordinate is linear over the box, so its extrema sit at
    per-entry endpoint choices driven by the sign of the matrix entry.
    """
    if m.cols != box.dims:
        raise DimensionError(f"map has {m.cols} columns, box has {box.dims} dims")
    lo = m._pos @ box.lo + m._neg @ box.hi + m.offset
    hi = m._pos @ box.hi + m._neg @ box.lo + m.offset
    return Box(lo, hi)


def image_bounds_param(m: AffineMap, pbox: ParamBox) -> ParamBox:
    """Parametric image bounds; specialising at any a >= 0 commutes with at().

    Valid because the widening restriction (lo1 <= 0 <= hi1) means the
    endpoint selected by each matrix entry's sign at a = 0 stays selected
    for every a >= 0; the restriction is itself preserved by the result.
    """
    if m.cols != pbox.dims:
        raise DimensionError(f"map has {m.cols} columns, box has {pbox.dims} dims")
    lo0 = m._pos @ pbox.lo0 + m._neg @ pbox.hi0 + m.offset
    lo1 = m._pos @ pbox.lo1 + m._neg @ pbox.hi1
    hi0 = m._pos @ pbox.hi0 + m._neg @ pbox.lo0 + m.offset
    hi1 = m._pos @ pbox.hi1 + m._neg @ pbox.lo1
    return ParamBox(lo0, lo1, hi0, hi1)


def compose(outer: AffineMap, inner: AffineMap) -> AffineMap:
    """The map x |-> outer(inner(x))."""
    if outer.cols != inner.rows:
        raise DimensionError("outer.cols must equal inner.rows")
    return AffineMap(outer.matrix @ inner.matrix,
                     outer.matrix @ inner.offset + outer.offset)


def box_inclusion(inner: Box, outer: Box, slack: float = 0.0) -> bool:
    """True iff inner is contained in outer, coordinate-wise.

    Positive slack *shrinks* the outer box (conservative certificates);
    negative slack loosens the comparison, e.g. to absorb round-off when
    re-checking a stored certificate.
    """
    if inner.dims != outer.dims:
        raise DimensionError("inclusion requires equal dimensions")
    return bool(np.all(inner.lo >= outer.lo + slack)
                and np.all(inner.hi <= outer.hi - slack))


def _margin_sup(m0: np.ndarray, m1: np.ndarray, slack: float) -> float | None:
    """sup{a >= 0 : m0 + m1*a >= 0 for all entries}, None if infeasible at 0.

    Feasibility at a = 0 needs every m0 >= slack-adjusted zero; entries with
    m1 < 0 cap the parameter at m0 / (-m1); entries with m1 >= 0 never bind
    for larger a once feasible at 0.
    """
    m0 = m0 - slack
    if np.any(m0 < 0.0):
        return None
    binding = m1 < 0.0
    if not np.any(binding):
        return float("inf")
    return float(np.min(m0[binding] / -m1[binding]))


def max_param_inclusion_param(image: ParamBox, target: ParamBox,
                              slack: float = 0.0) -> float | None:
    """Largest a >= 0 with image(a) contained in target(a), closed form.

    Returns None when inclusion already fails at a = 0, and +inf when no
    constraint degrades as a grows.  Requires feasibility at 0, under which
    the feasible set is exactly [0, result].
    """
    if image.dims != target.dims:
        raise DimensionError("inclusion requires equal dimensions")
    m0 = np.concatenate([image.lo0 - target.lo0, target.hi0 - image.hi0])
    m1 = np.concatenate([image.lo1 - target.lo1, target.hi1 - image.hi1])
    return _margin_sup(m0, m1, slack)


def max_param_inclusion(image: ParamBox, target: Box,
                        slack: float = 0.0) -> float | None:
    """Largest a >= 0 with image(a) contained in the fixed target box."""
    return max_param_inclusion_param(image, ParamBox.from_box(target), slack)
