"""Rectangular tilings of a box with bisection refinement and extension.

A tiling is a refinement tree over a root box.  Bisection splits a tile at
the midpoint of every dimension (2^n children).  Each tile remembers, per
dimension, whether it touches the root's lower/upper face; boundary tiles
are the ones stretched by the parametric extension, interior faces never
move.  Flags are stored rather than recomputed so extension stays exact
after nested ring extensions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Literal, Sequence

import numpy as np

from .geometry import Box, DimensionError, ParamBox

__all__ = [
    "ExtensionSpec",
    "Tile",
    "Tiling",
    "RefinementError",
    "trivial_tiling",
    "extend_box",
    "extend_tile",
    "extend_tile_param",
    "OutOfDomainError",
]

ROOT_ID = "0"


class RefinementError(RuntimeError):
    """Bisection depth budget exhausted; carries the offending tile ids."""

    def __init__(self, message: str, tile_ids: Sequence[str]):
        super().__init__(message)
        self.tile_ids = list(tile_ids)


class OutOfDomainError(ValueError):
    """Point lies outside the tiling's (extended) root box."""


@dataclass(frozen=True)
class ExtensionSpec:
    """Which root faces move when extending by a: lower only, or both."""

    mode: Literal["lower", "symmetric"] = "lower"

    def __post_init__(self):
        if self.mode not in ("lower", "symmetric"):
            raise ValueError(f"unknown extension mode {self.mode!r}")

    @property
    def extends_upper(self) -> bool:
        return self.mode == "symmetric"


def extend_box(box: Box, a: float, spec: ExtensionSpec) -> Box:
    """Extend every boundary face of a plain box by a."""
    if a < 0:
        raise ValueError("extension must be nonnegative")
    hi = box.hi + a if spec.extends_upper else box.hi
    return Box(box.lo - a, hi)


@dataclass(frozen=True)
class Tile:
    """Leaf cell of a tiling: a sub-box plus root-face contact flags."""

    tile_id: str
    box: Box
    depth: int
    lower_contact: tuple[bool, ...]
    upper_contact: tuple[bool, ...]


def extend_tile(tile: Tile, a: float, spec: ExtensionSpec) -> Box:
    """Push the tile's root-contact faces outward by a; interior faces stay."""
    if a < 0:
        raise ValueError("extension must be nonnegative")
    lo = tile.box.lo - a * np.asarray(tile.lower_contact, dtype=float)
    hi = tile.box.hi.copy()
    if spec.extends_upper:
        hi = hi + a * np.asarray(tile.upper_contact, dtype=float)
    return Box(lo, hi)


def extend_tile_param(tile: Tile, spec: ExtensionSpec) -> ParamBox:
    """Parametric form of extend_tile: bounds affine in a."""
    lo1 = -np.asarray(tile.lower_contact, dtype=float)
    if spec.extends_upper:
        hi1 = np.asarray(tile.upper_contact, dtype=float)
    else:
        hi1 = np.zeros(tile.box.dims)
    return ParamBox(tile.box.lo, lo1, tile.box.hi, hi1)


class Tiling:
    """Refinement tree of sub-boxes covering a root box exactly.

    Nodes are addressed by dotted ids: the root is "0", the children of a
    bisected node append ".k" where k encodes, bit per dimension, whether
    the child takes the upper half (bit d set -> upper half in dimension d).
    Leaves are the tiles.
    """

    def __init__(self, root: Box, children: dict[str, list[str]] | None = None):
        self.root = root
        # children maps an internal node id to its 2^n child ids, in k order
        self._children: dict[str, list[str]] = dict(children or {})

    # -- structure ---------------------------------------------------------

    def _node_box(self, node_id: str) -> tuple[Box, int]:
        lo = self.root.lo.copy()
        hi = self.root.hi.copy()
        parts = node_id.split(".")
        if parts[0] != ROOT_ID:
            raise KeyError(f"unknown node id {node_id!r}")
        for token in parts[1:]:
            k = int(token)
            mid = 0.5 * (lo + hi)
            for d in range(lo.size):
                if (k >> d) & 1:
                    lo[d] = mid[d]
                else:
                    hi[d] = mid[d]
        return Box(lo, hi), len(parts) - 1

    def _make_tile(self, node_id: str) -> Tile:
        box, depth = self._node_box(node_id)
        lower = tuple(bool(box.lo[d] == self.root.lo[d]) for d in range(box.dims))
        upper = tuple(bool(box.hi[d] == self.root.hi[d]) for d in range(box.dims))
        return Tile(node_id, box, depth, lower, upper)

    def _leaf_ids(self) -> Iterator[str]:
        stack = [ROOT_ID]
        while stack:
            node = stack.pop()
            kids = self._children.get(node)
            if kids is None:
                yield node
            else:
                stack.extend(reversed(kids))

    def tiles(self) -> list[Tile]:
        """All leaves in deterministic depth-first order."""
        return [self._make_tile(i) for i in self._leaf_ids()]

    def tile(self, tile_id: str) -> Tile:
        if tile_id in self._children:
            raise KeyError(f"{tile_id!r} is an internal node, not a tile")
        return self._make_tile(tile_id)

    @property
    def max_depth(self) -> int:
        return max((i.count(".") for i in self._leaf_ids()), default=0)

    def __len__(self) -> int:
        return sum(1 for _ in self._leaf_ids())

    # -- refinement --------------------------------------------------------

    def bisect(self, bad_ids: Sequence[str], max_depth: int) -> "Tiling":
        """Replace each listed tile by its 2^n midpoint children.

        Raises RefinementError if any listed tile already sits at max_depth.
        """
        leaf_set = set(self._leaf_ids())
        bad = list(dict.fromkeys(bad_ids))
        for tid in bad:
            if tid not in leaf_set:
                raise KeyError(f"{tid!r} is not a tile of this tiling")
        too_deep = [tid for tid in bad if tid.count(".") >= max_depth]
        if too_deep:
            raise RefinementError(
                f"cannot bisect below depth {max_depth}", too_deep)
        children = dict(self._children)
        n = self.root.dims
        for tid in bad:
            children[tid] = [f"{tid}.{k}" for k in range(2 ** n)]
        return Tiling(self.root, children)

    def uniform(self, depth: int) -> "Tiling":
        """Bisect every tile down to the given depth (Remark-style worst case)."""
        t = self
        for _ in range(depth):
            t = t.bisect([tile.tile_id for tile in t.tiles()], max_depth=depth)
        return t

    # -- lookup ------------------------------------------------------------

    def locate(self, x, a: float = 0.0,
               spec: ExtensionSpec = ExtensionSpec()) -> Tile:
        """Tile owning x in the tiling extended by a.

        Shared interior faces belong to the tile with larger coordinates;
        the extended root's upper faces stay closed.  Points in the extended
        margin are owned by the boundary tile they clamp onto.
        """
        x = np.asarray(x, dtype=float)
        if x.shape != self.root.lo.shape:
            raise DimensionError("point dimension mismatch")
        ext_root = extend_box(self.root, a, spec)
        if not ext_root.contains_point(x):
            raise OutOfDomainError(f"point {x.tolist()} outside {ext_root!r}")
        # Clamp into the unextended root: extension only stretches tiles that
        # touch the corresponding root face, which is exactly the tile the
        # clamped point descends to.
        y = np.minimum(np.maximum(x, self.root.lo), self.root.hi)
        node = ROOT_ID
        lo = self.root.lo.copy()
        hi = self.root.hi.copy()
        while node in self._children:
            mid = 0.5 * (lo + hi)
            k = 0
            for d in range(lo.size):
                # half-open convention except on the root's upper face,
                # where the clamped point equals hi[d] only if it belongs up
                if y[d] >= mid[d]:
                    k |= 1 << d
                    lo[d] = mid[d]
                else:
                    hi[d] = mid[d]
            node = self._children[node][k]
        return self._make_tile(node)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "root": [self.root.lo.tolist(), self.root.hi.tolist()],
            "split": sorted(self._children),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Tiling":
        root = Box(data["root"][0], data["root"][1])
        t = cls(root)
        n = root.dims
        children = {}
        for node in data["split"]:
            children[node] = [f"{node}.{k}" for k in range(2 ** n)]
        t._children = children
        return t

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tiling):
            return NotImplemented
        return self.root == other.root and self._children == other._children


def trivial_tiling(root: Box) -> Tiling:
    """The one-tile tiling {root}; all contact flags are true."""
    return Tiling(root)
