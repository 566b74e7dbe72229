"""Centralized macro-step synthesis: generate-and-test over tilings.

One macro-step ring is a tiling of the base rectangle plus, per tile, a
pattern whose exact image of the extended tile lands inside the base, and
the largest extension for which that stays true.  The ring's extension is
the minimum over tiles.  Iterating the construction yields nested rings;
the stability variant pins the extension to zero and additionally confines
every strict-prefix image to an epsilon margin around the base.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Box, ParamBox, box_inclusion, image_bounds
from .patterns import PatternHit, scan_joint_patterns
from .system import Pattern, SwitchedSystem
from .tiling import (ExtensionSpec, RefinementError, Tile, Tiling, extend_box,
                     extend_tile, extend_tile_param, trivial_tiling)

__all__ = ["TileControl", "Ring", "SynthesisError", "best_pattern_for_tile",
           "macro_step_synthesis", "iterate_synthesis", "stability_synthesis"]

# loosening applied when re-validating stored patterns at the ring extension;
# absorbs the one-ulp round-off of the closed-form supremum
REVALIDATION_TOL = 1e-9


class SynthesisError(RuntimeError):
    pass


@dataclass(frozen=True)
class TileControl:
    """Chosen pattern for one tile plus its certificate.

    a_tile is the tile's own supremum extension; certificate is the exact
    image of the tile extended by the ring's (smaller or equal) extension,
    re-checkable against the ring base.
    """

    tile_id: str
    pattern: Pattern
    a_tile: float
    certificate: Box


@dataclass(frozen=True)
class Ring:
    """One synthesized macro-step: steer `extended` into `base`."""

    index: int
    kind: str  # "reach" | "stability"
    base: Box
    extended: Box
    a: float
    tiling: Tiling
    table: dict[str, TileControl]
    horizon: int
    epsilon: float | None = None

    def control_for(self, tile: Tile) -> TileControl:
        return self.table[tile.tile_id]


def margin_parambox(base: Box, epsilon: float, spec: ExtensionSpec) -> ParamBox:
    """The wander envelope around an extended base: base + a + epsilon.

    The extension parameter a moves the faces the extension spec moves;
    the epsilon margin widens both faces, matching the two-sided corridor
    within which intermediate states may drift during a macro-step.
    """
    ones = np.ones(base.dims)
    zeros = np.zeros(base.dims)
    hi1 = ones if spec.extends_upper else zeros
    return ParamBox(base.lo - epsilon, -ones, base.hi + epsilon, hi1)


def extension_parambox(base: Box, spec: ExtensionSpec) -> ParamBox:
    """base + a with no margin: the parametric extension of a whole box."""
    ones = np.ones(base.dims)
    zeros = np.zeros(base.dims)
    hi1 = ones if spec.extends_upper else zeros
    return ParamBox(base.lo, -ones, base.hi, hi1)


def _joint_mode_maps(sys: SwitchedSystem):
    allowed = sys.modes.allowed_joint_modes()
    if not allowed:
        raise SynthesisError("mode constraints leave no admissible joint mode")
    return allowed, [sys.joint_map(i1, i2) for i1, i2 in allowed]


def _select_best(hits: dict[int, PatternHit]) -> PatternHit | None:
    """Maximal a, then minimal length; per-length hits are already first-in-
    enumeration-order among ties."""
    best = None
    for k in sorted(hits):
        hit = hits[k]
        if best is None or hit.a_sup > best.a_sup:
            best = hit
    return best


def best_pattern_for_tile(sys: SwitchedSystem, tile: Tile, target: Box,
                          horizon: int, spec: ExtensionSpec = ExtensionSpec(),
                          stability_epsilon: float | None = None,
                          tol: float = 0.0) -> tuple[Pattern, float] | None:
    """Best admissible pattern for one tile, or None when none exists.

    Admissibility is inclusion of the tile's image in the target at zero
    extension; among admissible patterns the one with the largest extension
    supremum wins (ties: shorter, then enumeration order).  When
    stability_epsilon is given, strict-prefix images must stay within the
    epsilon margin around the target.
    """
    allowed, maps = _joint_mode_maps(sys)
    intermediate = None
    if stability_epsilon is not None:
        intermediate = margin_parambox(target, stability_epsilon, spec)
    hits = scan_joint_patterns(maps, extend_tile_param(tile, spec), target,
                               horizon, intermediate=intermediate, tol=tol)
    best = _select_best(hits)
    if best is None:
        return None
    steps = [allowed[m] for m in best.pattern]
    return Pattern.from_joint(steps), best.a_sup


def _synthesize_ring(sys: SwitchedSystem, base: Box, horizon: int, depth: int,
                     spec: ExtensionSpec, index: int,
                     stability_epsilon: float | None,
                     strategy: str, tol: float) -> Ring:
    if strategy not in ("adaptive", "uniform"):
        raise ValueError("strategy must be 'adaptive' or 'uniform'")
    tiling = trivial_tiling(base)
    if strategy == "uniform":
        tiling = tiling.uniform(depth)
    cache: dict[str, tuple[Pattern, float] | None] = {}
    while True:
        bad: list[str] = []
        for tile in tiling.tiles():
            if tile.tile_id not in cache:
                cache[tile.tile_id] = best_pattern_for_tile(
                    sys, tile, base, horizon, spec,
                    stability_epsilon=stability_epsilon, tol=tol)
            if cache[tile.tile_id] is None:
                bad.append(tile.tile_id)
        if not bad:
            break
        tiling = tiling.bisect(bad, depth)  # RefinementError when too deep
    stability = stability_epsilon is not None
    ring_a = 0.0 if stability else min(cache[t.tile_id][1] for t in tiling.tiles())
    if not np.isfinite(ring_a):
        raise SynthesisError(
            "extension unbounded: no tile constraint binds; the capture set "
            "is not a finite rectangle")
    table: dict[str, TileControl] = {}
    for tile in tiling.tiles():
        pattern, a_tile = cache[tile.tile_id]
        image = image_bounds(sys.pattern_map(pattern), extend_tile(tile, ring_a, spec))
        # stored patterns stay valid at any a <= a_tile; this is defensive
        if not box_inclusion(image, base, slack=-REVALIDATION_TOL):
            raise SynthesisError(
                f"certificate for tile {tile.tile_id} fails at ring extension")
        table[tile.tile_id] = TileControl(tile.tile_id, pattern, a_tile, image)
    return Ring(index=index, kind="stability" if stability else "reach",
                base=base, extended=extend_box(base, ring_a, spec), a=ring_a,
                tiling=tiling, table=table, horizon=horizon,
                epsilon=stability_epsilon)


def macro_step_synthesis(sys: SwitchedSystem, base: Box, horizon: int,
                         depth: int, spec: ExtensionSpec = ExtensionSpec(),
                         index: int = 1, strategy: str = "adaptive",
                         tol: float = 0.0) -> Ring:
    """One generate-and-test ring; raises RefinementError on depth exhaustion."""
    return _synthesize_ring(sys, base, horizon, depth, spec, index,
                            stability_epsilon=None, strategy=strategy, tol=tol)


def stability_synthesis(sys: SwitchedSystem, base: Box, horizon: int,
                        depth: int, epsilon: float,
                        spec: ExtensionSpec = ExtensionSpec(),
                        strategy: str = "adaptive", tol: float = 0.0) -> Ring:
    """Zero-extension ring that keeps the base invariant.

    Patterns must land back in the base with every strict-prefix image
    inside the epsilon margin, so looping the ring's table keeps every
    visited state within that margin.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    return _synthesize_ring(sys, base, horizon, depth, spec, index=0,
                            stability_epsilon=epsilon, strategy=strategy,
                            tol=tol)


def iterate_synthesis(sys: SwitchedSystem, objective: Box, horizon: int,
                      depth: int, spec: ExtensionSpec = ExtensionSpec(),
                      eta: float = 0.1, max_rings: int = 100,
                      strategy: str = "adaptive",
                      tol: float = 0.0) -> list[Ring]:
    """Nested rings around the objective, innermost first.

    Ring i steers base(i-1) extended by a(i) back into base(i-1).  Stops on
    refinement failure, when a ring's extension drops below eta (that ring
    is discarded as converged), or at max_rings.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    if max_rings < 1:
        raise ValueError("max_rings must be at least 1")
    rings: list[Ring] = []
    base = objective
    for index in range(1, max_rings + 1):
        try:
            ring = macro_step_synthesis(sys, base, horizon, depth, spec,
                                        index=index, strategy=strategy, tol=tol)
        except RefinementError:
            break
        if ring.a < eta:
            break
        rings.append(ring)
        base = ring.extended
    return rings
