"""Distributed synthesis under partial observability.

Each component chooses its pattern from its own state only.  The price is
an over-approximation: while component 1 runs a macro-step, component 2's
state is replaced by an envelope box.  On the first step of a macro both
components sit in their initial sets, so the envelope is the neighbour's
extended base; on later steps it is the neighbour's wander corridor (the
base extended by a and widened by the hand-chosen epsilon margin on both
faces), which is exactly what the neighbour's own admissibility condition
certifies about its intermediate states.  A component pattern is admissible
for a tile when every intermediate over-approximation stays inside the
component's own corridor and the final one lands in the component's base.

Both components must use a single pattern length each (k1, k2); after
lcm(k1, k2) joint steps both are simultaneously certified back in their
bases, so the two open-loop schedules compose without communication.

The tightened first-step envelope is valid only when every macro block of
one component starts together with a block of the other, so the
synthesizer selects one shared length k1 = k2 for both components; rings
with differing lengths (buildable by hand) are verified against the
corridor-from-step-one recursion instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import (Box, ParamBox, box_inclusion, image_bounds_param,
                       max_param_inclusion, max_param_inclusion_param)
from .centralized import extension_parambox, margin_parambox, SynthesisError
from .patterns import PatternHit, scan_component_patterns
from .system import SwitchedSystem
from .tiling import (ExtensionSpec, RefinementError, Tile, Tiling, extend_box,
                     extend_tile_param, trivial_tiling)

__all__ = ["ApproxSequence", "DistTileControl", "DistRing", "approx_sequence",
           "prop_check", "max_extension_distributed",
           "macro_step_synthesis_distributed", "stability_synthesis_distributed",
           "iterate_synthesis_distributed", "epsilon_report"]


@dataclass(frozen=True)
class ApproxSequence:
    """Over-approximation sequence X^0..X^l for one tile and pattern."""

    component: int
    tile_id: str
    pattern: tuple[int, ...]
    steps: list[ParamBox]
    epsilon: float
    own_base: Box
    other_base: Box
    spec: ExtensionSpec


@dataclass(frozen=True)
class DistTileControl:
    tile_id: str
    pattern: tuple[int, ...]
    a_tile: float
    certificate: Box  # final over-approximation at the ring extension


@dataclass(frozen=True)
class DistRing:
    """One distributed macro-step over both component rectangles."""

    index: int
    kind: str  # "reach" | "stability"
    base1: Box
    base2: Box
    extended1: Box
    extended2: Box
    a: float
    epsilon: float
    k1: int
    k2: int
    tiling1: Tiling
    tiling2: Tiling
    table1: dict[str, DistTileControl]
    table2: dict[str, DistTileControl]
    horizon: int

    @property
    def ell(self) -> int:
        return math.lcm(self.k1, self.k2)

    @property
    def alpha1(self) -> int:
        return self.ell // self.k1

    @property
    def alpha2(self) -> int:
        return self.ell // self.k2

    def component_k(self, component: int) -> int:
        return self.k1 if component == 1 else self.k2

    def component_tiling(self, component: int) -> Tiling:
        return self.tiling1 if component == 1 else self.tiling2

    def component_table(self, component: int) -> dict[str, DistTileControl]:
        return self.table1 if component == 1 else self.table2

    def component_base(self, component: int) -> Box:
        return self.base1 if component == 1 else self.base2


def _component_bases(sys: SwitchedSystem, box: Box) -> tuple[Box, Box]:
    n1, n2 = sys.split
    if n2 == 0:
        raise SynthesisError("distributed synthesis needs two nonempty components")
    return (Box(box.lo[:n1], box.hi[:n1]), Box(box.lo[n1:], box.hi[n1:]))


def _split_rowmap(sys: SwitchedSystem, component: int, mode: int):
    n1 = sys.split[0]
    rm = sys.component_rowmap(component, mode)
    if component == 1:
        return rm.matrix[:, :n1], rm.matrix[:, n1:], rm.offset
    return rm.matrix[:, n1:], rm.matrix[:, :n1], rm.offset


def approx_sequence(sys: SwitchedSystem, component: int, tile: Tile,
                    pattern: tuple[int, ...], epsilon: float,
                    own_base: Box, other_base: Box,
                    spec: ExtensionSpec = ExtensionSpec(),
                    aligned: bool = True) -> ApproxSequence:
    """The step-wise recursion X^k = f_c(X^{k-1}, neighbour envelope, pi(k)).

    With `aligned` (the synthesizer's setting, valid because both
    components share one block length) the neighbour envelope is its
    extended base on the first step and its wander corridor
    (base + a + epsilon) afterwards; without it the corridor is assumed
    from step one, which stays sound for blocks starting mid-way through
    the neighbour's.  The component's rows are taken from any joint mode
    sharing the local mode (identical by the structural guarantee).
    """
    if component not in (1, 2):
        raise ValueError("component must be 1 or 2")
    other_rest = margin_parambox(other_base, epsilon, spec)
    other_init = extension_parambox(other_base, spec) if aligned else other_rest
    x = extend_tile_param(tile, spec)
    steps = [x]
    for step_index, mode in enumerate(pattern):
        other = other_init if step_index == 0 else other_rest
        rm = sys.component_rowmap(component, mode)
        if component == 1:
            full = x.concat(other)
        else:
            full = other.concat(x)
        x = image_bounds_param(rm, full)
        steps.append(x)
    return ApproxSequence(component, tile.tile_id, tuple(pattern), steps,
                          epsilon, own_base, other_base, spec)


def prop_check(seq: ApproxSequence, a: float, tol: float = 0.0) -> bool:
    """Intermediate steps inside the margin box, final step inside the base."""
    margin = margin_parambox(seq.own_base, seq.epsilon, seq.spec)
    for x in seq.steps[1:-1]:
        if not box_inclusion(x.at(a), margin.at(a), slack=-tol):
            return False
    return box_inclusion(seq.steps[-1].at(a), seq.own_base, slack=-tol)


def max_extension_distributed(seq: ApproxSequence, tol: float = 0.0) -> float | None:
    """Closed-form sup{a >= 0 : prop_check(seq, a)}; None if it fails at 0."""
    margin = margin_parambox(seq.own_base, seq.epsilon, seq.spec)
    sup = math.inf
    for x in seq.steps[1:-1]:
        step_sup = max_param_inclusion_param(x, margin, slack=-tol)
        if step_sup is None:
            return None
        sup = min(sup, step_sup)
    final_sup = max_param_inclusion(seq.steps[-1], seq.own_base, slack=-tol)
    if final_sup is None:
        return None
    return min(sup, final_sup)


def _scan_tile(sys: SwitchedSystem, component: int, tile: Tile, own_base: Box,
               other_base: Box, horizon: int, epsilon: float,
               spec: ExtensionSpec, tol: float) -> dict[int, PatternHit]:
    n_modes = len(sys.modes.components[component - 1])
    own_mats, other_mats, offsets = [], [], []
    for m in range(n_modes):
        a_own, a_oth, off = _split_rowmap(sys, component, m)
        own_mats.append(a_own)
        other_mats.append(a_oth)
        offsets.append(off)
    return scan_component_patterns(
        own_mats, other_mats, offsets,
        x0=extend_tile_param(tile, spec),
        other_init=extension_parambox(other_base, spec),
        other_margin=margin_parambox(other_base, epsilon, spec),
        final_target=own_base,
        intermediate=margin_parambox(own_base, epsilon, spec),
        horizon=horizon, tol=tol)


def _joint_length_synthesis(sys: SwitchedSystem, bases: dict[int, Box],
                            horizon: int, depth: int, epsilon: float,
                            spec: ExtensionSpec, strategy: str, tol: float):
    """Generate-and-test on both component tilings until one shared pattern
    length covers every tile of both.

    Tiles with no admissible length at all are bisected first; when every
    tile is controllable at some length but no length is shared, the tiles
    missing from the best-covered shared candidate are bisected.  Depth
    exhaustion raises RefinementError.  The shared length keeps the two
    components' macro blocks aligned, which the tightened first-step
    neighbour envelope relies on.
    """
    tilings = {}
    for c in (1, 2):
        tilings[c] = trivial_tiling(bases[c])
        if strategy == "uniform":
            tilings[c] = tilings[c].uniform(depth)
    caches: dict[int, dict[str, dict[int, PatternHit]]] = {1: {}, 2: {}}
    while True:
        feasible: dict[int, set[int]] = {}
        for c in (1, 2):
            tiles = tilings[c].tiles()
            for tile in tiles:
                if tile.tile_id not in caches[c]:
                    caches[c][tile.tile_id] = _scan_tile(
                        sys, c, tile, bases[c], bases[3 - c], horizon,
                        epsilon, spec, tol)
            feasible[c] = {k for k in range(1, horizon + 1)
                           if all(k in caches[c][t.tile_id] for t in tiles)}
        shared = sorted(feasible[1] & feasible[2])
        if shared:
            def floor_a(k: int) -> float:
                return min(min(caches[c][t.tile_id][k].a_sup
                               for t in tilings[c].tiles())
                           for c in (1, 2))
            k_star = max(shared, key=lambda k: (floor_a(k), -k))
            return k_star, tilings, caches
        to_split = {c: [t.tile_id for t in tilings[c].tiles()
                        if not caches[c][t.tile_id]] for c in (1, 2)}
        if not (to_split[1] or to_split[2]):
            # chase the length closest to covering both components
            def missing(k: int) -> dict[int, list[str]]:
                return {c: [t.tile_id for t in tilings[c].tiles()
                            if k not in caches[c][t.tile_id]] for c in (1, 2)}
            k_best = min(range(1, horizon + 1),
                         key=lambda k: (sum(len(v) for v in missing(k).values()), k))
            to_split = missing(k_best)
        try:
            for c in (1, 2):
                if to_split[c]:
                    tilings[c] = tilings[c].bisect(to_split[c], depth)
        except RefinementError as err:
            raise RefinementError(
                f"no single pattern length in 1..{horizon} covers every tile "
                f"of both components within depth {depth}",
                err.tile_ids) from err


def _build_ring(sys: SwitchedSystem, base: Box, horizon: int, depth: int,
                epsilon: float, spec: ExtensionSpec, index: int,
                strategy: str, tol: float, stability: bool) -> DistRing:
    if epsilon <= 0 and not stability:
        raise ValueError("epsilon must be positive")
    base1, base2 = _component_bases(sys, base)
    bases = {1: base1, 2: base2}
    k_star, tilings, caches = _joint_length_synthesis(
        sys, bases, horizon, depth, epsilon, spec, strategy, tol)
    floors = {c: min(caches[c][t.tile_id][k_star].a_sup
                     for t in tilings[c].tiles()) for c in (1, 2)}
    ring_a = 0.0 if stability else min(floors[1], floors[2])
    if not math.isfinite(ring_a):
        raise SynthesisError("extension unbounded in both components")
    tables: list[dict[str, DistTileControl]] = []
    for component in (1, 2):
        own, other = bases[component], bases[3 - component]
        table: dict[str, DistTileControl] = {}
        for tile in tilings[component].tiles():
            hit = caches[component][tile.tile_id][k_star]
            seq = approx_sequence(sys, component, tile, hit.pattern, epsilon,
                                  own, other, spec)
            if not prop_check(seq, ring_a, tol=max(tol, 1e-9)):
                raise SynthesisError(
                    f"component {component} tile {tile.tile_id}: certificate "
                    "fails at the ring extension")
            table[tile.tile_id] = DistTileControl(
                tile.tile_id, hit.pattern, hit.a_sup, seq.steps[-1].at(ring_a))
        tables.append(table)
    return DistRing(
        index=index, kind="stability" if stability else "reach",
        base1=base1, base2=base2,
        extended1=extend_box(base1, ring_a, spec),
        extended2=extend_box(base2, ring_a, spec),
        a=ring_a, epsilon=epsilon, k1=k_star, k2=k_star,
        tiling1=tilings[1], tiling2=tilings[2],
        table1=tables[0], table2=tables[1], horizon=horizon)


def macro_step_synthesis_distributed(sys: SwitchedSystem, base: Box,
                                     horizon: int, depth: int, epsilon: float,
                                     spec: ExtensionSpec = ExtensionSpec(),
                                     index: int = 1, strategy: str = "adaptive",
                                     tol: float = 0.0) -> DistRing:
    """One distributed ring; raises RefinementError when a component's tiling
    cannot reach a common pattern length within the depth budget."""
    return _build_ring(sys, base, horizon, depth, epsilon, spec, index,
                       strategy, tol, stability=False)


def stability_synthesis_distributed(sys: SwitchedSystem, base: Box,
                                    horizon: int, depth: int, epsilon: float,
                                    spec: ExtensionSpec = ExtensionSpec(),
                                    strategy: str = "adaptive",
                                    tol: float = 0.0) -> DistRing:
    """Zero-extension distributed ring: looping its tables keeps both
    components inside their bases, wandering at most epsilon outside."""
    return _build_ring(sys, base, horizon, depth, epsilon, spec, index=0,
                       strategy=strategy, tol=tol, stability=True)


def iterate_synthesis_distributed(sys: SwitchedSystem, objective: Box,
                                  horizon: int, depth: int, epsilon: float,
                                  spec: ExtensionSpec = ExtensionSpec(),
                                  eta: float = 0.1, max_rings: int = 100,
                                  strategy: str = "adaptive",
                                  tol: float = 0.0) -> list[DistRing]:
    """Nested distributed rings, innermost first; same stopping rules as the
    centralized iteration."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if max_rings < 1:
        raise ValueError("max_rings must be at least 1")
    rings: list[DistRing] = []
    base = objective
    for index in range(1, max_rings + 1):
        try:
            ring = macro_step_synthesis_distributed(
                sys, base, horizon, depth, epsilon, spec, index=index,
                strategy=strategy, tol=tol)
        except RefinementError:
            break
        if ring.a < eta:
            break
        rings.append(ring)
        base = Box(
            list(ring.extended1.lo) + list(ring.extended2.lo),
            list(ring.extended1.hi) + list(ring.extended2.hi))
    return rings


def epsilon_report(sys: SwitchedSystem, base: Box, horizon: int,
                   epsilon: float, spec: ExtensionSpec = ExtensionSpec(),
                   depth: int = 1, tol: float = 0.0) -> dict:
    """Diagnose a candidate margin width on uniformly refined component bases.

    For each component, reports the pattern lengths admissible for every
    tile of the depth-`depth` uniform tiling, and when none exists, which
    failure dominates: first steps escaping the corridor (margin too tight)
    or no pattern managing to land back in the base (margin, hence the
    assumed neighbour wander, too wide).
    """
    base1, base2 = _component_bases(sys, base)
    report: dict = {"epsilon": epsilon, "depth": depth, "components": {}}
    for component, own, other in ((1, base1, base2), (2, base2, base1)):
        tiling = trivial_tiling(own).uniform(depth)
        tiles = tiling.tiles()
        hits = {t.tile_id: _scan_tile(sys, component, t, own, other, horizon,
                                      epsilon, spec, tol) for t in tiles}
        common = sorted(k for k in range(1, horizon + 1)
                        if all(k in hits[t.tile_id] for t in tiles))
        margin = margin_parambox(own, epsilon, spec).at(0.0)
        n_modes = len(sys.modes.components[component - 1])
        first_step_ok = 0
        checked = 0
        for tile in tiles:
            for mode in range(n_modes):
                seq = approx_sequence(sys, component, tile, (mode,), epsilon,
                                      own, other, spec)
                checked += 1
                if box_inclusion(seq.steps[1].at(0.0), margin, slack=-tol):
                    first_step_ok += 1
        entry = {
            "admissible_lengths": common,
            "tiles_without_any_length": sorted(
                t.tile_id for t in tiles if not hits[t.tile_id]),
            "single_steps_inside_margin": f"{first_step_ok}/{checked}",
        }
        if not common:
            entry["diagnosis"] = ("margin too tight: single steps already "
                                  "escape the corridor"
                                  if first_step_ok == 0 else
                                  "margin too wide: no pattern lands back in "
                                  "the base under the widened neighbour box")
        report["components"][component] = entry
    return report
