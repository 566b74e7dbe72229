"""Closed-loop simulation and independent certificate verification.

Simulation replays the synthesized tables exactly: the centralized
controller re-locates its ring and tile at every macro-step boundary and
plays the tile's pattern open-loop; the distributed controller runs a fixed
ring schedule (outermost to innermost, then the stability ring forever)
with each component re-locating its own state in its own tiling every k_c
steps, never reading the other component.

Verification recomputes every inclusion certificate from scratch from the
embedded system, and checks ring nesting and the fixed-length hypothesis.
Failures are report rows, not exceptions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .artifact import ControllerArtifact
from .centralized import Ring, margin_parambox
from .distributed import DistRing, approx_sequence, prop_check
from .geometry import Box, box_inclusion, compose, image_bounds
from .system import SwitchedSystem
from .tiling import ExtensionSpec, OutOfDomainError, extend_box, extend_tile

__all__ = ["Schedule", "Trajectory", "SimulationError", "simulate",
           "verify_artifact", "VerificationReport", "sample_macro_step"]

VERIFY_TOL = 1e-9


class SimulationError(RuntimeError):
    """Artifact table is inconsistent with the simulated state."""


@dataclass(frozen=True)
class Schedule:
    """Piecewise-constant scalar disturbance over the step index."""

    entries: tuple[tuple[int, float], ...] = ()
    default: float = 0.0

    def __post_init__(self):
        steps = [s for s, _ in self.entries]
        if steps != sorted(steps):
            raise ValueError("schedule entries must be sorted by step")

    def value_at(self, t: int) -> float:
        value = self.default
        for start, w in self.entries:
            if t >= start:
                value = w
            else:
                break
        return value

    @classmethod
    def from_dict(cls, data: dict) -> "Schedule":
        entries = tuple(sorted((int(e["from"]), float(e["w"]))
                               for e in data.get("steps", [])))
        return cls(entries, float(data.get("default_w", 0.0)))


ZERO_SCHEDULE = Schedule()


@dataclass
class Trajectory:
    """States plus, per applied step, the joint mode, ring index and phase."""

    states: np.ndarray  # (T+1, n)
    modes: list[str]
    rings: list[int]
    phases: list[int]
    tau_s: float = 1.0

    def __len__(self) -> int:
        return len(self.modes)

    def first_step_in(self, box: Box) -> int | None:
        for t in range(self.states.shape[0]):
            if box.contains_point(self.states[t]):
                return t
        return None

    def steps_in(self, box: Box) -> list[int]:
        return [t for t in range(self.states.shape[0])
                if box.contains_point(self.states[t])]

    def write_csv(self, fh) -> None:
        n = self.states.shape[1]
        header = ["step", "time_s"] + [f"x_{i + 1}" for i in range(n)] + \
                 ["mode_label", "ring", "phase"]
        fh.write(",".join(header) + "\n")
        for t in range(self.states.shape[0]):
            row = [str(t), f"{t * self.tau_s:.17g}"]
            row += [f"{v:.17g}" for v in self.states[t]]
            if t < len(self.modes):
                row += [self.modes[t], str(self.rings[t]), str(self.phases[t])]
            else:
                row += ["", "", ""]
            fh.write(",".join(row) + "\n")


class _Recorder:
    def __init__(self, x0: np.ndarray, max_steps: int):
        self.states = [np.asarray(x0, dtype=float)]
        self.modes: list[str] = []
        self.rings: list[int] = []
        self.phases: list[int] = []
        self.max_steps = max_steps

    @property
    def full(self) -> bool:
        return len(self.modes) >= self.max_steps

    def push(self, x_next, label: str, ring: int, phase: int) -> None:
        self.states.append(np.asarray(x_next, dtype=float))
        self.modes.append(label)
        self.rings.append(ring)
        self.phases.append(phase)


def _apply_pattern(sys: SwitchedSystem, rec: _Recorder, steps, ring_index: int,
                   schedule: Schedule) -> np.ndarray:
    x = rec.states[-1]
    for phase, (i1, i2) in enumerate(steps):
        if rec.full:
            return x
        t = len(rec.modes)
        x = sys.step(x, i1, i2, schedule.value_at(t))
        rec.push(x, sys.modes.joint_label(i1, i2), ring_index, phase)
    return x


def _locate_ring(artifact: ControllerArtifact, x) -> Ring:
    """Innermost ring whose extended box contains x; the stability ring's
    base counts as the innermost region."""
    if artifact.stability_ring.base.contains_point(x):
        return artifact.stability_ring
    for ring in artifact.rings:
        if ring.extended.contains_point(x):
            return ring
    raise OutOfDomainError(
        f"state {np.asarray(x).tolist()} outside the capture set "
        f"{artifact.outermost_box()!r}")


def _simulate_centralized(artifact: ControllerArtifact, x0, max_steps: int,
                          schedule: Schedule) -> Trajectory:
    sys = artifact.system
    spec = artifact.extension
    rec = _Recorder(x0, max_steps)
    x = rec.states[0]
    while not rec.full:
        ring = _locate_ring(artifact, x)
        tile = ring.tiling.locate(x, ring.a, spec)
        control = ring.table.get(tile.tile_id)
        if control is None:
            raise SimulationError(
                f"ring {ring.index} has no table entry for tile {tile.tile_id}")
        x = _apply_pattern(sys, rec, control.pattern.steps(), ring.index, schedule)
    return Trajectory(np.array(rec.states), rec.modes, rec.rings, rec.phases,
                      tau_s=sys.tau_s)


class _ComponentCursor:
    """One component's lookup state inside the fixed distributed schedule."""

    def __init__(self, sys: SwitchedSystem, component: int,
                 spec: ExtensionSpec):
        self.component = component
        self.spec = spec
        n1 = sys.split[0]
        self.slice = slice(0, n1) if component == 1 else slice(n1, sys.n)
        self.pattern: tuple[int, ...] = ()
        self.pos = 0

    def next_mode(self, ring: DistRing, x: np.ndarray) -> int:
        k = ring.component_k(self.component)
        if self.pos % k == 0:
            tiling = ring.component_tiling(self.component)
            tile = tiling.locate(x[self.slice], ring.a, self.spec)
            control = ring.component_table(self.component).get(tile.tile_id)
            if control is None:
                raise SimulationError(
                    f"component {self.component}, ring {ring.index}: no table "
                    f"entry for tile {tile.tile_id}")
            self.pattern = control.pattern
            self.pos = 0
        mode = self.pattern[self.pos]
        self.pos += 1
        return mode


def _simulate_distributed(artifact: ControllerArtifact, x0, max_steps: int,
                          schedule: Schedule) -> Trajectory:
    sys = artifact.system
    spec = artifact.extension
    rec = _Recorder(x0, max_steps)
    x = rec.states[0]
    outer = artifact.outermost_box()
    if not outer.contains_point(x):
        raise OutOfDomainError(
            f"state {np.asarray(x).tolist()} outside the capture set {outer!r}")

    def ring_schedule():
        for ring in reversed(artifact.rings):
            yield ring
        while True:
            yield artifact.stability_ring

    for ring in ring_schedule():
        c1 = _ComponentCursor(sys, 1, spec)
        c2 = _ComponentCursor(sys, 2, spec)
        for phase in range(ring.ell):
            if rec.full:
                return Trajectory(np.array(rec.states), rec.modes, rec.rings,
                                  rec.phases, tau_s=sys.tau_s)
            i1 = c1.next_mode(ring, x)
            i2 = c2.next_mode(ring, x)
            t = len(rec.modes)
            x = sys.step(x, i1, i2, schedule.value_at(t))
            rec.push(x, sys.modes.joint_label(i1, i2), ring.index, phase)
    raise AssertionError("unreachable")


def simulate(artifact: ControllerArtifact, x0, max_steps: int,
             schedule: Schedule | None = None) -> Trajectory:
    """Run the closed loop from x0 for max_steps elementary steps.

    x0 must lie inside the outermost ring.  A schedule adds
    offset_sensitivity * w(t) to every step (robustness experiments).
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (artifact.system.n,):
        raise ValueError(f"x0 must have dimension {artifact.system.n}")
    schedule = schedule or ZERO_SCHEDULE
    if artifact.mode == "distributed":
        return _simulate_distributed(artifact, x0, max_steps, schedule)
    return _simulate_centralized(artifact, x0, max_steps, schedule)


# -- verification -------------------------------------------------------------


@dataclass
class VerificationReport:
    entries: list[tuple[str, bool, str]] = field(default_factory=list)

    def check(self, name: str, passed: bool, detail: str = "") -> None:
        self.entries.append((name, bool(passed), detail))

    @property
    def ok(self) -> bool:
        return all(passed for _, passed, _ in self.entries)

    @property
    def failures(self) -> list[tuple[str, bool, str]]:
        return [e for e in self.entries if not e[1]]

    def write_csv(self, fh) -> None:
        fh.write("certificate,status,detail\n")
        for name, passed, detail in self.entries:
            fh.write(f"{name},{'pass' if passed else 'FAIL'},{detail}\n")

    def summary(self) -> str:
        n_fail = len(self.failures)
        head = (f"{len(self.entries)} certificates checked, "
                f"{len(self.entries) - n_fail} passed, {n_fail} failed")
        lines = [head]
        for name, _, detail in self.failures:
            lines.append(f"  FAIL {name}: {detail}".rstrip())
        return "\n".join(lines)


def _verify_central_ring(sys: SwitchedSystem, ring: Ring, spec: ExtensionSpec,
                         report: VerificationReport, tol: float) -> None:
    tag = f"ring{ring.index}"
    tiles = ring.tiling.tiles()
    ids = {t.tile_id for t in tiles}
    report.check(f"{tag}/table-complete", ids == set(ring.table),
                 "every tile must have exactly one table entry")
    report.check(f"{tag}/extension",
                 ring.extended == extend_box(ring.base, ring.a, spec),
                 "extended box must equal base extended by a")
    if ring.kind == "stability":
        report.check(f"{tag}/zero-extension", ring.a == 0.0,
                     "stability ring must not extend")
    for tile in tiles:
        control = ring.table.get(tile.tile_id)
        if control is None:
            continue
        name = f"{tag}/tile{tile.tile_id}"
        if len(control.pattern) > ring.horizon:
            report.check(name, False, "pattern exceeds the horizon")
            continue
        source = extend_tile(tile, ring.a, spec)
        image = image_bounds(sys.pattern_map(control.pattern), source)
        ok = box_inclusion(image, ring.base, slack=-tol)
        detail = "" if ok else "image of extended tile escapes the base"
        if ok and ring.kind == "stability":
            margin = margin_parambox(ring.base, ring.epsilon, spec).at(0.0)
            acc = None
            for i1, i2 in list(control.pattern.steps())[:-1]:
                step = sys.joint_map(i1, i2)
                acc = step if acc is None else compose(step, acc)
                if not box_inclusion(image_bounds(acc, source), margin,
                                     slack=-tol):
                    ok, detail = False, "prefix image escapes the margin box"
                    break
        if ok and not box_inclusion(control.certificate, ring.base, slack=-tol):
            ok, detail = False, "stored certificate escapes the base"
        report.check(name, ok, detail)


def _verify_dist_ring(sys: SwitchedSystem, ring: DistRing, spec: ExtensionSpec,
                      report: VerificationReport, tol: float) -> None:
    tag = f"ring{ring.index}"
    report.check(f"{tag}/lcm", ring.ell == ring.alpha1 * ring.k1 ==
                 ring.alpha2 * ring.k2, "macro length must be the lcm")
    report.check(f"{tag}/horizon",
                 1 <= ring.k1 <= ring.horizon and 1 <= ring.k2 <= ring.horizon,
                 "component lengths must lie in 1..K")
    if ring.kind == "stability":
        report.check(f"{tag}/zero-extension", ring.a == 0.0,
                     "stability ring must not extend")
    for component in (1, 2):
        tiling = ring.component_tiling(component)
        table = ring.component_table(component)
        own = ring.component_base(component)
        other = ring.component_base(3 - component)
        k = ring.component_k(component)
        tiles = tiling.tiles()
        report.check(f"{tag}/c{component}/table-complete",
                     {t.tile_id for t in tiles} == set(table),
                     "every tile must have exactly one table entry")
        ext = extend_box(own, ring.a, spec)
        stored_ext = ring.extended1 if component == 1 else ring.extended2
        report.check(f"{tag}/c{component}/extension", stored_ext == ext,
                     "extended box must equal base extended by a")
        # the tightened first-step envelope needs block alignment, which
        # holds exactly when both components share one length
        aligned = ring.k1 == ring.k2
        for tile in tiles:
            control = table.get(tile.tile_id)
            if control is None:
                continue
            name = f"{tag}/c{component}/tile{tile.tile_id}"
            if len(control.pattern) != k:
                report.check(name, False,
                             f"pattern length {len(control.pattern)} != k={k}")
                continue
            seq = approx_sequence(sys, component, tile, control.pattern,
                                  ring.epsilon, own, other, spec,
                                  aligned=aligned)
            ok = prop_check(seq, ring.a, tol=tol)
            report.check(name, ok,
                         "" if ok else "over-approximation recursion escapes")


def verify_artifact(artifact: ControllerArtifact,
                    tol: float = VERIFY_TOL) -> VerificationReport:
    """Re-derive every certificate from the embedded system.

    tol loosens comparisons by an absolute epsilon to absorb the round-off
    of re-evaluating closed-form suprema; genuine corruption overshoots it
    by orders of magnitude.
    """
    report = VerificationReport()
    sys = artifact.system
    spec = artifact.extension
    distributed = artifact.mode == "distributed"
    report.check("rings/indexed", [r.index for r in artifact.rings] ==
                 list(range(1, len(artifact.rings) + 1)),
                 "reach rings must be indexed 1..m innermost first")
    # nesting: ring 1 grows off the objective, ring i+1 off ring i
    prev = artifact.stability_ring
    nested = True
    for ring in artifact.rings:
        if distributed:
            prev_ext = (prev.base1.concat(prev.base2) if prev.kind == "stability"
                        else prev.extended1.concat(prev.extended2))
            base = ring.base1.concat(ring.base2)
        else:
            prev_ext = prev.base if prev.kind == "stability" else prev.extended
            base = ring.base
        if base != prev_ext:
            nested = False
        prev = ring
    report.check("rings/nested", nested,
                 "each ring's base must equal the previous extended box")
    verifier = _verify_dist_ring if distributed else _verify_central_ring
    verifier(sys, artifact.stability_ring, spec, report, tol)
    for ring in artifact.rings:
        verifier(sys, ring, spec, report, tol)
    return report


def sample_macro_step(sys: SwitchedSystem, artifact: ControllerArtifact,
                      ring, count: int, rng: np.random.Generator) -> int:
    """Simulate one macro-step from random points of the ring's extended box;
    returns how many fail to land in the base (0 for a sound certificate)."""
    spec = artifact.extension
    violations = 0
    if isinstance(ring, DistRing):
        ext = ring.extended1.concat(ring.extended2)
        base = ring.base1.concat(ring.base2)
        for x in ext.sample(rng, count):
            c1 = _ComponentCursor(sys, 1, spec)
            c2 = _ComponentCursor(sys, 2, spec)
            for _ in range(ring.ell):
                x = sys.step(x, c1.next_mode(ring, x), c2.next_mode(ring, x))
            if not base.contains_point(x):
                violations += 1
    else:
        for x in ring.extended.sample(rng, count):
            tile = ring.tiling.locate(x, ring.a, spec)
            control = ring.table[tile.tile_id]
            for i1, i2 in control.pattern.steps():
                x = sys.step(x, i1, i2)
            if not ring.base.contains_point(x):
                violations += 1
    return violations
