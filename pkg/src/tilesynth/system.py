"""Switched-system model: modes, per-mode affine dynamics, patterns.

The state vector splits into two blocks of sizes (n1, n2), and the mode
into (u1, u2).  The model keeps one affine row-map per component mode: the
rows of the joint dynamics belonging to that component, which by the
structural guarantee depend on the joint mode only through the component's
own mode.  Joint maps are assembled from the blocks, so the guarantee holds
exactly by construction; directly supplied joint maps are checked for it.

Continuous-time specifications are discretised per component: the rows
x_c' = A_c x + c_c are integrated exactly over one sampling period with the
other component's state held constant (zero-order hold on the coupling),
which is what keeps the discrete rows independent of the other component's
mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterator, Literal, Sequence

import numpy as np

from .geometry import AffineMap, DimensionError

__all__ = [
    "ComponentModes",
    "ModeSet",
    "Pattern",
    "SwitchedSystem",
    "ContinuousSpec",
    "ModelError",
    "matrix_exponential",
    "discretize",
    "enumerate_patterns",
    "enumerate_component_patterns",
]


class ModelError(ValueError):
    """Malformed system definition (dimensions, structure, mode labels)."""


@dataclass(frozen=True)
class ComponentModes:
    """One component's mode list: labels plus active-actuator counts."""

    labels: tuple[str, ...]
    active_counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.active_counts) or not self.labels:
            raise ModelError("component needs matching, nonempty label/count lists")
        if len(set(self.labels)) != len(self.labels):
            raise ModelError("duplicate mode labels within a component")

    def __len__(self) -> int:
        return len(self.labels)


def actuator_modes(count: int, max_active: int | None) -> ComponentModes:
    """All on/off vectors over `count` actuators with at most max_active on.

    Enumerated in binary order (bit i = actuator i on) so the order is
    reproducible; labels are the bit strings, empty actuator sets get "-".
    """
    labels, actives = [], []
    for bits in range(2 ** count):
        n_on = bin(bits).count("1")
        if max_active is not None and n_on > max_active:
            continue
        labels.append("".join("1" if (bits >> i) & 1 else "0" for i in range(count))
                      if count else "-")
        actives.append(n_on)
    return ComponentModes(tuple(labels), tuple(actives))


@dataclass(frozen=True)
class ModeSet:
    """Per-component mode lists plus simultaneous-activation limits.

    Per-component limits are already enforced in the component lists; the
    global limit filters joint modes per time step.
    """

    components: tuple[ComponentModes, ComponentModes]
    global_max_active: int | None = None

    @property
    def n1(self) -> int:
        return len(self.components[0])

    @property
    def n2(self) -> int:
        return len(self.components[1])

    def joint_index(self, i1: int, i2: int) -> int:
        return i1 * self.n2 + i2

    def joint_allowed(self, i1: int, i2: int) -> bool:
        if self.global_max_active is None:
            return True
        total = (self.components[0].active_counts[i1]
                 + self.components[1].active_counts[i2])
        return total <= self.global_max_active

    def allowed_joint_modes(self) -> list[tuple[int, int]]:
        return [(i1, i2)
                for i1 in range(self.n1) for i2 in range(self.n2)
                if self.joint_allowed(i1, i2)]

    def joint_label(self, i1: int, i2: int) -> str:
        l1 = self.components[0].labels[i1]
        l2 = self.components[1].labels[i2]
        if l2 == "-":
            return l1
        return f"{l1}|{l2}"


@dataclass(frozen=True)
class Pattern:
    """Per-component mode-index sequences of equal length (a macro-step)."""

    pi1: tuple[int, ...]
    pi2: tuple[int, ...]

    def __post_init__(self):
        if len(self.pi1) != len(self.pi2) or not self.pi1:
            raise ModelError("pattern components must share a positive length")

    def __len__(self) -> int:
        return len(self.pi1)

    def steps(self) -> Iterator[tuple[int, int]]:
        return zip(self.pi1, self.pi2)

    @classmethod
    def from_joint(cls, joint_steps: Sequence[tuple[int, int]]) -> "Pattern":
        return cls(tuple(s[0] for s in joint_steps), tuple(s[1] for s in joint_steps))


class SwitchedSystem:
    """Immutable switched system assembled from per-component row blocks.

    rowmaps[c][m] is the AffineMap giving component c's next-state rows
    (n_c outputs) from the full state (n inputs) under component mode m.
    """

    def __init__(self, split: tuple[int, int], modes: ModeSet,
                 rowmaps: Sequence[Sequence[AffineMap]],
                 offset_sensitivity: np.ndarray | None = None,
                 tau_s: float = 1.0):
        n1, n2 = split
        if n1 < 1 or n2 < 0:
            raise ModelError("split must have n1 >= 1 and n2 >= 0")
        n = n1 + n2
        rowmaps = list(rowmaps)
        for comp in (0, 1):
            if split[comp] == 0:
                # zero-dimensional component: one empty row map per mode
                rowmaps[comp] = [AffineMap(np.zeros((0, n)), np.zeros(0))
                                 for _ in range(len(modes.components[comp]))]
        for comp, maps in enumerate(rowmaps):
            expected_rows = split[comp]
            if len(maps) != len(modes.components[comp]):
                raise ModelError(f"component {comp + 1} needs one row map per mode")
            for m in maps:
                if m.rows != expected_rows or m.cols != n:
                    raise ModelError(
                        f"component {comp + 1} row maps must be {expected_rows}x{n}")
        if offset_sensitivity is not None:
            offset_sensitivity = np.asarray(offset_sensitivity, dtype=float)
            if offset_sensitivity.shape != (n,):
                raise ModelError("offset_sensitivity must be an n-vector")
        if tau_s <= 0:
            raise ModelError("sampling period must be positive")
        self.split = (n1, n2)
        self.n = n
        self.modes = modes
        self.rowmaps = (tuple(rowmaps[0]), tuple(rowmaps[1]))
        self.offset_sensitivity = offset_sensitivity
        self.tau_s = float(tau_s)
        self._joint_cache: dict[tuple[int, int], AffineMap] = {}

    @classmethod
    def from_joint_maps(cls, split: tuple[int, int], modes: ModeSet,
                        joint_maps: dict[tuple[int, int], AffineMap],
                        offset_sensitivity=None, tau_s: float = 1.0
                        ) -> "SwitchedSystem":
        """Build from explicit per-joint-mode maps, checking the structural
        guarantee: component rows must agree exactly across the other mode."""
        n1, n2 = split
        rowmaps: list[list[AffineMap]] = [[], []]
        for i1 in range(modes.n1):
            ref = joint_maps[(i1, 0)]
            rowmaps[0].append(AffineMap(ref.matrix[:n1], ref.offset[:n1]))
            for i2 in range(modes.n2):
                m = joint_maps[(i1, i2)]
                if not (np.array_equal(m.matrix[:n1], ref.matrix[:n1])
                        and np.array_equal(m.offset[:n1], ref.offset[:n1])):
                    raise ModelError(
                        f"rows 1..{n1} differ between joint modes ({i1},0) and "
                        f"({i1},{i2}); first-component rows must not depend on u2")
        for i2 in range(modes.n2):
            ref = joint_maps[(0, i2)]
            rowmaps[1].append(AffineMap(ref.matrix[n1:], ref.offset[n1:]))
            for i1 in range(modes.n1):
                m = joint_maps[(i1, i2)]
                if not (np.array_equal(m.matrix[n1:], ref.matrix[n1:])
                        and np.array_equal(m.offset[n1:], ref.offset[n1:])):
                    raise ModelError(
                        f"rows {n1 + 1}..{n1 + n2} differ between joint modes "
                        f"(0,{i2}) and ({i1},{i2}); second-component rows must "
                        "not depend on u1")
        return cls(split, modes, rowmaps, offset_sensitivity, tau_s)

    def component_rowmap(self, component: int, mode_index: int) -> AffineMap:
        """Rows of the joint dynamics for one component (1 or 2)."""
        if component not in (1, 2):
            raise ValueError("component must be 1 or 2")
        return self.rowmaps[component - 1][mode_index]

    def joint_map(self, i1: int, i2: int) -> AffineMap:
        key = (i1, i2)
        cached = self._joint_cache.get(key)
        if cached is None:
            top = self.rowmaps[0][i1]
            if self.split[1] == 0:
                cached = top
            else:
                bottom = self.rowmaps[1][i2]
                cached = AffineMap(np.vstack([top.matrix, bottom.matrix]),
                                   np.concatenate([top.offset, bottom.offset]))
            self._joint_cache[key] = cached
        return cached

    def step(self, x, i1: int, i2: int, disturbance: float = 0.0) -> np.ndarray:
        x_next = self.joint_map(i1, i2)(x)
        if disturbance != 0.0:
            if self.offset_sensitivity is None:
                raise ModelError("system has no offset_sensitivity vector")
            x_next = x_next + self.offset_sensitivity * disturbance
        return x_next

    def pattern_map(self, pattern: Pattern) -> AffineMap:
        """Composition of the per-step joint maps, step 1 applied first."""
        from .geometry import compose
        acc = None
        for i1, i2 in pattern.steps():
            step = self.joint_map(i1, i2)
            acc = step if acc is None else compose(step, acc)
        return acc


def pattern_map(sys: SwitchedSystem, pattern: Pattern) -> AffineMap:
    return sys.pattern_map(pattern)


# -- continuous-time specification ------------------------------------------


def matrix_exponential(m: np.ndarray, terms: int = 20) -> np.ndarray:
    """Scaling-and-squaring matrix exponential with a truncated series.

    The matrix is scaled by 2^-s until its 1-norm is at most 0.5, the series
    is summed to the given order (Horner form), then squared s times.  At
    norm 0.5 the order-20 truncation error is below 1e-16 per squaring,
    comfortably past the 1e-10 accuracy target for the dimensions used here.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError("matrix exponential needs a square matrix")
    norm = np.linalg.norm(m, 1)
    s = 0
    if norm > 0.5:
        s = int(np.ceil(np.log2(norm / 0.5)))
    scaled = m / (2.0 ** s)
    n = m.shape[0]
    result = np.eye(n)
    for k in range(terms, 0, -1):
        result = np.eye(n) + scaled @ result / k
    for _ in range(s):
        result = result @ result
    return result


@dataclass(frozen=True)
class Actuator:
    """Additive contribution of one on/off actuator to drift and offset."""

    a_add: np.ndarray
    c_add: np.ndarray
    component: int  # 1 or 2; which block's rows it may touch


@dataclass(frozen=True)
class ContinuousSpec:
    """Continuous dynamics x' = A_u x + c_u sampled every tau seconds.

    A_u (c_u) is base_a (base_c) plus the contributions of the active
    actuators.  Actuator contributions must stay within their component's
    rows so the sampled system keeps the block structure.
    """

    base_a: np.ndarray
    base_c: np.ndarray
    actuators: tuple[Actuator, ...]
    tau_s: float

    def __post_init__(self):
        a = np.asarray(self.base_a, dtype=float)
        c = np.asarray(self.base_c, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or c.shape != (a.shape[0],):
            raise ModelError("base drift must be square with a matching offset")
        if self.tau_s <= 0:
            raise ModelError("sampling period must be positive")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(c))):
            raise ModelError("continuous dynamics contain non-finite entries")

    def mode_dynamics(self, active: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        a = np.asarray(self.base_a, dtype=float).copy()
        c = np.asarray(self.base_c, dtype=float).copy()
        for idx in active:
            a += self.actuators[idx].a_add
            c += self.actuators[idx].c_add
        return a, c


def _component_rowmap_zoh(a: np.ndarray, c: np.ndarray, rows: slice,
                          tau: float) -> AffineMap:
    """Exact ZOH discretisation of one block's rows.

    Integrates x_c' = A_cc x_c + [A_co | c] (x_o; 1) over tau with (x_o; 1)
    held constant, via the augmented exponential whose top-right block is
    the convolution integral.
    """
    n = a.shape[0]
    own = np.arange(rows.start, rows.stop)
    other = np.array([d for d in range(n) if d not in own], dtype=int)
    n_c, n_o = own.size, other.size
    aug = np.zeros((n_c + n_o + 1, n_c + n_o + 1))
    aug[:n_c, :n_c] = a[np.ix_(own, own)] * tau
    if n_o:
        aug[:n_c, n_c:n_c + n_o] = a[np.ix_(own, other)] * tau
    aug[:n_c, -1] = c[own] * tau
    e = matrix_exponential(aug)
    matrix = np.zeros((n_c, n))
    matrix[:, own] = e[:n_c, :n_c]
    if n_o:
        matrix[:, other] = e[:n_c, n_c:n_c + n_o]
    return AffineMap(matrix, e[:n_c, -1])


def discretize(spec: ContinuousSpec, split: tuple[int, int], modes: ModeSet,
               component_actuators: tuple[tuple[int, ...], tuple[int, ...]],
               offset_sensitivity=None) -> SwitchedSystem:
    """Sample the continuous spec into a SwitchedSystem, per component.

    component_actuators lists, per component, the global actuator indices
    that component's mode bits refer to (bit i of a label = actuator i of
    that component's list).
    """
    n1, n2 = split
    n = np.asarray(spec.base_a).shape[0]
    if n1 + n2 != n:
        raise ModelError("split does not sum to the state dimension")
    row_ranges = (slice(0, n1), slice(n1, n))
    for comp, act_ids in enumerate(component_actuators):
        rows = row_ranges[comp]
        for idx in act_ids:
            act = spec.actuators[idx]
            mask = np.ones(n, dtype=bool)
            mask[rows] = False
            if np.any(act.a_add[mask, :]) or np.any(act.c_add[mask]):
                raise ModelError(
                    f"actuator {idx} affects rows outside component {comp + 1}; "
                    "the sampled system would lose its block structure")
    rowmaps: list[list[AffineMap]] = [[], []]
    for comp in (0, 1):
        labels = modes.components[comp].labels
        act_ids = component_actuators[comp]
        for label in labels:
            if label == "-":
                active: list[int] = []
            else:
                if len(label) != len(act_ids):
                    raise ModelError(
                        f"mode label {label!r} does not match the actuator count")
                active = [act_ids[i] for i, bit in enumerate(label) if bit == "1"]
            a, c = spec.mode_dynamics(active)
            rowmaps[comp].append(
                _component_rowmap_zoh(a, c, row_ranges[comp], spec.tau_s))
    return SwitchedSystem(split, modes, rowmaps, offset_sensitivity, spec.tau_s)


# -- pattern enumeration -----------------------------------------------------


def enumerate_component_patterns(modes: ModeSet, component: int,
                                 lengths: Sequence[int]) -> Iterator[tuple[int, ...]]:
    """Component-local patterns, shorter lengths first, lexicographic within."""
    comp = modes.components[component - 1]
    indices = range(len(comp))
    for length in lengths:
        if length < 1:
            raise ValueError("pattern lengths start at 1")
        yield from product(indices, repeat=length)


def enumerate_patterns(modes: ModeSet, component: Literal[1, 2, "joint"],
                       lengths: Sequence[int]) -> Iterator:
    """Constraint-satisfying patterns in deterministic order.

    For component 1 or 2: tuples of that component's mode indices (the
    per-component activation limit is already baked into the mode list).
    For "joint": Pattern values whose every step passes the global
    simultaneous-activation limit.
    """
    if component in (1, 2):
        yield from enumerate_component_patterns(modes, component, lengths)
        return
    if component != "joint":
        raise ValueError("component must be 1, 2, or 'joint'")
    allowed = modes.allowed_joint_modes()
    for length in lengths:
        if length < 1:
            raise ValueError("pattern lengths start at 1")
        for steps in product(allowed, repeat=length):
            yield Pattern.from_joint(steps)
