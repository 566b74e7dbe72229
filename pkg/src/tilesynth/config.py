"""Configuration files: schema validation and system construction.

Configs are YAML documents.  The system block is either `continuous`
(base drift/offset plus per-actuator additive terms, sampled at tau_s) or
`discrete` (explicit per-joint-mode maps).  Validation errors name the
offending field.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .geometry import AffineMap, Box
from .runtime import Schedule
from .system import (Actuator, ComponentModes, ContinuousSpec, ModeSet,
                     ModelError, SwitchedSystem, actuator_modes, discretize)
from .tiling import ExtensionSpec

__all__ = ["Config", "ConfigError", "load_config", "load_schedule",
           "bundled_config_path", "bundled_schedule_path", "list_bundled",
           "sha256_of_file"]


class ConfigError(ValueError):
    """Schema violation; the message names the failing field."""


def _require(data: dict, key: str, context: str):
    if key not in data:
        raise ConfigError(f"{context}.{key}: required field missing")
    return data[key]


def _as_matrix(value, field: str, shape=None) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{field}: not a numeric array ({err})") from err
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{field}: contains non-finite values")
    if shape is not None and arr.shape != shape:
        raise ConfigError(f"{field}: expected shape {shape}, got {arr.shape}")
    return arr


@dataclass
class RuntimeBlock:
    x0: list[list[float]]
    max_steps: int
    schedule: str | None


@dataclass
class Config:
    name: str
    system: SwitchedSystem
    objective: Box
    mode: str
    horizon: int
    depth: int
    epsilon: float
    eta: float
    max_rings: int
    extension: ExtensionSpec
    strategy: str
    runtime: RuntimeBlock | None
    sha256: str


def _parse_component_modes(data: dict, which: str, continuous: bool
                           ) -> tuple[ComponentModes, tuple[int, ...]]:
    """Returns the mode list and, for continuous systems, the actuator ids."""
    ctx = f"modes.{which}"
    if data is None:
        return ComponentModes(("-",), (0,)), ()
    if continuous:
        act = data.get("actuators", [])
        if not isinstance(act, list) or any(not isinstance(i, int) for i in act):
            raise ConfigError(f"{ctx}.actuators: must be a list of actuator indices")
        max_active = data.get("max_active")
        if max_active is not None and (not isinstance(max_active, int) or max_active < 0):
            raise ConfigError(f"{ctx}.max_active: must be a nonnegative integer")
        return actuator_modes(len(act), max_active), tuple(act)
    labels = data.get("labels")
    if not labels:
        raise ConfigError(f"{ctx}.labels: required for discrete-form systems")
    counts = data.get("active_counts")
    if counts is None:
        counts = [label.count("1") if set(label) <= {"0", "1"} else 0
                  for label in labels]
    if len(counts) != len(labels):
        raise ConfigError(f"{ctx}.active_counts: length must match labels")
    return ComponentModes(tuple(labels), tuple(int(c) for c in counts)), ()


def _parse_actuator(entry: dict, idx: int, n: int) -> Actuator:
    ctx = f"system.continuous.actuators[{idx}]"
    a_add = np.zeros((n, n))
    if "A_add" in entry:
        a_add = _as_matrix(entry["A_add"], f"{ctx}.A_add", (n, n))
    if "A_diag_add" in entry:
        for key, val in entry["A_diag_add"].items():
            a_add[int(key), int(key)] += float(val)
    c_add = np.zeros(n)
    if "c_add" in entry:
        c_add = _as_matrix(entry["c_add"], f"{ctx}.c_add", (n,))
    if "c_add_sparse" in entry:
        for key, val in entry["c_add_sparse"].items():
            c_add[int(key)] += float(val)
    if not (np.any(a_add) or np.any(c_add)):
        raise ConfigError(f"{ctx}: actuator has no effect "
                          "(need A_add/A_diag_add/c_add/c_add_sparse)")
    return Actuator(a_add, c_add, component=0)  # component assigned by caller


def _build_continuous(block: dict, split: tuple[int, int], modes: ModeSet,
                      act_ids: tuple[tuple[int, ...], tuple[int, ...]],
                      offset_sensitivity) -> SwitchedSystem:
    n = split[0] + split[1]
    tau = _require(block, "tau_s", "system.continuous")
    if not isinstance(tau, (int, float)) or tau <= 0:
        raise ConfigError("system.continuous.tau_s: must be positive")
    base_a = _as_matrix(_require(block, "base_A", "system.continuous"),
                        "system.continuous.base_A", (n, n))
    base_c = _as_matrix(_require(block, "base_c", "system.continuous"),
                        "system.continuous.base_c", (n,))
    raw_actuators = block.get("actuators", [])
    actuators = tuple(_parse_actuator(e, i, n) for i, e in enumerate(raw_actuators))
    assigned = [i for ids in act_ids for i in ids]
    if sorted(assigned) != list(range(len(actuators))):
        raise ConfigError(
            "modes.*.actuators: every actuator must be assigned to exactly "
            f"one component (got {sorted(assigned)} of {len(actuators)})")
    spec = ContinuousSpec(base_a, base_c, actuators, float(tau))
    try:
        return discretize(spec, split, modes, act_ids, offset_sensitivity)
    except ModelError as err:
        raise ConfigError(f"system.continuous: {err}") from err


def _build_discrete(block: dict, split: tuple[int, int], modes: ModeSet,
                    offset_sensitivity) -> SwitchedSystem:
    n = split[0] + split[1]
    tau = block.get("tau_s", 1.0)
    if not isinstance(tau, (int, float)) or tau <= 0:
        raise ConfigError("system.discrete.tau_s: must be positive")
    label_index = [
        {label: i for i, label in enumerate(comp.labels)}
        for comp in modes.components
    ]
    joint: dict[tuple[int, int], AffineMap] = {}
    for row, entry in enumerate(block.get("maps", [])):
        ctx = f"system.discrete.maps[{row}]"
        u = _require(entry, "u", ctx)
        if not isinstance(u, list) or len(u) != 2:
            raise ConfigError(f"{ctx}.u: must be a [label1, label2] pair")
        l1, l2 = str(u[0]), str(u[1])
        if l1 not in label_index[0] or l2 not in label_index[1]:
            raise ConfigError(f"{ctx}.u: unknown mode label {u!r}")
        m = _as_matrix(_require(entry, "M", ctx), f"{ctx}.M", (n, n))
        c = _as_matrix(_require(entry, "c", ctx), f"{ctx}.c", (n,))
        joint[(label_index[0][l1], label_index[1][l2])] = AffineMap(m, c)
    expected = modes.n1 * modes.n2
    if len(joint) != expected:
        raise ConfigError(
            f"system.discrete.maps: need one map per joint mode "
            f"({expected} expected, {len(joint)} given)")
    try:
        return SwitchedSystem.from_joint_maps(split, modes, joint,
                                              offset_sensitivity, float(tau))
    except ModelError as err:
        raise ConfigError(f"system.discrete: {err}") from err


def parse_config(data: dict, source: str = "<config>",
                 sha256: str = "") -> Config:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    split_raw = _require(data, "split", "config")
    if (not isinstance(split_raw, list) or len(split_raw) != 2
            or any(not isinstance(v, int) or v < 0 for v in split_raw)
            or split_raw[0] < 1):
        raise ConfigError("split: must be [n1, n2] with n1 >= 1, n2 >= 0")
    split = (split_raw[0], split_raw[1])
    n = split[0] + split[1]

    system_block = _require(data, "system", "config")
    continuous = "continuous" in system_block
    if continuous == ("discrete" in system_block):
        raise ConfigError("system: exactly one of 'continuous' or 'discrete'")

    modes_block = data.get("modes", {})
    comp1, act1 = _parse_component_modes(modes_block.get("component_1"),
                                         "component_1", continuous)
    comp2, act2 = _parse_component_modes(modes_block.get("component_2"),
                                         "component_2", continuous)
    constraints = data.get("constraints") or {}
    gmax = constraints.get("global_max_active")
    if gmax is not None and (not isinstance(gmax, int) or gmax < 0):
        raise ConfigError("constraints.global_max_active: must be a "
                          "nonnegative integer")
    modes = ModeSet((comp1, comp2), gmax)

    sens = data.get("offset_sensitivity")
    if sens is not None:
        sens = _as_matrix(sens, "offset_sensitivity", (n,))

    if continuous:
        system = _build_continuous(system_block["continuous"], split, modes,
                                   (act1, act2), sens)
    else:
        system = _build_discrete(system_block["discrete"], split, modes, sens)

    objective_block = _require(data, "objective", "config")
    r_raw = _require(objective_block, "R", "objective")
    r_arr = _as_matrix(r_raw, "objective.R", (n, 2))
    if np.any(r_arr[:, 0] > r_arr[:, 1]):
        raise ConfigError("objective.R: lower bounds must not exceed upper")
    objective = Box.from_bounds(r_arr)

    synth = _require(data, "synthesis", "config")
    mode = _require(synth, "mode", "synthesis")
    if mode not in ("centralized", "distributed", "stability"):
        raise ConfigError("synthesis.mode: must be centralized, distributed "
                          "or stability")
    horizon = _require(synth, "K", "synthesis")
    if not isinstance(horizon, int) or horizon < 1:
        raise ConfigError("synthesis.K: must be a positive integer")
    depth = _require(synth, "D", "synthesis")
    if not isinstance(depth, int) or depth < 0:
        raise ConfigError("synthesis.D: must be a nonnegative integer")
    epsilon = synth.get("epsilon", 0.0)
    if not isinstance(epsilon, (int, float)) or epsilon < 0:
        raise ConfigError("synthesis.epsilon: must be nonnegative")
    if mode == "distributed" and epsilon <= 0:
        raise ConfigError("synthesis.epsilon: must be positive for "
                          "distributed synthesis")
    eta = synth.get("eta", 0.1)
    if not isinstance(eta, (int, float)) or eta <= 0:
        raise ConfigError("synthesis.eta: must be positive")
    max_rings = synth.get("max_rings", 100)
    if not isinstance(max_rings, int) or max_rings < 1:
        raise ConfigError("synthesis.max_rings: must be a positive integer")
    ext_mode = synth.get("extension", "lower")
    if ext_mode not in ("lower", "symmetric"):
        raise ConfigError("synthesis.extension: must be 'lower' or 'symmetric'")
    strategy = synth.get("strategy", "adaptive")
    if strategy not in ("adaptive", "uniform"):
        raise ConfigError("synthesis.strategy: must be 'adaptive' or 'uniform'")
    if mode == "distributed" and split[1] == 0:
        raise ConfigError("split: distributed synthesis needs n2 >= 1")

    runtime_block = None
    if "runtime" in data and data["runtime"] is not None:
        rt = data["runtime"]
        x0_list = rt.get("x0", [])
        x0_parsed = []
        for i, x0 in enumerate(x0_list):
            x0_parsed.append(list(_as_matrix(x0, f"runtime.x0[{i}]", (n,))))
        max_steps = rt.get("max_steps", 1000)
        if not isinstance(max_steps, int) or max_steps < 1:
            raise ConfigError("runtime.max_steps: must be a positive integer")
        runtime_block = RuntimeBlock(x0_parsed, max_steps, rt.get("schedule"))

    return Config(
        name=str(data.get("name", Path(source).stem)),
        system=system, objective=objective, mode=mode, horizon=horizon,
        depth=depth, epsilon=float(epsilon), eta=float(eta),
        max_rings=max_rings, extension=ExtensionSpec(ext_mode),
        strategy=strategy, runtime=runtime_block, sha256=sha256)


def sha256_of_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"config {path} is not valid YAML: {err}") from err
    return parse_config(data, source=str(path), sha256=sha256_of_file(path))


def load_schedule(path) -> Schedule:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as err:
        raise ConfigError(f"cannot read schedule {path}: {err}") from err
    if not isinstance(data, dict):
        raise ConfigError(f"schedule {path}: root must be a mapping")
    try:
        return Schedule.from_dict(data)
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"schedule {path}: {err}") from err


def _bundled_root():
    return resources.files("tilesynth") / "configs"


def bundled_config_path(name: str) -> Path:
    """Path of a bundled case-study config (name without extension)."""
    path = _bundled_root() / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError(f"no bundled config named {name!r}; "
                          f"available: {', '.join(list_bundled())}")
    return Path(str(path))


def bundled_schedule_path(name: str) -> Path:
    path = _bundled_root() / "schedules" / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError(f"no bundled schedule named {name!r}")
    return Path(str(path))


def list_bundled() -> list[str]:
    return sorted(p.name.removesuffix(".yaml")
                  for p in _bundled_root().iterdir()
                  if p.name.endswith(".yaml"))
