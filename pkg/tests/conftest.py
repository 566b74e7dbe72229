import numpy as np
import pytest

import tilesynth as ts
from tilesynth.artifact import ControllerArtifact, TOOL_VERSION
from tilesynth.geometry import AffineMap, Box
from tilesynth.system import ComponentModes, ModeSet, SwitchedSystem


def toy1d_system() -> SwitchedSystem:
    """x' = 0.5 x + 10 u, u in {0, 1}; hand-checkable throughout."""
    modes = ModeSet((ComponentModes(("0", "1"), (0, 1)),
                     ComponentModes(("-",), (0,))))
    rowmaps = [
        [AffineMap([[0.5]], [0.0]), AffineMap([[0.5]], [10.0])],
        [],
    ]
    return SwitchedSystem((1, 0), modes, rowmaps)


TOY_R = Box([18.0], [22.0])


@pytest.fixture(scope="session")
def toy1d():
    return toy1d_system()


@pytest.fixture(scope="session")
def two_room_centralized_cfg():
    return ts.load_config(ts.bundled_config_path("two_room_centralized"))


@pytest.fixture(scope="session")
def two_room_distributed_cfg():
    return ts.load_config(ts.bundled_config_path("two_room_distributed"))


def build_artifact(cfg) -> ControllerArtifact:
    common = dict(horizon=cfg.horizon, depth=cfg.depth, spec=cfg.extension,
                  strategy=cfg.strategy)
    if cfg.mode == "centralized":
        rings = ts.iterate_synthesis(cfg.system, cfg.objective, eta=cfg.eta,
                                     max_rings=cfg.max_rings, **common)
        stability = ts.stability_synthesis(cfg.system, cfg.objective,
                                           epsilon=cfg.epsilon, **common)
    elif cfg.mode == "distributed":
        rings = ts.iterate_synthesis_distributed(
            cfg.system, cfg.objective, epsilon=cfg.epsilon, eta=cfg.eta,
            max_rings=cfg.max_rings, **common)
        stability = ts.stability_synthesis_distributed(
            cfg.system, cfg.objective, epsilon=cfg.epsilon, **common)
    else:
        rings = []
        stability = ts.stability_synthesis(cfg.system, cfg.objective,
                                           epsilon=cfg.epsilon, **common)
    return ControllerArtifact(
        mode=cfg.mode, system=cfg.system, extension=cfg.extension,
        rings=rings, stability_ring=stability,
        metadata={"tool_version": TOOL_VERSION, "config_name": cfg.name,
                  "config_sha256": cfg.sha256})


@pytest.fixture(scope="session")
def two_room_centralized_artifact(two_room_centralized_cfg):
    return build_artifact(two_room_centralized_cfg)


@pytest.fixture(scope="session")
def two_room_distributed_artifact(two_room_distributed_cfg):
    return build_artifact(two_room_distributed_cfg)


@pytest.fixture(scope="session")
def toy1d_artifact():
    return build_artifact(ts.load_config(ts.bundled_config_path("toy1d")))


# -- randomized system generators ---------------------------------------------


def random_stable_2d(seed: int) -> tuple[SwitchedSystem, Box]:
    """Contractive 2-D system (1+1 split) whose joint modes pull the state
    toward points spread around the objective; synthesis succeeds for the
    seeds used in the suite."""
    rng = np.random.default_rng(seed)
    objective = Box([0.0, 0.0], [4.0, 4.0])
    center = objective.center
    rowmaps = [[], []]
    for comp in (0, 1):
        for target in (1.2 + rng.uniform(-0.3, 0.3),
                       2.8 + rng.uniform(-0.3, 0.3)):
            s = rng.uniform(0.35, 0.7)
            w = rng.uniform(-0.06, 0.06)
            g = target - s * target - w * center[1 - comp]
            row = np.zeros((1, 2))
            row[0, comp] = s
            row[0, 1 - comp] = w
            rowmaps[comp].append(AffineMap(row, [g]))
    modes = ModeSet((ComponentModes(("lo", "hi"), (0, 1)),
                     ComponentModes(("lo", "hi"), (0, 1))))
    return SwitchedSystem((1, 1), modes, rowmaps), objective


def random_coupled_2x2(seed: int) -> tuple[SwitchedSystem, Box, float]:
    """Coupled 2+2-dim system with weak cross-block coupling; returns the
    system, objective box and a margin width for distributed synthesis."""
    rng = np.random.default_rng(seed)
    objective = Box([0.0] * 4, [4.0] * 4)
    center = objective.center
    rowmaps = [[], []]
    for comp in (0, 1):
        own = slice(0, 2) if comp == 0 else slice(2, 4)
        other = slice(2, 4) if comp == 0 else slice(0, 2)
        for target in (1.3, 2.7):
            rho = rng.uniform(0.3, 0.55)
            theta = rng.uniform(-0.5, 0.5)
            rot = np.array([[np.cos(theta), -np.sin(theta)],
                            [np.sin(theta), np.cos(theta)]])
            a_own = rho * rot
            a_cross = rng.uniform(-0.03, 0.03, size=(2, 2))
            t_vec = np.full(2, target) + rng.uniform(-0.2, 0.2, size=2)
            g = t_vec - a_own @ t_vec - a_cross @ center[other]
            mat = np.zeros((2, 4))
            mat[:, own] = a_own
            mat[:, other] = a_cross
            rowmaps[comp].append(AffineMap(mat, g))
    modes = ModeSet((ComponentModes(("lo", "hi"), (0, 1)),
                     ComponentModes(("lo", "hi"), (0, 1))))
    return SwitchedSystem((2, 2), modes, rowmaps), objective, 0.5
