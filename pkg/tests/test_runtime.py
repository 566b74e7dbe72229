import copy
import io

import numpy as np
import pytest

from tilesynth.artifact import ControllerArtifact
from tilesynth.centralized import TileControl
from tilesynth.distributed import DistTileControl
from tilesynth.geometry import Box
from tilesynth.runtime import (Schedule, sample_macro_step, simulate,
                               verify_artifact)
from tilesynth.system import Pattern
from tilesynth.tiling import OutOfDomainError

from conftest import build_artifact, random_stable_2d
import tilesynth as ts


def test_schedule_piecewise_lookup():
    sched = Schedule(((0, -1.0), (10, 2.0), (20, 0.5)), default=0.25)
    assert sched.value_at(0) == -1.0
    assert sched.value_at(9) == -1.0
    assert sched.value_at(10) == 2.0
    assert sched.value_at(25) == 0.5


def test_schedule_default_before_first_entry():
    sched = Schedule(((5, 1.0),), default=-0.5)
    assert sched.value_at(0) == -0.5
    assert sched.value_at(5) == 1.0


def test_simulate_determinism(two_room_centralized_artifact):
    a = simulate(two_room_centralized_artifact, [12.0, 12.0], 200)
    b = simulate(two_room_centralized_artifact, [12.0, 12.0], 200)
    assert np.array_equal(a.states, b.states)  # bit-identical
    assert a.modes == b.modes


def test_simulate_trajectory_recurrence(two_room_centralized_artifact):
    artifact = two_room_centralized_artifact
    sys = artifact.system
    sched = Schedule(((0, -2.0),))
    traj = simulate(artifact, [12.0, 12.0], 100, sched)
    labels = {sys.modes.joint_label(i1, i2): (i1, i2)
              for i1 in range(2) for i2 in range(2)}
    for t in range(len(traj)):
        i1, i2 = labels[traj.modes[t]]
        expected = sys.step(traj.states[t], i1, i2, sched.value_at(t))
        assert np.array_equal(traj.states[t + 1], expected)


def test_simulate_centralized_capture(two_room_centralized_artifact):
    artifact = two_room_centralized_artifact
    objective = artifact.objective
    traj = simulate(artifact, [12.0, 12.0], 600)
    entry = traj.first_step_in(objective)
    assert entry is not None and entry <= 60
    # once in the stability ring, every macro boundary is back inside R
    in_r = traj.steps_in(objective)
    gaps = np.diff([t for t in in_r if t >= entry])
    assert gaps.size and gaps.max() <= artifact.stability_ring.horizon


def test_simulate_distributed_capture_and_margin(two_room_distributed_artifact):
    artifact = two_room_distributed_artifact
    objective = artifact.objective
    margin = Box([17.0, 17.0], [23.5, 23.5])
    traj = simulate(artifact, [12.5, 12.5], 600)
    entry = traj.first_step_in(objective)
    assert entry is not None and entry <= 80
    for t in range(entry, traj.states.shape[0]):
        assert margin.contains_point(traj.states[t])


def test_simulate_stability_only_artifact(two_room_centralized_cfg):
    cfg = copy.copy(two_room_centralized_cfg)
    cfg.mode = "stability"
    artifact = build_artifact(cfg)
    margin = Box([17.0, 17.0], [23.5, 23.5])
    traj = simulate(artifact, [19.0, 21.0], 400)
    for t in range(traj.states.shape[0]):
        assert margin.contains_point(traj.states[t])


def test_simulate_out_of_domain(two_room_centralized_artifact):
    with pytest.raises(OutOfDomainError):
        simulate(two_room_centralized_artifact, [-30.0, -30.0], 10)


def test_simulate_under_bundled_schedules(two_room_distributed_artifact):
    """Robustness is empirical: under the bundled mild disturbance traces the
    captured trajectories stay inside the wander corridor."""
    artifact = two_room_distributed_artifact
    margin = Box([17.0, 17.0], [23.5, 23.5])
    for name in ("soft_winter", "spring"):
        sched = ts.config.load_schedule(ts.config.bundled_schedule_path(name))
        traj = simulate(artifact, [19.0, 19.0], 400, sched)
        inside = sum(margin.contains_point(traj.states[t])
                     for t in range(traj.states.shape[0]))
        assert inside / traj.states.shape[0] > 0.9


def test_trajectory_csv_format(two_room_centralized_artifact):
    traj = simulate(two_room_centralized_artifact, [12.0, 12.0], 5)
    buf = io.StringIO()
    traj.write_csv(buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "step,time_s,x_1,x_2,mode_label,ring,phase"
    assert len(lines) == 7  # header + 5 applied steps + final state
    first = lines[1].split(",")
    assert first[0] == "0" and float(first[1]) == 0.0
    # >= 12 significant digits survive the round trip
    assert float(lines[2].split(",")[2]) == traj.states[1][0]


# -- verification -------------------------------------------------------------


def test_verify_fresh_artifacts_pass(two_room_centralized_artifact,
                                     two_room_distributed_artifact,
                                     toy1d_artifact):
    for artifact in (two_room_centralized_artifact,
                     two_room_distributed_artifact, toy1d_artifact):
        report = verify_artifact(artifact)
        assert report.ok, report.summary()


def test_verify_detects_corrupted_pattern(two_room_centralized_artifact):
    artifact = ControllerArtifact.from_dict(
        two_room_centralized_artifact.to_dict())
    ring = artifact.rings[2]
    tid = next(iter(ring.table))
    old = ring.table[tid]
    # flip the pattern to all-off: a cold extended tile cannot stay put
    ring.table[tid] = TileControl(tid, Pattern((0,) * len(old.pattern),
                                               (0,) * len(old.pattern)),
                                  old.a_tile, old.certificate)
    report = verify_artifact(artifact)
    failing = [name for name, passed, _ in report.entries if not passed]
    assert failing == [f"ring{ring.index}/tile{tid}"]


def test_verify_detects_inflated_extension(two_room_centralized_artifact):
    data = two_room_centralized_artifact.to_dict()
    data["rings"][0]["a"] += 0.1
    ext = data["rings"][0]["extended"]
    ext[0] = [v - 0.1 for v in ext[0]]  # keep the nesting checks quiet
    data["rings"][1]["base"] = [list(ext[0]), list(ext[1])]
    artifact = ControllerArtifact.from_dict(data)
    report = verify_artifact(artifact)
    assert not report.ok
    assert any("tile" in name for name, passed, _ in report.entries
               if not passed)  # the binding tile's certificate breaks


def test_verify_detects_broken_nesting(two_room_centralized_artifact):
    data = two_room_centralized_artifact.to_dict()
    data["rings"][1]["base"][0][0] -= 0.5
    artifact = ControllerArtifact.from_dict(data)
    report = verify_artifact(artifact)
    assert not report.ok
    assert any(name == "rings/nested" for name, passed, _ in report.entries
               if not passed)


def test_verify_detects_corrupted_distributed_pattern(
        two_room_distributed_artifact):
    artifact = ControllerArtifact.from_dict(
        two_room_distributed_artifact.to_dict())
    ring = artifact.rings[0]
    tid = next(iter(ring.table1))
    old = ring.table1[tid]
    ring.table1[tid] = DistTileControl(tid, (0,) * len(old.pattern),
                                       old.a_tile, old.certificate)
    report = verify_artifact(artifact)
    failing = [name for name, passed, _ in report.entries if not passed]
    assert failing == [f"ring{ring.index}/c1/tile{tid}"]


def test_verify_report_csv(two_room_centralized_artifact):
    report = verify_artifact(two_room_centralized_artifact)
    buf = io.StringIO()
    report.write_csv(buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "certificate,status,detail"
    assert all(",pass," in line or ",FAIL," in line for line in lines[1:])


def test_sampled_attainability_random_systems():
    rng = np.random.default_rng(42)
    produced = 0
    seed = 0
    while produced < 5 and seed < 40:
        sys, objective = random_stable_2d(seed)
        seed += 1
        rings = ts.iterate_synthesis(sys, objective, 2, 1, eta=1e-3,
                                     max_rings=3)
        if not rings:
            continue
        stability = ts.stability_synthesis(sys, objective, 2, 1, epsilon=0.6)
        artifact = ControllerArtifact(
            mode="centralized", system=sys,
            extension=ts.ExtensionSpec("lower"), rings=rings,
            stability_ring=stability, metadata={})
        assert verify_artifact(artifact).ok
        for ring in rings:
            assert sample_macro_step(sys, artifact, ring, 300, rng) == 0
        produced += 1
    assert produced == 5
