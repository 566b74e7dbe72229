"""Figure rendering for synthesis and simulation reports.

Figures are rendered straight to files next to the delimited output; no
interactive backends.  Only 1-D and 2-D joint state spaces get a state-
space panel; higher dimensions fall back to the time-series panel alone.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle

from .artifact import ControllerArtifact
from .distributed import DistRing
from .geometry import Box
from .runtime import Trajectory

__all__ = ["render_rings", "render_trajectory"]


def _joint_boxes(artifact: ControllerArtifact):
    """(base, extended) joint boxes per ring, innermost first."""
    out = []
    for ring in artifact.rings:
        if isinstance(ring, DistRing):
            out.append((ring.base1.concat(ring.base2),
                        ring.extended1.concat(ring.extended2)))
        else:
            out.append((ring.base, ring.extended))
    return out


def _box_rect(box: Box, **kw) -> Rectangle:
    return Rectangle((box.lo[0], box.lo[1]), box.widths[0], box.widths[1], **kw)


def render_rings(artifact: ControllerArtifact, path) -> None:
    """Nested ring geometry（2-D systems) or extension-per-ring bars."""
    fig, ax = plt.subplots(figsize=(6, 6))
    objective = artifact.objective
    if artifact.system.n == 2:
        for _, ext in reversed(_joint_boxes(artifact)):
            ax.add_patch(_box_rect(ext, fill=False, edgecolor="tab:blue",
                                   linewidth=0.8))
        ax.add_patch(_box_rect(objective, fill=False, edgecolor="tab:red",
                               linewidth=1.6))
        outer = artifact.outermost_box()
        pad = 0.05 * max(outer.widths)
        ax.set_xlim(outer.lo[0] - pad, outer.hi[0] + pad)
        ax.set_ylim(outer.lo[1] - pad, outer.hi[1] + pad)
        ax.set_xlabel("x_1")
        ax.set_ylabel("x_2")
        ax.set_title(f"{artifact.mode}: {len(artifact.rings)} nested rings")
        ax.set_aspect("equal")
    else:
        values = [r.a for r in artifact.rings]
        ax.bar(range(1, len(values) + 1), values, color="tab:blue")
        ax.set_xlabel("ring")
        ax.set_ylabel("extension a")
        ax.set_title(f"{artifact.mode}: extension per ring")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_trajectory(trajectory: Trajectory, artifact: ControllerArtifact,
                      path) -> None:
    """Time evolution of every state coordinate, plus the state-space path
    over the ring geometry when the joint space is planar."""
    n = trajectory.states.shape[1]
    planar = n == 2
    fig, axes = plt.subplots(1, 2 if planar else 1,
                             figsize=(11 if planar else 6, 5))
    ax_t = axes[1] if planar else axes
    time = [t * trajectory.tau_s for t in range(trajectory.states.shape[0])]
    for d in range(n):
        ax_t.plot(time, trajectory.states[:, d], linewidth=0.9,
                  label=f"x_{d + 1}" if n <= 12 else None)
    objective = artifact.objective
    for d in range(n):
        ax_t.axhline(objective.lo[d], color="tab:red", linewidth=0.5,
                     linestyle="--")
        ax_t.axhline(objective.hi[d], color="tab:red", linewidth=0.5,
                     linestyle="--")
    ax_t.set_xlabel("time [s]")
    ax_t.set_ylabel("state")
    if n <= 12:
        ax_t.legend(loc="best", fontsize=8)
    ax_t.set_title("closed-loop trajectory")
    if planar:
        ax_s = axes[0]
        for _, ext in reversed(_joint_boxes(artifact)):
            ax_s.add_patch(_box_rect(ext, fill=False, edgecolor="tab:blue",
                                     linewidth=0.7))
        ax_s.add_patch(_box_rect(objective, fill=False, edgecolor="tab:red",
                                 linewidth=1.5))
        ax_s.plot(trajectory.states[:, 0], trajectory.states[:, 1],
                  color="black", linewidth=1.0)
        ax_s.plot(trajectory.states[0, 0], trajectory.states[0, 1], "ko",
                  markersize=4)
        ax_s.set_xlabel("x_1")
        ax_s.set_ylabel("x_2")
        ax_s.set_aspect("equal")
        ax_s.set_title("state space")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
