"""Controller artifact: synthesized rings plus the system, serializable.

The artifact is self-contained: it embeds the discrete-time system, the
ring chain (innermost first) and the stability ring, so verification and
simulation need nothing but the artifact file.  JSON serialization uses
Python's shortest round-tripping float representation, which reproduces
every binary64 value exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .centralized import Ring, TileControl
from .distributed import DistRing, DistTileControl
from .geometry import Box
from .system import ComponentModes, ModeSet, Pattern, SwitchedSystem, AffineMap
from .tiling import ExtensionSpec, Tiling

__all__ = ["ControllerArtifact", "ArtifactError", "TOOL_VERSION"]

TOOL_VERSION = "0.1.0"


class ArtifactError(ValueError):
    """Artifact file malformed or inconsistent."""


def _box_to_list(box: Box) -> list:
    return [box.lo.tolist(), box.hi.tolist()]


def _box_from_list(data) -> Box:
    return Box(data[0], data[1])


def _system_to_dict(sys: SwitchedSystem) -> dict:
    return {
        "split": list(sys.split),
        "tau_s": sys.tau_s,
        "modes": {
            "components": [
                {"labels": list(c.labels), "active_counts": list(c.active_counts)}
                for c in sys.modes.components
            ],
            "global_max_active": sys.modes.global_max_active,
        },
        "rowmaps": [
            [{"matrix": m.matrix.tolist(), "offset": m.offset.tolist()}
             for m in comp]
            for comp in sys.rowmaps
        ],
        "offset_sensitivity": (None if sys.offset_sensitivity is None
                               else sys.offset_sensitivity.tolist()),
    }


def _system_from_dict(data: dict) -> SwitchedSystem:
    modes = ModeSet(
        components=tuple(
            ComponentModes(tuple(c["labels"]), tuple(c["active_counts"]))
            for c in data["modes"]["components"]),
        global_max_active=data["modes"]["global_max_active"])
    n = sum(data["split"])
    rowmaps = [
        [AffineMap(np.asarray(m["matrix"], dtype=float).reshape(-1, n),
                   np.asarray(m["offset"]))
         for m in comp]
        for comp in data["rowmaps"]
    ]
    sens = data.get("offset_sensitivity")
    return SwitchedSystem(tuple(data["split"]), modes, rowmaps,
                          None if sens is None else np.asarray(sens),
                          tau_s=data["tau_s"])


def _ring_to_dict(ring: Ring) -> dict:
    return {
        "index": ring.index,
        "kind": ring.kind,
        "base": _box_to_list(ring.base),
        "extended": _box_to_list(ring.extended),
        "a": ring.a,
        "epsilon": ring.epsilon,
        "horizon": ring.horizon,
        "tiling": ring.tiling.to_dict(),
        "table": [
            {"tile": tc.tile_id,
             "pi1": list(tc.pattern.pi1), "pi2": list(tc.pattern.pi2),
             "a_tile": tc.a_tile,
             "certificate": _box_to_list(tc.certificate)}
            for tc in ring.table.values()
        ],
    }


def _ring_from_dict(data: dict) -> Ring:
    table = {}
    for row in data["table"]:
        table[row["tile"]] = TileControl(
            row["tile"], Pattern(tuple(row["pi1"]), tuple(row["pi2"])),
            row["a_tile"], _box_from_list(row["certificate"]))
    return Ring(index=data["index"], kind=data["kind"],
                base=_box_from_list(data["base"]),
                extended=_box_from_list(data["extended"]),
                a=data["a"], tiling=Tiling.from_dict(data["tiling"]),
                table=table, horizon=data["horizon"],
                epsilon=data["epsilon"])


def _dist_ring_to_dict(ring: DistRing) -> dict:
    def table_rows(table: dict[str, DistTileControl]) -> list:
        return [{"tile": tc.tile_id, "pattern": list(tc.pattern),
                 "a_tile": tc.a_tile,
                 "certificate": _box_to_list(tc.certificate)}
                for tc in table.values()]

    return {
        "index": ring.index,
        "kind": ring.kind,
        "base1": _box_to_list(ring.base1),
        "base2": _box_to_list(ring.base2),
        "extended1": _box_to_list(ring.extended1),
        "extended2": _box_to_list(ring.extended2),
        "a": ring.a,
        "epsilon": ring.epsilon,
        "k1": ring.k1,
        "k2": ring.k2,
        "tiling1": ring.tiling1.to_dict(),
        "tiling2": ring.tiling2.to_dict(),
        "table1": table_rows(ring.table1),
        "table2": table_rows(ring.table2),
        "horizon": ring.horizon,
    }


def _dist_ring_from_dict(data: dict) -> DistRing:
    def table_from(rows) -> dict[str, DistTileControl]:
        return {row["tile"]: DistTileControl(
            row["tile"], tuple(row["pattern"]), row["a_tile"],
            _box_from_list(row["certificate"])) for row in rows}

    return DistRing(
        index=data["index"], kind=data["kind"],
        base1=_box_from_list(data["base1"]), base2=_box_from_list(data["base2"]),
        extended1=_box_from_list(data["extended1"]),
        extended2=_box_from_list(data["extended2"]),
        a=data["a"], epsilon=data["epsilon"], k1=data["k1"], k2=data["k2"],
        tiling1=Tiling.from_dict(data["tiling1"]),
        tiling2=Tiling.from_dict(data["tiling2"]),
        table1=table_from(data["table1"]), table2=table_from(data["table2"]),
        horizon=data["horizon"])


@dataclass
class ControllerArtifact:
    """Synthesized controller: reach rings (innermost first) + stability ring."""

    mode: str  # "centralized" | "distributed" | "stability"
    system: SwitchedSystem
    extension: ExtensionSpec
    rings: list
    stability_ring: Any
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("centralized", "distributed", "stability"):
            raise ArtifactError(f"unknown artifact mode {self.mode!r}")
        if self.stability_ring is None:
            raise ArtifactError("artifact requires a stability ring")

    @property
    def objective(self) -> Box:
        """The innermost target rectangle R."""
        ring = self.stability_ring
        if isinstance(ring, DistRing):
            return ring.base1.concat(ring.base2)
        return ring.base

    def outermost_box(self) -> Box:
        """The capture set: the outermost extended rectangle."""
        if not self.rings:
            return self.objective
        ring = self.rings[-1]
        if isinstance(ring, DistRing):
            return ring.extended1.concat(ring.extended2)
        return ring.extended

    def total_extension(self) -> float:
        return float(sum(r.a for r in self.rings))

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        if self.mode == "distributed":
            ring_enc, stab_enc = _dist_ring_to_dict, _dist_ring_to_dict
        else:
            ring_enc, stab_enc = _ring_to_dict, _ring_to_dict
        return {
            "format": "tilesynth-artifact-v1",
            "mode": self.mode,
            "extension": self.extension.mode,
            "metadata": dict(self.metadata),
            "system": _system_to_dict(self.system),
            "rings": [ring_enc(r) for r in self.rings],
            "stability_ring": stab_enc(self.stability_ring),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ControllerArtifact":
        if data.get("format") != "tilesynth-artifact-v1":
            raise ArtifactError("not a tilesynth artifact (bad format marker)")
        mode = data["mode"]
        decode = _dist_ring_from_dict if mode == "distributed" else _ring_from_dict
        try:
            return cls(
                mode=mode,
                system=_system_from_dict(data["system"]),
                extension=ExtensionSpec(data["extension"]),
                rings=[decode(r) for r in data["rings"]],
                stability_ring=decode(data["stability_ring"]),
                metadata=dict(data.get("metadata", {})))
        except (KeyError, TypeError, ValueError) as err:
            if isinstance(err, ArtifactError):
                raise
            raise ArtifactError(f"malformed artifact: {err}") from err

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ControllerArtifact":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as err:
            raise ArtifactError(f"artifact is not valid JSON: {err}") from err
        return cls.from_dict(data)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ControllerArtifact):
            return NotImplemented
        return self.to_dict() == other.to_dict()
