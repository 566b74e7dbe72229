"""Command-line interface: synth, simulate, verify.

Exit codes: 0 success, 1 domain failure (synthesis failed, state outside
the capture set, certificates rejected), 2 usage or schema errors.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .artifact import ArtifactError, ControllerArtifact, TOOL_VERSION
from .centralized import (SynthesisError, iterate_synthesis,
                          macro_step_synthesis, stability_synthesis)
from .config import (Config, ConfigError, bundled_config_path, list_bundled,
                     load_config, load_schedule)
from .patterns import ScanBudgetError
from .distributed import (DistRing, iterate_synthesis_distributed,
                          macro_step_synthesis_distributed,
                          stability_synthesis_distributed)
from .runtime import simulate, verify_artifact
from .tiling import OutOfDomainError, RefinementError, extend_tile

USAGE_ERROR = 2
DOMAIN_ERROR = 1


class _CliFailure(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _resolve_config_path(arg: str) -> Path:
    path = Path(arg)
    if path.is_file():
        return path
    if "/" not in arg and not arg.endswith(".yaml"):
        return bundled_config_path(arg)
    raise ConfigError(f"config file not found: {arg}")


def _synthesize(config: Config) -> ControllerArtifact:
    sys_ = config.system
    common = dict(horizon=config.horizon, depth=config.depth,
                  spec=config.extension, strategy=config.strategy)
    if config.mode == "centralized":
        rings = iterate_synthesis(sys_, config.objective, eta=config.eta,
                                  max_rings=config.max_rings, **common)
        if not rings:
            macro_step_synthesis(sys_, config.objective, **common)
            raise _CliFailure("first ring extension below eta; capture set "
                              "does not grow beyond the objective", DOMAIN_ERROR)
        stability = stability_synthesis(sys_, config.objective,
                                        epsilon=config.epsilon, **common)
    elif config.mode == "distributed":
        rings = iterate_synthesis_distributed(
            sys_, config.objective, epsilon=config.epsilon, eta=config.eta,
            max_rings=config.max_rings, **common)
        if not rings:
            macro_step_synthesis_distributed(sys_, config.objective,
                                             epsilon=config.epsilon, **common)
            raise _CliFailure("first ring extension below eta; capture set "
                              "does not grow beyond the objective", DOMAIN_ERROR)
        stability = stability_synthesis_distributed(
            sys_, config.objective, epsilon=config.epsilon, **common)
    else:
        rings = []
        stability = stability_synthesis(sys_, config.objective,
                                        epsilon=config.epsilon, **common)
    return ControllerArtifact(
        mode=config.mode, system=sys_, extension=config.extension,
        rings=rings, stability_ring=stability,
        metadata={"tool_version": TOOL_VERSION, "config_name": config.name,
                  "config_sha256": config.sha256})


def _print_synth_summary(config: Config, artifact: ControllerArtifact,
                         elapsed: float) -> None:
    print(f"mode: {artifact.mode}")
    for ring in artifact.rings:
        if isinstance(ring, DistRing):
            print(f"ring {ring.index:3d}: a = {ring.a:.6g}  "
                  f"k1 = {ring.k1}  k2 = {ring.k2}  l = {ring.ell}  "
                  f"tiles = {len(ring.tiling1)}+{len(ring.tiling2)}")
        else:
            print(f"ring {ring.index:3d}: a = {ring.a:.6g}  "
                  f"tiles = {len(ring.tiling)}")
    total = artifact.total_extension()
    outer = artifact.outermost_box()
    print(f"rings: {len(artifact.rings)}   sum a = {total:.6g}")
    print(f"capture set: {outer}")
    stab = artifact.stability_ring
    if isinstance(stab, DistRing):
        print(f"stability ring: k1 = {stab.k1}  k2 = {stab.k2}  "
              f"l = {stab.ell}  epsilon = {stab.epsilon:g}")
    else:
        print(f"stability ring: tiles = {len(stab.tiling)}  "
              f"epsilon = {stab.epsilon:g}")
    print(f"wall time: {elapsed:.2f} s")


def _cmd_synth(args) -> int:
    config = load_config(_resolve_config_path(args.config))
    start = time.perf_counter()
    try:
        artifact = _synthesize(config)
    except RefinementError as err:
        print(f"synthesis failed: {err}", file=sys.stderr)
        print(f"bad tiles: {', '.join(err.tile_ids)}", file=sys.stderr)
        return DOMAIN_ERROR
    except SynthesisError as err:
        print(f"synthesis failed: {err}", file=sys.stderr)
        return DOMAIN_ERROR
    elapsed = time.perf_counter() - start
    out = Path(args.out) if args.out else Path(f"{config.name}.artifact.json")
    artifact.save(out)
    _print_synth_summary(config, artifact, elapsed)
    print(f"artifact: {out}")
    if args.plot:
        from .plots import render_rings
        fig_path = out.with_suffix(".png")
        render_rings(artifact, fig_path)
        print(f"figure: {fig_path}")
    return 0


def _parse_x0(values: list[str], n: int) -> list[np.ndarray]:
    parsed = []
    for raw in values:
        try:
            vec = np.asarray([float(v) for v in raw.split(",")], dtype=float)
        except ValueError as err:
            raise _CliFailure(f"--x0 {raw!r}: {err}", USAGE_ERROR) from err
        if vec.size != n:
            raise _CliFailure(f"--x0 {raw!r}: expected {n} coordinates",
                              USAGE_ERROR)
        parsed.append(vec)
    return parsed


def _geometry_rows(artifact: ControllerArtifact):
    spec = artifact.extension
    n = artifact.system.n

    def pad(box, component):
        lohi = []
        for d in range(n):
            if d < box.dims:
                lohi += [f"{box.lo[d]:.17g}", f"{box.hi[d]:.17g}"]
            else:
                lohi += ["", ""]
        return lohi

    rings = list(artifact.rings) + [artifact.stability_ring]
    for ring in rings:
        if isinstance(ring, DistRing):
            yield [str(ring.index), "base", "1", "-"] + pad(ring.base1, 1)
            yield [str(ring.index), "base", "2", "-"] + pad(ring.base2, 2)
            yield [str(ring.index), "extended", "1", "-"] + pad(ring.extended1, 1)
            yield [str(ring.index), "extended", "2", "-"] + pad(ring.extended2, 2)
            for component in (1, 2):
                tiling = ring.component_tiling(component)
                for tile in tiling.tiles():
                    ext = extend_tile(tile, ring.a, spec)
                    yield ([str(ring.index), "tile", str(component),
                            tile.tile_id] + pad(ext, component))
        else:
            yield [str(ring.index), "base", "0", "-"] + pad(ring.base, 0)
            yield [str(ring.index), "extended", "0", "-"] + pad(ring.extended, 0)
            for tile in ring.tiling.tiles():
                ext = extend_tile(tile, ring.a, spec)
                yield ([str(ring.index), "tile", "0", tile.tile_id]
                       + pad(ext, 0))


def _write_geometry(artifact: ControllerArtifact, path: Path) -> None:
    n = artifact.system.n
    header = ["ring", "kind", "component", "tile"]
    for d in range(n):
        header += [f"lo_{d + 1}", f"hi_{d + 1}"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in _geometry_rows(artifact):
            fh.write(",".join(row) + "\n")


def _cmd_simulate(args) -> int:
    artifact = ControllerArtifact.load(args.artifact)
    n = artifact.system.n
    config = None
    if args.config:
        config = load_config(_resolve_config_path(args.config))
        if (config.sha256 and artifact.metadata.get("config_sha256")
                and config.sha256 != artifact.metadata["config_sha256"]):
            print("warning: config hash does not match the artifact; "
                  "continuing with the artifact's embedded system",
                  file=sys.stderr)
    if not args.skip_verify:
        report = verify_artifact(artifact)
        if not report.ok:
            print(report.summary(), file=sys.stderr)
            return DOMAIN_ERROR
    starts = _parse_x0(args.x0 or [], n)
    if not starts and config is not None and config.runtime is not None:
        starts = [np.asarray(v, dtype=float) for v in config.runtime.x0]
    if not starts:
        raise _CliFailure("no initial state: pass --x0 or --config with a "
                          "runtime block", USAGE_ERROR)
    steps = args.steps
    if steps is None:
        steps = (config.runtime.max_steps
                 if config is not None and config.runtime is not None else 1000)
    schedule = None
    schedule_path = args.schedule
    if (schedule_path is None and config is not None
            and config.runtime is not None and config.runtime.schedule):
        schedule_path = str(Path(args.config).parent / config.runtime.schedule)
    if schedule_path:
        schedule = load_schedule(schedule_path)
        if artifact.system.offset_sensitivity is None:
            raise _CliFailure(
                "artifact's system has no offset_sensitivity vector; it "
                "cannot apply a disturbance schedule", USAGE_ERROR)
    if args.out is None and (len(starts) > 1 or args.geometry or args.plot):
        raise _CliFailure("--out is required with multiple --x0, --geometry "
                          "or --plot", USAGE_ERROR)

    objective = artifact.objective
    for idx, x0 in enumerate(starts):
        trajectory = simulate(artifact, x0, steps, schedule)
        if args.out:
            out = Path(args.out)
            if len(starts) > 1:
                out = out.with_name(f"{out.stem}_{idx}{out.suffix or '.csv'}")
            with open(out, "w", encoding="utf-8") as fh:
                trajectory.write_csv(fh)
            sink = sys.stdout
        else:
            trajectory.write_csv(sys.stdout)
            sink = sys.stderr
        entry = trajectory.first_step_in(objective)
        reach = ("never reaches the objective within the horizon"
                 if entry is None else
                 f"reaches the objective at step {entry} "
                 f"({entry * artifact.system.tau_s:g} s)")
        print(f"x0 = {x0.tolist()}: {reach}", file=sink)
        if args.plot:
            from .plots import render_trajectory
            fig = Path(args.out).with_suffix("") if args.out else None
            fig_path = fig.with_name(f"{fig.name}_{idx}.png") \
                if len(starts) > 1 else fig.with_suffix(".png")
            render_trajectory(trajectory, artifact, fig_path)
            print(f"figure: {fig_path}", file=sink)
    if args.geometry:
        geo = Path(args.out)
        geo = geo.with_name(f"{geo.stem}_geometry.csv")
        _write_geometry(artifact, geo)
        print(f"geometry: {geo}", file=sys.stdout if args.out else sys.stderr)
    return 0


def _cmd_verify(args) -> int:
    artifact = ControllerArtifact.load(args.artifact)
    if args.config:
        config = load_config(_resolve_config_path(args.config))
        stored = artifact.metadata.get("config_sha256")
        if stored and config.sha256 != stored:
            print("warning: config hash does not match the artifact; "
                  "re-checking everything", file=sys.stderr)
    report = verify_artifact(artifact)
    print(report.summary())
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            report.write_csv(fh)
    return 0 if report.ok else DOMAIN_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tilesynth",
        description="correct-by-design switching controller synthesis over "
                    "rectangular tilings")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser(
        "synth", help="synthesize a controller from a config "
        f"(bundled: {', '.join(list_bundled())})")
    p_synth.add_argument("config", help="config path or bundled config name")
    p_synth.add_argument("--out", help="artifact output path "
                         "(default <name>.artifact.json)")
    p_synth.add_argument("--plot", action="store_true",
                         help="render the ring geometry next to the artifact")
    p_synth.set_defaults(func=_cmd_synth)

    p_sim = sub.add_parser("simulate", help="closed-loop simulation from an "
                           "artifact")
    p_sim.add_argument("artifact")
    p_sim.add_argument("--x0", action="append",
                       help="initial state as comma-separated values "
                            "(repeatable)")
    p_sim.add_argument("--steps", type=int, default=None,
                       help="number of elementary steps")
    p_sim.add_argument("--schedule", help="disturbance schedule YAML")
    p_sim.add_argument("--config", help="config supplying the runtime block")
    p_sim.add_argument("--out", help="trajectory CSV path (default stdout)")
    p_sim.add_argument("--geometry", action="store_true",
                       help="also dump ring/tile geometry CSV (needs --out)")
    p_sim.add_argument("--plot", action="store_true",
                       help="also render trajectory figures (needs --out)")
    p_sim.add_argument("--skip-verify", action="store_true",
                       help="skip certificate re-verification before running")
    p_sim.set_defaults(func=_cmd_simulate)

    p_verify = sub.add_parser("verify", help="re-check every certificate of "
                              "an artifact")
    p_verify.add_argument("artifact")
    p_verify.add_argument("--report", help="write a machine-readable CSV "
                          "report here")
    p_verify.add_argument("--config", help="config to compare hashes against")
    p_verify.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliFailure as err:
        print(f"error: {err}", file=sys.stderr)
        return err.code
    except (ConfigError, ArtifactError) as err:
        print(f"error: {err}", file=sys.stderr)
        return USAGE_ERROR
    except (OutOfDomainError, RefinementError, SynthesisError,
            ScanBudgetError) as err:
        print(f"error: {err}", file=sys.stderr)
        return DOMAIN_ERROR
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
