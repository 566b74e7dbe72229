"""tilesynth: correct-by-design switching control over rectangular tilings.

Given a linear discrete-time switched system and a rectangular objective,
the toolkit synthesizes a capture set (a maximal parametric extension of
the objective), tile-to-pattern control tables certifying attainability and
stability, in centralized and distributed (partial-observability) settings,
plus a closed-loop simulator and an independent certificate verifier.
"""

from .artifact import ControllerArtifact, TOOL_VERSION
from .centralized import (Ring, TileControl, best_pattern_for_tile,
                          iterate_synthesis, macro_step_synthesis,
                          stability_synthesis)
from .config import Config, ConfigError, bundled_config_path, load_config
from .distributed import (ApproxSequence, DistRing, DistTileControl,
                          approx_sequence, epsilon_report,
                          iterate_synthesis_distributed,
                          macro_step_synthesis_distributed,
                          max_extension_distributed, prop_check,
                          stability_synthesis_distributed)
from .geometry import (AffineMap, Box, Interval, ParamBox, box_inclusion,
                       compose, image_bounds, image_bounds_param,
                       max_param_inclusion)
from .runtime import (Schedule, Trajectory, simulate, verify_artifact,
                      VerificationReport)
from .system import (ContinuousSpec, ModeSet, Pattern, SwitchedSystem,
                     discretize, enumerate_patterns, matrix_exponential)
from .tiling import (ExtensionSpec, RefinementError, Tile, Tiling,
                     extend_tile, trivial_tiling)

__version__ = TOOL_VERSION

__all__ = [name for name in dir() if not name.startswith("_")]
