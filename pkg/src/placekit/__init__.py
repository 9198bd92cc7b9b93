"""placekit: constraint programs for placing furniture in indoor scenes.

The package turns "where could this object go" into an executable
artifact. A small constraint language describes placements relative to
existing objects, an executor grounds those programs into per-cell
placement masks over a discretized room, and the surrounding machinery
extracts programs from observed scenes, improves them by self-training,
and samples entirely new scenes one object at a time.
"""

from .dsl import (
    And,
    Constraint,
    Leaf,
    Or,
    PlacementProgram,
    QuerySpec,
    parse_program,
    serialize_program,
)
from .errors import (
    ClassifierError,
    ConfigError,
    ExecutionError,
    ExtractionError,
    ParseError,
    PlacekitError,
    SceneError,
    ServiceError,
    ValidationError,
)
from .executor import ExecutionContext, completion_context, execute_program
from .extraction import extract_program
from .geometry import DEFAULT_GRID, ORIENTATIONS, GridSpec
from .mask import PlacementMask, compare_masks, sample_placements
from .scene import ObjectInstance, Scene, load_scene, make_scene, serialize_scene

__version__ = "0.1.0"

__all__ = [
    "And",
    "ClassifierError",
    "ConfigError",
    "Constraint",
    "DEFAULT_GRID",
    "ExecutionContext",
    "ExecutionError",
    "ExtractionError",
    "GridSpec",
    "Leaf",
    "ORIENTATIONS",
    "ObjectInstance",
    "Or",
    "ParseError",
    "PlacekitError",
    "PlacementMask",
    "PlacementProgram",
    "QuerySpec",
    "Scene",
    "SceneError",
    "ServiceError",
    "ValidationError",
    "compare_masks",
    "completion_context",
    "execute_program",
    "extract_program",
    "load_scene",
    "make_scene",
    "parse_program",
    "sample_placements",
    "serialize_program",
    "serialize_scene",
    "__version__",
]
