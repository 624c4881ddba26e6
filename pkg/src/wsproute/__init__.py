"""Track-assignment detailed routing with GA and attention-based sequencing."""

from .problem import (
    GenConfig,
    InstTerm,
    Kind,
    Net,
    Problem,
    WspConfig,
    generate_problem,
    parse_problem,
    serialize_problem,
    split_dataset,
    validate_problem,
)
from .assign import TrackAssignment, assign_tracks, eligible_tracks
from .decompose import (
    InstTermPair,
    PadStrategy,
    RoutingInstance,
    bar_distance,
    decompose_net,
    decompose_problem,
)
from .pattern import RouteSolution, RouteStatus, init_grid, route_sequence
from .ga import GaParams, ga_sequence
from .pipeline import build_instance, oracle_sequence, random_sequence

__all__ = [
    "GenConfig", "InstTerm", "Kind", "Net", "Problem", "WspConfig",
    "generate_problem", "parse_problem", "serialize_problem", "split_dataset",
    "validate_problem", "TrackAssignment", "assign_tracks", "eligible_tracks",
    "InstTermPair", "PadStrategy", "RoutingInstance", "bar_distance",
    "decompose_net", "decompose_problem", "RouteSolution", "RouteStatus",
    "init_grid", "route_sequence", "GaParams", "ga_sequence",
    "build_instance", "oracle_sequence", "random_sequence",
]

__version__ = "0.1.0"
