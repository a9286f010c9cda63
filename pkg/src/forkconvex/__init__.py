"""Exact computations for fork-convex process sets on finite event trees."""

from .ext import INF, fmt, parse_ext, parse_rational
from .tree import (AdaptedProcess, EventTree, Node, NodeMap, StoppingTime, TreeError,
                   build_tree, hitting_time, is_supermartingale, make_tree, timeline)
from .process_sets import (AdmissibilityError, GeneratorSet, classify, cemetery_structure,
                           convex_combine, sample_closure, switch)
from .boundedness import check_nupbr_loc, closure_sup, dsv_statistic_sup
from .deflator import (build_auxiliary_set, pasting_pipeline, synth_deflator_dsv,
                       synth_deflator_nupbr, verify_smd)

__all__ = [
    "INF", "fmt", "parse_ext", "parse_rational",
    "AdaptedProcess", "EventTree", "Node", "NodeMap", "StoppingTime", "TreeError",
    "build_tree", "hitting_time", "is_supermartingale", "make_tree", "timeline",
    "AdmissibilityError", "GeneratorSet", "classify", "cemetery_structure",
    "convex_combine", "sample_closure", "switch",
    "check_nupbr_loc", "closure_sup", "dsv_statistic_sup",
    "build_auxiliary_set", "pasting_pipeline", "synth_deflator_dsv",
    "synth_deflator_nupbr", "verify_smd",
]
