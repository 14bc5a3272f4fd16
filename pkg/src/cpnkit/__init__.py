"""Colored Petri net engine: model language, random-firing simulator and
explicit-state reachability analysis, with a green supply chain model as the
reference workload."""

from .core import (
    ArcInscription,
    ColorSet,
    Diagnostic,
    InsufficientTokens,
    InvalidNet,
    Marking,
    Multiset,
    Net,
    Place,
    Term,
    Transition,
    Variable,
    canonical_form,
    multiset_add,
    multiset_contains,
    multiset_subtract,
    validate_net,
)
from .dsl import NetSyntaxError, ParseError, SourceSpan, parse_net, serialize_net
from .engine import (
    Binding,
    FiringEvent,
    NotEnabled,
    RandomSource,
    SimulationConfig,
    SimulationReport,
    enabled_bindings,
    fire,
    simulate,
    step,
)
from .gscm import (
    GscmParameters,
    build_gscm_net,
    conservation_violations,
    reference_scenario,
    statespace_scenario,
)
from .statespace import (
    ExplorationLimits,
    IncompleteGraph,
    ReachabilityGraph,
    StateSpaceReport,
    analyze,
    compute_bounds,
    explore,
    fairness_report,
    find_dead_markings,
    find_dead_transitions,
    find_home_markings,
    scc_condense,
    to_dot,
)

__version__ = "0.1.0"

__all__ = [
    "NetSyntaxError",
    "ParseError",
    "SourceSpan",
    "parse_net",
    "serialize_net",
    "ArcInscription",
    "ColorSet",
    "Diagnostic",
    "InsufficientTokens",
    "InvalidNet",
    "Marking",
    "Multiset",
    "Net",
    "Place",
    "Term",
    "Transition",
    "Variable",
    "canonical_form",
    "multiset_add",
    "multiset_contains",
    "multiset_subtract",
    "validate_net",
    "Binding",
    "FiringEvent",
    "NotEnabled",
    "RandomSource",
    "SimulationConfig",
    "SimulationReport",
    "enabled_bindings",
    "fire",
    "simulate",
    "step",
    "GscmParameters",
    "build_gscm_net",
    "conservation_violations",
    "reference_scenario",
    "statespace_scenario",
    "ExplorationLimits",
    "IncompleteGraph",
    "ReachabilityGraph",
    "StateSpaceReport",
    "analyze",
    "compute_bounds",
    "explore",
    "fairness_report",
    "find_dead_markings",
    "find_dead_transitions",
    "find_home_markings",
    "scc_condense",
    "to_dot",
]
