"""Spanning-tree broadcast over simulated Chord and CAN overlays."""
from .baselines import SeenCache, alm_broadcast, simple_flood
from .can import CanNetwork, CanNode, CanZone, RoutingError, build_can, greedy_route, shared_face
from .chord import ChordNetwork, ChordNode, build_chord, responsible_node
from .dtc import (NO_FAULTS, Arc, CanBox, CoverageReport, FaultModel, TreeMessage, TreeStats, can_children,
                  chord_children, collect_responses, span_multi_tree, span_tree, tie_break_path)
from .harness import AggregateMetrics, ConfigError, SimConfig, malicious_sweep, run
from .hashspace import Box, ContractViolation, Rng, box_contains, derive_seed, torus_displacement
from .prefixmap import (EncodingError, PrefixArea, PrefixCodec, expected_nodes_in_area, key_to_point,
                        prefix_to_area, range_to_area)

__version__ = "0.1.0"
