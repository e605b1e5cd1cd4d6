"""Streaming algorithms that stay correct when the adversary sees their state."""

from .approx_counting import MorrisCounter
from .graph_neighborhoods import NeighborhoodDigest, identical_neighborhood_classes, ingest_vertex
from .heavy_hitters import BernMG, CompressedHeavyHitters, MisraGries, RobustHeavyHitters
from .hierarchical_hh import BernHHH, DeterministicHHH, Hierarchy, RobustHHH
from .lb_dynamics import LeveledAutomaton, check_structural_lemmas, compute_interval_family, exceptional_analysis
from .pattern_matching import PatternMatcher, StreamEqualityTester, pattern_match
from .stream_core import RandomTape, StreamUpdate, UniverseParams, resume, serialize_state, state_size_bits
from .turnstile_sketches import L0SisSketch, RankDecision, RankSketch, exact_rank

__version__ = "0.1.0"
