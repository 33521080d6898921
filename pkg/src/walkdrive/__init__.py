"""Itinerary planning for tourists who alternate walking and driving."""

__version__ = "0.1.0"

from .encoding import Itinerary, Solution, recompute_schedule, travel_time
from .feasibility import InsertionKind, check_insertion, classify_insertion
from .instance import Instance, MobilityConfig, Mode, generate_synthetic, load_instance
from .search import IlsConfig, ils_run, solve

__all__ = [
    "IlsConfig", "InsertionKind", "Instance", "Itinerary", "MobilityConfig", "Mode", "Solution",
    "check_insertion", "classify_insertion", "generate_synthetic", "ils_run", "load_instance",
    "recompute_schedule", "solve", "travel_time",
]
