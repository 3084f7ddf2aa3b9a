from .geometry import Polyline, detect_collision, lateral_deviation, route_progress
from .trace import EpisodeTrace, TraceError
from .vehicle import Control, VehicleState, control_from_action, make_state, step_vehicle
from .world import DT, EVENT_KINDS, Actor, Event, WorldMap, WorldState, make_world, world_step

__all__ = ["Polyline", "detect_collision", "lateral_deviation", "route_progress", "EpisodeTrace",
           "TraceError", "Control", "VehicleState", "control_from_action", "make_state",
           "step_vehicle", "DT", "EVENT_KINDS", "Actor", "Event", "WorldMap", "WorldState",
           "make_world", "world_step"]
