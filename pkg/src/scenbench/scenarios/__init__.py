from .behaviors import adversarial_behavior, benign_policy
from .spec import (GENERATOR_IDS, PlacementError, ScenarioSpec, SpecError, benign_spec,
                   instantiate_scenario, read_library, validate_spec, write_library)
from .templates import N_ROUTES, TEMPLATES, get_route, get_template, scenario_geometry

__all__ = ["adversarial_behavior", "benign_policy", "GENERATOR_IDS", "PlacementError", "ScenarioSpec",
           "SpecError", "benign_spec", "instantiate_scenario", "read_library", "validate_spec",
           "write_library", "N_ROUTES", "TEMPLATES", "get_route", "get_template", "scenario_geometry"]
