"""Shaped per-step driving reward with separately reportable terms."""
from __future__ import annotations

from dataclasses import dataclass

SPEED_THRESHOLD = 9.0
REWARD_TERMS = ("speed", "lateral", "steer", "collision", "out_of_lane", "overspeed", "constant")


@dataclass(frozen=True)
class RewardInfo:
    v_lon: float
    steer: float
    collision: bool = False
    out_of_lane: bool = False


def reward_terms(info: RewardInfo) -> dict[str, float]:
    r_lat = abs(info.steer) * info.v_lon ** 2
    return {
        "speed": 1.0 * info.v_lon,
        "lateral": -0.2 * r_lat,
        "steer": -5.0 * info.steer ** 2,
        "collision": -1.0 * float(info.collision),
        "out_of_lane": -1.0 * float(info.out_of_lane),
        "overspeed": -10.0 * float(info.v_lon > SPEED_THRESHOLD),
        "constant": 0.1,
    }


def compute_reward(info: RewardInfo) -> float:
    terms = reward_terms(info)
    return sum(terms[k] for k in REWARD_TERMS)
