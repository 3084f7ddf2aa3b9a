"""Kinematic bicycle vehicles and the pedal/steer control conversion."""
from __future__ import annotations

import math
from dataclasses import dataclass

ACCEL_MIN = -8.0
ACCEL_MAX = 3.0
STEER_MAX = 0.3
# throttle=1 maps to +3 m/s^2, brake=1 maps to -8 m/s^2
THROTTLE_GAIN = 3.0
BRAKE_GAIN = 8.0

TWO_PI = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.remainder(angle, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    return a


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    heading: float
    speed: float
    front_axle_dist: float = 1.4
    rear_axle_dist: float = 1.4
    half_length: float = 2.4
    half_width: float = 1.0

    def __post_init__(self):
        for name in ("x", "y", "heading", "speed"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite {name}")
        if self.speed < 0:
            raise ValueError("speed must be non-negative")
        if self.front_axle_dist <= 0 or self.rear_axle_dist <= 0:
            raise ValueError("axle distances must be positive")
        if self.front_axle_dist + self.rear_axle_dist > 2 * self.half_length + 1e-12:
            raise ValueError("wheelbase longer than the bounding box")

    def moved(self, x: float, y: float, heading: float, speed: float) -> "VehicleState":
        return VehicleState(x, y, heading, speed, self.front_axle_dist,
                            self.rear_axle_dist, self.half_length, self.half_width)

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.heading, self.speed]


# default footprints: (half_length, half_width, l_f, l_r)
GEOMETRY = {
    "vehicle": (2.4, 1.0, 1.4, 1.4),
    "cyclist": (0.9, 0.3, 0.4, 0.4),
    "pedestrian": (0.3, 0.3, 0.15, 0.15),
}


def make_state(kind: str, x: float, y: float, heading: float, speed: float = 0.0) -> VehicleState:
    hl, hw, lf, lr = GEOMETRY[kind]
    return VehicleState(x, y, wrap_angle(heading), speed, lf, lr, hl, hw)


@dataclass(frozen=True)
class Control:
    acceleration: float = 0.0
    steering: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.acceleration) and math.isfinite(self.steering)):
            raise ValueError("non-finite control")
        if not ACCEL_MIN <= self.acceleration <= ACCEL_MAX:
            raise ValueError(f"acceleration {self.acceleration} outside [{ACCEL_MIN}, {ACCEL_MAX}]")
        if abs(self.steering) > STEER_MAX:
            raise ValueError(f"steering {self.steering} outside [-{STEER_MAX}, {STEER_MAX}]")

    @classmethod
    def clipped(cls, acceleration: float, steering: float) -> "Control":
        return cls(min(max(acceleration, ACCEL_MIN), ACCEL_MAX),
                   min(max(steering, -STEER_MAX), STEER_MAX))


def slip_angle(steering: float, lf: float, lr: float) -> float:
    return math.atan(lr / (lf + lr) * math.tan(steering))


def yaw_rate(state: VehicleState, steering: float) -> float:
    beta = slip_angle(steering, state.front_axle_dist, state.rear_axle_dist)
    return state.speed * math.sin(beta) / state.rear_axle_dist


def step_vehicle(state: VehicleState, control: Control, dt: float) -> VehicleState:
    """Advance one vehicle by ``dt`` under the kinematic bicycle model.

    Speed is integrated with forward Euler and clamped at zero. Position
    advances along the mean course angle over the step (psi + beta +
    yaw_rate*dt/2), which keeps constant-steer arcs on their circle; with
    zero steering this is identical to forward Euler.
    """
    if not dt > 0 or not math.isfinite(dt):
        raise ValueError("dt must be positive and finite")
    v = state.speed
    beta = math.atan(state.rear_axle_dist / (state.front_axle_dist + state.rear_axle_dist)
                     * math.tan(control.steering))
    dpsi = v * math.sin(beta) / state.rear_axle_dist * dt
    course = state.heading + beta + 0.5 * dpsi
    x = state.x + v * math.cos(course) * dt
    y = state.y + v * math.sin(course) * dt
    heading = wrap_angle(state.heading + dpsi) if dpsi else state.heading
    speed = v + control.acceleration * dt
    if speed < 0.0:
        speed = 0.0
    return state.moved(x, y, heading, speed)


def control_from_action(acc: float, steer: float) -> tuple[float, float, float]:
    """Convert an (acceleration, steering) action into (throttle, brake, steer)."""
    acc = min(max(float(acc), ACCEL_MIN), ACCEL_MAX)
    steer = min(max(float(steer), -STEER_MAX), STEER_MAX)
    if acc > 0:
        throttle, brake = acc / THROTTLE_GAIN, 0.0
    else:
        throttle, brake = 0.0, -acc / BRAKE_GAIN
    throttle = min(max(throttle, 0.0), 1.0)
    brake = min(max(brake, 0.0), 1.0)
    return throttle, brake, steer


def control_from_pedals(throttle: float, brake: float, steer: float) -> Control:
    return Control.clipped(THROTTLE_GAIN * throttle - BRAKE_GAIN * brake, steer)
