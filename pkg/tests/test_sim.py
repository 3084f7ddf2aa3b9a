import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenbench.sim import (Control, EpisodeTrace, Polyline, TraceError, VehicleState, control_from_action,
                           detect_collision, lateral_deviation, make_state, make_world, route_progress,
                           step_vehicle, world_step)
from scenbench.sim.world import Lane, StopSign, TrafficLight, WorldMap


class _Route:
    def __init__(self, pts, lane_width=3.5):
        self.polyline = Polyline(pts)
        self.lane_width = lane_width


def _straight_world(ego, lights=(), signs=(), actors=()):
    lane = Lane("main", Polyline([(-50.0, 0.0), (200.0, 0.0)]), width=3.5)
    wmap = WorldMap([lane], traffic_lights=lights, stop_signs=signs)
    return make_world(ego, actors, wmap, _Route([(-50.0, 0.0), (200.0, 0.0)]))


# -- step_vehicle ----------------------------------------------------------------
def test_straight_line_step_exact():
    s = step_vehicle(VehicleState(0.0, 0.0, 0.0, 10.0), Control(0.0, 0.0), 0.1)
    assert (s.x, s.y, s.heading) == (1.0, 0.0, 0.0)


def test_slip_and_yaw_rate_closed_form():
    state = VehicleState(0.0, 0.0, 0.0, 5.0, front_axle_dist=1.5, rear_axle_dist=1.5, half_length=2.4)
    from scenbench.sim.vehicle import slip_angle, yaw_rate
    # the printed reference values are rounded to about 5e-6
    assert slip_angle(0.3, 1.5, 1.5) == pytest.approx(0.153450, abs=5e-6)
    assert yaw_rate(state, 0.3) == pytest.approx(0.509497, abs=1e-5)
    dt = 1e-3
    nxt = step_vehicle(state, Control(0.0, 0.3), dt)
    assert nxt.heading / dt == pytest.approx(yaw_rate(state, 0.3), rel=1e-12)


def test_speed_clamped_at_zero():
    s = step_vehicle(VehicleState(0.0, 0.0, 0.0, 1.0), Control(-8.0, 0.0), 0.2)
    assert s.speed == 0.0


def test_speed_integration_exact():
    s = VehicleState(0.0, 0.0, 0.3, 2.0)
    for _ in range(40):
        s = step_vehicle(s, Control(1.5, 0.0), 0.05)
    assert s.speed == pytest.approx(2.0 + 1.5 * 2.0, abs=1e-12)
    assert s.heading == 0.3


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        step_vehicle(VehicleState(0.0, 0.0, 0.0, 1.0), Control(), 0.0)
    with pytest.raises(ValueError):
        VehicleState(float("nan"), 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        Control(0.0, 0.31)


def test_heading_wrapped():
    s = make_state("vehicle", 0.0, 0.0, 3 * math.pi)
    assert -math.pi < s.heading <= math.pi


# -- control_from_action -----------------------------------------------------------
@pytest.mark.parametrize("acc,expected", [(3.0, (1.0, 0.0)), (0.0, (0.0, 0.0)), (-4.0, (0.0, 0.5)),
                                          (10.0, (1.0, 0.0)), (-20.0, (0.0, 1.0))])
def test_action_conversion_examples(acc, expected):
    throttle, brake, _ = control_from_action(acc, 0.0)
    assert (throttle, brake) == expected


def test_action_conversion_clips_steering():
    assert control_from_action(0.0, 1.0)[2] == 0.3
    assert control_from_action(0.0, -1.0)[2] == -0.3


# -- detect_collision --------------------------------------------------------------
def _box(x, y, h=0.0):
    return VehicleState(x, y, h, 0.0, 1.4, 1.4, 2.5, 1.0)


def test_collision_examples():
    assert detect_collision(_box(0, 0), _box(0, 0))
    assert not detect_collision(_box(0, 0), _box(100, 0))
    assert detect_collision(_box(0, 0), _box(4.9, 0))
    assert not detect_collision(_box(0, 0), _box(5.1, 0))


def test_collision_rotated_diamond_gap():
    # a 45 degree box whose corner points at the other box's face
    a = _box(0, 0)
    reach = 2.5 + (2.5 + 1.0) * math.sqrt(0.5)     # x-extent of the rotated box
    dy = (2.5 - 1.0) * math.sqrt(0.5)              # puts that corner on the x axis
    b_close = VehicleState(reach - 0.05, dy, math.pi / 4, 0.0, 1.4, 1.4, 2.5, 1.0)
    b_far = VehicleState(reach + 0.05, dy, math.pi / 4, 0.0, 1.4, 1.4, 2.5, 1.0)
    assert detect_collision(a, b_close)
    assert not detect_collision(a, b_far)


finite = st.floats(-20, 20)


@settings(max_examples=200, deadline=None)
@given(finite, finite, st.floats(-math.pi, math.pi), finite, finite, st.floats(-math.pi, math.pi),
       st.floats(-50, 50), st.floats(-50, 50), st.floats(-math.pi, math.pi))
def test_collision_symmetric_and_rigid_invariant(x1, y1, h1, x2, y2, h2, tx, ty, rot):
    a, b = _box(x1, y1, h1), _box(x2, y2, h2)
    hit = detect_collision(a, b)
    assert hit == detect_collision(b, a)
    c, s = math.cos(rot), math.sin(rot)

    def move(v):
        return VehicleState(c * v.x - s * v.y + tx, s * v.x + c * v.y + ty, v.heading + rot, 0.0,
                            1.4, 1.4, 2.5, 1.0)

    # skip near-touching configurations where rounding can flip the answer
    gap_probe = [detect_collision(_box(x1, y1, h1), _box(x2 + d, y2 + e, h2))
                 for d in (-1e-6, 1e-6) for e in (-1e-6, 1e-6)]
    if len(set(gap_probe)) == 1:
        assert detect_collision(move(a), move(b)) == hit


# -- route geometry ------------------------------------------------------------------
def test_lateral_deviation_examples():
    straight = _Route([(0, 0), (100, 0)])
    assert lateral_deviation((30, 0), straight) == 0.0
    assert lateral_deviation((50, 3), straight) == pytest.approx(3.0)
    corner = _Route([(0, 0), (10, 0), (10, 10)])
    assert lateral_deviation((13, -4), corner) == pytest.approx(5.0)


def test_route_progress_examples():
    route = _Route([(0, 0), (100, 0)])
    assert route_progress((0, 0), route) == 0.0
    assert route_progress((100, 0), route) == 1.0
    assert route_progress((25, 2), route) == pytest.approx(0.25)


def test_degenerate_route_rejected():
    with pytest.raises(ValueError):
        lateral_deviation((0, 0), _Route([(1, 1), (1, 1)]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=2, max_size=20))
def test_route_progress_monotone_along_route(xs):
    route = _Route([(0, 0), (60, 0), (60, 40)])
    pts = sorted(xs)
    # walk along the polyline by arc length
    vals = [route_progress(route.polyline.point_at(s)[:2], route) for s in pts]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


# -- world_step events ---------------------------------------------------------------
def test_stationary_step_no_events():
    w = _straight_world(make_state("vehicle", 0.0, 0.0, 0.0, 0.0))
    w2 = world_step(w, Control(), {})
    assert w2.event_log == () and w2.tick == 1


def test_red_light_fires_once():
    light = TrafficLight(((10.0, -2.0), (10.0, 2.0)), (1.0, 0.0), (10.0, 3.0, 10.0), offset=13.0)
    w = _straight_world(make_state("vehicle", 9.8, 0.0, 0.0, 5.0), lights=[light])
    w = world_step(w, Control(), {})
    w = world_step(w, Control(), {})
    # then park beyond the line
    for _ in range(40):
        w = world_step(w, Control(-8.0, 0.0), {})
    assert [e.kind for e in w.event_log].count("red_light_run") == 1


def test_stop_sign_run_and_respected():
    sign = StopSign(((20.0, -2.0), (20.0, 2.0)), (1.0, 0.0))
    w = _straight_world(make_state("vehicle", 10.0, 0.0, 0.0, 8.0), signs=[sign])
    for _ in range(40):
        w = world_step(w, Control(), {})
    assert [e.kind for e in w.event_log].count("stop_sign_run") == 1
    w = _straight_world(make_state("vehicle", 15.0, 0.0, 0.0, 0.0), signs=[sign])
    for _ in range(60):
        w = world_step(w, Control(1.0, 0.0), {})
    assert [e.kind for e in w.event_log].count("stop_sign_run") == 0


def _weave(lanes):
    wmap = WorldMap(lanes)
    w = make_world(make_state("vehicle", 0.0, 0.0, 0.0, 5.0), [], wmap, _Route([(-50.0, 0.0), (200.0, 0.0)]))
    # out to about 2.1 m left of the route and back onto it
    for d in [0.3] * 10 + [0.0] * 20 + [-0.3] * 20 + [0.0] * 20 + [0.3] * 10:
        w = world_step(w, Control(0.0, d), {})
    assert abs(w.ego.y) < 1e-9
    return [e.kind for e in w.event_log]


def test_lane_invasion_on_road_edge_brackets_offroad():
    kinds = _weave([Lane("a", Polyline([(-50.0, 0.0), (200.0, 0.0)]))])
    assert kinds == ["out_of_road_enter", "lane_invasion", "out_of_road_exit"]


def test_lane_invasion_into_neighbour_lane_stays_on_road():
    kinds = _weave([Lane("a", Polyline([(-50.0, 0.0), (200.0, 0.0)])),
                    Lane("b", Polyline([(-50.0, 3.5), (200.0, 3.5)]))])
    assert kinds == ["lane_invasion"]


def test_collision_event_once_per_contact():
    from scenbench.sim import Actor
    other = Actor(1, "vehicle", make_state("vehicle", 8.0, 0.0, 0.0, 0.0), "traffic")
    w = _straight_world(make_state("vehicle", 0.0, 0.0, 0.0, 6.0), actors=[other])
    for _ in range(30):
        w = world_step(w, Control(-1.0, 0.0), {})
    assert [e.kind for e in w.event_log].count("collision") == 1
    ev = [e for e in w.event_log if e.kind == "collision"][0]
    assert ev.payload == {"actors": ["ego", 1]}


def test_missing_actor_control_rejected():
    from scenbench.sim import Actor

    class Mover:
        def control(self, actor, world):
            return Control()

    a = Actor(3, "vehicle", make_state("vehicle", 30.0, 0.0, 0.0, 1.0), "traffic", Mover())
    w = _straight_world(make_state("vehicle", 0.0, 0.0, 0.0, 0.0), actors=[a])
    with pytest.raises(KeyError):
        world_step(w, Control(), {})


def test_time_is_tick_times_dt():
    w = _straight_world(make_state("vehicle", 0.0, 0.0, 0.0, 1.0))
    for _ in range(137):
        w = world_step(w, Control(), {})
    assert w.time == 137 * w.dt


# -- trace round trip ----------------------------------------------------------------
def test_trace_round_trip_and_errors():
    from scenbench.rollout import run_episode
    from scenbench.scenarios import benign_spec, instantiate_scenario
    from scenbench.agents import RuleBasedPolicy
    world = instantiate_scenario(benign_spec(5, 0))
    trace = run_episode(world, RuleBasedPolicy(), limit_s=5.0)
    lines = trace.to_lines()
    back = EpisodeTrace.from_lines(lines)
    assert np.array_equal(back.ego, trace.ego)
    assert back.to_lines() == lines
    bad = list(lines)
    bad[4] = "{not json"
    with pytest.raises(TraceError, match="line 5"):
        EpisodeTrace.from_lines(bad)
    with pytest.raises(TraceError, match="truncated"):
        EpisodeTrace.from_lines(lines[:-1])
    head = lines[0].replace("scenbench.trace/1", "scenbench.trace/0")
    with pytest.raises(TraceError, match="scenbench.trace/0"):
        EpisodeTrace.from_lines([head] + lines[1:])
