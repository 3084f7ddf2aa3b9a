import math

import numpy as np
import pytest

from scenbench.agents import (BanditEnv, RewardInfo, RuleBasedPolicy, act, compute_reward, extract_observation,
                              front_vehicle, init_policy, reward_terms, train_policy)
from scenbench.agents.train import gaussian_score_gradient
from scenbench.scenarios import get_route
from scenbench.sim import Actor, Control, Polyline, make_state, make_world, route_progress, world_step
from scenbench.sim.world import Lane, TrafficLight, WorldMap

PTS = [(-50.0, 0.0), (300.0, 0.0)]


class _Route:
    def __init__(self, pts=PTS):
        self.polyline = Polyline(pts)
        self.lane_width = 3.5
        self.speed_limit = 8.0

    def command_at(self, s):
        return "straight"


def _world(ego, actors=(), lights=()):
    wmap = WorldMap([Lane("l", Polyline(PTS), 3.5, 8.0)], traffic_lights=lights)
    return make_world(ego, actors, wmap, _Route())


# -- observation -------------------------------------------------------------------
def test_observation_stationary_on_route_is_zero():
    obs = extract_observation(_world(make_state("vehicle", 0.0, 0.0, 0.0, 0.0)), "4D")
    assert obs.shape == (4,)
    assert np.array_equal(obs, np.zeros(4))


def test_front_vehicle_dead_ahead():
    ego = make_state("vehicle", 0.0, 0.0, 0.0, 0.0)
    ahead = Actor(1, "vehicle", make_state("vehicle", 10.0, 0.0, 0.0, 0.0), "blocker")
    behind = Actor(2, "vehicle", make_state("vehicle", -15.0, 0.0, 0.0, 0.0), "blocker")
    beside = Actor(3, "vehicle", make_state("vehicle", 10.0, 7.0, 0.0, 0.0), "blocker")
    assert front_vehicle(_world(ego, [ahead])) == 1
    assert extract_observation(_world(ego, [ahead]))[3] == 1.0
    assert front_vehicle(_world(ego, [behind, beside])) == 0


def test_dir_space_left_command_and_unit_vectors():
    route = get_route(6, 0)
    s0, _, cmd = route.maneuvers[0]
    assert cmd == "left"
    x, y, th = route.polyline.point_at(s0 - 10.0)
    world = make_world(make_state("vehicle", x, y, th, 4.0), [], route.map, route)
    obs = extract_observation(world, "4D+Dir")
    assert obs.shape == (11,)
    assert list(obs[4:7]) == [1.0, 0.0, 0.0]
    assert math.hypot(*obs[7:9]) == pytest.approx(1.0, abs=1e-6)
    assert math.hypot(*obs[9:11]) == pytest.approx(1.0, abs=1e-6)


def test_unknown_space_rejected():
    with pytest.raises(ValueError):
        extract_observation(_world(make_state("vehicle", 0.0, 0.0, 0.0, 0.0)), "4D+BEV")


# -- reward ------------------------------------------------------------------------
@pytest.mark.parametrize("info,expected", [
    (RewardInfo(0.0, 0.0), 0.1),
    (RewardInfo(5.0, 0.0), 5.1),
    (RewardInfo(10.0, 0.1, collision=True), -2.95),
])
def test_reward_examples(info, expected):
    assert compute_reward(info) == pytest.approx(expected, abs=1e-12)


def test_reward_is_sum_of_seven_terms():
    rng = np.random.default_rng(0)
    for _ in range(100):
        info = RewardInfo(rng.uniform(0, 12), rng.uniform(-0.3, 0.3), bool(rng.integers(2)), bool(rng.integers(2)))
        terms = reward_terms(info)
        assert len(terms) == 7
        assert compute_reward(info) == sum(terms.values())


# -- rule based ego ----------------------------------------------------------------
def test_rule_based_progresses_on_clear_road():
    route = get_route(1, 0)
    x, y, th = route.polyline.point_at(0.0)
    world = make_world(make_state("vehicle", x, y, th, 0.0), [], route.map, route)
    ego = RuleBasedPolicy()
    per_second = int(round(1.0 / world.dt))
    last = route_progress((world.ego.x, world.ego.y), route)
    for _ in range(8):
        for _ in range(per_second):
            world = world_step(world, ego(world), {})
        now = route_progress((world.ego.x, world.ego.y), route)
        assert now > last
        last = now


def test_rule_based_stops_for_red_light():
    # red for the whole run
    light = TrafficLight(((60.0, -1.75), (60.0, 1.75)), (1.0, 0.0), (10.0, 3.0, 100.0), offset=13.0)
    world = _world(make_state("vehicle", 0.0, 0.0, 0.0, 6.0), lights=[light])
    ego = RuleBasedPolicy()
    for _ in range(400):
        assert light.phase(world.time) == "red"
        world = world_step(world, ego(world), {})
    assert world.ego.speed < 0.1
    front = world.ego.x + world.ego.half_length
    assert 60.0 - front > 0
    assert not any(e.kind == "red_light_run" for e in world.event_log)


def test_rule_based_stopped_lead_no_collision():
    lead = Actor(1, "vehicle", make_state("vehicle", 8.8, 0.0, 0.0, 0.0), "blocker")   # 4 m bumper gap
    world = _world(make_state("vehicle", 0.0, 0.0, 0.0, 6.0), [lead])
    ego = RuleBasedPolicy()
    for _ in range(int(60.0 / world.dt)):
        world = world_step(world, ego(world), {})
    assert not any(e.kind == "collision" for e in world.event_log)


# -- act ---------------------------------------------------------------------------
def test_zero_weights_give_zero_action():
    for kind in ("stochastic_pg", "deterministic_pg"):
        pol = init_policy(kind, "4D", zero=True)
        assert np.array_equal(act(pol, np.array([1.0, 5.0, 0.2, 1.0])), np.zeros(2))


def test_stochastic_act_seeded():
    pol = init_policy("stochastic_pg", "4D", rng=3)
    obs = np.array([0.5, 4.0, 0.0, 0.0])
    a = act(pol, obs, "stochastic", np.random.default_rng(7))
    b = act(pol, obs, "stochastic", np.random.default_rng(7))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, act(pol, obs, "deterministic"))


def test_wrong_observation_length():
    pol = init_policy("deterministic_pg", "4D", rng=0)
    with pytest.raises(ValueError):
        act(pol, np.zeros(11))


def test_actions_within_bounds_for_extreme_parameters():
    rng = np.random.default_rng(0)
    for kind in ("stochastic_pg", "deterministic_pg"):
        pol = init_policy(kind, "4D+Dir", rng=1)
        pol.params[:] = rng.normal(0, 50, pol.params.shape)
        pol._unpack()
        for _ in range(50):
            a = act(pol, rng.normal(0, 100, 11), "stochastic", rng)
            assert abs(a[0]) <= 3.0 and abs(a[1]) <= 0.3


def test_checkpoint_round_trip(tmp_path):
    pol = init_policy("stochastic_pg", "4D+Dir", rng=2)
    pol.save(tmp_path / "p.json")
    back = type(pol).load(tmp_path / "p.json")
    assert np.array_equal(back.params, pol.params) and back.space == "4D+Dir"


# -- training ----------------------------------------------------------------------
BANDIT_PG = dict(total_steps=12800, steps_per_iter=256, epochs=10, minibatch=64, hidden=(32, 32),
                 init_log_std=-1.5)   # 50 iterations x 40 minibatches = 2000 updates


def test_stochastic_pg_bandit_optimum():
    pol, curve = train_policy("stochastic_pg", BanditEnv(0.5), BANDIT_PG, seed=0)
    assert abs(act(pol, np.zeros(1))[0] - 0.5) < 0.1
    assert curve


def test_deterministic_pg_bandit_optimum():
    pol, _ = train_policy("deterministic_pg", BanditEnv(0.5),
                          dict(total_steps=2000, warmup=100, hidden=(32, 32)), seed=0)
    assert abs(act(pol, np.zeros(1))[0] - 0.5) < 0.1


def test_score_gradient_matches_finite_difference():
    eps = np.random.default_rng(0).standard_normal((20000, 1))

    def reward(x):
        return -(x[:, 0] - 0.5) ** 2

    def objective(m, ls):
        return reward(m + np.exp(ls) * eps).mean()

    m, ls = np.array([0.0]), np.array([math.log(0.5)])
    x = m + np.exp(ls) * eps
    r = reward(x)
    g_m, g_ls = gaussian_score_gradient(m, ls, x, r, baseline=r.mean())
    h = 1e-4
    fd_m = (objective(m + h, ls) - objective(m - h, ls)) / (2 * h)
    fd_ls = (objective(m, ls + h) - objective(m, ls - h)) / (2 * h)
    assert g_m[0] == pytest.approx(fd_m, rel=0.05)
    assert g_ls[0] == pytest.approx(fd_ls, rel=0.05)


def test_training_deterministic():
    hyper = dict(total_steps=1024, steps_per_iter=256, epochs=2, minibatch=64, hidden=(16, 16))
    a, _ = train_policy("stochastic_pg", BanditEnv(0.2), hyper, seed=5)
    b, _ = train_policy("stochastic_pg", BanditEnv(0.2), hyper, seed=5)
    assert np.array_equal(a.params, b.params)
    hyper = dict(total_steps=300, warmup=50, hidden=(16, 16))
    a, _ = train_policy("deterministic_pg", BanditEnv(0.2), hyper, seed=5)
    b, _ = train_policy("deterministic_pg", BanditEnv(0.2), hyper, seed=5)
    assert np.array_equal(a.params, b.params)


def test_unknown_algorithm():
    with pytest.raises(ValueError):
        train_policy("q_learning", BanditEnv(), {}, seed=0)
