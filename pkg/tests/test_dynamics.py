import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plantnav.dynamics import (
    Action,
    EnergyConfig,
    Termination,
    UavState,
    apply_action,
    check_termination,
    drift_probability,
    energy_cost,
    initial_state,
)
from plantnav.errors import ContractError
from plantnav.world import BoxObstacle, Vec3, WindParams, World, collides, in_bounds

CALM = WindParams(0.0, (1.0, 0.0, 0.0), 0.0)
CALM_WORLD = World(Vec3(10, 10, 10), (), CALM, 1)


def test_action_encoding_is_stable():
    assert [int(a) for a in Action] == [0, 1, 2, 3, 4, 5]
    assert [a.delta for a in Action] == [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]


def test_unit_move_without_wind():
    s = initial_state((5, 5, 5), (9, 9, 9))
    out = apply_action(CALM_WORLD, s, Action.PX, np.random.default_rng(0))
    assert out.next_state.pos == (6, 5, 5)
    assert out.moved and out.termination is Termination.RUNNING
    assert out.next_state.steps_taken == 1
    assert out.next_state.last_move is Action.PX


def test_boundary_clamp_counts_as_no_move():
    s = initial_state((0, 5, 5), (9, 9, 9))
    out = apply_action(CALM_WORLD, s, Action.NX, np.random.default_rng(0))
    assert out.next_state.pos == (0, 5, 5)
    assert not out.moved


def test_drift_probability_at_30_kmh():
    w = World(Vec3(10, 10, 10), (), WindParams(30.0, (1.0, 0.0, 0.0), 0.0, 120.0), 1)
    assert drift_probability(w, (3, 3, 3)) == 0.25


def test_drift_frequency_matches_probability():
    w = World(Vec3(40, 10, 10), (), WindParams(30.0, (1.0, 0.0, 0.0), 0.0, 120.0), 1)
    rng = np.random.default_rng(7)
    s = initial_state((5, 5, 5), (30, 9, 9))
    n = 20_000
    drifted = sum(apply_action(w, s, Action.PY, rng).next_state.pos.x == 6 for _ in range(n))
    # binomial(n, 0.25): 5 standard deviations
    assert abs(drifted / n - 0.25) < 5 * math.sqrt(0.25 * 0.75 / n)


def test_energy_cost_examples():
    assert energy_cost(Action.PZ, 0.0, EnergyConfig(1.0, 0.5, 0.0)) == 1.5
    assert energy_cost(Action.PX, 30.0, EnergyConfig(1.0, 0.0, 0.02)) == pytest.approx(1.6, abs=1e-15)
    flat = EnergyConfig(1.0, 0.0, 0.0)
    assert {energy_cost(a, 17.0, flat) for a in Action} == {1.0}


class TestTermination:
    world = World(Vec3(10, 10, 10), (BoxObstacle(Vec3(5, 5, 5), Vec3(2, 2, 2)),), CALM, 1)

    def test_reached_target(self):
        assert check_termination(self.world, initial_state((1, 1, 1), (1, 1, 1)), 400) is Termination.REACHED_TARGET

    def test_crash_beats_target(self):
        s = initial_state((5, 5, 5), (5, 5, 5))
        assert check_termination(self.world, s, 400) is Termination.CRASH

    def test_max_steps(self):
        s = replace(initial_state((1, 1, 1), (8, 8, 8)), steps_taken=400)
        assert check_termination(self.world, s, 400) is Termination.MAX_STEPS

    def test_battery_beats_max_steps(self):
        s = replace(initial_state((1, 1, 1), (8, 8, 8)), steps_taken=400, used_energy=600.0)
        assert check_termination(self.world, s, 400) is Termination.BATTERY_OUT

    def test_running(self):
        assert check_termination(self.world, initial_state((1, 1, 1), (8, 8, 8)), 400) is Termination.RUNNING


def test_apply_to_terminated_state_is_contract_error():
    s = initial_state((3, 3, 3), (3, 3, 3))
    with pytest.raises(ContractError):
        apply_action(CALM_WORLD, s, Action.PX, np.random.default_rng(0))


def test_state_dict_round_trip():
    s = replace(initial_state((1, 2, 3), (4, 5, 6)), last_move=Action.NY, steps_taken=7, used_energy=9.5)
    assert UavState.from_dict(s.to_dict()) == s


WINDY = World(
    Vec3(12, 12, 8),
    (BoxObstacle(Vec3(6, 6, 2), Vec3(2, 2, 4)),),
    WindParams(60.0, (0.6, 0.8, 0.0), 5.0, 120.0),
    1,
)


def random_free(world, rng):
    while True:
        p = Vec3(*(int(rng.integers(n)) for n in world.dims))
        if not collides(world, p):
            return p


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_energy_monotone_and_z_untouched_by_drift(seed):
    rng = np.random.default_rng(seed)
    cfg = EnergyConfig()
    s = initial_state(random_free(WINDY, rng), random_free(WINDY, rng), cfg)
    while check_termination(WINDY, s, 60) is Termination.RUNNING:
        a = Action(int(rng.integers(6)))
        out = apply_action(WINDY, s, a, rng, cfg, 60)
        assert out.next_state.used_energy - s.used_energy >= cfg.base_cost
        expected_z = min(max(s.pos.z + a.delta.z, 0), WINDY.dims.z - 1)
        assert out.next_state.pos.z == expected_z
        assert in_bounds(WINDY, out.next_state.pos)
        if out.termination is Termination.RUNNING:
            assert not collides(WINDY, out.next_state.pos)
        s = out.next_state


def test_calm_world_is_deterministic():
    s = initial_state((2, 2, 2), (8, 8, 8))
    for a in Action:
        outs = {apply_action(CALM_WORLD, s, a, np.random.default_rng(seed)) for seed in range(5)}
        assert len(outs) == 1


def test_every_trajectory_terminates_within_max_steps():
    max_steps = 60
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        s = initial_state(random_free(WINDY, rng), random_free(WINDY, rng))
        bias = rng.dirichlet(np.ones(6))  # a random stochastic policy per seed
        steps = 0
        while check_termination(WINDY, s, max_steps) is Termination.RUNNING:
            s = apply_action(WINDY, s, Action(int(rng.choice(6, p=bias))), rng, max_steps=max_steps).next_state
            steps += 1
        assert steps <= max_steps
