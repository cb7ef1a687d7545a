import dataclasses
import inspect
import math
import warnings

import numpy as np
import pytest

from aoisgd.coverage import NullProblem, QuadraticProblem
from aoisgd.errors import InvalidInput, StabilityViolation
from aoisgd.optimizer import (
    FAIL,
    HEURISTIC_PASS,
    PASS,
    AgentState,
    Constant,
    InversePower,
    StepSchedule,
    async_rate_check,
    ball_error,
    every_slot_ticks,
    experiment_schedule,
    penalty_param,
    poisson_clock_ticks,
    sgd_step,
    sgd_update,
    step_size,
    validate_schedule,
)
from aoisgd.protocol import BeliefVector


def test_experiment_schedule_values():
    s = experiment_schedule()
    assert step_size(s, 0) == 0.1 and penalty_param(s, 0) == 0.1
    assert math.isclose(step_size(s, 1000), 1 / 11)
    r3 = penalty_param(s, 1e3) / step_size(s, 1e3)
    r6 = penalty_param(s, 1e6) / step_size(s, 1e6)
    assert r6 != r3
    with pytest.raises(InvalidInput):
        step_size(s, -1)


def test_ratio_b_over_a_grows_for_experiment_schedule():
    # b decays like nu^(-2/3), a like nu^(-1): b/a grows, so b/a -> 0 does not hold
    s = experiment_schedule()
    ratios = [penalty_param(s, v) / step_size(s, v) for v in (1e3, 1e6, 1e9)]
    assert ratios[0] < ratios[1] < ratios[2]


def test_validate_experiment_schedule():
    rep = validate_schedule(experiment_schedule(), 10**6)
    assert rep["A3(i)"].status == HEURISTIC_PASS
    assert rep["A3(ii)"].status == FAIL
    for k in ("A3(iii)", "A3(iv)", "A3(v)", "b_quasi_stationarity"):
        assert rep[k].status == PASS, k


def test_validate_inverse_sqrt_fails_square_summability():
    s = StepSchedule(InversePower(0.5, 1.0, 0.0, 1.0), InversePower(1.0, 1.0, 0.0, 1.0))
    rep = validate_schedule(s, 10**6)
    assert rep["A3(i)"].status == FAIL
    assert not rep["A3(i)"].detail["sum_a2_converges"]


def test_validate_constant_b_fails_ratio_clause():
    s = StepSchedule(experiment_schedule().a, Constant(0.1))
    assert validate_schedule(s, 10**5)["A3(ii)"].status == FAIL


def test_validate_schedule_meeting_every_clause():
    s = StepSchedule(InversePower(0.75, 1.0, 0.0, 1.0), InversePower(1.0, 1.0, 0.0, 1.0))
    rep = validate_schedule(s, 10**6)
    assert all(r.ok for r in rep.values()), {k: r.status for k, r in rep.items()}


def test_validate_requires_long_horizon():
    with pytest.raises(InvalidInput):
        validate_schedule(experiment_schedule(), 100)


# -- update ---------------------------------------------------------------------


def one_agent(x0, ts=1):
    return AgentState(np.array(x0, dtype=float), nu=ts), BeliefVector(0, [np.array(x0)], ts)


def test_zero_gradient_is_fixed_point():
    agent, bel = one_agent([0.3])
    x = sgd_update(agent, bel, 1.0, NullProblem(1), experiment_schedule(), np.random.default_rng(0))
    assert x[0] == 0.3 and agent.nu == 2


def test_quadratic_hand_step():
    agent, bel = one_agent([0.0])
    sched = StepSchedule(Constant(0.1), Constant(1.0))
    x = sgd_update(agent, bel, 1.0, QuadraticProblem([[1.0]]), sched, np.random.default_rng(0))
    assert math.isclose(x[0], 0.2, rel_tol=1e-15)


def test_injected_error_respects_bound():
    rng = np.random.default_rng(1)
    norms = [np.linalg.norm(ball_error(2, 0.01, rng)) for _ in range(10_000)]
    assert max(norms) <= 0.01
    agent, bel = one_agent([0.0, 0.0])
    agent.error_bound = 0.01
    worst = 0.0
    for _ in range(200):
        _, info = sgd_step(agent, bel, 1.0, NullProblem(2), experiment_schedule(), rng)
        worst = max(worst, info.error_norm)
    assert 0 < worst <= 0.01


def test_non_finite_gradient_aborts():
    class Bad(NullProblem):
        def agent_gradients(self, values, i, xi, rng):
            return np.array([np.nan]), np.zeros(1)

    agent, bel = one_agent([0.0])
    with pytest.raises(StabilityViolation):
        sgd_update(agent, bel, 1.0, Bad(1), experiment_schedule(), np.random.default_rng(0))


def test_agent_interface_has_no_global_time():
    params = list(inspect.signature(sgd_update).parameters)
    assert params == ["agent", "belief", "xi", "problem", "schedule", "rng"]
    fields = {f.name for f in dataclasses.fields(AgentState)}
    assert fields == {"x", "nu", "clock_rate", "error_bound"}
    bel = BeliefVector(0, [np.zeros(2)] * 3)
    assert set(vars(bel)) == {"owner", "components"}
    assert {f.name for f in dataclasses.fields(bel.components[0])} == {"value", "timestamp",
                                                                         "origin"}


# -- clocks ---------------------------------------------------------------------


def test_poisson_tick_count_concentration():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        tr = poisson_clock_ticks(0.2, 100_000, 1.0, np.random.default_rng(2))
    assert abs(tr.raw_ticks - 20_000) <= 3 * math.sqrt(20_000)


def test_poisson_coarse_slots_warn():
    with pytest.warns(RuntimeWarning, match="coalesced"):
        poisson_clock_ticks(0.2, 20_000, 1.0, np.random.default_rng(2))


def test_poisson_fine_slots_do_not_warn():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        tr = poisson_clock_ticks(0.2, 20_000, 0.02, np.random.default_rng(2))
    assert tr.coalesced_fraction <= 0.01


def test_poisson_rate_limit_and_determinism():
    tr = poisson_clock_ticks(1e-9, 1000, 1.0, np.random.default_rng(0))
    assert len(tr.slots) == 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        a = poisson_clock_ticks(0.2, 5000, 1.0, np.random.default_rng(8)).slots
        b = poisson_clock_ticks(0.2, 5000, 1.0, np.random.default_rng(8)).slots
    assert np.array_equal(a, b)
    with pytest.raises(InvalidInput):
        poisson_clock_ticks(0.0, 10, 1.0, np.random.default_rng(0))


def test_async_rate_check_examples():
    N = 20_000
    rng = np.random.default_rng(4)
    counts = np.cumsum(rng.random((N, 3)) < 0.2, axis=0)
    rep = async_rate_check(counts)
    assert rep.passed and np.all(np.abs(rep.estimates - 0.2) < 0.02)
    stuck = np.zeros((N, 1))
    assert not async_rate_check(stuck).passed
    every = np.cumsum(np.ones((N, 1)), axis=0)
    assert async_rate_check(every).estimates[0] == 1.0
    assert len(every_slot_ticks(10).slots) == 10
    with pytest.raises(InvalidInput):
        async_rate_check(every[:500])
