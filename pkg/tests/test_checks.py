import numpy as np
import pytest

from aoisgd.checks import (
    EXCEEDED,
    FAIL,
    PASS,
    edge_bound_check,
    path_check,
    two_hop_paths,
    verify,
)
from aoisgd.engine import replicate
from aoisgd.scenario import load_scenario

FAST = dict(horizon=10 ** 6, pilot_slots=1000, channel_trace_slots=20_000)


def test_verify_experiment_scenario():
    rep = verify(load_scenario("paper-experiment"), **FAST)
    assert rep["Def1"].status == PASS
    assert rep["A3(ii)"].status == FAIL and rep["A3"].status == FAIL
    assert rep["A3"].detail["failed_clauses"] == ["A3(ii)"]
    assert rep["A5"].status == PASS and rep["A4_monitor"].status == PASS
    assert rep["A8(i)"].status == EXCEEDED


def test_verify_negative_scenarios():
    rep = verify(load_scenario("neg-sqrt-step"), **FAST)
    assert rep["A3(i)"].status == FAIL
    rep = verify(load_scenario("neg-disconnected"), **FAST)
    assert rep["Def1"].status == FAIL


def test_verify_lossless():
    rep = verify(load_scenario("lossless-sanity"), **FAST)
    assert rep["A8(i)"].status == PASS and rep["Def1"].status == PASS


@pytest.fixture(scope="module")
def single_edge():
    sc = load_scenario("single-edge-bound").with_overrides(slots=20_000)
    traces, _, _ = replicate(sc, 4)
    return sc, traces


def test_single_edge_dominance(single_edge):
    sc, traces = single_edge
    res = edge_bound_check(sc, traces, (0, 1), 100)
    assert 0 < res.p_tilde < 1 and 0 < res.q < 1
    assert res.dominance.passed


def test_edge_bound_needs_constant_channels():
    sc = load_scenario("paper-experiment").with_overrides(slots=10, agents=4)
    with pytest.raises(ValueError):
        edge_bound_check(sc, [], (0, 1))


def test_line_containment():
    sc = load_scenario("line-3node").with_overrides(slots=5000)
    traces, _, _ = replicate(sc, 2)
    assert two_hop_paths(sc) == [(0, 1, 2)]
    res = path_check(sc, traces, (0, 1, 2), 100)
    assert res.containment.passed
    assert np.all(res.bound >= 0) and np.all(np.diff(res.bound) <= 0)
