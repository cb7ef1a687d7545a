import numpy as np
import pytest

from aoisgd.engine import (
    STREAMS,
    centralized_reference,
    replicate,
    replication_seeds,
    run,
    spawn_streams,
)
from aoisgd.errors import ConfigError
from aoisgd.scenario import load_scenario


@pytest.fixture(scope="module")
def lossless():
    return load_scenario("lossless-sanity")


def test_stream_order_and_independence():
    assert STREAMS == ("topology", "fading", "success", "clocks", "problem", "errors")
    s = spawn_streams(5)
    draws = [s[k].random() for k in STREAMS]
    assert len(set(draws)) == len(STREAMS)
    assert spawn_streams(5)["fading"].random() == draws[1]


def test_replication_seeds_match_seed_sequence():
    seeds = replication_seeds(42, 16)
    assert len(set(seeds)) == 16
    kids = np.random.SeedSequence(42).spawn(16)
    assert seeds[3] == int(kids[3].generate_state(1, np.uint64)[0])


def test_zero_slots_rejected_and_one_slot_runs(lossless):
    with pytest.raises(ConfigError):
        lossless.with_overrides(slots=0)
    tr = run(lossless.with_overrides(slots=1))
    assert tr.slot_count == 1 and len(tr.objective) == 1


def test_run_is_deterministic():
    sc = load_scenario("paper-experiment").with_overrides(slots=300, agents=8)
    a, b = run(sc), run(sc)
    assert np.array_equal(a.objective, b.objective)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.aoi.pair_aoi, b.aoi.pair_aoi)
    c = run(sc.with_seed(sc.seed + 1))
    assert not np.array_equal(a.positions, c.positions)


def test_lossless_matches_centralized_bitwise(lossless):
    tr = run(lossless)
    ref = centralized_reference(lossless)
    assert np.array_equal(tr.positions, ref.positions)
    assert np.array_equal(tr.objective, ref.objective)
    assert np.array_equal(tr.nu, ref.nu)


def test_lossy_run_differs_from_centralized():
    sc = load_scenario("paper-experiment").with_overrides(slots=400, agents=8,
                                                          clocks={"kind": "every_slot"})
    tr, ref = run(sc), centralized_reference(sc)
    assert not np.array_equal(tr.positions, ref.positions)


def test_replicate_single_equals_run(lossless):
    sc = lossless.with_overrides(slots=50)
    traces, agg, seeds = replicate(sc, 1)
    direct = run(sc.with_seed(seeds[0]))
    assert np.array_equal(traces[0].objective, direct.objective)
    assert np.array_equal(agg.columns["objective"], direct.objective)
    assert np.all(agg.stderr["objective"] == 0)


def test_replicate_standard_errors():
    sc = load_scenario("paper-experiment").with_overrides(slots=100, agents=4)
    traces, agg, seeds = replicate(sc, 3)
    assert len(set(seeds)) == 3 and agg.replications == 3
    for name, se in agg.stderr.items():
        assert np.all(se >= 0), name
    with pytest.raises(ValueError):
        replicate(sc, 0)


def test_coalesced_clock_ticks_are_reported():
    sc = load_scenario("paper-experiment").with_overrides(slots=500, agents=4)
    tr = run(sc)
    assert len(tr.warnings) == 1 and "coalesced" in tr.warnings[0]
    assert run(load_scenario("lossless-sanity").with_overrides(slots=50)).warnings == []


def test_trace_shapes_and_ranges():
    sc = load_scenario("paper-experiment").with_overrides(slots=200, agents=8)
    tr = run(sc)
    assert tr.positions.shape == (200, 8, 2) and tr.nu.shape == (200, 8)
    assert np.all(np.diff(tr.nu, axis=0) >= 0)
    assert np.all((tr.max_target_error >= 0) & (tr.max_target_error <= 1))
    assert np.all(tr.penalty >= 0)
    assert np.all(tr.mean_aoi <= tr.max_aoi)
