import pytest

from aoisgd.errors import ConfigError
from aoisgd.scenario import (
    DEFAULTS,
    SCHEMA_VERSION,
    load_scenario,
    parse_text,
    resolve,
    scenario_from_dict,
    shipped_scenarios,
)

SHIPPED = ["line-3node", "lossless-sanity", "neg-disconnected", "neg-sqrt-step",
           "paper-experiment", "single-edge-bound"]


def write(tmp_path, text):
    p = tmp_path / "s.yaml"
    p.write_text(text)
    return str(p)


def test_shipped_scenarios_load():
    assert shipped_scenarios() == SHIPPED
    for name in SHIPPED:
        sc = load_scenario(name)
        assert sc.name == name and sc.slot_count >= 1
    assert SCHEMA_VERSION == 1


def test_missing_scenario():
    with pytest.raises(ConfigError, match="not found"):
        load_scenario("no-such-scenario")


def test_syntax_error_reports_line():
    with pytest.raises(ConfigError) as exc:
        parse_text("a: [1\nb: 2\n", "x.yaml")
    assert exc.value.line == 2 and str(exc.value).startswith("x.yaml:2:")


def test_unknown_nested_key_reports_line(tmp_path):
    path = write(tmp_path, "name: t\nagents: 4\nchannel:\n  mode: lossless\n  bogus: 3\n")
    with pytest.raises(ConfigError, match="channel.bogus") as exc:
        load_scenario(path)
    assert exc.value.line == 5


def test_bad_values_report_line(tmp_path):
    with pytest.raises(ConfigError, match="slots") as exc:
        load_scenario(write(tmp_path, "name: t\nagents: 4\nslots: -3\n"))
    assert exc.value.line == 3
    with pytest.raises(ConfigError, match="decay_mode"):
        load_scenario(write(tmp_path, "channel:\n  decay_mode: wobbly\n"))
    with pytest.raises(ConfigError, match="mapping"):
        load_scenario(write(tmp_path, "channel: 3\n"))


def test_empty_file_gives_defaults(tmp_path):
    sc = load_scenario(write(tmp_path, ""))
    assert sc.agent_count == DEFAULTS["agents"] and sc.slot_count == DEFAULTS["slots"]


def test_resolve_merges_without_touching_defaults():
    before = DEFAULTS["channel"]["mode"]
    cfg = resolve({"channel": {"mode": "lossless"}})
    assert cfg["channel"]["mode"] == "lossless" and cfg["channel"]["channels"] == 8
    assert DEFAULTS["channel"]["mode"] == before


def test_seed_and_overrides():
    sc = load_scenario("lossless-sanity", seed=99)
    assert sc.seed == 99 and sc.with_seed(5).seed == 5
    sc2 = sc.with_overrides(slots=10, problem={"mc_samples": 16})
    assert sc2.slot_count == 10 and sc2.config["problem"]["mc_samples"] == 16
    assert sc2.config["problem"]["kind"] == "coverage"
    assert sc.slot_count == 1000


def test_scenario_from_dict():
    sc = scenario_from_dict({"name": "d", "agents": 3, "slots": 5, "topology": {"kind": "complete"},
                             "channel": {"mode": "lossless"}})
    assert sc.agent_count == 3 and sc.channel.mode == "lossless"
