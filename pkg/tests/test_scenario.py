import copy

import numpy as np
import pytest
import yaml

from modcoord.errors import AssumptionViolated, MissingField, ParseError
from modcoord.harness.scenario import (DEFAULT_SCENARIO, check_assumptions, default_scenario,
                                       dump_scenario, load_scenario, scenario_from_dict)


def test_round_trip(tmp_path, scenario):
    path = tmp_path / "s.yaml"
    dump_scenario(scenario, path)
    assert load_scenario(path) == scenario


def test_round_trip_sinusoid(tmp_path):
    s = default_scenario(arrivals={"kind": "sinusoid", "base": [1.5, 2.0, 1.8], "c_min": 1.0,
                                   "c_max": 2.5, "amplitude": [0.2, 0.1, 0.3],
                                   "omega": [0.05, 0.1, 0.02]})
    path = tmp_path / "s.yaml"
    dump_scenario(s, path)
    assert load_scenario(path) == s


def test_missing_field_path():
    data = copy.deepcopy(DEFAULT_SCENARIO)
    del data["players"][0]["beta_max"]
    with pytest.raises(MissingField) as info:
        scenario_from_dict(data)
    assert info.value.field == "players[0].beta_max"


def test_missing_field_from_file(tmp_path):
    data = copy.deepcopy(DEFAULT_SCENARIO)
    del data["players"][1]["beta_max"]
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(data))
    with pytest.raises(MissingField, match=r"players\[1\]\.beta_max"):
        load_scenario(path)


def test_capacity_violation():
    with pytest.raises(AssumptionViolated):
        default_scenario(arrivals__c_max=5.995)


def test_nonpositive_initial_queue():
    with pytest.raises(AssumptionViolated):
        default_scenario(initial={"Q": [0.0, 1.0, 1.0], "v": [[5.0] * 3] * 2, "game": "auto"})


def test_bad_values():
    with pytest.raises(ParseError):
        default_scenario(arrivals__kind="weird")
    with pytest.raises(ParseError):
        default_scenario(game__epsilon="lots")


def test_overrides_and_options(scenario):
    s = scenario.with_options(horizon=2.0, dt=None)
    assert s.horizon == 2.0 and s.dt == scenario.dt
    assert s.n_steps == 2000
    check_assumptions(s)
    assert np.allclose(scenario.regulation.q_bar, 2.0)
