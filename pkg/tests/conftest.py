import copy

import pytest

from edgesim.config import parse_config

BASE = {
    "tasks": {"K": 60, "payload_bytes": 2_000_000, "result_bytes": 2_000},
    "deadline_s": 600,
    "devices": [{"preset": "nexus5", "initial_delay_s": 145}, {"preset": "nexus5"}, {"preset": "nexus6p"}],
    "policy": "MaccSerial",
}


def make_raw(**overrides):
    raw = copy.deepcopy(BASE)
    raw.update(overrides)
    return raw


def make_cfg(**overrides):
    return parse_config(make_raw(**overrides))


def markov(pl, pc, slot=10.0):
    return {"markov": {"p_leave": pl, "p_return": pc, "slot_s": slot}}


@pytest.fixture
def cfg_factory():
    return make_cfg
