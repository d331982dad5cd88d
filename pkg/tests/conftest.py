import os

import pytest

from playgraph.models import load_checkpoint
from playgraph.synth import SyntheticConfig, gen_states

FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")


@pytest.fixture(scope="session")
def rush_states():
    """Small deterministic rush dataset shared across tests."""
    return gen_states(SyntheticConfig(seed=11, n_states=60, task="rush"))


@pytest.fixture(scope="session")
def round_states():
    return gen_states(SyntheticConfig(seed=12, n_states=60, task="round"))


@pytest.fixture(scope="session")
def fixture_params():
    return load_checkpoint(os.path.join(FIXTURES, "fixture_model.ckpt"))


@pytest.fixture(scope="session")
def fixture_state():
    import json
    from playgraph.game import state_from_dict
    with open(os.path.join(FIXTURES, "fixture_state.json")) as fh:
        return state_from_dict(json.load(fh))


@pytest.fixture(scope="session")
def golden():
    import json
    with open(os.path.join(FIXTURES, "golden.json")) as fh:
        return json.load(fh)
