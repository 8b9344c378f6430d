import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gfucb.function_space import MultiheadFunction, SampleLog, TableRep


def make_table_member(universe, values, heads, value_range=(-1.0, 1.0)):
    return MultiheadFunction(TableRep(universe, values), np.asarray(heads, float), value_range)


def play_random_log(env, n_rounds, seed):
    """Uniform random play on a bandit env; returns the filled log."""
    rng = np.random.default_rng(seed)
    log = SampleLog(env.M, env.d_in)
    for _ in range(n_rounds):
        rnd = env.sample_round(rng)
        actions = rng.integers(rnd.inputs.shape[1], size=env.M)
        rewards = env.sample_rewards(rnd, actions, rng)
        log.append_round(rnd.inputs[np.arange(env.M), actions], rewards)
    return log


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
