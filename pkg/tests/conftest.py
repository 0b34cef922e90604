from __future__ import annotations

import copy

import numpy as np
import pytest
import yaml

from gotkit.commands.config import REFERENCE_CONFIG, parse_config, validate_config
from gotkit.core.system import ChannelModel, EnvModel, SourceModel, SystemModel
from gotkit.core.tensor import GoalTensor


@pytest.fixture(scope='session')
def reference_data():
    with open(REFERENCE_CONFIG, encoding='utf-8') as f:
        return yaml.safe_load(f)


@pytest.fixture
def reference_dict(reference_data):
    """A fresh, editable copy of the shipped reference config."""
    return copy.deepcopy(reference_data)


@pytest.fixture(scope='session')
def reference_cfg():
    return validate_config(REFERENCE_CONFIG)


@pytest.fixture
def small_cfg(reference_dict, tmp_path):
    """Reference scenario with horizons small enough for the CLI tests."""
    reference_dict.update(horizon=400, replications=2, output=str(tmp_path / 'out'))
    return parse_config(reference_dict, str(tmp_path))


@pytest.fixture
def write_config(tmp_path):
    def write(data, name='config.yaml'):
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data), encoding='utf-8')
        return str(path)

    return write


@pytest.fixture
def flip_system():
    """Symmetric two-status source that flips with probability 0.2, one decision."""
    return SystemModel(SourceModel([[[0.8, 0.2], [0.2, 0.8]]]), (0, 0))


@pytest.fixture
def indicator_tensor():
    return GoalTensor((1.0 - np.eye(2))[:, :, None])


@pytest.fixture
def markov_env_system():
    """Two statuses, two decisions and a two-state Markov environment."""
    kernels = [
        [[0.7, 0.3], [0.4, 0.6]],
        [[0.9, 0.1], [0.6, 0.4]],
    ]
    return SystemModel(
        SourceModel(kernels),
        (0, 1),
        ChannelModel(0.2),
        EnvModel('markov', q=[[0.9, 0.1], [0.3, 0.7]]),
    )


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))
