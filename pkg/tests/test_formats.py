from __future__ import annotations

import io

import numpy as np
import pytest
import yaml

from gotkit.core.formats import (
    TIMESERIES_COLUMNS,
    dump_solution,
    dump_tensor,
    dump_yaml,
    format_float,
    load_solution,
    load_tensor,
    structure_report_to_dict,
    tensor_from_dict,
    timeseries_rows,
    write_csv,
    write_timeseries,
)
from gotkit.core.mdp import MdpSolution
from gotkit.core.metrics import ErrorGapFn, PenaltyFn, Trajectory
from gotkit.core.tensor import GoalTensor, classify, embed_aoii, step5_difference
from gotkit.exceptions import ValidationError


def test_floats_keep_full_precision():
    assert format_float(0.1) == '0.10000000000000001'
    assert float(format_float(1 / 3)) == 1 / 3


def test_yaml_floats_stay_floats():
    text = dump_yaml({'a': 1.0, 'b': 1e20, 'c': float('inf'), 'd': np.float64(0.5), 'e': np.int64(3)})
    data = yaml.safe_load(text)
    assert data == {'a': 1.0, 'b': 1e20, 'c': float('inf'), 'd': 0.5, 'e': 3}
    assert isinstance(data['a'], float)
    assert isinstance(data['b'], float)


def test_yaml_keeps_key_order():
    text = dump_yaml({'z': 1, 'a': 2})
    assert text.index('z') < text.index('a')


def test_tensor_file(tmp_path):
    T = GoalTensor(np.arange(8, dtype=float).reshape((2, 2, 2)) / 3)
    path = str(tmp_path / 'tensor.yaml')
    dump_tensor(T, path)
    assert load_tensor(path) == T
    with open(path, encoding='utf-8') as f:
        data = yaml.safe_load(f)
    assert data['dims'] == [2, 2, 2]
    assert data['values'][1] == T.values[1, 0, 0]


def test_tensor_file_errors():
    with pytest.raises(ValidationError) as info:
        tensor_from_dict({'dims': [2, 2, 1], 'values': [0, 1, 2]})
    assert info.value.path == 'tensor.values'
    with pytest.raises(ValidationError):
        tensor_from_dict({'values': [0]})


def test_solution_file(tmp_path):
    sol = MdpSolution(0.1 + 0.2, np.array([0.0, -1 / 3, 2.5]), np.array([0, 1, 0]), 12, 3e-10)
    path = str(tmp_path / 'sol.yaml')
    dump_solution(sol, path)
    loaded = load_solution(path)
    assert loaded.gain == sol.gain
    assert loaded.bias.tolist() == sol.bias.tolist()
    assert loaded.policy.tolist() == [0, 1, 0]
    assert (loaded.iterations, loaded.span) == (12, 3e-10)


def test_solution_file_errors(tmp_path):
    path = tmp_path / 'sol.yaml'
    path.write_text('gain: 1.0\npolicy: [0, 1]\n', encoding='utf-8')
    with pytest.raises(ValidationError, match='bias'):
        load_solution(str(path))
    path.write_text('gain: 1.0\npolicy: [0, 3]\nbias: [0, 0]\n', encoding='utf-8')
    with pytest.raises(ValidationError):
        load_solution(str(path))


def test_structure_report():
    T = embed_aoii(PenaltyFn('linear'), ErrorGapFn.indicator(2), 4)
    data = structure_report_to_dict(classify(T))
    assert data['diagonally_symmetric'] is True
    assert data['multiplicative'] is True
    assert data['content_independent'] is False
    assert data['multiplicative_env']['base_index'] == 4
    assert 'step5' not in data
    text = dump_yaml(data)
    env = yaml.safe_load(text)['multiplicative_env']
    assert env['coefficients'] == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert env['base_slice'] == [[0.0, 4.0], [4.0, 0.0]]


def test_structure_report_with_formula_comparison(reference_cfg):
    data = structure_report_to_dict(classify(reference_cfg.tensor), step5_difference(reference_cfg.cost_model))
    assert data['step5'] == {
        'identical': False,
        'differing_entries': 2,
        'max_abs_difference': 4.0,
        'literal_negative_entries': 0,
    }


def test_csv_formats_floats_only():
    buffer = io.StringIO()
    write_csv(buffer, ('a', 'b', 'c'), [(1, 0.5, 'x'), (2, np.float64(0.25), 'y')])
    assert buffer.getvalue() == 'a,b,c\n1,0.5,x\n2,0.25,y\n'


def test_timeseries_rows():
    traj = Trajectory(x=[0, 1, 1], x_hat=[0, 0, 1], sampled=[False, False, True],
                      delivered=[False, False, True], cost=[0.0, 1.0, 0.5])
    columns, rows = timeseries_rows(traj, {'aoi': np.array([0, 1, 0])})
    assert columns == TIMESERIES_COLUMNS + ('aoi',)
    rows = list(rows)
    assert rows[1] == [1, 1, 0, 1.0, 0, 0, 0.5, 1]
    assert rows[2] == [2, 1, 1, 0.5, 1, 1, 0.5, 0]


def test_timeseries_csv():
    traj = Trajectory(x=[0, 1], x_hat=[0, 1], sampled=[True, True], delivered=[True, True], cost=[2.0, 2.0])
    buffer = io.StringIO()
    write_timeseries(buffer, traj)
    lines = buffer.getvalue().splitlines()
    assert lines[0] == ','.join(TIMESERIES_COLUMNS)
    assert lines[2] == '1,1,1,2,1,1,2'
