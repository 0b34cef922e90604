from __future__ import annotations

import csv
import io
import os

import pytest
import yaml
from click.testing import CliRunner

from gotkit.__main__ import cli
from gotkit.commands.compare import REPORT_COLUMNS
from gotkit.commands.config import validate_config
from gotkit.core.formats import load_solution


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def small_config(reference_dict, write_config):
    reference_dict.update(horizon=400, replications=2)
    return write_config(reference_dict)


def read_csv(path):
    with open(path, encoding='utf-8') as f:
        return list(csv.DictReader(f))


def test_version(runner):
    result = runner.invoke(cli, ['--version'])
    assert result.exit_code == 0
    assert 'gotkit, version' in result.output


def test_validate(runner, small_config):
    result = runner.invoke(cli, ['-q', 'validate', small_config])
    assert result.exit_code == 0, result.output
    assert result.stdout.strip() == f'{small_config}: ok'


def test_validate_reports_bad_configs(runner, reference_dict, write_config, tmp_path):
    reference_dict['system']['kernels'][0][1] = [0.10, 0.60, 0.20]
    result = runner.invoke(cli, ['validate', write_config(reference_dict)])
    assert result.exit_code == 1
    result = runner.invoke(cli, ['validate', str(tmp_path / 'missing.yaml')])
    assert result.exit_code == 1


def test_tensor_classification(runner, small_config):
    result = runner.invoke(cli, ['-q', 'tensor', '--classify', small_config])
    assert result.exit_code == 0, result.output
    report = yaml.safe_load(result.stdout)
    assert report['dims'] == [3, 3, 1]
    assert report['diagonally_symmetric'] is False
    assert report['multiplicative'] is True
    assert report['multiplicative_env']['base_slice'] == [[0, 5, 12], [20, 17, 16], [200, 189, 180]]
    assert report['step5']['differing_entries'] == 2
    assert report['step5']['max_abs_difference'] == 4.0


def test_tensor_dump(runner, small_config):
    result = runner.invoke(cli, ['-q', 'tensor', small_config])
    assert result.exit_code == 0, result.output
    data = yaml.safe_load(result.stdout)
    assert data['dims'] == [3, 3, 1]
    assert data['values'] == [0.0, 20.0, 200.0, 5.0, 17.0, 189.0, 12.0, 16.0, 180.0]


def test_compare_is_reproducible(runner, small_config, tmp_path):
    outputs = []
    for out, seed in (('a', '0'), ('b', '0'), ('c', '1')):
        result = runner.invoke(cli, ['-q', '--out', str(tmp_path / out), '--seed', seed, 'compare', small_config])
        assert result.exit_code == 0, result.output
        outputs.append(read_csv(tmp_path / out / 'compare.csv'))
        assert os.path.isfile(tmp_path / out / 'compare.yaml')
    a, b, c = outputs
    assert a == b
    assert [row['policy'] for row in a] == [
        'Uniform', 'Age-aware', 'Change-aware', 'Optimal MMSE', 'Optimal AoII', 'Optimal GoT']
    assert [row['exact_loss'] for row in a] == [row['exact_loss'] for row in c]
    assert [row['mc_loss_mean'] for row in a] != [row['mc_loss_mean'] for row in c]


def test_compare_prints_the_table(runner, small_config, tmp_path):
    result = runner.invoke(cli, ['-q', '--out', str(tmp_path / 'out'), 'compare', small_config])
    assert result.exit_code == 0, result.output
    rows = list(csv.reader(io.StringIO(result.stdout)))
    assert tuple(rows[0]) == REPORT_COLUMNS
    assert len(rows) == 7
    with open(tmp_path / 'out' / 'compare.yaml', encoding='utf-8') as f:
        report = yaml.safe_load(f)
    assert (report['horizon'], report['replications'], report['seed']) == (400, 2, 0)


def test_timeseries(runner, small_config, tmp_path):
    result = runner.invoke(cli, ['-q', '--out', str(tmp_path), 'timeseries', small_config,
                                 '-p', 'optimal_got', '--horizon', '50', '--metrics'])
    assert result.exit_code == 0, result.output
    path = result.stdout.strip()
    assert os.path.basename(path) == 'timeseries-optimal-got.csv'
    rows = read_csv(path)
    assert len(rows) == 50
    assert rows[0]['t'] == '0'
    assert {'aoi', 'aos', 'mse'} <= set(rows[0])


def test_always_sampling_pays_the_diagonal_plus_price(runner, reference_dict, write_config, tmp_path):
    reference_dict['system']['channel']['epsilon'] = 0.0
    reference_dict['policies'] = [{'kind': 'uniform', 'period': 1}]
    config = write_config(reference_dict)
    result = runner.invoke(cli, ['-q', '--out', str(tmp_path), 'timeseries', config, '-p', 'uniform',
                                 '--horizon', '300'])
    assert result.exit_code == 0, result.output
    diagonal = [0.0, 17.0, 180.0]
    for row in read_csv(result.stdout.strip()):
        assert row['sampled'] == row['delivered'] == '1'
        assert float(row['instant_cost']) == diagonal[int(row['x'])] + 1.0


def test_solve_and_reload(runner, reference_dict, write_config, tmp_path):
    config = write_config(reference_dict)
    result = runner.invoke(cli, ['-q', '--out', str(tmp_path / 'out'), 'solve', config, '-p', 'optimal_got'])
    assert result.exit_code == 0, result.output
    path = result.stdout.strip()
    assert os.path.basename(path) == 'optimal-got.solution.yaml'
    solution = load_solution(path)
    assert solution.n_states == 9

    reference_dict['policies'] = [{'kind': 'optimal_got', 'solution': path}]
    cfg = validate_config(write_config(reference_dict, 'cached.yaml'))
    policy = cfg.build_policy(cfg.policies[0])
    assert policy.solution.policy.tolist() == solution.policy.tolist()


def test_solve_refuses_rule_policies(runner, small_config, tmp_path):
    result = runner.invoke(cli, ['-q', '--out', str(tmp_path), 'solve', small_config, '-p', 'uniform'])
    assert result.exit_code == 1


def test_solver_failure_is_a_runtime_error(runner, reference_dict, write_config, tmp_path):
    reference_dict['solver'] = {'max_iter': 1}
    result = runner.invoke(cli, ['-q', '--out', str(tmp_path), 'solve', write_config(reference_dict),
                                 '-p', 'optimal_got'])
    assert result.exit_code == 2


def test_sweep(runner, small_config, tmp_path):
    result = runner.invoke(cli, ['-q', '--out', str(tmp_path), 'sweep', small_config, '-p', 'optimal_got'])
    assert result.exit_code == 0, result.output
    rows = read_csv(result.stdout.strip())
    assert [float(row['lambda']) for row in rows] == [0.0, 0.5, 1.0, 2.0, 5.0]
    rates = [float(row['exact_rate']) for row in rows]
    assert all(b <= a + 1e-12 for a, b in zip(rates, rates[1:]))


@pytest.mark.parametrize('lambdas', ['0,a', ',', ''])
def test_sweep_rejects_bad_prices(runner, small_config, lambdas):
    result = runner.invoke(cli, ['-q', 'sweep', small_config, '-p', 'optimal_got', '--lambdas', lambdas])
    assert result.exit_code == 1


def test_selfcheck_tensor_suite(runner):
    result = runner.invoke(cli, ['-q', 'selfcheck', '--suite', 'tensor'])
    assert result.exit_code == 0, result.output
    rows = list(csv.DictReader(io.StringIO(result.stdout)))
    assert len(rows) == 7
    assert {row['status'] for row in rows} == {'PASS'}


def test_selfcheck_detects_injected_asymmetry(runner):
    result = runner.invoke(cli, ['-q', 'selfcheck', '--suite', 'tensor', '--inject', 'asymmetry'])
    assert result.exit_code == 3
    rows = {row['check']: row['status'] for row in csv.DictReader(io.StringIO(result.stdout))}
    assert rows['mse_symmetric'] == 'FAIL'
    assert rows['aoii_multiplicative'] == 'PASS'


def test_selfcheck_solver_suite(runner):
    result = runner.invoke(cli, ['-q', 'selfcheck', '-s', 'solver'])
    assert result.exit_code == 0, result.output
