from __future__ import annotations

import pytest

from gotkit.commands.config import parse_config, validate_config
from gotkit.core.formats import dump_tensor
from gotkit.core.policies import AgeAware, Uniform
from gotkit.core.tensor import embed_aoi
from gotkit.exceptions import ValidationError


def minimal(**extra):
    data = {
        'system': {'kernels': [[[0.9, 0.1], [0.3, 0.7]]], 'delta': [0, 0]},
        'tensor': {'embed': {'kind': 'mse'}},
        'policies': [{'kind': 'uniform'}],
    }
    data.update(extra)
    return data


def error_path(data, base_dir='.'):
    with pytest.raises(ValidationError) as info:
        parse_config(data, base_dir)
    return info.value.path


def test_reference_config(reference_cfg):
    assert reference_cfg.name == 'reference-fire'
    assert reference_cfg.system.n_status == 3
    assert reference_cfg.system.source.n_decisions == 3
    assert reference_cfg.system.epsilon == 0.1
    assert reference_cfg.system.status.label(2) == 'severe'
    assert [p.name for p in reference_cfg.policies] == [
        'Uniform', 'Age-aware', 'Change-aware', 'Optimal MMSE', 'Optimal AoII', 'Optimal GoT']
    assert reference_cfg.tensor.values[:, 1, 0].tolist() == [5, 17, 189]
    assert reference_cfg.cost_model is not None
    assert (reference_cfg.lam, reference_cfg.horizon, reference_cfg.replications) == (1.0, 100000, 20)


def test_policy_specs(reference_cfg):
    spec = reference_cfg.policy('optimal_got')
    assert spec.name == 'Optimal GoT'
    assert spec.slug == 'optimal-got'
    assert reference_cfg.policy('Uniform').build() == Uniform(5)
    assert reference_cfg.policy('age_aware').build() == AgeAware(5)
    with pytest.raises(ValidationError):
        reference_cfg.policy('random')


def test_defaults():
    cfg = parse_config(minimal())
    assert (cfg.name, cfg.lam, cfg.horizon, cfg.replications, cfg.seed, cfg.output) == \
        ('experiment', 1.0, 100000, 20, 0, 'results')
    assert cfg.system.epsilon == 0.0
    assert cfg.system.status.embedding == (0.0, 1.0)
    assert cfg.policies[0].period == 1
    assert cfg.policies[0].lam == 1.0
    assert cfg.solver.span_tol == 1e-9


def test_overrides():
    cfg = parse_config(minimal(seed=3)).with_overrides(seed=9, output='elsewhere')
    assert (cfg.seed, cfg.output) == (9, 'elsewhere')
    assert parse_config(minimal(seed=3)).with_overrides().seed == 3


def test_rows_off_by_more_than_tolerance(reference_dict):
    reference_dict['system']['kernels'][0][1] = [0.10, 0.60, 0.20]
    assert error_path(reference_dict) == 'system.kernels[0][1]'


def test_rows_within_tolerance_are_renormalized():
    data = minimal()
    data['system']['kernels'] = [[[0.5, 0.5 + 5e-10], [0.3, 0.7]]]
    kernels = parse_config(data).system.source.kernels
    assert kernels[0, 0].sum() == pytest.approx(1.0, abs=1e-15)


def test_negative_probability():
    data = minimal()
    data['system']['kernels'] = [[[1.1, -0.1], [0.3, 0.7]]]
    assert error_path(data) == 'system.kernels[0][0][0]'


def test_identity_decision_map_by_default(reference_dict):
    del reference_dict['system']['delta']
    assert parse_config(reference_dict).system.delta == (0, 1, 2)
    data = minimal()
    del data['system']['delta']
    assert error_path(data) == 'system.delta'


def test_decision_map_range(reference_dict):
    reference_dict['system']['delta'] = [0, 1, 3]
    assert error_path(reference_dict) == 'system.delta[2]'


def test_declared_decisions_must_match(reference_dict):
    reference_dict['system']['decisions'] = 2
    assert error_path(reference_dict) == 'system.kernels'


def test_channel_range(reference_dict):
    reference_dict['system']['channel']['epsilon'] = 1.5
    assert error_path(reference_dict) == 'system.channel.epsilon'


@pytest.mark.parametrize('tensor', [{}, {'embed': {'kind': 'mse'}, 'cost_model': {}}])
def test_exactly_one_tensor_source(tensor):
    assert error_path(minimal(tensor=tensor)) == 'tensor'


def test_cost_model_with_flat_tables(reference_dict):
    cm = reference_dict['tensor']['cost_model']
    cm['c1'] = [0, 20, 200]
    cm['c2'] = [[0, -2, -4], [0, -8, -16], [0, -16, -32]]
    cfg = parse_config(reference_dict)
    assert cfg.tensor.values[:, 2, 0].tolist() == [12, 16, 180]


def test_literal_formula(reference_dict):
    reference_dict['tensor']['cost_model']['formula'] = 'literal'
    assert parse_config(reference_dict).tensor.values[0, :, 0].tolist() == [0, 3, 8]
    reference_dict['tensor']['cost_model']['formula'] = 'other'
    assert error_path(reference_dict) == 'tensor.cost_model.formula'


def test_cost_model_signs(reference_dict):
    reference_dict['tensor']['cost_model']['c3'] = [0, -5, 12]
    assert error_path(reference_dict) == 'tensor.cost_model.c3'


def test_cost_model_missing_table(reference_dict):
    del reference_dict['tensor']['cost_model']['c2']
    assert error_path(reference_dict) == 'tensor.cost_model.c2'


def test_embedded_aoii_over_derived_age():
    data = minimal(tensor={'embed': {'kind': 'aoii', 'penalty': {'kind': 'exponential', 'rate': 0.1}}})
    data['system']['environment'] = {'mode': 'derived-age', 'cap': 8}
    cfg = parse_config(data)
    assert cfg.tensor.dims == (2, 2, 9)
    assert cfg.penalty.kind == 'exponential'
    assert cfg.gap.table.tolist() == [[0.0, 1.0], [1.0, 0.0]]


def test_embedded_uoi_needs_weights():
    data = minimal(tensor={'embed': {'kind': 'uoi'}})
    assert error_path(data) == 'tensor.embed.weights'
    data['tensor']['embed']['weights'] = [1.0, 2.0]
    data['system']['environment'] = {'mode': 'markov', 'q': [[0.5, 0.5], [0.5, 0.5]]}
    cfg = parse_config(data)
    assert cfg.tensor.values[1, 0, 1] == 2.0
    assert cfg.weights.table.tolist() == [1.0, 2.0]


def test_unknown_embedding():
    assert error_path(minimal(tensor={'embed': {'kind': 'aoii2'}})) == 'tensor.embed.kind'


def test_tensor_dims_must_match_the_system():
    data = minimal(tensor={'embed': {'kind': 'mse'}})
    data['system']['environment'] = {'mode': 'constant', 'size': 2}
    parse_config(data)
    data['system']['environment'] = {'mode': 'derived-age', 'cap': 8, 'age': 'aoi'}
    data['tensor'] = {'embed': {'kind': 'aoi', 'cap': 4}}
    with pytest.raises(ValidationError):
        parse_config(data)


@pytest.mark.parametrize('kind', ['aoi', 'voi', 'aos', 'aoii'])
def test_age_embeddings_need_a_derived_age_environment(kind):
    data = minimal(tensor={'embed': {'kind': kind}})
    assert error_path(data) == 'tensor.embed.kind'
    data['system']['environment'] = {'mode': 'markov', 'q': [[0.5, 0.5], [0.5, 0.5]]}
    assert error_path(data) == 'tensor.embed.kind'


@pytest.mark.parametrize('kind, age', [('aoi', 'aoi'), ('voi', 'aoi'), ('aos', 'aos'), ('aoii', 'aos')])
def test_age_embeddings_follow_the_age_kind(kind, age):
    other = 'aos' if age == 'aoi' else 'aoi'
    data = minimal(tensor={'embed': {'kind': kind}})
    data['system']['environment'] = {'mode': 'derived-age', 'cap': 8, 'age': other}
    assert error_path(data) == 'tensor.embed.kind'
    data['system']['environment']['age'] = age
    cfg = parse_config(data)
    assert cfg.tensor.dims == (2, 2, 9)
    assert cfg.tensor.values.max() > 0


def test_tensor_from_file(tmp_path):
    dump_tensor(embed_aoi(3, 2), str(tmp_path / 'aoi.yaml'))
    data = minimal(tensor={'file': 'aoi.yaml'})
    data['system']['environment'] = {'mode': 'derived-age', 'cap': 3, 'age': 'aoi'}
    assert parse_config(data, str(tmp_path)).tensor == embed_aoi(3, 2)
    data['tensor']['file'] = 'missing.yaml'
    assert error_path(data, str(tmp_path)) == 'tensor.file'


@pytest.mark.parametrize('policies, path', [
    ([{'kind': 'random'}], 'policies[0].kind'),
    ([{'kind': 'uniform', 'period': 0}], 'policies[0].period'),
    ([{'kind': 'age_aware', 'threshold': 2.5}], 'policies[0].threshold'),
    ([{'kind': 'uniform'}, {'kind': 'uniform'}], 'policies[1].name'),
    ([{'kind': 'uniform', 'lambda': -1}], 'policies[0].lambda'),
    ([{'kind': 'change_aware', 'solution': 'x.yaml'}], 'policies[0].solution'),
    ([{'kind': 'optimal_got', 'solution': 'missing.yaml'}], 'policies[0].solution'),
    ([], 'policies'),
])
def test_policy_errors(policies, path):
    assert error_path(minimal(policies=policies)) == path


def test_policy_lambda_overrides_the_default():
    cfg = parse_config(minimal(policies=[{'kind': 'uniform', 'name': 'cheap', 'lambda': 0.25}], **{'lambda': 2}))
    assert cfg.lam == 2.0
    assert cfg.policy('cheap').lam == 0.25


def test_solver_section():
    cfg = parse_config(minimal(solver={'aperiodicity': 0.5, 'max_iter': 10}))
    assert (cfg.solver.aperiodicity, cfg.solver.max_iter) == (0.5, 10)
    assert error_path(minimal(solver={'aperiodicity': 1.0})) == 'solver.aperiodicity'


def test_files(tmp_path, write_config):
    with pytest.raises(ValidationError, match='file not found'):
        validate_config(str(tmp_path / 'nope.yaml'))
    bad = tmp_path / 'bad.yaml'
    bad.write_text('system: [1, 2\n', encoding='utf-8')
    with pytest.raises(ValidationError, match='YAML'):
        validate_config(str(bad))
    path = write_config(minimal())
    assert validate_config(path).source == path
