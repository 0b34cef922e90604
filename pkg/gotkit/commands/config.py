from __future__ import annotations

import logging
import os
import typing
from dataclasses import dataclass, replace

import numpy as np
import yaml

from ..core.formats import load_solution, load_tensor
from ..core.mdp import RviConfig
from ..core.metrics import EnvWeightFn, ErrorGapFn, PenaltyFn, StatusSpace
from ..core.policies import POLICY_KINDS, PolicyKind, make_policy
from ..core.system import ChannelModel, EnvModel, SourceModel, SystemModel
from ..core.tensor import (
    DEFAULT_AGE_CAP,
    DEFAULT_TOLERANCE,
    STEP5_FORMULAS,
    CostModel,
    GoalTensor,
    build_got,
    embed_aoi,
    embed_aoii,
    embed_aos,
    embed_mse,
    embed_uoi,
    embed_voi,
)
from ..exceptions import ValidationError

log = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-9
EMBED_KINDS = ('aoi', 'voi', 'aos', 'mse', 'aoii', 'uoi')
# age read from phi by each age-indexed embedding
EMBED_AGES = {'aoi': 'aoi', 'voi': 'aoi', 'aos': 'aos', 'aoii': 'aos'}
TENSOR_SOURCES = ('cost_model', 'embed', 'file')

DEFAULT_LAMBDA = 1.0
DEFAULT_HORIZON = 100000
DEFAULT_REPLICATIONS = 20
DEFAULT_SEED = 0
DEFAULT_OUTPUT = 'results'

PKG_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS_DIR = os.path.join(PKG_DIR, 'configs')
REFERENCE_CONFIG = os.path.join(CONFIGS_DIR, 'reference.yaml')


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    name: str
    lam: float
    period: typing.Optional[int] = None
    threshold: typing.Optional[int] = None
    solution: typing.Optional[str] = None

    def build(self) -> PolicyKind:
        cls = POLICY_KINDS[self.kind]
        if self.kind == 'uniform':
            return cls(period=self.period)
        if self.kind == 'age_aware':
            return cls(threshold=self.threshold)
        return cls()

    @property
    def slug(self) -> str:
        return ''.join(c if c.isalnum() else '-' for c in self.name.lower()).strip('-')


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """A validated experiment with every default filled in."""
    name: str
    system: SystemModel
    tensor: GoalTensor
    policies: typing.Tuple[PolicySpec, ...]
    lam: float = DEFAULT_LAMBDA
    horizon: int = DEFAULT_HORIZON
    replications: int = DEFAULT_REPLICATIONS
    seed: int = DEFAULT_SEED
    output: str = DEFAULT_OUTPUT
    tolerance: float = DEFAULT_TOLERANCE
    solver: RviConfig = RviConfig()
    cost_model: typing.Optional[CostModel] = None
    penalty: PenaltyFn = PenaltyFn()
    gap: typing.Optional[ErrorGapFn] = None
    weights: typing.Optional[EnvWeightFn] = None
    source: typing.Optional[str] = None

    def policy(self, name: str) -> PolicySpec:
        for spec in self.policies:
            if spec.name == name or spec.kind == name:
                return spec
        known = ', '.join(spec.name for spec in self.policies)
        raise ValidationError(f'no policy named {name!r}; configured: {known}', 'policies')

    def build_policy(self, spec: PolicySpec, lam: typing.Optional[float] = None) -> PolicyKind:
        """Ready-to-run policy; reloads the cached solution when one is configured."""
        solution = None
        if spec.solution and lam is None:
            solution = load_solution(spec.solution)
        return make_policy(spec.build(), self.system, self.tensor, spec.lam if lam is None else lam,
                           self.solver, solution)

    def with_overrides(self, seed=None, output=None) -> 'ExperimentConfig':
        return replace(
            self,
            seed=self.seed if seed is None else int(seed),
            output=self.output if output is None else output,
        )


def _at(path, key):
    return f'{path}.{key}' if path else str(key)


def _mapping(node, path, required=True) -> dict:
    if node is None and not required:
        return {}
    if not isinstance(node, dict):
        raise ValidationError('expected a mapping', path)
    return node


def _array(node, path, ndim=None) -> np.ndarray:
    try:
        arr = np.array(node, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError('expected numbers', path) from None
    if ndim is not None and arr.ndim != ndim:
        raise ValidationError(f'expected {ndim} nested levels of numbers, got shape {arr.shape}', path)
    if not np.all(np.isfinite(arr)):
        raise ValidationError('entries must be finite', path)
    return arr


def _int(node, path, minimum=None) -> int:
    if isinstance(node, bool) or not isinstance(node, (int, float)) or float(node) != int(node):
        raise ValidationError(f'expected an integer, got {node!r}', path)
    value = int(node)
    if minimum is not None and value < minimum:
        raise ValidationError(f'must be at least {minimum}, got {value}', path)
    return value


def _float(node, path, minimum=None, maximum=None) -> float:
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ValidationError(f'expected a number, got {node!r}', path)
    value = float(node)
    if not np.isfinite(value):
        raise ValidationError('must be finite', path)
    if minimum is not None and value < minimum:
        raise ValidationError(f'must be at least {minimum}, got {value:g}', path)
    if maximum is not None and value > maximum:
        raise ValidationError(f'must be at most {maximum}, got {value:g}', path)
    return value


def _stochastic_rows(rows: np.ndarray, path) -> np.ndarray:
    """Check rows sum to one within ``ROW_SUM_TOL`` and renormalize them."""
    if np.any(rows < 0) or np.any(rows > 1):
        idx = tuple(int(i) for i in np.argwhere((rows < 0) | (rows > 1))[0])
        raise ValidationError('entries must lie in [0, 1]', path + ''.join(f'[{i}]' for i in idx))
    sums = rows.sum(axis=-1)
    bad = np.argwhere(np.abs(sums - 1.0) > ROW_SUM_TOL)
    if bad.size:
        idx = tuple(int(i) for i in bad[0])
        raise ValidationError(f'row sums to {sums[idx]:.12g}, expected 1', path + ''.join(f'[{i}]' for i in idx))
    return rows / sums[..., None]


def _wrap(fn, path, *args, **kwargs):
    """Call a constructor and prefix its validation errors with ``path``."""
    try:
        return fn(*args, **kwargs)
    except ValidationError as e:
        raise ValidationError(e.message, _at(path, e.path) if e.path else path) from None


def _parse_status(node, n_status, path) -> StatusSpace:
    node = _mapping(node, path, required=False)
    embedding = node.get('embedding')
    if embedding is not None:
        embedding = tuple(_array(embedding, _at(path, 'embedding'), ndim=1).tolist())
    else:
        embedding = tuple(float(i) for i in range(n_status))
    labels = node.get('labels')
    return _wrap(StatusSpace, path, n_status, embedding, None if labels is None else tuple(labels))


def _parse_env(node, path) -> EnvModel:
    node = _mapping(node, path, required=False)
    mode = node.get('mode', 'constant')
    if mode == 'markov':
        if 'q' not in node:
            raise ValidationError('markov mode needs a transition matrix', _at(path, 'q'))
        q = _stochastic_rows(_array(node['q'], _at(path, 'q'), ndim=2), _at(path, 'q'))
        return _wrap(EnvModel, path, mode='markov', q=q)
    if mode == 'derived-age':
        cap = _int(node.get('cap', DEFAULT_AGE_CAP), _at(path, 'cap'), minimum=1)
        return _wrap(EnvModel, path, mode=mode, cap=cap, age=node.get('age', 'aos'))
    size = _int(node.get('size', 1), _at(path, 'size'), minimum=1)
    return _wrap(EnvModel, path, mode=mode, size=size)


def parse_system(node, path='system') -> SystemModel:
    node = _mapping(node, path)
    if 'kernels' not in node:
        raise ValidationError('missing transition kernels', _at(path, 'kernels'))
    kpath = _at(path, 'kernels')
    kernels = _array(node['kernels'], kpath, ndim=3)
    n_d, n_s, n_s2 = kernels.shape
    if n_s != n_s2 or n_s < 1:
        raise ValidationError(f'each kernel must be square, got shape {kernels.shape[1:]}', kpath)
    if 'decisions' in node:
        decisions = _int(node['decisions'], _at(path, 'decisions'), minimum=1)
        if decisions != n_d:
            raise ValidationError(f'{decisions} decisions declared but {n_d} kernels given', kpath)
    kernels = _stochastic_rows(kernels, kpath)

    if 'delta' in node:
        delta = node['delta']
        if not isinstance(delta, list):
            raise ValidationError('expected a list of decision indices', _at(path, 'delta'))
        delta = tuple(_int(d, f'{_at(path, "delta")}[{i}]', minimum=0) for i, d in enumerate(delta))
    elif n_d == n_s:
        delta = tuple(range(n_s))
    else:
        raise ValidationError('missing decision map', _at(path, 'delta'))

    channel = _mapping(node.get('channel'), _at(path, 'channel'), required=False)
    epsilon = _float(channel.get('epsilon', 0.0), _at(path, 'channel.epsilon'), 0.0, 1.0)
    status = _parse_status(node.get('status'), n_s, _at(path, 'status'))
    env = _parse_env(node.get('environment'), _at(path, 'environment'))
    return _wrap(SystemModel, path, SourceModel(kernels), delta, ChannelModel(epsilon), env, status)


def _parse_penalty(node, path) -> PenaltyFn:
    if node is None:
        return PenaltyFn()
    if isinstance(node, str):
        return _wrap(PenaltyFn, path, node)
    node = _mapping(node, path)
    return _wrap(PenaltyFn, path, node.get('kind', 'linear'), _float(node.get('rate', 1.0), _at(path, 'rate')))


def _parse_gap(node, system: SystemModel, path) -> ErrorGapFn:
    if node is None or node == 'indicator':
        return ErrorGapFn.indicator(system.n_status)
    if node == 'squared':
        return ErrorGapFn.squared(system.status.embedding)
    if isinstance(node, str):
        raise ValidationError(f'unknown gap {node!r}, expected indicator, squared or a table', path)
    return _wrap(ErrorGapFn, path, _array(node, path, ndim=2))


def _parse_weights(node, system: SystemModel, path) -> EnvWeightFn:
    if node is None:
        raise ValidationError('uoi needs environment weights', path)
    return _wrap(EnvWeightFn, path, _array(node, path, ndim=1))


def _parse_embed(node, system: SystemModel, path) -> GoalTensor:
    node = _mapping(node, path)
    kind = node.get('kind')
    if kind not in EMBED_KINDS:
        raise ValidationError(f'unknown embedding {kind!r}, expected one of {EMBED_KINDS}', _at(path, 'kind'))
    age = EMBED_AGES.get(kind)
    env = system.env
    if age is not None and (env.mode != 'derived-age' or env.age != age):
        raise ValidationError(f'{kind} reads {age.upper()} from phi and needs a derived-age environment '
                              f'with age: {age}', _at(path, 'kind'))
    n_s = system.n_status
    cap = _int(node.get('cap', system.n_env - 1), _at(path, 'cap'), minimum=0)
    penalty = _parse_penalty(node.get('penalty'), _at(path, 'penalty'))
    if kind == 'aoi':
        return _wrap(embed_aoi, path, cap, n_s)
    if kind == 'voi':
        return _wrap(embed_voi, path, penalty, cap, n_s)
    if kind == 'aos':
        return _wrap(embed_aos, path, cap, n_s)
    if kind == 'mse':
        return _wrap(embed_mse, path, system.status.embedding, system.n_env)
    gap = _parse_gap(node.get('gap'), system, _at(path, 'gap'))
    if kind == 'aoii':
        return _wrap(embed_aoii, path, penalty, gap, cap)
    return _wrap(embed_uoi, path, _parse_weights(node.get('weights'), system, _at(path, 'weights')), gap)


def _parse_cost_model(node, system: SystemModel, path) -> typing.Tuple[CostModel, str]:
    node = _mapping(node, path)
    for key in ('c1', 'c2', 'c3'):
        if key not in node:
            raise ValidationError('missing cost table', _at(path, key))
    formula = node.get('formula', 'intent')
    if formula not in STEP5_FORMULAS:
        raise ValidationError(f'unknown formula {formula!r}, expected one of {STEP5_FORMULAS}', _at(path, 'formula'))
    c1 = _array(node['c1'], _at(path, 'c1'))
    if c1.ndim == 1:
        c1 = c1[:, None]
    c2 = _array(node['c2'], _at(path, 'c2'))
    if c2.ndim == 2:
        c2 = c2[:, None, :]
    c3 = _array(node['c3'], _at(path, 'c3'), ndim=1)
    cm = _wrap(CostModel, path, c1, c2, c3, system.delta)
    if cm.n_decisions != system.source.n_decisions:
        raise ValidationError(f'{cm.n_decisions} decision costs for {system.source.n_decisions} kernels',
                              _at(path, 'c3'))
    return cm, formula


def _parse_policies(node, default_lam, base_dir, path='policies') -> typing.Tuple[PolicySpec, ...]:
    if not isinstance(node, list) or not node:
        raise ValidationError('expected a non-empty list of policies', path)
    specs, names = [], set()
    for i, item in enumerate(node):
        ipath = f'{path}[{i}]'
        item = _mapping(item, ipath)
        kind = item.get('kind')
        if kind not in POLICY_KINDS:
            raise ValidationError(f'unknown kind {kind!r}, expected one of {tuple(POLICY_KINDS)}', _at(ipath, 'kind'))
        name = str(item.get('name', POLICY_KINDS[kind].title))
        if name in names:
            raise ValidationError(f'duplicate policy name {name!r}', _at(ipath, 'name'))
        names.add(name)
        period = threshold = None
        if kind == 'uniform':
            period = _int(item.get('period', 1), _at(ipath, 'period'), minimum=1)
        if kind == 'age_aware':
            threshold = _int(item.get('threshold', 1), _at(ipath, 'threshold'), minimum=1)
        lam = _float(item.get('lambda', default_lam), _at(ipath, 'lambda'), minimum=0.0)
        solution = item.get('solution')
        if solution is not None:
            if kind not in ('optimal_mmse', 'optimal_got'):
                raise ValidationError(f'{kind} policies have no solution to load', _at(ipath, 'solution'))
            solution = os.path.join(base_dir, solution)
            if not os.path.isfile(solution):
                raise ValidationError(f'file not found: {solution}', _at(ipath, 'solution'))
        specs.append(PolicySpec(kind, name, lam, period, threshold, solution))
    return tuple(specs)


def parse_config(data, base_dir: str = '.', source: typing.Optional[str] = None) -> ExperimentConfig:
    """Validate a loaded YAML document; relative file references resolve against ``base_dir``."""
    data = _mapping(data, '')
    system = parse_system(data.get('system'))

    tensor_node = _mapping(data.get('tensor'), 'tensor')
    given = [key for key in TENSOR_SOURCES if key in tensor_node]
    if len(given) != 1:
        raise ValidationError(f'expected exactly one of {", ".join(TENSOR_SOURCES)}, got {len(given)}', 'tensor')
    cost_model = None
    embed_node = {}
    if given[0] == 'cost_model':
        cost_model, formula = _parse_cost_model(tensor_node['cost_model'], system, 'tensor.cost_model')
        tensor = _wrap(build_got, 'tensor.cost_model', cost_model, formula)
    elif given[0] == 'embed':
        embed_node = tensor_node['embed'] if isinstance(tensor_node['embed'], dict) else {}
        tensor = _parse_embed(tensor_node['embed'], system, 'tensor.embed')
    else:
        file = os.path.join(base_dir, str(tensor_node['file']))
        if not os.path.isfile(file):
            raise ValidationError(f'file not found: {file}', 'tensor.file')
        tensor = load_tensor(file)
    _wrap(system.check_tensor, 'tensor', tensor)

    metrics = _mapping(data.get('metrics'), 'metrics', required=False)
    penalty = _parse_penalty(metrics.get('penalty', embed_node.get('penalty')), 'metrics.penalty')
    gap = _parse_gap(metrics.get('gap', embed_node.get('gap')), system, 'metrics.gap')
    weights_node = metrics.get('weights', embed_node.get('weights'))
    weights = None if weights_node is None else _parse_weights(weights_node, system, 'metrics.weights')

    lam = _float(data.get('lambda', DEFAULT_LAMBDA), 'lambda', minimum=0.0)
    solver_node = _mapping(data.get('solver'), 'solver', required=False)
    solver = _wrap(
        RviConfig, 'solver',
        span_tol=_float(solver_node.get('span_tol', 1e-9), 'solver.span_tol'),
        max_iter=_int(solver_node.get('max_iter', 10 ** 6), 'solver.max_iter', minimum=1),
        reference_state=_int(solver_node.get('reference_state', 0), 'solver.reference_state', minimum=0),
        aperiodicity=_float(solver_node.get('aperiodicity', 0.0), 'solver.aperiodicity'),
    )

    cfg = ExperimentConfig(
        name=str(data.get('name', 'experiment')),
        system=system,
        tensor=tensor,
        policies=_parse_policies(data.get('policies'), lam, base_dir),
        lam=lam,
        horizon=_int(data.get('horizon', DEFAULT_HORIZON), 'horizon', minimum=1),
        replications=_int(data.get('replications', DEFAULT_REPLICATIONS), 'replications', minimum=1),
        seed=_int(data.get('seed', DEFAULT_SEED), 'seed', minimum=0),
        output=str(data.get('output', DEFAULT_OUTPUT)),
        tolerance=_float(data.get('tolerance', DEFAULT_TOLERANCE), 'tolerance', minimum=0.0),
        solver=solver,
        cost_model=cost_model,
        penalty=penalty,
        gap=gap,
        weights=weights,
        source=source,
    )
    log.debug(f'Validated config {cfg.name!r}: |S|={system.n_status}, |V|={system.n_env}, '
              f'{len(cfg.policies)} policies')
    return cfg


def validate_config(path: str) -> ExperimentConfig:
    """Read and validate an experiment config file."""
    if not os.path.isfile(path):
        raise ValidationError(f'file not found: {path}')
    try:
        with open(path, encoding='utf-8') as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ValidationError(f'cannot parse YAML: {e}', path) from None
    return parse_config(data, os.path.dirname(os.path.abspath(path)), source=path)
