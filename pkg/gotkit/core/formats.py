# -*- coding: utf-8 -*-

"""
    gotkit.core.formats
    ~~~~~~~~~~~~~~~~~~~

    File formats. Sequences are CSV, everything else is YAML. Floats are
    written with 17 significant digits so that a file read back gives the
    same numbers.
"""

from __future__ import annotations

import csv
import logging
import math
import typing

import numpy as np
import yaml

from ..exceptions import ValidationError
from .mdp import MdpSolution
from .metrics import Trajectory
from .tensor import GoalTensor, StructureReport, Step5Difference

log = logging.getLogger(__name__)

TIMESERIES_COLUMNS = ('t', 'x', 'x_hat', 'instant_cost', 'sampled', 'delivered', 'cum_avg_cost')


def format_float(value: float) -> str:
    return f'{float(value):.17g}'


def _yaml_float(value: float) -> str:
    if math.isnan(value):
        return '.nan'
    if math.isinf(value):
        return '.inf' if value > 0 else '-.inf'
    text = format_float(value)
    mantissa, _, exponent = text.partition('e')
    if '.' not in mantissa:
        mantissa += '.0'
    return f'{mantissa}e{exponent}' if exponent else mantissa


class Dumper(yaml.SafeDumper):
    """Safe dumper writing floats at full precision and keeping key order."""


def _represent_float(dumper, value):
    return dumper.represent_scalar('tag:yaml.org,2002:float', _yaml_float(value))


Dumper.add_representer(float, _represent_float)


def _plain(value):
    """Turn numpy containers and scalars into plain Python values."""
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def dump_yaml(data, stream=None):
    """Serialize ``data``; returns the text when no stream is given."""
    return yaml.dump(_plain(data), stream, Dumper=Dumper, sort_keys=False, default_flow_style=None,
                     allow_unicode=True)


def load_yaml(path: str):
    with open(path, encoding='utf-8') as f:
        return yaml.safe_load(f)


# Tensors

def tensor_to_dict(T: GoalTensor) -> dict:
    return {'dims': list(T.dims), 'values': T.flat()}


def tensor_from_dict(data, path: str = 'tensor') -> GoalTensor:
    if not isinstance(data, dict) or 'dims' not in data or 'values' not in data:
        raise ValidationError('expected a mapping with dims and values', path)
    try:
        return GoalTensor.from_flat(data['dims'], data['values'])
    except ValidationError as e:
        raise ValidationError(e.message, f'{path}.{e.path}' if e.path else path) from None
    except (TypeError, ValueError) as e:
        raise ValidationError(str(e), path) from None


def dump_tensor(T: GoalTensor, path: str) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        dump_yaml(tensor_to_dict(T), f)
    log.info(f'Writing: {path}')


def load_tensor(path: str) -> GoalTensor:
    return tensor_from_dict(load_yaml(path), path)


# Solutions

def solution_to_dict(sol: MdpSolution) -> dict:
    return {
        'gain': sol.gain,
        'iterations': sol.iterations,
        'span': sol.span,
        'policy': sol.policy,
        'bias': sol.bias,
    }


def solution_from_dict(data, path: str = 'solution') -> MdpSolution:
    if not isinstance(data, dict):
        raise ValidationError('expected a mapping', path)
    missing = [k for k in ('gain', 'bias', 'policy') if k not in data]
    if missing:
        raise ValidationError(f'missing keys: {", ".join(missing)}', path)
    try:
        return MdpSolution(
            gain=float(data['gain']),
            bias=np.asarray(data['bias'], dtype=float),
            policy=np.asarray(data['policy'], dtype=np.int64),
            iterations=int(data.get('iterations', 0)),
            span=float(data.get('span', 0.0)),
        )
    except ValidationError as e:
        raise ValidationError(e.message, f'{path}.{e.path}' if e.path else path) from None
    except (TypeError, ValueError) as e:
        raise ValidationError(str(e), path) from None


def dump_solution(sol: MdpSolution, path: str) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        dump_yaml(solution_to_dict(sol), f)
    log.info(f'Writing: {path}')


def load_solution(path: str) -> MdpSolution:
    return solution_from_dict(load_yaml(path), path)


# Reports

def structure_report_to_dict(report: StructureReport, step5: typing.Optional[Step5Difference] = None) -> dict:
    out = {
        'diagonally_symmetric': report.diagonally_symmetric,
        'multiplicative': report.multiplicative,
        'content_independent': report.content_independent,
    }
    if report.multiplicative_env is not None:
        out['multiplicative_env'] = {
            'base_index': report.multiplicative_env.base_index,
            'base_slice': report.multiplicative_env.base_slice,
            'coefficients': report.multiplicative_env.coefficients,
        }
    if step5 is not None:
        out['step5'] = {
            'identical': step5.identical,
            'differing_entries': step5.differing_entries,
            'max_abs_difference': step5.max_abs_difference,
            'literal_negative_entries': step5.literal_negative_entries,
        }
    return out


# Sequences

def write_csv(stream, columns: typing.Sequence[str], rows: typing.Iterable[typing.Sequence]) -> None:
    """Write a header and rows; floats go out with :func:`format_float`."""
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])


def timeseries_rows(traj: Trajectory, metrics: typing.Optional[typing.Dict[str, np.ndarray]] = None):
    """
        Columns of the per-slot CSV.

        ``cum_avg_cost`` is the running mean of ``instant_cost``. Extra metric
        sequences are appended as columns in the order given.
    """
    metrics = metrics or {}
    columns = TIMESERIES_COLUMNS + tuple(metrics)
    cost = traj.cost
    cum_avg = np.cumsum(cost) / np.arange(1, len(traj) + 1)
    extra = [np.asarray(v).tolist() for v in metrics.values()]
    base = zip(traj.t.tolist(), traj.x.tolist(), traj.x_hat.tolist(), cost.tolist(),
               traj.sampled.astype(int).tolist(), traj.delivered.astype(int).tolist(), cum_avg.tolist())
    rows = (list(row) + [col[i] for col in extra] for i, row in enumerate(base))
    return columns, rows


def write_timeseries(stream, traj: Trajectory, metrics: typing.Optional[typing.Dict[str, np.ndarray]] = None) -> None:
    columns, rows = timeseries_rows(traj, metrics)
    write_csv(stream, columns, rows)
