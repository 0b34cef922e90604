from __future__ import annotations

import logging
import os
import typing

from ..core.formats import write_csv
from ..core.system import exact_average
from .config import ExperimentConfig

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ('lambda', 'exact_loss', 'exact_tensor_loss', 'exact_rate')
DEFAULT_LAMBDAS = (0.0, 0.5, 1.0, 2.0, 5.0)


def run_sweep(cfg: ExperimentConfig, name: str,
              lambdas: typing.Sequence[float] = DEFAULT_LAMBDAS) -> typing.List[typing.Tuple[float, float, float, float]]:
    """Exact loss and sample rate of one policy rebuilt at each sampling price."""
    spec = cfg.policy(name)
    rows = []
    for lam in lambdas:
        policy = cfg.build_policy(spec, lam=float(lam))
        exact = exact_average(cfg.system, cfg.tensor, policy, float(lam))
        log.debug(f'{spec.name} at lambda={lam:g}: loss {exact.average_cost:.10g}, rate {exact.sample_rate:.6g}')
        rows.append((float(lam), exact.average_cost, exact.tensor_cost, exact.sample_rate))
    return rows


def sweep(cfg: ExperimentConfig, name: str, lambdas: typing.Sequence[float] = DEFAULT_LAMBDAS) -> str:
    spec = cfg.policy(name)
    rows = run_sweep(cfg, name, lambdas)
    os.makedirs(cfg.output, exist_ok=True)
    path = os.path.join(cfg.output, f'sweep-{spec.slug}.csv')
    log.info(f'Writing: {path}')
    with open(path, 'w', encoding='utf-8', newline='') as f:
        write_csv(f, SWEEP_COLUMNS, rows)
    return path
