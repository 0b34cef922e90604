from __future__ import annotations

import logging
import os
import typing

from ..core.formats import write_timeseries
from ..core.metrics import evaluate_all
from ..core.system import SimConfig, SimResult, derive_seed, simulate
from .config import ExperimentConfig

log = logging.getLogger(__name__)


def run_timeseries(cfg: ExperimentConfig, name: str, stream: typing.TextIO,
                   horizon: typing.Optional[int] = None, metrics: bool = False) -> SimResult:
    """
        Simulate one policy and write its per-slot CSV to ``stream``.

        The run uses the seed of the first ``compare`` replication, so its
        trajectory is the one replication 0 averages over.
    """
    spec = cfg.policy(name)
    policy = cfg.build_policy(spec)
    seed = derive_seed(cfg.seed, 0)
    result = simulate(cfg.system, cfg.tensor, policy, SimConfig(horizon or cfg.horizon, seed, spec.lam))
    extra = None
    if metrics:
        extra = evaluate_all(result.trajectory, cfg.penalty, cfg.gap, cfg.weights)
    write_timeseries(stream, result.trajectory, extra)
    return result


def timeseries(cfg: ExperimentConfig, name: str, horizon: typing.Optional[int] = None,
               metrics: bool = False) -> str:
    spec = cfg.policy(name)
    os.makedirs(cfg.output, exist_ok=True)
    path = os.path.join(cfg.output, f'timeseries-{spec.slug}.csv')
    log.info(f'Writing: {path}')
    with open(path, 'w', encoding='utf-8', newline='') as f:
        run_timeseries(cfg, name, f, horizon, metrics)
    return path
