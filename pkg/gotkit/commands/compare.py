from __future__ import annotations

import logging
import os
import typing
from dataclasses import dataclass

import numpy as np

from ..core.formats import dump_yaml, write_csv
from ..core.system import exact_average, simulate_replications
from .config import ExperimentConfig

log = logging.getLogger(__name__)

CONFIDENCE_Z = 1.96
AGREEMENT_SE = 3.0

REPORT_COLUMNS = (
    'policy', 'kind', 'lambda',
    'exact_loss', 'exact_tensor_loss', 'exact_rate',
    'mc_loss_mean', 'mc_loss_ci', 'mc_tensor_loss_mean', 'mc_tensor_loss_ci',
    'mc_rate_mean', 'mc_rate_ci', 'mc_fires_mean', 'mc_fires_ci',
)


@dataclass(frozen=True)
class Estimate:
    """Mean over replications and its standard error."""
    mean: float
    se: float

    @classmethod
    def from_samples(cls, values) -> 'Estimate':
        values = np.asarray(values, dtype=float)
        se = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
        return cls(float(values.mean()), se)

    @property
    def half_width(self) -> float:
        return CONFIDENCE_Z * self.se

    def covers(self, value: float, n_se: float = AGREEMENT_SE) -> bool:
        """True when ``value`` lies within ``n_se`` standard errors (plus rounding slack)."""
        slack = 1e-9 * max(1.0, abs(value))
        return abs(self.mean - value) <= n_se * self.se + slack


@dataclass(frozen=True)
class PolicyRow:
    name: str
    kind: str
    lam: float
    exact_loss: float
    exact_tensor_loss: float
    exact_rate: float
    loss: Estimate
    tensor_loss: Estimate
    rate: Estimate
    fires: Estimate

    def agrees(self, n_se: float = AGREEMENT_SE) -> bool:
        return self.loss.covers(self.exact_loss, n_se) and self.rate.covers(self.exact_rate, n_se)

    def values(self) -> list:
        return [
            self.name, self.kind, self.lam,
            self.exact_loss, self.exact_tensor_loss, self.exact_rate,
            self.loss.mean, self.loss.half_width, self.tensor_loss.mean, self.tensor_loss.half_width,
            self.rate.mean, self.rate.half_width, self.fires.mean, self.fires.half_width,
        ]


@dataclass(frozen=True)
class ComparisonReport:
    name: str
    seed: int
    horizon: int
    replications: int
    rows: typing.Tuple[PolicyRow, ...]

    def to_dict(self) -> dict:
        return {
            'name': self.name,
            'seed': self.seed,
            'horizon': self.horizon,
            'replications': self.replications,
            'policies': [dict(zip(REPORT_COLUMNS, row.values())) for row in self.rows],
        }

    def row(self, name: str) -> PolicyRow:
        for row in self.rows:
            if row.name == name or row.kind == name:
                return row
        raise KeyError(name)


def run_compare(cfg: ExperimentConfig, workers: typing.Optional[int] = None) -> ComparisonReport:
    """
        Exact and Monte-Carlo evaluation of every configured policy.

        Rows follow the config order. The Monte-Carlo columns depend on the
        master seed, the exact ones do not.
    """
    rows = []
    for spec in cfg.policies:
        policy = cfg.build_policy(spec)
        exact = exact_average(cfg.system, cfg.tensor, policy, spec.lam)
        runs = simulate_replications(cfg.system, cfg.tensor, policy, cfg.horizon, cfg.replications,
                                     cfg.seed, spec.lam, workers)
        row = PolicyRow(
            name=spec.name,
            kind=spec.kind,
            lam=spec.lam,
            exact_loss=exact.average_cost,
            exact_tensor_loss=exact.tensor_cost,
            exact_rate=exact.sample_rate,
            loss=Estimate.from_samples([r.average_cost for r in runs]),
            tensor_loss=Estimate.from_samples([r.tensor_cost for r in runs]),
            rate=Estimate.from_samples([r.sample_rate for r in runs]),
            fires=Estimate.from_samples([r.fire_occurrences for r in runs]),
        )
        log.info(f'{spec.name}: exact loss {row.exact_loss:.6g}, rate {row.exact_rate:.4g}; '
                 f'simulated {row.loss.mean:.6g} ± {row.loss.half_width:.2g}')
        if not row.agrees():
            log.warning(f'{spec.name}: simulated loss or rate is more than {AGREEMENT_SE:g} SE from the exact value')
        rows.append(row)
    return ComparisonReport(cfg.name, cfg.seed, cfg.horizon, cfg.replications, tuple(rows))


def write_report(report: ComparisonReport, out_dir: str) -> typing.Tuple[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, 'compare.csv')
    yaml_path = os.path.join(out_dir, 'compare.yaml')
    log.info(f'Writing: {csv_path}')
    with open(csv_path, 'w', encoding='utf-8', newline='') as f:
        write_csv(f, REPORT_COLUMNS, (row.values() for row in report.rows))
    log.info(f'Writing: {yaml_path}')
    with open(yaml_path, 'w', encoding='utf-8') as f:
        dump_yaml(report.to_dict(), f)
    return csv_path, yaml_path


def compare(cfg: ExperimentConfig, workers: typing.Optional[int] = None) -> ComparisonReport:
    report = run_compare(cfg, workers)
    write_report(report, cfg.output)
    return report
