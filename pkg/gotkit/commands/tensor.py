from __future__ import annotations

import logging

from ..core.formats import structure_report_to_dict, tensor_to_dict
from ..core.tensor import classify, step5_difference
from .config import ExperimentConfig

log = logging.getLogger(__name__)


def tensor_report(cfg: ExperimentConfig) -> dict:
    """
        Structure of the configured GoT.

        For tensors built from a cost model the report also compares the two
        readings of the cost combination rule.
    """
    report = classify(cfg.tensor, cfg.tolerance)
    step5 = step5_difference(cfg.cost_model) if cfg.cost_model is not None else None
    if step5 is not None and not step5.identical:
        log.info(f'Intent and literal cost combinations differ in {step5.differing_entries} entries '
                 f'(max {step5.max_abs_difference:g})')
    out = {'dims': list(cfg.tensor.dims)}
    out.update(structure_report_to_dict(report, step5))
    return out


def tensor_dump(cfg: ExperimentConfig) -> dict:
    return tensor_to_dict(cfg.tensor)
