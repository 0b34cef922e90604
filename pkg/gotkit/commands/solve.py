from __future__ import annotations

import logging
import os
import typing

from ..core.formats import dump_solution
from ..core.mdp import MdpSolution, compile_sampling_mdp, rvi_solve
from ..core.policies import POLICY_KINDS, policy_tensor
from ..exceptions import ValidationError
from .config import ExperimentConfig

log = logging.getLogger(__name__)

SOLVABLE_KINDS = ('optimal_mmse', 'optimal_got')


def run_solve(cfg: ExperimentConfig, name: str, lam: typing.Optional[float] = None) -> MdpSolution:
    """Compile and solve the sampling MDP behind an optimal policy."""
    spec = cfg.policy(name)
    if spec.kind not in SOLVABLE_KINDS:
        raise ValidationError(f'{spec.name} is a {POLICY_KINDS[spec.kind].title} policy; only '
                              f'{" and ".join(POLICY_KINDS[k].title for k in SOLVABLE_KINDS)} are solved', 'policy')
    tensor = policy_tensor(spec.build(), cfg.system, cfg.tensor)
    model = compile_sampling_mdp(cfg.system, tensor, lam=spec.lam if lam is None else lam)
    solution = rvi_solve(model, cfg.solver)
    log.info(f'{spec.name}: gain {solution.gain:.10g} after {solution.iterations} iterations '
             f'(span {solution.span:.3e})')
    return solution


def solve(cfg: ExperimentConfig, name: str) -> str:
    spec = cfg.policy(name)
    solution = run_solve(cfg, name)
    os.makedirs(cfg.output, exist_ok=True)
    path = os.path.join(cfg.output, f'{spec.slug}.solution.yaml')
    dump_solution(solution, path)
    return path
