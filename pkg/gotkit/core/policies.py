# -*- coding: utf-8 -*-

"""
    gotkit.core.policies
    ~~~~~~~~~~~~~~~~~~~~

    The six sampling policies behind one decision interface.

    A policy object is immutable; the little memory a rule needs between
    slots lives in a :class:`PolicyState` owned by the run.
"""

from __future__ import annotations

import dataclasses
import logging
import typing
from dataclasses import dataclass

from ..exceptions import ValidationError
from .mdp import MdpSolution, RviConfig, StateCodec, compile_sampling_mdp, rvi_solve
from .system import IDLE, SAMPLE, Observation, SystemModel
from .tensor import GoalTensor, embed_mse

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PolicyState:
    """
        :param slots_since_sample:
            None before the first sample, otherwise slots elapsed since the last
            sampling slot.
        :param previous_source_status:
            Source status seen in the previous slot.
    """
    slots_since_sample: typing.Optional[int] = None
    previous_source_status: typing.Optional[int] = None

    def __post_init__(self):
        if self.slots_since_sample is not None and self.slots_since_sample < 0:
            raise ValidationError(f'counter must be nonnegative, got {self.slots_since_sample}',
                                  'slots_since_sample')


EMPTY_STATE = PolicyState()


class _Policy:
    kind: typing.ClassVar[str] = ''
    title: typing.ClassVar[str] = ''
    age_cap: typing.ClassVar[int] = 0

    def initial_state(self) -> PolicyState:
        return EMPTY_STATE

    def decide(self, state: PolicyState, obs: Observation) -> int:
        raise NotImplementedError

    def advance(self, state: PolicyState, obs: Observation, action: int, delivered: bool) -> PolicyState:
        return state

    def canonical(self, state: PolicyState) -> PolicyState:
        """Smallest state that makes the same future decisions."""
        return EMPTY_STATE

    @property
    def compiled(self) -> bool:
        return True


@dataclass(frozen=True)
class Uniform(_Policy):
    """Samples every ``period`` slots, starting at slot 0."""
    period: int = 1

    kind = 'uniform'
    title = 'Uniform'

    def __post_init__(self):
        if int(self.period) < 1:
            raise ValidationError(f'period must be at least 1, got {self.period}', 'period')

    def decide(self, state, obs):
        since = state.slots_since_sample
        return SAMPLE if since is None or since >= self.period else IDLE

    def advance(self, state, obs, action, delivered):
        since = 1 if action == SAMPLE else (state.slots_since_sample or 0) + 1
        return PolicyState(slots_since_sample=since)

    def canonical(self, state):
        since = state.slots_since_sample
        if since is None:
            return state
        return PolicyState(slots_since_sample=min(since, int(self.period)))


@dataclass(frozen=True)
class AgeAware(_Policy):
    """Samples once the observed AoI reaches ``threshold``."""
    threshold: int = 1

    kind = 'age_aware'
    title = 'Age-aware'

    def __post_init__(self):
        if int(self.threshold) < 1:
            raise ValidationError(f'threshold must be at least 1, got {self.threshold}', 'threshold')

    @property
    def age_cap(self) -> int:
        return int(self.threshold)

    def decide(self, state, obs):
        return SAMPLE if obs.aoi >= self.threshold else IDLE


@dataclass(frozen=True)
class ChangeAware(_Policy):
    """Samples at slot 0 and whenever the source status differs from the previous slot's."""

    kind = 'change_aware'
    title = 'Change-aware'

    def decide(self, state, obs):
        previous = state.previous_source_status
        return SAMPLE if previous is None or obs.x != previous else IDLE

    def advance(self, state, obs, action, delivered):
        return PolicyState(previous_source_status=obs.x)

    def canonical(self, state):
        return state


@dataclass(frozen=True)
class OptimalAoII(_Policy):
    """Samples whenever the source and the estimate disagree."""

    kind = 'optimal_aoii'
    title = 'Optimal AoII'

    def decide(self, state, obs):
        return SAMPLE if obs.x != obs.x_hat_prev else IDLE


@dataclass(frozen=True)
class _Compiled(_Policy):
    """Looks the action up in a solved sampling MDP."""
    solution: typing.Optional[MdpSolution] = None
    codec: typing.Optional[StateCodec] = None

    @property
    def compiled(self) -> bool:
        return self.solution is not None and self.codec is not None

    def decide(self, state, obs):
        if not self.compiled:
            raise ValidationError(f'{self.title} policy has no compiled solution; build it with make_policy',
                                  'solution')
        return self.solution.action(self.codec.encode(obs.x, obs.x_hat_prev, obs.phi))


@dataclass(frozen=True)
class OptimalMMSE(_Compiled):
    kind = 'optimal_mmse'
    title = 'Optimal MMSE'


@dataclass(frozen=True)
class OptimalGoT(_Compiled):
    kind = 'optimal_got'
    title = 'Optimal GoT'


PolicyKind = typing.Union[Uniform, AgeAware, ChangeAware, OptimalMMSE, OptimalAoII, OptimalGoT]

POLICY_KINDS: typing.Dict[str, typing.Type[_Policy]] = {
    cls.kind: cls for cls in (Uniform, AgeAware, ChangeAware, OptimalMMSE, OptimalAoII, OptimalGoT)
}


def decide(kind: PolicyKind, state: PolicyState, obs: Observation) -> int:
    return kind.decide(state, obs)


def policy_tensor(kind: PolicyKind, system: SystemModel, tensor: GoalTensor) -> GoalTensor:
    """Tensor an optimal policy is solved against: the MSE embedding or the scenario GoT."""
    if isinstance(kind, OptimalMMSE):
        return embed_mse(system.status.embedding, system.n_env)
    return tensor


def make_policy(kind: PolicyKind, system: SystemModel, tensor: GoalTensor, lam: float = 0.0,
                rvi: RviConfig = RviConfig(), solution: typing.Optional[MdpSolution] = None) -> PolicyKind:
    """
        Make a policy ready to run.

        Rule-based kinds are returned unchanged. Optimal MMSE and Optimal GoT
        are compiled into a sampling MDP and solved by relative value
        iteration, unless a cached ``solution`` is supplied.
    """
    if not isinstance(kind, _Compiled):
        return kind
    codec = StateCodec(system.n_status, system.n_env)
    if solution is None:
        model = compile_sampling_mdp(system, policy_tensor(kind, system, tensor), lam=lam)
        solution = rvi_solve(model, rvi)
        log.debug(f'{kind.title}: gain {solution.gain:.10g} after {solution.iterations} iterations')
    elif solution.n_states != codec.n_states:
        raise ValidationError(f'cached solution covers {solution.n_states} states, the system has {codec.n_states}',
                              'solution')
    return dataclasses.replace(kind, solution=solution, codec=codec)
