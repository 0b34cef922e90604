# -*- coding: utf-8 -*-

"""
    gotkit.core.mdp
    ~~~~~~~~~~~~~~~

    Average-cost sampling MDPs: compilation from a system and a GoT,
    relative value iteration, exact policy evaluation and an exhaustive
    optimality oracle for small models.
"""

from __future__ import annotations

import itertools
import logging
import typing
from dataclasses import dataclass

import numpy as np

from ..exceptions import ConvergenceError, NonFiniteError, StateSpaceTooLarge, ValidationError
from .markov import check_stochastic, stationary_distribution
from .system import IDLE, SAMPLE, SystemModel
from .tensor import GoalTensor

log = logging.getLogger(__name__)

N_ACTIONS = 2
BRUTE_FORCE_MAX_STATES = 20


@dataclass(frozen=True)
class StateCodec:
    """Maps ``(x, x_hat_prev, phi)`` to ``x + |S| * (x_hat_prev + |S| * phi)`` and back."""
    n_status: int
    n_env: int = 1

    @property
    def n_states(self) -> int:
        return self.n_status * self.n_status * self.n_env

    def encode(self, x: int, x_hat: int, phi: int = 0) -> int:
        return x + self.n_status * (x_hat + self.n_status * phi)

    def decode(self, s: int) -> typing.Tuple[int, int, int]:
        s, x = divmod(int(s), self.n_status)
        phi, x_hat = divmod(s, self.n_status)
        return x, x_hat, phi


@dataclass(frozen=True, eq=False)
class MdpModel:
    """
        Finite average-cost MDP with two actions (idle, sample).

        :param P:
            Array ``(2, n, n)``; ``P[a]`` is row-stochastic.
        :param c:
            Array ``(n, 2)`` of finite per-stage costs.
        :param codec:
            Optional decoding of state indices into ``(x, x_hat_prev, phi)``.
        :param initial_state:
            State from which policies are evaluated.
    """
    P: np.ndarray
    c: np.ndarray
    codec: typing.Optional[StateCodec] = None
    initial_state: int = 0

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        c = np.array(self.c, dtype=float)
        if P.ndim != 3 or P.shape[0] != N_ACTIONS or P.shape[1] != P.shape[2]:
            raise ValidationError(f'expected transitions of shape (2, n, n), got {P.shape}', 'P')
        n = P.shape[1]
        if c.shape != (n, N_ACTIONS):
            raise ValidationError(f'expected costs of shape ({n}, 2), got {c.shape}', 'c')
        if not np.all(np.isfinite(c)):
            raise NonFiniteError('MDP costs must be finite')
        for a in range(N_ACTIONS):
            check_stochastic(P[a], name=f'P[{a}]')
        if self.codec is not None and self.codec.n_states != n:
            raise ValidationError(f'codec describes {self.codec.n_states} states, model has {n}', 'codec')
        if not 0 <= self.initial_state < n:
            raise ValidationError(f'initial state {self.initial_state} out of range [0, {n})', 'initial_state')
        P.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, 'P', P)
        object.__setattr__(self, 'c', c)

    @property
    def n_states(self) -> int:
        return self.P.shape[1]

    @property
    def n_actions(self) -> int:
        return N_ACTIONS

    def describe(self, s: int):
        return self.codec.decode(s) if self.codec is not None else int(s)


@dataclass(frozen=True)
class RviConfig:
    """
        Relative value iteration settings.

        ``aperiodicity`` mixes each transition matrix with the identity,
        ``tau * I + (1 - tau) * P``, which leaves gains and optimal policies
        unchanged and makes iteration converge on periodic models.
    """
    span_tol: float = 1e-9
    max_iter: int = 10 ** 6
    reference_state: int = 0
    aperiodicity: float = 0.0

    def __post_init__(self):
        if not self.span_tol > 0:
            raise ValidationError(f'span_tol must be positive, got {self.span_tol}', 'span_tol')
        if int(self.max_iter) < 1:
            raise ValidationError(f'max_iter must be positive, got {self.max_iter}', 'max_iter')
        if not 0.0 <= self.aperiodicity < 1.0:
            raise ValidationError(f'aperiodicity must lie in [0, 1), got {self.aperiodicity}', 'aperiodicity')


@dataclass(frozen=True, eq=False)
class MdpSolution:
    gain: float
    bias: np.ndarray
    policy: np.ndarray
    iterations: int = 0
    span: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'bias', np.asarray(self.bias, dtype=float))
        object.__setattr__(self, 'policy', np.asarray(self.policy, dtype=np.int64))
        if self.bias.shape != self.policy.shape:
            raise ValidationError(f'bias has {self.bias.size} entries but policy has {self.policy.size}', 'policy')
        if np.any((self.policy != IDLE) & (self.policy != SAMPLE)):
            raise ValidationError('policy actions must be 0 (idle) or 1 (sample)', 'policy')

    @property
    def n_states(self) -> int:
        return self.policy.size

    def action(self, s: int) -> int:
        return int(self.policy[s])


def _add_transitions(row, system: SystemModel, codec: StateCodec, x, x_hat, phi_eff, weight):
    kernel = system.source.kernels[system.delta[x_hat]]
    for x_next in range(system.n_status):
        p = kernel[x, x_next]
        if p <= 0:
            continue
        for phi_next, q in system.env.transitions(x_next, x_hat, phi_eff):
            row[codec.encode(x_next, x_hat, phi_next)] += weight * p * q


def compile_sampling_mdp(system: SystemModel, tensor: GoalTensor,
                         delta: typing.Optional[typing.Sequence[int]] = None,
                         lam: float = 0.0) -> MdpModel:
    """
        Compile the sampling problem into an MDP over ``(x, x_hat_prev, phi)``.

        Idle costs ``T[x, x_hat_prev, phi]`` and keeps the estimate. Sample
        costs ``lam + (1 - eps) T[x, x, phi] + eps T[x, x_hat_prev, phi]`` and
        moves the estimate to ``x`` with probability ``1 - eps``. The source
        then moves under the decision taken on the resulting estimate.
        In derived-age environments ``phi`` in the delivered branch is the
        post-delivery age.

        :param delta:
            Decision map overriding ``system.delta``.
    """
    if delta is not None:
        system = SystemModel(system.source, tuple(delta), system.channel, system.env, system.status)
    system.check_tensor(tensor)
    if not (np.isfinite(lam) and lam >= 0):
        raise ValidationError(f'lambda must be nonnegative, got {lam}', 'lambda')

    codec = StateCodec(system.n_status, system.n_env)
    n = codec.n_states
    eps = system.epsilon
    T = tensor.values
    env = system.env
    P = np.zeros((N_ACTIONS, n, n))
    c = np.zeros((n, N_ACTIONS))
    for s in range(n):
        x, x_hat, phi = codec.decode(s)
        phi_idle = env.post_delivery(x, x_hat, phi, False)
        c[s, IDLE] = T[x, x_hat, phi_idle]
        _add_transitions(P[IDLE, s], system, codec, x, x_hat, phi_idle, 1.0)

        phi_hit = env.post_delivery(x, x, phi, True)
        if x == x_hat and phi_hit == phi_idle:
            # a delivery changes nothing
            c[s, SAMPLE] = lam + c[s, IDLE]
            P[SAMPLE, s] = P[IDLE, s]
            continue
        c[s, SAMPLE] = lam + (1.0 - eps) * T[x, x, phi_hit] + eps * T[x, x_hat, phi_idle]
        if eps < 1.0:
            _add_transitions(P[SAMPLE, s], system, codec, x, x, phi_hit, 1.0 - eps)
        if eps > 0.0:
            _add_transitions(P[SAMPLE, s], system, codec, x, x_hat, phi_idle, eps)

    log.debug(f'Compiled sampling MDP with {n} states (eps={eps:g}, lambda={lam:g})')
    return MdpModel(P, c, codec, codec.encode(0, 0, 0))


def rvi_solve(model: MdpModel, cfg: RviConfig = RviConfig()) -> MdpSolution:
    """
        Relative value iteration.

        ``h <- min_a [c(., a) + P_a h] - (same at the reference state)`` until
        the span of successive differences is at most ``span_tol``. The greedy
        policy prefers idle on exact ties.
    """
    n = model.n_states
    ref = int(cfg.reference_state)
    if not 0 <= ref < n:
        raise ValidationError(f'reference state {ref} out of range [0, {n})', 'reference_state')
    tau = float(cfg.aperiodicity)
    P = model.P
    if tau > 0:
        P = tau * np.eye(n)[None, :, :] + (1.0 - tau) * P
    c = model.c

    h = np.zeros(n)
    span = np.inf
    for iteration in range(1, int(cfg.max_iter) + 1):
        Q = c + (P @ h).T
        Th = Q.min(axis=1)
        diff = Th - h
        lo, hi = diff.min(), diff.max()
        span = hi - lo
        h = Th - Th[ref]
        if span <= cfg.span_tol:
            break
    else:
        raise ConvergenceError(int(cfg.max_iter), float(span))

    gain = 0.5 * (lo + hi)
    Q = c + (P @ h).T
    policy = np.where(Q[:, SAMPLE] < Q[:, IDLE], SAMPLE, IDLE)
    log.debug(f'RVI converged in {iteration} iterations: gain {gain:.12g}, span {span:.3e}')
    return MdpSolution(float(gain), (1.0 - tau) * h, policy, iteration, float(span))


def _check_policy(model: MdpModel, policy) -> np.ndarray:
    policy = np.asarray(policy, dtype=np.int64)
    if policy.shape != (model.n_states,):
        raise ValidationError(f'expected {model.n_states} actions, got shape {policy.shape}', 'policy')
    if np.any((policy != IDLE) & (policy != SAMPLE)):
        raise ValidationError('policy actions must be 0 (idle) or 1 (sample)', 'policy')
    return policy


def policy_evaluate(model: MdpModel, policy) -> typing.Tuple[float, np.ndarray]:
    """
        Exact gain of a deterministic stationary policy from ``model.initial_state``.

        :returns:
            ``(gain, distribution)``; the distribution covers all states and is
            zero outside those reachable from the initial state.
    """
    policy = _check_policy(model, policy)
    rows = np.arange(model.n_states)
    P_pi = model.P[policy, rows]
    c_pi = model.c[rows, policy]
    pi = stationary_distribution(P_pi, start=model.initial_state, strict=True, describe=model.describe)
    return float(pi @ c_pi), pi


def brute_force_optimal(model: MdpModel,
                        max_states: int = BRUTE_FORCE_MAX_STATES) -> typing.Tuple[float, np.ndarray]:
    """
        Evaluate every deterministic stationary policy and keep the cheapest.

        Policies are visited in lexicographic order of their action vectors and
        only a strictly smaller gain replaces the incumbent, so ties go to the
        lexicographically smallest vector. Policies whose chain splits into
        several recurrent classes are scored by the long-run average from the
        initial state.
    """
    n = model.n_states
    if n > max_states:
        raise StateSpaceTooLarge(f'{n} states means 2^{n} policies; the limit is 2^{max_states}', 'n_states')
    rows = np.arange(n)
    best_gain, best_policy = np.inf, None
    for actions in itertools.product((IDLE, SAMPLE), repeat=n):
        policy = np.asarray(actions, dtype=np.int64)
        pi = stationary_distribution(model.P[policy, rows], start=model.initial_state, strict=False)
        gain = float(pi @ model.c[rows, policy])
        if best_policy is None or gain < best_gain - 1e-12 * max(1.0, abs(best_gain)):
            best_gain, best_policy = gain, policy
    log.debug(f'Brute force over {2 ** n} policies: gain {best_gain:.12g}')
    return best_gain, best_policy
