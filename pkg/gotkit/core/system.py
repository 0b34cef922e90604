# -*- coding: utf-8 -*-

"""
    gotkit.core.system
    ~~~~~~~~~~~~~~~~~~

    Slotted simulation of a decision-controlled Markov source observed through
    an erasure channel.

    Every slot follows the same protocol:

    1. the sampler sees ``x(t)``, the previous estimate and ``phi(t)`` and
       decides to idle or to sample;
    2. a sample is delivered with probability ``1 - epsilon``; on delivery the
       estimate becomes ``x(t)``, otherwise it keeps its previous value;
    3. the actuator applies ``delta(x_hat(t))``;
    4. the slot costs ``T[x, x_hat, phi] + lambda * 1{sample}``;
    5. the source moves according to the kernel of the applied decision and
       the environment moves according to its model.

    Random numbers come from ``numpy.random.Generator(PCG64(seed))``; each slot
    consumes three uniforms (delivery, source, environment) whether or not it
    uses them, so a seed fixes the whole run.
"""

from __future__ import annotations

import bisect
import logging
import typing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ValidationError
from .markov import check_stochastic, stationary_distribution
from .metrics import SlotRecord, StatusSpace, Trajectory
from .tensor import DEFAULT_AGE_CAP, GoalTensor

log = logging.getLogger(__name__)

IDLE, SAMPLE = 0, 1
ACTION_NAMES = ('idle', 'sample')
ENV_MODES = ('constant', 'markov', 'derived-age')
AGE_KINDS = ('aos', 'aoi')

MASK64 = (1 << 64) - 1


class Observation(typing.NamedTuple):
    """
        What the sampler knows at the start of slot ``t``.

        ``aoi`` is the age the receiver would have without a delivery in this
        slot: 0 at ``t = 0`` and ``AoI(t - 1) + 1`` afterwards.
    """
    t: int
    x: int
    x_hat_prev: int
    phi: int
    aoi: int


class SamplingPolicy(typing.Protocol):
    age_cap: int

    def initial_state(self): ...

    def decide(self, state, obs: Observation) -> int: ...

    def advance(self, state, obs: Observation, action: int, delivered: bool): ...

    def canonical(self, state): ...


@dataclass(frozen=True, eq=False)
class SourceModel:
    """
        Controlled Markov source.

        :param kernels:
            Array ``(|D|, |S|, |S|)``; ``kernels[d]`` is the row-stochastic
            transition matrix applied under decision ``d``.
    """
    kernels: np.ndarray

    def __post_init__(self):
        kernels = np.array(self.kernels, dtype=float)
        if kernels.ndim != 3 or kernels.shape[1] != kernels.shape[2] or min(kernels.shape) < 1:
            raise ValidationError(f'expected shape (|D|, |S|, |S|), got {kernels.shape}', 'kernels')
        for d in range(kernels.shape[0]):
            check_stochastic(kernels[d], name=f'kernels[{d}]')
        kernels.setflags(write=False)
        object.__setattr__(self, 'kernels', kernels)

    @property
    def n_status(self) -> int:
        return self.kernels.shape[1]

    @property
    def n_decisions(self) -> int:
        return self.kernels.shape[0]


@dataclass(frozen=True, eq=False)
class EnvModel:
    """
        Dynamics of the environment status ``phi``.

        ``constant``: ``phi`` stays at 0 over a set of ``size`` statuses.
        ``markov``: ``phi`` follows the row-stochastic matrix ``q``.
        ``derived-age``: ``phi`` is an age truncated at ``cap``; ``age`` selects
        AoS (resets when the estimate matches the source) or AoI (resets on
        delivery).
    """
    mode: str = 'constant'
    size: int = 1
    q: typing.Optional[np.ndarray] = None
    cap: int = DEFAULT_AGE_CAP
    age: str = 'aos'

    def __post_init__(self):
        if self.mode not in ENV_MODES:
            raise ValidationError(f'unknown mode {self.mode!r}, expected one of {ENV_MODES}', 'mode')
        if self.mode == 'constant' and int(self.size) < 1:
            raise ValidationError(f'size must be at least 1, got {self.size}', 'size')
        if self.mode == 'markov':
            if self.q is None:
                raise ValidationError('markov mode needs a transition matrix', 'q')
            q = check_stochastic(self.q, name='q')
            q.setflags(write=False)
            object.__setattr__(self, 'q', q)
        if self.mode == 'derived-age':
            if int(self.cap) < 1:
                raise ValidationError(f'cap must be at least 1, got {self.cap}', 'cap')
            if self.age not in AGE_KINDS:
                raise ValidationError(f'unknown age {self.age!r}, expected one of {AGE_KINDS}', 'age')

    @property
    def n_env(self) -> int:
        if self.mode == 'markov':
            return self.q.shape[0]
        if self.mode == 'derived-age':
            return int(self.cap) + 1
        return int(self.size)

    def post_delivery(self, x: int, x_hat: int, phi: int, delivered: bool) -> int:
        """Environment index charged in the slot, once the delivery outcome is known."""
        if self.mode != 'derived-age':
            return phi
        if self.age == 'aos':
            return 0 if x == x_hat else phi
        return 0 if delivered else phi

    def transitions(self, x_next: int, x_hat: int, phi: int) -> typing.List[typing.Tuple[int, float]]:
        """Distribution of the next environment index as ``(phi_next, probability)`` pairs."""
        if self.mode == 'constant':
            return [(phi, 1.0)]
        if self.mode == 'markov':
            return [(j, float(p)) for j, p in enumerate(self.q[phi]) if p > 0]
        if self.age == 'aos' and x_next == x_hat:
            return [(0, 1.0)]
        return [(min(phi + 1, int(self.cap)), 1.0)]


@dataclass(frozen=True)
class ChannelModel:
    """Erasure channel: a sample is lost with probability ``epsilon``; feedback is perfect and immediate."""
    epsilon: float = 0.0

    def __post_init__(self):
        if not 0.0 <= float(self.epsilon) <= 1.0:
            raise ValidationError(f'epsilon must lie in [0, 1], got {self.epsilon}', 'epsilon')


@dataclass(frozen=True, eq=False)
class SystemModel:
    """
        Everything that drives a run except the cost tensor and the policy.

        :param delta:
            Decision applied by the actuator for each estimate.
    """
    source: SourceModel
    delta: typing.Tuple[int, ...]
    channel: ChannelModel = field(default_factory=ChannelModel)
    env: EnvModel = field(default_factory=EnvModel)
    status: typing.Optional[StatusSpace] = None

    def __post_init__(self):
        n_s = self.source.n_status
        delta = tuple(int(d) for d in self.delta)
        if len(delta) != n_s:
            raise ValidationError(f'expected one decision per status ({n_s}), got {len(delta)}', 'delta')
        for i, d in enumerate(delta):
            if not 0 <= d < self.source.n_decisions:
                raise ValidationError(f'decision {d} out of range [0, {self.source.n_decisions})', f'delta[{i}]')
        object.__setattr__(self, 'delta', delta)
        status = self.status or StatusSpace(n_s, embedding=tuple(range(n_s)))
        if status.size != n_s:
            raise ValidationError(f'status set has {status.size} entries but the source has {n_s}', 'status')
        object.__setattr__(self, 'status', status)

    @property
    def n_status(self) -> int:
        return self.source.n_status

    @property
    def n_env(self) -> int:
        return self.env.n_env

    @property
    def epsilon(self) -> float:
        return float(self.channel.epsilon)

    def check_tensor(self, tensor: GoalTensor) -> None:
        expected = (self.n_status, self.n_status, self.n_env)
        if tuple(tensor.dims) != expected:
            raise ValidationError(f'tensor dims {list(tensor.dims)} do not match the system {list(expected)}', 'tensor')


@dataclass(frozen=True)
class SimConfig:
    horizon: int
    seed: int = 0
    lam: float = 0.0

    def __post_init__(self):
        if int(self.horizon) < 1:
            raise ValidationError(f'horizon must be at least 1, got {self.horizon}', 'horizon')
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ValidationError(f'lambda must be nonnegative, got {self.lam}', 'lambda')


@dataclass(frozen=True, eq=False)
class SimResult:
    trajectory: Trajectory
    average_cost: float
    tensor_cost: float
    sample_rate: float
    delivery_rate: float
    fire_occurrences: int

    @property
    def horizon(self) -> int:
        return len(self.trajectory)


class ExactAverage(typing.NamedTuple):
    average_cost: float
    sample_rate: float
    tensor_cost: float
    n_states: int


def splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Seed of replication ``index``: ``splitmix64(master ^ splitmix64(index))`` on 64 bits."""
    return splitmix64((int(master_seed) & MASK64) ^ splitmix64(int(index) & MASK64))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))


class _Slotter:
    """Lookup tables for the slot protocol, built once per run."""

    def __init__(self, system: SystemModel, tensor: GoalTensor, lam: float):
        system.check_tensor(tensor)
        for d in range(system.source.n_decisions):
            check_stochastic(system.source.kernels[d], name=f'kernels[{d}]')
        self.system = system
        self.env = system.env
        self.lam = float(lam)
        self.epsilon = system.epsilon
        self.delta = system.delta
        self.n_status = system.n_status
        self.costs = tensor.values.tolist()
        self.cum_kernels = np.cumsum(system.source.kernels, axis=2).tolist()
        self.cum_q = None if system.env.q is None else np.cumsum(system.env.q, axis=1).tolist()

    @staticmethod
    def _draw(cum_row, u, n):
        return min(bisect.bisect_right(cum_row, u), n - 1)

    def advance(self, x, x_hat_prev, phi, action, u_deliver, u_source, u_env):
        delivered = action == SAMPLE and u_deliver >= self.epsilon
        x_hat = x if delivered else x_hat_prev
        phi_eff = self.env.post_delivery(x, x_hat, phi, delivered)
        cost = self.costs[x][x_hat][phi_eff] + (self.lam if action == SAMPLE else 0.0)
        d = self.delta[x_hat]
        x_next = self._draw(self.cum_kernels[d][x], u_source, self.n_status)
        if self.env.mode == 'constant':
            phi_next = phi_eff
        elif self.cum_q is not None:
            phi_next = self._draw(self.cum_q[phi_eff], u_env, len(self.cum_q))
        else:
            phi_next = self.env.transitions(x_next, x_hat, phi_eff)[0][0]
        return x_hat, delivered, phi_eff, cost, x_next, phi_next


def step(system: SystemModel, tensor: GoalTensor, x: int, x_hat_prev: int, phi: int, action: int,
         rng: np.random.Generator, lam: float = 0.0, t: int = 0):
    """
        Run one slot of the protocol.

        :returns:
            ``(record, x_next, phi_next)``; ``record.phi`` is the environment
            index charged in the slot and ``record.cost`` the slot cost.
    """
    if action not in (IDLE, SAMPLE):
        raise ValidationError(f'unknown action {action!r}', 'action')
    for name, value, size in (('x', x, system.n_status), ('x_hat_prev', x_hat_prev, system.n_status),
                              ('phi', phi, system.n_env)):
        if not 0 <= value < size:
            raise ValidationError(f'{value} out of range [0, {size})', name)
    u = rng.random(3)
    x_hat, delivered, phi_eff, cost, x_next, phi_next = _Slotter(system, tensor, lam).advance(
        x, x_hat_prev, phi, action, u[0], u[1], u[2])
    record = SlotRecord(t, x, x_hat, phi_eff, action == SAMPLE, delivered, cost)
    return record, x_next, phi_next


def fire_occurrence_count(traj: Trajectory) -> int:
    """Slots ``t > 0`` where the status leaves 0 (an ignition)."""
    x = traj.x
    return int(np.count_nonzero((x[:-1] == 0) & (x[1:] > 0)))


def simulate(system: SystemModel, tensor: GoalTensor, policy: SamplingPolicy, cfg: SimConfig) -> SimResult:
    slotter = _Slotter(system, tensor, cfg.lam)
    horizon = int(cfg.horizon)
    uniforms = make_rng(cfg.seed).random((horizon, 3)).tolist()

    xs = [0] * horizon
    x_hats = [0] * horizon
    phis = [0] * horizon
    sampled = [False] * horizon
    delivered = [False] * horizon
    costs = [0.0] * horizon

    x, x_hat, phi, aoi = 0, 0, 0, 0
    state = policy.initial_state()
    for t in range(horizon):
        obs = Observation(t, x, x_hat, phi, aoi)
        action = policy.decide(state, obs)
        u = uniforms[t]
        x_hat, got, phi_eff, cost, x_next, phi_next = slotter.advance(x, x_hat, phi, action, u[0], u[1], u[2])
        xs[t], x_hats[t], phis[t] = x, x_hat, phi_eff
        sampled[t], delivered[t], costs[t] = action == SAMPLE, got, cost
        state = policy.advance(state, obs, action, got)
        aoi = 1 if got else aoi + 1
        x, phi = x_next, phi_next

    traj = Trajectory(xs, x_hats, phis, sampled, delivered, costs,
                      n_status=system.n_status, n_env=system.n_env,
                      embedding=system.status.embedding)
    average_cost = float(traj.cost.mean())
    sample_rate = float(traj.sampled.mean())
    result = SimResult(
        trajectory=traj,
        average_cost=average_cost,
        tensor_cost=average_cost - cfg.lam * sample_rate,
        sample_rate=sample_rate,
        delivery_rate=float(traj.delivered.mean()),
        fire_occurrences=fire_occurrence_count(traj),
    )
    log.debug(f'Simulated {horizon} slots with seed {cfg.seed}: cost {average_cost:.6g}, rate {sample_rate:.6g}')
    return result


def _simulate_job(args):
    system, tensor, policy, cfg = args
    return simulate(system, tensor, policy, cfg)


def simulate_replications(system: SystemModel, tensor: GoalTensor, policy: SamplingPolicy,
                          horizon: int, replications: int, master_seed: int, lam: float = 0.0,
                          workers: typing.Optional[int] = None) -> typing.List[SimResult]:
    """
        Independent replications seeded by :func:`derive_seed`.

        Results come back in replication order, so running them on a process
        pool (``workers > 1``) gives the same list as running them in turn.
    """
    if int(replications) < 1:
        raise ValidationError(f'replications must be at least 1, got {replications}', 'replications')
    jobs = [(system, tensor, policy, SimConfig(horizon, derive_seed(master_seed, i), lam))
            for i in range(int(replications))]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_simulate_job, jobs))
    return [_simulate_job(job) for job in jobs]


def exact_average(system: SystemModel, tensor: GoalTensor, policy: SamplingPolicy, lam: float = 0.0) -> ExactAverage:
    """
        Exact long-run average cost and sample rate of a policy.

        Builds the chain induced by the policy over
        ``(x, x_hat_prev, phi, observed age, policy state)`` restricted to the
        states reachable from the synchronized start, and solves for its
        stationary distribution. Raises :class:`MultichainError` when the
        reachable chain has more than one recurrent class.
    """
    system.check_tensor(tensor)
    slotter = _Slotter(system, tensor, lam)
    kernels = system.source.kernels
    eps = system.epsilon
    cap = int(getattr(policy, 'age_cap', 0))

    start = (0, 0, 0, 0, policy.canonical(policy.initial_state()))
    index = {start: 0}
    keys = [start]
    rows, costs, actions = [], [], []
    i = 0
    while i < len(keys):
        x, x_hat_prev, phi, aoi, state = keys[i]
        obs = Observation(0, x, x_hat_prev, phi, aoi)
        action = policy.decide(state, obs)
        outcomes = [(1.0 - eps, True), (eps, False)] if action == SAMPLE else [(1.0, False)]
        row = {}
        cost = slotter.lam if action == SAMPLE else 0.0
        for p_out, got in outcomes:
            if p_out <= 0:
                continue
            x_hat = x if got else x_hat_prev
            phi_eff = system.env.post_delivery(x, x_hat, phi, got)
            cost += p_out * slotter.costs[x][x_hat][phi_eff]
            state_next = policy.canonical(policy.advance(state, obs, action, got))
            aoi_next = min(1 if got else aoi + 1, cap)
            for x_next, p_x in enumerate(kernels[system.delta[x_hat], x]):
                if p_x <= 0:
                    continue
                for phi_next, p_phi in system.env.transitions(x_next, x_hat, phi_eff):
                    key = (x_next, x_hat, phi_next, aoi_next, state_next)
                    j = index.get(key)
                    if j is None:
                        j = index[key] = len(keys)
                        keys.append(key)
                    row[j] = row.get(j, 0.0) + p_out * p_x * p_phi
        rows.append(row)
        costs.append(cost)
        actions.append(action)
        i += 1

    n = len(keys)
    P = np.zeros((n, n))
    for r, row in enumerate(rows):
        for j, p in row.items():
            P[r, j] = p
    pi = stationary_distribution(P, start=0, strict=True, describe=lambda s: keys[s][:3])
    sample = np.asarray(actions) == SAMPLE
    average_cost = float(pi @ np.asarray(costs))
    sample_rate = float(pi[sample].sum())
    log.debug(f'Exact evaluation over {n} reachable states: cost {average_cost:.10g}, rate {sample_rate:.10g}')
    return ExactAverage(average_cost, sample_rate, average_cost - slotter.lam * sample_rate, n)
