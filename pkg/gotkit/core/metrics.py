# -*- coding: utf-8 -*-

"""
    gotkit.core.metrics
    ~~~~~~~~~~~~~~~~~~~

    Slotted trajectories and the classical importance metrics evaluated
    over them: AoI, AoS, VoI, MSE, AoII and UoI.

    Every evaluator is a pure function of its inputs and returns a fresh
    numpy array with one entry per slot.
"""

from __future__ import annotations

import logging
import typing
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import NonFiniteError, ValidationError

log = logging.getLogger(__name__)

PENALTY_KINDS = ('linear', 'exponential', 'logarithmic')


def _as_index_array(values, size, name):
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValidationError(f'expected a one-dimensional sequence, got shape {arr.shape}', name)
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ValidationError('indices must be integers', name)
    arr = arr.astype(np.int64)
    if arr.size and arr.min() < 0:
        raise ValidationError(f'negative index {int(arr.min())}', name)
    if size is not None and arr.size and arr.max() >= size:
        raise ValidationError(f'index {int(arr.max())} out of range [0, {size})', name)
    return arr


def _readonly(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StatusSpace:
    """
        The source status set.

        Statuses are plain integer indices in ``[0, size)``. An optional
        numeric embedding ``e(x)`` places them on the real line (needed by MSE)
        and optional labels name them in reports.
    """
    size: int
    embedding: typing.Optional[typing.Tuple[float, ...]] = None
    labels: typing.Optional[typing.Tuple[str, ...]] = None

    def __post_init__(self):
        if int(self.size) < 1:
            raise ValidationError('status set must not be empty', 'size')
        if self.embedding is not None:
            emb = tuple(float(v) for v in self.embedding)
            if len(emb) != self.size:
                raise ValidationError(f'expected {self.size} entries, got {len(emb)}', 'embedding')
            if not all(np.isfinite(emb)):
                raise ValidationError('entries must be finite', 'embedding')
            object.__setattr__(self, 'embedding', emb)
        if self.labels is not None:
            labels = tuple(str(v) for v in self.labels)
            if len(labels) != self.size:
                raise ValidationError(f'expected {self.size} labels, got {len(labels)}', 'labels')
            object.__setattr__(self, 'labels', labels)

    def value(self, index: int) -> float:
        """Embedding of a status index."""
        if not 0 <= index < self.size:
            raise ValidationError(f'status {index} out of range [0, {self.size})')
        if self.embedding is None:
            raise ValidationError('status embedding is not defined')
        return self.embedding[index]

    def label(self, index: int) -> str:
        if self.labels is None:
            return str(index)
        return self.labels[index]


@dataclass(frozen=True)
class PenaltyFn:
    """
        Nondecreasing penalty ``f`` with ``f(0) = 0``.

        ``linear``: ``rate * u``; ``exponential``: ``exp(rate * u) - 1``;
        ``logarithmic``: ``log(1 + rate * u)``.
    """
    kind: str = 'linear'
    rate: float = 1.0

    def __post_init__(self):
        if self.kind not in PENALTY_KINDS:
            raise ValidationError(f'unknown penalty kind {self.kind!r}, expected one of {PENALTY_KINDS}', 'kind')
        if not (np.isfinite(self.rate) and self.rate > 0):
            raise ValidationError(f'rate must be a positive finite number, got {self.rate}', 'rate')

    def __call__(self, ages) -> np.ndarray:
        u = np.asarray(ages, dtype=float)
        if u.size and np.nanmin(u) < 0:
            raise ValidationError('penalty arguments must be nonnegative')
        with np.errstate(over='ignore', invalid='ignore'):
            if self.kind == 'linear':
                out = self.rate * u
            elif self.kind == 'exponential':
                out = np.expm1(self.rate * u)
            else:
                out = np.log1p(self.rate * u)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError(f'{self.kind} penalty with rate {self.rate} overflows '
                                 f'at age {float(np.max(u)):g}')
        return out


@dataclass(frozen=True, eq=False)
class ErrorGapFn:
    """
        Error gap ``g(x, x_hat)`` stored as a ``|S| x |S|`` table.

        The diagonal is zero and every entry is finite and nonnegative. The
        table need not be symmetric.
    """
    table: np.ndarray

    def __post_init__(self):
        table = np.array(self.table, dtype=float)
        if table.ndim != 2 or table.shape[0] != table.shape[1] or table.shape[0] < 1:
            raise ValidationError(f'gap table must be square, got shape {table.shape}', 'gap')
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise ValidationError('gap entries must be finite and nonnegative', 'gap')
        if np.any(np.diag(table) != 0):
            raise ValidationError('gap must vanish on the diagonal', 'gap')
        object.__setattr__(self, 'table', _readonly(table))

    @classmethod
    def indicator(cls, n_status: int) -> 'ErrorGapFn':
        return cls(1.0 - np.eye(n_status))

    @classmethod
    def squared(cls, embedding) -> 'ErrorGapFn':
        e = np.asarray(embedding, dtype=float)
        return cls((e[:, None] - e[None, :]) ** 2)

    @property
    def size(self) -> int:
        return self.table.shape[0]

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.table, self.table.T))

    def __call__(self, x, x_hat):
        return self.table[x, x_hat]


@dataclass(frozen=True, eq=False)
class EnvWeightFn:
    """Environment-aware weight ``Phi(v)``, one nonnegative entry per environment status."""
    table: np.ndarray

    def __post_init__(self):
        table = np.array(self.table, dtype=float)
        if table.ndim != 1 or table.size < 1:
            raise ValidationError(f'weights must be a non-empty vector, got shape {table.shape}', 'weights')
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise ValidationError('weights must be finite and nonnegative', 'weights')
        object.__setattr__(self, 'table', _readonly(table))

    @property
    def size(self) -> int:
        return self.table.size

    def __call__(self, phi):
        return self.table[phi]


@dataclass(frozen=True)
class SlotRecord:
    """One slot of a trajectory."""
    t: int
    x: int
    x_hat: int
    phi: int = 0
    sampled: bool = False
    delivered: bool = False
    cost: float = 0.0

    def __post_init__(self):
        if self.delivered and not self.sampled:
            raise ValidationError(f'slot {self.t}: delivered without being sampled')


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
        Columnar slotted record of ``(t, x, x_hat, phi, sampled, delivered, cost)``.

        Slots are implicitly numbered ``0 .. len - 1``. Iterating yields
        :class:`SlotRecord` objects; the metric evaluators work on the columns.

        :param n_status:
            Size of the status set; when given, ``x`` and ``x_hat`` are range checked.
        :param n_env:
            Size of the environment set; when given, ``phi`` is range checked.
        :param embedding:
            Numeric embedding of the statuses, required by :func:`mse`.
    """
    x: np.ndarray
    x_hat: np.ndarray
    phi: typing.Optional[np.ndarray] = None
    sampled: typing.Optional[np.ndarray] = None
    delivered: typing.Optional[np.ndarray] = None
    cost: typing.Optional[np.ndarray] = None
    n_status: typing.Optional[int] = None
    n_env: typing.Optional[int] = None
    embedding: typing.Optional[typing.Tuple[float, ...]] = field(default=None)

    def __post_init__(self):
        x = _as_index_array(self.x, self.n_status, 'x')
        n = x.size
        if n == 0:
            raise ValidationError('trajectory must contain at least one slot')
        x_hat = _as_index_array(self.x_hat, self.n_status, 'x_hat')
        phi = np.zeros(n, dtype=np.int64) if self.phi is None else _as_index_array(self.phi, self.n_env, 'phi')
        sampled = np.zeros(n, dtype=bool) if self.sampled is None else np.asarray(self.sampled, dtype=bool)
        delivered = np.zeros(n, dtype=bool) if self.delivered is None else np.asarray(self.delivered, dtype=bool)
        cost = np.zeros(n, dtype=float) if self.cost is None else np.asarray(self.cost, dtype=float)
        for name, col in (('x_hat', x_hat), ('phi', phi), ('sampled', sampled),
                          ('delivered', delivered), ('cost', cost)):
            if col.shape != (n,):
                raise ValidationError(f'expected {n} entries, got shape {col.shape}', name)
        bad = np.flatnonzero(delivered & ~sampled)
        if bad.size:
            raise ValidationError(f'slot {int(bad[0])}: delivered without being sampled', 'delivered')
        embedding = None
        if self.embedding is not None:
            embedding = tuple(float(v) for v in self.embedding)
            if self.n_status is not None and len(embedding) != self.n_status:
                raise ValidationError(f'expected {self.n_status} entries, got {len(embedding)}', 'embedding')
            if len(embedding) <= max(int(x.max()), int(x_hat.max())):
                raise ValidationError('embedding does not cover every status in the trajectory', 'embedding')
        for name, col in (('x', x), ('x_hat', x_hat), ('phi', phi), ('sampled', sampled),
                          ('delivered', delivered), ('cost', cost)):
            object.__setattr__(self, name, _readonly(col))
        object.__setattr__(self, 'embedding', embedding)

    @classmethod
    def from_records(cls, records: typing.Iterable[SlotRecord], **kwargs) -> 'Trajectory':
        """Build a trajectory from slot records; their ``t`` must run 0, 1, 2, ..."""
        records = list(records)
        for i, rec in enumerate(records):
            if rec.t != i:
                raise ValidationError(f'slot indices must be contiguous from 0, found {rec.t} at position {i}', 't')
        return cls(
            x=[r.x for r in records],
            x_hat=[r.x_hat for r in records],
            phi=[r.phi for r in records],
            sampled=[r.sampled for r in records],
            delivered=[r.delivered for r in records],
            cost=[r.cost for r in records],
            **kwargs,
        )

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self), dtype=np.int64)

    def __len__(self) -> int:
        return self.x.size

    def __getitem__(self, t: int) -> SlotRecord:
        if not -len(self) <= t < len(self):
            raise IndexError(t)
        t = t % len(self)
        return SlotRecord(t, int(self.x[t]), int(self.x_hat[t]), int(self.phi[t]),
                          bool(self.sampled[t]), bool(self.delivered[t]), float(self.cost[t]))

    def __iter__(self) -> typing.Iterator[SlotRecord]:
        for t in range(len(self)):
            yield self[t]


def aoi_process(traj: Trajectory) -> np.ndarray:
    """
        Age of Information per slot.

        A delivery in slot ``t`` resets the age to 0; otherwise it grows by one.
        The start is synchronized, so ``AoI(0) = 0``.
    """
    t = traj.t
    last = np.maximum.accumulate(np.where(traj.delivered, t, 0))
    return t - last


def aos_process(traj: Trajectory) -> np.ndarray:
    """
        Age of Synchronization per slot: slots since ``x == x_hat`` last held.

        Slots before the first coincidence count from a virtual sync at ``-1``.
    """
    t = traj.t
    last = np.maximum.accumulate(np.where(traj.x == traj.x_hat, t, -1))
    return t - last


def voi(aoi, f: PenaltyFn) -> np.ndarray:
    return f(aoi)


def mse(traj: Trajectory) -> np.ndarray:
    if traj.embedding is None:
        raise ValidationError('MSE needs a status embedding', 'embedding')
    e = np.asarray(traj.embedding)
    return (e[traj.x] - e[traj.x_hat]) ** 2


def _check_gap(traj: Trajectory, g: ErrorGapFn):
    top = max(int(traj.x.max()), int(traj.x_hat.max()))
    if top >= g.size:
        raise ValidationError(f'status {top} out of range of a {g.size}x{g.size} gap table', 'gap')


def aoii(traj: Trajectory, f: PenaltyFn, g: ErrorGapFn) -> np.ndarray:
    """Age of Incorrect Information: ``f(AoS(t)) * g(x(t), x_hat(t))``."""
    _check_gap(traj, g)
    return f(aos_process(traj)) * g(traj.x, traj.x_hat)


def uoi(traj: Trajectory, w: EnvWeightFn, g: ErrorGapFn) -> np.ndarray:
    """Urgency of Information: ``Phi(phi(t)) * g(x(t), x_hat(t))``."""
    _check_gap(traj, g)
    if int(traj.phi.max()) >= w.size:
        raise ValidationError(f'environment status {int(traj.phi.max())} out of range [0, {w.size})', 'phi')
    return w(traj.phi) * g(traj.x, traj.x_hat)


def long_run_average(seq) -> float:
    arr = np.asarray(seq, dtype=float)
    if arr.size == 0:
        raise ValidationError('cannot average an empty sequence')
    return float(arr.mean())


def evaluate_all(traj: Trajectory,
                 f: typing.Optional[PenaltyFn] = None,
                 g: typing.Optional[ErrorGapFn] = None,
                 w: typing.Optional[EnvWeightFn] = None) -> typing.Dict[str, np.ndarray]:
    """
        Evaluate every metric that the given functions allow.

        AoI and AoS are always present; VoI needs ``f``; MSE needs the
        embedding; AoII needs ``f`` and ``g``; UoI needs ``w`` and ``g``.
    """
    out = {'aoi': aoi_process(traj), 'aos': aos_process(traj)}
    if f is not None:
        out['voi'] = voi(out['aoi'], f)
    if traj.embedding is not None:
        out['mse'] = mse(traj)
    if f is not None and g is not None:
        out['aoii'] = aoii(traj, f, g)
    if w is not None and g is not None:
        out['uoi'] = uoi(traj, w, g)
    log.debug(f'Evaluated {", ".join(out)} over {len(traj)} slots')
    return out
