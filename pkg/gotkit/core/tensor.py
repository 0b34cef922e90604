# -*- coding: utf-8 -*-

"""
    gotkit.core.tensor
    ~~~~~~~~~~~~~~~~~~

    Goal-oriented Tensors: a nonnegative cost ``T[x, x_hat, phi]`` over the
    source status, the receiver's estimate and the environment status.

    The module builds tensors from per-slot cost tables, embeds the classical
    metrics as tensors, and classifies a tensor by the two structural
    constraints the classical metrics share (diagonal symmetry and a purely
    multiplicative environment).

    Flat layout: entry ``(x, x_hat, phi)`` sits at ``x + |S| * (x_hat + |S| * phi)``,
    i.e. ``x`` varies fastest and ``phi`` slowest.
"""

from __future__ import annotations

import logging
import typing
from dataclasses import dataclass

import numpy as np

from ..exceptions import ValidationError
from .metrics import EnvWeightFn, ErrorGapFn, PenaltyFn

log = logging.getLogger(__name__)

DEFAULT_AGE_CAP = 64
DEFAULT_TOLERANCE = 1e-9
STEP5_FORMULAS = ('intent', 'literal')


@dataclass(frozen=True, eq=False)
class GoalTensor:
    """
        Immutable 3-D cost table indexed ``[x, x_hat, phi]``.

        :param values:
            Array of shape ``(|S|, |S|, |V|)``, finite and nonnegative.
    """
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 3 or values.shape[0] != values.shape[1] or min(values.shape) < 1:
            raise ValidationError(f'tensor must have shape (|S|, |S|, |V|), got {values.shape}', 'dims')
        if not np.all(np.isfinite(values)):
            raise ValidationError('tensor entries must be finite', 'values')
        if np.any(values < 0):
            x, x_hat, phi = (int(i) for i in np.argwhere(values < 0)[0])
            raise ValidationError(f'negative entry {values[x, x_hat, phi]:g} at ({x}, {x_hat}, {phi})', 'values')
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_flat(cls, dims, flat) -> 'GoalTensor':
        dims = tuple(int(d) for d in dims)
        flat = np.asarray(flat, dtype=float)
        if len(dims) != 3 or dims[0] != dims[1]:
            raise ValidationError(f'dims must be [|S|, |S|, |V|], got {list(dims)}', 'dims')
        if flat.size != int(np.prod(dims)):
            raise ValidationError(f'{flat.size} values do not match dims {list(dims)}', 'values')
        return cls(flat.reshape(dims, order='F'))

    @property
    def dims(self) -> typing.Tuple[int, int, int]:
        return self.values.shape

    @property
    def n_status(self) -> int:
        return self.values.shape[0]

    @property
    def n_env(self) -> int:
        return self.values.shape[2]

    def flat(self) -> np.ndarray:
        return self.values.ravel(order='F')

    def slice(self, phi: int) -> np.ndarray:
        return self.values[:, :, phi]

    def scaled(self, factor: float) -> 'GoalTensor':
        return GoalTensor(self.values * factor)

    def __eq__(self, other):
        if not isinstance(other, GoalTensor):
            return NotImplemented
        return self.dims == other.dims and bool(np.array_equal(self.values, other.values))

    def __repr__(self):
        return f'GoalTensor(dims={list(self.dims)}, max={self.values.max():g})'


@dataclass(frozen=True, eq=False)
class CostModel:
    """
        Per-slot costs from which a GoT is built.

        :param c1:
            ``|S| x |V|`` status-inherent cost, nonnegative.
        :param c2:
            ``|S| x |V| x |D|`` decision gain, nonpositive (a negative cost).
        :param c3:
            ``|D|`` decision-inherent cost, nonnegative.
        :param delta:
            Decision map from estimate index to decision index.
    """
    c1: np.ndarray
    c2: np.ndarray
    c3: np.ndarray
    delta: typing.Tuple[int, ...]

    def __post_init__(self):
        c1 = np.array(self.c1, dtype=float)
        c2 = np.array(self.c2, dtype=float)
        c3 = np.array(self.c3, dtype=float)
        delta = tuple(int(d) for d in self.delta)
        if c1.ndim != 2:
            raise ValidationError(f'expected shape (|S|, |V|), got {c1.shape}', 'c1')
        n_s, n_v = c1.shape
        if c3.ndim != 1 or c3.size < 1:
            raise ValidationError(f'expected shape (|D|,), got {c3.shape}', 'c3')
        n_d = c3.size
        if c2.shape != (n_s, n_v, n_d):
            raise ValidationError(f'expected shape {(n_s, n_v, n_d)}, got {c2.shape}', 'c2')
        for name, arr in (('c1', c1), ('c2', c2), ('c3', c3)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError('entries must be finite', name)
        if np.any(c1 < 0):
            raise ValidationError('status-inherent cost must be nonnegative', 'c1')
        if np.any(c2 > 0):
            raise ValidationError('decision gain must be nonpositive', 'c2')
        if np.any(c3 < 0):
            raise ValidationError('decision-inherent cost must be nonnegative', 'c3')
        if len(delta) != n_s:
            raise ValidationError(f'expected one decision per status ({n_s}), got {len(delta)}', 'delta')
        for i, d in enumerate(delta):
            if not 0 <= d < n_d:
                raise ValidationError(f'decision {d} out of range [0, {n_d})', f'delta[{i}]')
        for name, arr in (('c1', c1), ('c2', c2), ('c3', c3)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, 'delta', delta)

    @property
    def n_status(self) -> int:
        return self.c1.shape[0]

    @property
    def n_env(self) -> int:
        return self.c1.shape[1]

    @property
    def n_decisions(self) -> int:
        return self.c3.size


def _step5_terms(cm: CostModel):
    d = np.asarray(cm.delta)
    # c1 over (x, ., phi), c2 and c3 picked by the decision taken on x_hat
    c1 = cm.c1[:, None, :]
    c2 = cm.c2[:, :, d].transpose(0, 2, 1)
    c3 = cm.c3[d][None, :, None]
    return c1, c2, c3


def build_got(cm: CostModel, formula: str = 'intent') -> GoalTensor:
    """
        Assemble the GoT from a cost model.

        ``intent``: ``max(c1 + c2, 0) + c3``, the gain of a decision can at most
        cancel the severity of the status while the decision's own cost is
        always paid.

        ``literal``: ``max(c1 + c3, 0) + c2``, the construction read as written.
        It can produce negative entries, which are rejected.
    """
    if formula not in STEP5_FORMULAS:
        raise ValidationError(f'unknown formula {formula!r}, expected one of {STEP5_FORMULAS}', 'formula')
    c1, c2, c3 = _step5_terms(cm)
    if formula == 'intent':
        values = np.maximum(c1 + c2, 0.0) + c3
    else:
        values = np.maximum(c1 + c3, 0.0) + c2
    log.debug(f'Built {formula} GoT with dims {values.shape}')
    return GoalTensor(values)


@dataclass(frozen=True)
class Step5Difference:
    """Comparison of the two Step-5 readings on one cost model."""
    intent: GoalTensor
    literal: np.ndarray
    differing_entries: int
    max_abs_difference: float
    literal_negative_entries: int

    @property
    def identical(self) -> bool:
        return self.differing_entries == 0


def step5_difference(cm: CostModel) -> Step5Difference:
    intent = build_got(cm, 'intent')
    c1, c2, c3 = _step5_terms(cm)
    literal = np.maximum(c1 + c3, 0.0) + c2
    diff = np.abs(intent.values - literal)
    return Step5Difference(
        intent=intent,
        literal=literal,
        differing_entries=int(np.count_nonzero(diff)),
        max_abs_difference=float(diff.max()),
        literal_negative_entries=int(np.count_nonzero(literal < 0)),
    )


def _age_axis(cap: int, name: str) -> np.ndarray:
    if int(cap) < 0:
        raise ValidationError(f'cap must be nonnegative, got {cap}', name)
    return np.arange(int(cap) + 1, dtype=float)


def embed_aoi(max_age: int = DEFAULT_AGE_CAP, n_status: int = 1) -> GoalTensor:
    """AoI as a tensor: ``phi`` is the truncated age and ``T[x, x_hat, phi] = phi``."""
    ages = _age_axis(max_age, 'max_age')
    return GoalTensor(np.broadcast_to(ages, (n_status, n_status, ages.size)))


def embed_voi(f: PenaltyFn, max_age: int = DEFAULT_AGE_CAP, n_status: int = 1) -> GoalTensor:
    """VoI as a tensor: ``T[x, x_hat, phi] = f(phi)`` with ``phi`` the truncated AoI."""
    penalties = f(_age_axis(max_age, 'max_age'))
    return GoalTensor(np.broadcast_to(penalties, (n_status, n_status, penalties.size)))


def embed_aos(max_aos: int = DEFAULT_AGE_CAP, n_status: int = 1) -> GoalTensor:
    """AoS as a tensor: ``T[x, x_hat, phi] = phi * 1{x != x_hat}``."""
    ages = _age_axis(max_aos, 'max_aos')
    mismatch = 1.0 - np.eye(n_status)
    return GoalTensor(mismatch[:, :, None] * ages[None, None, :])


def embed_mse(embedding, n_env: int = 1) -> GoalTensor:
    """MSE as a tensor, identical across the environment axis."""
    if embedding is None:
        raise ValidationError('MSE needs a status embedding', 'embedding')
    sq = ErrorGapFn.squared(embedding).table
    if int(n_env) < 1:
        raise ValidationError(f'environment set must not be empty, got {n_env}', 'n_env')
    return GoalTensor(np.repeat(sq[:, :, None], int(n_env), axis=2))


def embed_aoii(f: PenaltyFn, g: ErrorGapFn, max_aos: int = DEFAULT_AGE_CAP) -> GoalTensor:
    """AoII as a tensor: ``T[x, x_hat, phi] = f(phi) * g(x, x_hat)`` with ``phi`` the truncated AoS."""
    penalties = f(_age_axis(max_aos, 'max_aos'))
    return GoalTensor(g.table[:, :, None] * penalties[None, None, :])


def embed_uoi(w: EnvWeightFn, g: ErrorGapFn) -> GoalTensor:
    """UoI as a tensor: ``T[x, x_hat, phi] = Phi(phi) * g(x, x_hat)``."""
    return GoalTensor(g.table[:, :, None] * w.table[None, None, :])


def got_lookup(T: GoalTensor, x: int, x_hat: int, phi: int = 0, saturate: bool = False) -> float:
    """
        Read one entry.

        With ``saturate`` an environment index past the last slice (an age
        beyond the truncation cap) reads the last slice instead of failing.
    """
    n_s, _, n_v = T.dims
    if not 0 <= x < n_s:
        raise ValidationError(f'status {x} out of range [0, {n_s})', 'x')
    if not 0 <= x_hat < n_s:
        raise ValidationError(f'estimate {x_hat} out of range [0, {n_s})', 'x_hat')
    if saturate and phi >= n_v:
        phi = n_v - 1
    if not 0 <= phi < n_v:
        raise ValidationError(f'environment status {phi} out of range [0, {n_v})', 'phi')
    return float(T.values[x, x_hat, phi])


def _check_tol(tol):
    if not tol >= 0:
        raise ValidationError(f'tolerance must be nonnegative, got {tol}', 'tol')


def _scale(T: GoalTensor) -> float:
    return max(1.0, float(np.abs(T.values).max()))


def check_diagonal_symmetry(T: GoalTensor, tol: float = DEFAULT_TOLERANCE) -> bool:
    """True when every slice equals its transpose up to ``tol * max(1, max|T|)``."""
    _check_tol(tol)
    gap = np.abs(T.values - T.values.transpose(1, 0, 2)).max()
    return bool(gap <= tol * _scale(T))


@dataclass(frozen=True, eq=False)
class MultiplicativeEnv:
    """
        Factorization ``T[:, :, phi] = coefficients[phi] * base_slice``.

        ``base_index`` is the slice used as base; its coefficient is 1.
    """
    base_slice: np.ndarray
    coefficients: np.ndarray
    base_index: int


def check_multiplicative_env(T: GoalTensor, tol: float = DEFAULT_TOLERANCE) -> typing.Optional[MultiplicativeEnv]:
    """
        Detect a purely multiplicative environment.

        The base is the slice with the largest entry (lowest ``phi`` on ties).
        Each coefficient is the ratio of the slice to the base at the base's
        largest entry, and the factorization is accepted when every residual
        is within ``tol * max|T|``. Returns None when no factorization fits.
    """
    _check_tol(tol)
    values = T.values
    n_v = T.n_env
    peak = float(values.max())
    if peak == 0.0:
        return MultiplicativeEnv(np.zeros(T.dims[:2]), np.ones(n_v), 0)
    maxima = values.max(axis=(0, 1))
    base_index = int(np.argmax(maxima))
    base = values[:, :, base_index]
    pivot = np.unravel_index(int(np.argmax(base)), base.shape)
    coefficients = values[pivot[0], pivot[1], :] / base[pivot]
    residual = np.abs(values - base[:, :, None] * coefficients[None, None, :]).max()
    if residual > tol * peak:
        log.debug(f'Environment is not multiplicative (residual {residual:.3e})')
        return None
    return MultiplicativeEnv(base.copy(), coefficients, base_index)


def check_content_independent(T: GoalTensor, tol: float = DEFAULT_TOLERANCE) -> bool:
    """True when each slice is constant in ``(x, x_hat)``."""
    _check_tol(tol)
    values = T.values
    spread = (values.max(axis=(0, 1)) - values.min(axis=(0, 1))).max()
    return bool(spread <= tol * _scale(T))


@dataclass(frozen=True, eq=False)
class StructureReport:
    diagonally_symmetric: bool
    multiplicative_env: typing.Optional[MultiplicativeEnv]
    content_independent: bool

    @property
    def multiplicative(self) -> bool:
        return self.multiplicative_env is not None


def classify(T: GoalTensor, tol: float = DEFAULT_TOLERANCE) -> StructureReport:
    return StructureReport(
        diagonally_symmetric=check_diagonal_symmetry(T, tol),
        multiplicative_env=check_multiplicative_env(T, tol),
        content_independent=check_content_independent(T, tol),
    )
