# -*- coding: utf-8 -*-

"""
    gotkit.core.markov
    ~~~~~~~~~~~~~~~~~~

    Finite Markov chain helpers: reachability, recurrent classes and
    long-run (Cesaro) distributions of row-stochastic matrices.
"""

from __future__ import annotations

import logging
import typing

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from ..exceptions import MultichainError, ValidationError

log = logging.getLogger(__name__)

STOCHASTIC_TOL = 1e-12


def check_stochastic(P, tol: float = STOCHASTIC_TOL, name: str = 'P') -> np.ndarray:
    """Validate a square row-stochastic matrix and return it as a float array."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValidationError(f'expected a square matrix, got shape {P.shape}', name)
    if not np.all(np.isfinite(P)) or np.any(P < 0) or np.any(P > 1):
        raise ValidationError('entries must lie in [0, 1]', name)
    sums = P.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size:
        row = int(bad[0])
        raise ValidationError(f'row {row} sums to {sums[row]:.12g}', f'{name}[{row}]')
    return P


def reachable_states(P: np.ndarray, start: int) -> np.ndarray:
    """Sorted indices of the states reachable from ``start`` (``start`` included)."""
    order = breadth_first_order(csr_matrix(P > 0), start, directed=True, return_predecessors=False)
    return np.sort(order)


def recurrent_classes(P: np.ndarray) -> typing.List[np.ndarray]:
    """Closed communicating classes of ``P``, each as a sorted index array."""
    graph = csr_matrix(P > 0)
    n_comp, labels = connected_components(graph, directed=True, connection='strong')
    rows, cols = graph.nonzero()
    leaves = np.zeros(n_comp, dtype=bool)
    leaves[labels[rows][labels[rows] != labels[cols]]] = True
    return [np.flatnonzero(labels == c) for c in range(n_comp) if not leaves[c]]


def _class_distribution(P: np.ndarray, members: np.ndarray) -> np.ndarray:
    sub = P[np.ix_(members, members)]
    k = members.size
    A = sub.T - np.eye(k)
    A[-1, :] = 1.0
    b = np.zeros(k)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.maximum(pi, 0.0)
    return pi / pi.sum()


def stationary_distribution(P,
                            start: typing.Optional[int] = None,
                            strict: bool = True,
                            describe: typing.Optional[typing.Callable[[int], typing.Any]] = None) -> np.ndarray:
    """
        Long-run distribution of a finite chain.

        :param start:
            Restrict the chain to the states reachable from ``start``. Without
            it the whole chain is used and must have a single recurrent class.
        :param strict:
            Raise :class:`MultichainError` when more than one recurrent class is
            found. Otherwise the class distributions are mixed by their
            absorption probabilities from ``start``.
        :param describe:
            Maps a state index to a readable label for error messages.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    states = np.arange(n) if start is None else reachable_states(P, start)
    sub = P[np.ix_(states, states)]
    classes = recurrent_classes(sub)
    if len(classes) > 1 and (strict or start is None):
        describe = describe or (lambda s: s)
        raise MultichainError([[describe(int(states[i])) for i in c] for c in classes])

    pi = np.zeros(n)
    if len(classes) == 1:
        pi[states[classes[0]]] = _class_distribution(sub, classes[0])
        return pi

    local_start = int(np.searchsorted(states, start))
    closed = np.zeros(states.size, dtype=bool)
    for c in classes:
        closed[c] = True
    transient = np.flatnonzero(~closed)
    weights = []
    for c in classes:
        if local_start in c:
            weights.append(1.0)
            continue
        if closed[local_start]:
            weights.append(0.0)
            continue
        A = np.eye(transient.size) - sub[np.ix_(transient, transient)]
        rhs = sub[np.ix_(transient, c)].sum(axis=1)
        absorb = np.linalg.solve(A, rhs)
        weights.append(float(absorb[np.searchsorted(transient, local_start)]))
    for c, weight in zip(classes, weights):
        pi[states[c]] += weight * _class_distribution(sub, c)
    log.debug(f'Mixed {len(classes)} recurrent classes with weights {weights}')
    return pi / pi.sum()
