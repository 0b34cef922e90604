from __future__ import annotations

import numpy as np
import pytest

from gotkit.commands.selfcheck import random_models
from gotkit.core.mdp import (
    MdpModel,
    RviConfig,
    StateCodec,
    brute_force_optimal,
    compile_sampling_mdp,
    policy_evaluate,
    rvi_solve,
)
from gotkit.core.metrics import ErrorGapFn, PenaltyFn
from gotkit.core.policies import OptimalMMSE, make_policy
from gotkit.core.system import IDLE, SAMPLE, ChannelModel, EnvModel, SourceModel, SystemModel
from gotkit.core.tensor import GoalTensor, embed_aoii
from gotkit.exceptions import ConvergenceError, MultichainError, StateSpaceTooLarge, ValidationError


@pytest.fixture
def lossy_flip_system():
    return SystemModel(SourceModel([[[0.8, 0.2], [0.2, 0.8]]]), (0, 0), ChannelModel(0.25))


@pytest.fixture
def cycle_model():
    """Two states: sampling in state 0 pays 1 and moves on, idling in state 1 returns for free."""
    P = np.array([
        [[1.0, 0.0], [1.0, 0.0]],
        [[0.0, 1.0], [0.0, 1.0]],
    ])
    c = np.array([[1.0, 1.0], [0.0, 2.0]])
    return MdpModel(P, c)


def test_codec_layout():
    codec = StateCodec(3, 2)
    assert codec.n_states == 18
    assert codec.encode(1, 2, 1) == 1 + 3 * (2 + 3 * 1)
    assert all(codec.decode(codec.encode(*key)) == key
               for key in [(0, 0, 0), (2, 1, 0), (1, 2, 1)])


def test_compiled_flip_system(lossy_flip_system, indicator_tensor):
    model = compile_sampling_mdp(lossy_flip_system, indicator_tensor, lam=0.5)
    assert model.n_states == 4
    assert model.initial_state == 0
    np.testing.assert_allclose(model.c[:, IDLE], [0.0, 1.0, 1.0, 0.0])
    np.testing.assert_allclose(model.c[:, SAMPLE], [0.5, 0.75, 0.75, 0.5])
    np.testing.assert_allclose(model.P[SAMPLE, 1], [0.05, 0.2, 0.15, 0.6])
    np.testing.assert_allclose(model.P[IDLE, 1], [0.2, 0.8, 0.0, 0.0])
    assert np.array_equal(model.P[SAMPLE, 0], model.P[IDLE, 0])


def test_dead_channel_makes_sampling_useless(indicator_tensor):
    system = SystemModel(SourceModel([[[0.8, 0.2], [0.2, 0.8]]]), (0, 0), ChannelModel(1.0))
    model = compile_sampling_mdp(system, indicator_tensor, lam=0.3)
    assert np.array_equal(model.P[SAMPLE], model.P[IDLE])
    np.testing.assert_allclose(model.c[:, SAMPLE], model.c[:, IDLE] + 0.3)


def test_decision_map_override(markov_env_system):
    tensor = GoalTensor(np.ones((2, 2, 2)))
    default = compile_sampling_mdp(markov_env_system, tensor)
    swapped = compile_sampling_mdp(markov_env_system, tensor, delta=(1, 1))
    s = default.codec.encode(0, 0, 0)
    assert not np.array_equal(default.P[IDLE, s], swapped.P[IDLE, s])


def test_compile_checks_inputs(flip_system, indicator_tensor):
    with pytest.raises(ValidationError):
        compile_sampling_mdp(flip_system, indicator_tensor, lam=-1.0)
    with pytest.raises(ValidationError):
        compile_sampling_mdp(flip_system, GoalTensor(np.zeros((2, 2, 2))))


def test_model_validation():
    with pytest.raises(ValidationError):
        MdpModel(np.ones((2, 1, 1)), [[1.0]])
    with pytest.raises(ValidationError):
        MdpModel(np.full((2, 2, 2), 0.4), np.zeros((2, 2)))
    with pytest.raises(ValidationError):
        MdpModel(np.ones((2, 1, 1)), [[0.0, 0.0]], initial_state=1)


def test_single_state():
    model = MdpModel(np.ones((2, 1, 1)), [[3.0, 5.0]])
    solution = rvi_solve(model)
    assert solution.gain == pytest.approx(3.0)
    assert solution.policy.tolist() == [IDLE]
    assert brute_force_optimal(model)[1].tolist() == [IDLE]


def test_ties_go_to_idle():
    model = MdpModel(np.ones((2, 1, 1)), [[3.0, 3.0]])
    assert rvi_solve(model).policy.tolist() == [IDLE]
    gain, policy = brute_force_optimal(model)
    assert (gain, policy.tolist()) == (3.0, [IDLE])


def test_zero_costs():
    P = np.stack([np.full((3, 3), 1 / 3)] * 2)
    solution = rvi_solve(MdpModel(P, np.zeros((3, 2))))
    assert solution.gain == 0.0
    assert not solution.policy.any()


def test_deterministic_cycle():
    P = np.stack([np.roll(np.eye(3), 1, axis=1)] * 2)
    c = np.array([[1.0, 1.0], [3.0, 3.0], [5.0, 5.0]])
    model = MdpModel(P, c)
    gain, pi = policy_evaluate(model, [0, 0, 0])
    assert gain == pytest.approx(3.0)
    np.testing.assert_allclose(pi, [1 / 3] * 3)
    assert rvi_solve(model, RviConfig(aperiodicity=0.5)).gain == pytest.approx(3.0)


def test_periodic_optimum(cycle_model):
    gain, policy = brute_force_optimal(cycle_model)
    assert gain == pytest.approx(0.5)
    assert policy.tolist() == [SAMPLE, IDLE]
    solution = rvi_solve(cycle_model, RviConfig(aperiodicity=0.5))
    assert solution.gain == pytest.approx(0.5, abs=1e-8)
    assert solution.policy.tolist() == [SAMPLE, IDLE]


def test_bias_solves_the_original_poisson_equation(cycle_model):
    solution = rvi_solve(cycle_model, RviConfig(aperiodicity=0.5))
    rows = np.arange(2)
    P = cycle_model.P[solution.policy, rows]
    c = cycle_model.c[rows, solution.policy]
    np.testing.assert_allclose(solution.gain + solution.bias, c + P @ solution.bias, atol=1e-7)


def test_iteration_limit(cycle_model):
    with pytest.raises(ConvergenceError) as info:
        rvi_solve(cycle_model, RviConfig(max_iter=1))
    assert info.value.iterations == 1


def test_rvi_config_validation():
    with pytest.raises(ValidationError):
        RviConfig(span_tol=0.0)
    with pytest.raises(ValidationError):
        RviConfig(aperiodicity=1.0)
    with pytest.raises(ValidationError):
        rvi_solve(MdpModel(np.ones((2, 1, 1)), [[0.0, 0.0]]), RviConfig(reference_state=3))


def test_brute_force_refuses_large_models():
    n = 21
    model = MdpModel(np.stack([np.eye(n)] * 2), np.zeros((n, 2)))
    with pytest.raises(StateSpaceTooLarge):
        brute_force_optimal(model)
    with pytest.raises(StateSpaceTooLarge):
        brute_force_optimal(MdpModel(np.stack([np.eye(3)] * 2), np.zeros((3, 2))), max_states=2)


def test_evaluation_refuses_multichain_policies():
    model = MdpModel(np.stack([np.eye(2)] * 2), np.zeros((2, 2)))
    gain, pi = policy_evaluate(model, [0, 0])
    assert pi.tolist() == [1.0, 0.0]
    P = np.array([[[0.0, 0.5, 0.5], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]] * 2)
    with pytest.raises(MultichainError):
        policy_evaluate(MdpModel(P, np.zeros((3, 2))), [0, 0, 0])


def test_evaluation_checks_the_policy(cycle_model):
    with pytest.raises(ValidationError):
        policy_evaluate(cycle_model, [0])
    with pytest.raises(ValidationError):
        policy_evaluate(cycle_model, [0, 2])


def test_rvi_agrees_with_exhaustive_search():
    for model in random_models(7, dense=40, compiled=10):
        solution = rvi_solve(model)
        gain, _ = brute_force_optimal(model)
        assert solution.gain == pytest.approx(gain, abs=1e-6)
        assert policy_evaluate(model, solution.policy)[0] == pytest.approx(gain, abs=1e-6)


def test_gain_grows_and_rate_shrinks_with_price(lossy_flip_system, indicator_tensor):
    gains, rates = [], []
    for lam in (0.0, 0.5, 1.0, 2.0, 5.0):
        model = compile_sampling_mdp(lossy_flip_system, indicator_tensor, lam=lam)
        solution = rvi_solve(model)
        gain, pi = policy_evaluate(model, solution.policy)
        gains.append(gain)
        rates.append(float(pi[solution.policy == SAMPLE].sum()))
    assert all(b >= a - 1e-9 for a, b in zip(gains, gains[1:]))
    assert all(b <= a + 1e-12 for a, b in zip(rates, rates[1:]))
    assert rates[0] > 0
    assert rates[-1] == 0.0


def test_scaling_costs_scales_the_gain(lossy_flip_system, indicator_tensor):
    base = rvi_solve(compile_sampling_mdp(lossy_flip_system, indicator_tensor, lam=0.5))
    scaled = rvi_solve(compile_sampling_mdp(lossy_flip_system, indicator_tensor.scaled(3.0), lam=1.5))
    assert scaled.gain == pytest.approx(3.0 * base.gain, rel=1e-8)
    assert scaled.policy.tolist() == base.policy.tolist()


def test_zero_tensor_never_samples(markov_env_system):
    model = compile_sampling_mdp(markov_env_system, GoalTensor(np.zeros((2, 2, 2))), lam=1.0)
    solution = rvi_solve(model)
    assert solution.gain == 0.0
    assert not solution.policy.any()


def test_mmse_samples_on_mismatch(flip_system, indicator_tensor):
    policy = make_policy(OptimalMMSE(), flip_system, indicator_tensor, lam=0.5)
    assert policy.solution.policy.tolist() == [IDLE, SAMPLE, SAMPLE, IDLE]


def test_free_sampling_of_aoii_recovers_the_mismatch_rule(reference_cfg):
    cap = 16
    system = SystemModel(reference_cfg.system.source, reference_cfg.system.delta,
                         env=EnvModel('derived-age', cap=cap, age='aos'))
    tensor = embed_aoii(PenaltyFn('linear'), ErrorGapFn.indicator(system.n_status), cap)
    model = compile_sampling_mdp(system, tensor, lam=0.0)
    solution = rvi_solve(model)
    assert solution.gain == pytest.approx(0.0, abs=1e-12)
    for s in range(model.n_states):
        x, x_hat, phi = model.codec.decode(s)
        if x != x_hat and phi == 0:
            # never entered from the synchronized start
            continue
        assert solution.action(s) == (SAMPLE if x != x_hat else IDLE), (x, x_hat, phi)
