from __future__ import annotations

import logging
import typing
from dataclasses import dataclass

import numpy as np

from ..core.formats import write_csv
from ..core.mdp import MdpModel, brute_force_optimal, compile_sampling_mdp, policy_evaluate, rvi_solve
from ..core.metrics import (
    EnvWeightFn,
    ErrorGapFn,
    PenaltyFn,
    Trajectory,
    aoi_process,
    aoii,
    aos_process,
    mse,
    uoi,
)
from ..core.system import (
    ChannelModel,
    EnvModel,
    SourceModel,
    SystemModel,
    exact_average,
    make_rng,
    simulate_replications,
)
from ..core.tensor import (
    CostModel,
    GoalTensor,
    check_diagonal_symmetry,
    check_multiplicative_env,
    embed_aoi,
    embed_aoii,
    embed_mse,
    embed_uoi,
    step5_difference,
)
from ..exceptions import GotkitError
from .compare import Estimate
from .config import REFERENCE_CONFIG, ExperimentConfig, validate_config
from .sweep import DEFAULT_LAMBDAS, run_sweep

log = logging.getLogger(__name__)

SUITES = ('tensor', 'solver', 'simulation', 'reference')
INJECTIONS = ('asymmetry',)
TABLE_COLUMNS = ('suite', 'check', 'status', 'detail')

SELFCHECK_SEED = 20240917
SELFCHECK_REPLICATIONS = 20
SELFCHECK_HORIZON = 100000
METRIC_TRAJECTORIES = 100
METRIC_LENGTH = 10000
# (statuses, environment states) of the compiled solver models
COMPILED_SHAPES = ((3, 1), (2, 1), (2, 2), (2, 3))
TOL = 1e-9


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str = ''

    @property
    def status(self) -> str:
        return 'PASS' if self.passed else 'FAIL'


class _Checks:
    """Collects results; a check that raises fails with the error as detail."""

    def __init__(self):
        self.results: typing.List[CheckResult] = []

    def run(self, suite: str, name: str, fn: typing.Callable[[], typing.Tuple[bool, str]]) -> None:
        try:
            passed, detail = fn()
        except (GotkitError, ValueError, ArithmeticError) as e:
            passed, detail = False, f'{type(e).__name__}: {e}'
        log.debug(f'{suite}/{name}: {"PASS" if passed else "FAIL"} {detail}')
        self.results.append(CheckResult(suite, name, bool(passed), detail))


# Tensor reductions

def _relative_gap(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.abs(a / a.max() - b / b.max()).max())


def _tensor_suite(checks: _Checks, cfg: ExperimentConfig, inject: typing.Optional[str]) -> None:
    embedding = cfg.system.status.embedding
    n_s = len(embedding)
    cap = 16
    f = PenaltyFn('linear')
    g = ErrorGapFn.indicator(n_s)
    w = EnvWeightFn([0.5, 1.0, 2.0, 4.0])

    def mse_symmetric():
        T = embed_mse(embedding)
        if inject == 'asymmetry':
            values = T.values.copy()
            values[0, n_s - 1, 0] += 10 * TOL * max(1.0, values.max())
            T = GoalTensor(values)
        return check_diagonal_symmetry(T, TOL), f'max entry {T.values.max():g}'

    def aoii_multiplicative():
        env = check_multiplicative_env(embed_aoii(f, g, cap), TOL)
        if env is None:
            return False, 'no factorization found'
        gap = _relative_gap(env.coefficients, f(np.arange(cap + 1)))
        return gap <= TOL, f'coefficient error {gap:.3e}'

    def uoi_multiplicative():
        env = check_multiplicative_env(embed_uoi(w, ErrorGapFn.squared(embedding)), TOL)
        if env is None:
            return False, 'no factorization found'
        gap = _relative_gap(env.coefficients, w.table)
        return gap <= TOL, f'coefficient error {gap:.3e}'

    def perturbed_rejected():
        T = embed_aoii(f, g, cap)
        values = T.values.copy()
        values[1, 0, 3] += 10 * TOL * values.max()
        return check_multiplicative_env(GoalTensor(values), TOL) is None, 'one entry off by 10x tolerance'

    def zero_gain_formulas_agree():
        rng = make_rng(SELFCHECK_SEED)
        cm = CostModel(rng.uniform(0, 50, (n_s, 1)), np.zeros((n_s, 1, n_s)), rng.uniform(0, 10, n_s),
                       tuple(range(n_s)))
        diff = step5_difference(cm)
        return diff.identical, f'{diff.differing_entries} differing entries'

    def reference_formulas_differ():
        if cfg.cost_model is None:
            return True, 'config has no cost model'
        diff = step5_difference(cfg.cost_model)
        return not diff.identical, f'{diff.differing_entries} differing entries, max {diff.max_abs_difference:g}'

    def metrics_match_tensors():
        rng = make_rng(SELFCHECK_SEED + 1)
        worst = 0.0
        for _ in range(METRIC_TRAJECTORIES):
            n = int(rng.integers(2, 6))
            n_v = int(rng.integers(1, 9))
            length = METRIC_LENGTH
            traj = Trajectory(
                x=rng.integers(0, n, length), x_hat=rng.integers(0, n, length), phi=rng.integers(0, n_v, length),
                n_status=n, n_env=n_v, embedding=rng.uniform(0, 10, n),
            )
            table = rng.uniform(0, 3, (n, n))
            np.fill_diagonal(table, 0.0)
            weights = EnvWeightFn(rng.uniform(0, 5, n_v))
            aoi, aos = aoi_process(traj), aos_process(traj)
            pairs = [
                (aoi, embed_aoi(length, n).values[traj.x, traj.x_hat, aoi]),
                (mse(traj), embed_mse(traj.embedding).values[traj.x, traj.x_hat, 0]),
            ]
            for gap_fn in (ErrorGapFn.indicator(n), ErrorGapFn(table)):
                pairs.append((aoii(traj, f, gap_fn), embed_aoii(f, gap_fn, length).values[traj.x, traj.x_hat, aos]))
                pairs.append((uoi(traj, weights, gap_fn),
                              embed_uoi(weights, gap_fn).values[traj.x, traj.x_hat, traj.phi]))
            for metric, lookup in pairs:
                scale = np.maximum(np.abs(metric), np.finfo(float).tiny)
                worst = max(worst, float((np.abs(metric - lookup) / scale).max()))
        return worst <= 1e-12, f'{METRIC_TRAJECTORIES} trajectories, max relative error {worst:.3e}'

    checks.run('tensor', 'mse_symmetric', mse_symmetric)
    checks.run('tensor', 'aoii_multiplicative', aoii_multiplicative)
    checks.run('tensor', 'uoi_multiplicative', uoi_multiplicative)
    checks.run('tensor', 'perturbed_slice_rejected', perturbed_rejected)
    checks.run('tensor', 'zero_gain_formulas_agree', zero_gain_formulas_agree)
    checks.run('tensor', 'reference_formulas_differ', reference_formulas_differ)
    checks.run('tensor', 'metrics_match_tensors', metrics_match_tensors)


# Solver

def random_models(seed: int, dense: int = 10, compiled: int = 50) -> typing.List[MdpModel]:
    """
        Dense random MDPs plus sampling MDPs of random small systems.

        The compiled models cycle through three statuses with a constant
        environment and two statuses with a one, two or three state Markov
        environment, so none has more than 12 states.
    """
    rng = make_rng(seed)
    models = []
    for _ in range(dense):
        n = int(rng.integers(2, 9))
        P = rng.dirichlet(np.ones(n), size=(2, n))
        models.append(MdpModel(P, rng.uniform(0, 10, (n, 2))))
    for i in range(compiled):
        n_s, n_v = COMPILED_SHAPES[i % len(COMPILED_SHAPES)]
        env = EnvModel() if n_v == 1 else EnvModel('markov', q=rng.dirichlet(np.ones(n_v), size=n_v))
        system = SystemModel(
            SourceModel(rng.dirichlet(np.ones(n_s), size=(n_s, n_s))),
            tuple(range(n_s)),
            ChannelModel(float(rng.uniform(0, 0.5))),
            env,
        )
        tensor = GoalTensor(rng.uniform(0, 10, (n_s, n_s, n_v)))
        models.append(compile_sampling_mdp(system, tensor, lam=float(rng.uniform(0, 2))))
    return models


def _solver_suite(checks: _Checks, cfg: ExperimentConfig) -> None:
    models = random_models(SELFCHECK_SEED)
    solutions = []

    def rvi_matches_brute_force():
        worst = 0.0
        for model in models:
            solution = rvi_solve(model)
            solutions.append(solution)
            gain, _ = brute_force_optimal(model)
            worst = max(worst, abs(solution.gain - gain))
        largest = max(model.n_states for model in models)
        return worst <= 1e-6, f'{len(models)} models up to {largest} states, max gain gap {worst:.3e}'

    def evaluation_matches_rvi():
        worst = 0.0
        for model, solution in zip(models, solutions):
            gain, _ = policy_evaluate(model, solution.policy)
            worst = max(worst, abs(gain - solution.gain))
        return worst <= 1e-8, f'max gap {worst:.3e}'

    def zero_tensor_never_samples():
        zero = GoalTensor(np.zeros((cfg.system.n_status, cfg.system.n_status, cfg.system.n_env)))
        solution = rvi_solve(compile_sampling_mdp(cfg.system, zero, lam=1.0), cfg.solver)
        return not solution.policy.any() and abs(solution.gain) <= TOL, f'gain {solution.gain:g}'

    checks.run('solver', 'rvi_matches_brute_force', rvi_matches_brute_force)
    checks.run('solver', 'evaluation_matches_rvi', evaluation_matches_rvi)
    checks.run('solver', 'zero_tensor_never_samples', zero_tensor_never_samples)


# Monte-Carlo against exact

def _simulation_suite(checks: _Checks, cfg: ExperimentConfig, workers, horizon: int, replications: int) -> None:
    for spec in cfg.policies:
        def agreement(spec=spec):
            policy = cfg.build_policy(spec)
            exact = exact_average(cfg.system, cfg.tensor, policy, spec.lam)
            runs = simulate_replications(cfg.system, cfg.tensor, policy, horizon, replications, cfg.seed,
                                         spec.lam, workers)
            loss = Estimate.from_samples([r.average_cost for r in runs])
            rate = Estimate.from_samples([r.sample_rate for r in runs])
            ok = loss.covers(exact.average_cost) and rate.covers(exact.sample_rate)
            return ok, (f'loss {loss.mean:.6g}±{loss.se:.2g} vs {exact.average_cost:.6g}; '
                        f'rate {rate.mean:.4g}±{rate.se:.2g} vs {exact.sample_rate:.4g}')

        checks.run('simulation', spec.slug, agreement)


# Reference scenario ordering

def _reference_suite(checks: _Checks, cfg: ExperimentConfig) -> None:
    got = [spec for spec in cfg.policies if spec.kind == 'optimal_got']
    if not got:
        checks.run('reference', 'optimal_got_configured', lambda: (False, 'config lists no optimal_got policy'))
        return
    got = got[0]
    exact = {}

    def evaluate():
        for spec in cfg.policies:
            exact[spec.name] = exact_average(cfg.system, cfg.tensor, cfg.build_policy(spec), spec.lam)
        return True, f'{len(exact)} policies'

    def minimal_loss():
        mine = exact[got.name].average_cost
        others = [e.average_cost for name, e in exact.items() if name != got.name]
        strict = sum(other - mine >= TOL for other in others)
        ok = all(mine <= other + TOL for other in others) and strict >= min(3, len(others))
        return ok, f'loss {mine:.10g}, strictly lower than {strict} of {len(others)}'

    def sparsest_rate():
        mine = exact[got.name].sample_rate
        others = {name: e.sample_rate for name, e in exact.items() if name != got.name}
        worse = [name for name, rate in others.items() if mine > rate + 1e-12]
        return not worse, f'rate {mine:.6g}' + (f', denser than {", ".join(worse)}' if worse else '')

    def lambda_monotone():
        rows = run_sweep(cfg, got.name, DEFAULT_LAMBDAS)
        losses = [r[1] for r in rows]
        rates = [r[3] for r in rows]
        ok = all(b >= a - TOL for a, b in zip(losses, losses[1:])) and \
            all(b <= a + 1e-12 for a, b in zip(rates, rates[1:]))
        return ok, 'rates ' + ', '.join(f'{r:.4g}' for r in rates)

    checks.run('reference', 'exact_evaluation', evaluate)
    if len(exact) == len(cfg.policies):
        checks.run('reference', 'optimal_got_minimal_loss', minimal_loss)
        checks.run('reference', 'optimal_got_sparsest_rate', sparsest_rate)
    checks.run('reference', 'lambda_monotone', lambda_monotone)


def run_selfcheck(config_path: typing.Optional[str] = None, inject: typing.Optional[str] = None,
                  suites: typing.Sequence[str] = SUITES, workers: typing.Optional[int] = None,
                  horizon: int = SELFCHECK_HORIZON,
                  replications: int = SELFCHECK_REPLICATIONS) -> typing.List[CheckResult]:
    """
        Run the property suites and collect one result per check.

        Failures are results, not exceptions. ``inject='asymmetry'`` breaks the
        symmetric fixture of the tensor suite so that its check must fail. ``horizon`` and
        ``replications`` size the Monte-Carlo suite.
    """
    cfg = validate_config(config_path or REFERENCE_CONFIG)
    checks = _Checks()
    if 'tensor' in suites:
        _tensor_suite(checks, cfg, inject)
    if 'solver' in suites:
        _solver_suite(checks, cfg)
    if 'simulation' in suites:
        _simulation_suite(checks, cfg, workers, horizon, replications)
    if 'reference' in suites:
        _reference_suite(checks, cfg)
    failed = sum(not r.passed for r in checks.results)
    log.info(f'{len(checks.results) - failed} of {len(checks.results)} checks passed')
    return checks.results


def write_table(stream, results: typing.Sequence[CheckResult]) -> None:
    write_csv(stream, TABLE_COLUMNS, ((r.suite, r.name, r.status, r.detail) for r in results))
