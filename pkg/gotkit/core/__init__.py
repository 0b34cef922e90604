# -*- coding: utf-8 -*-


from .metrics import (
    StatusSpace, PenaltyFn, ErrorGapFn, EnvWeightFn, SlotRecord, Trajectory,
    aoi_process, aos_process, voi, mse, aoii, uoi, long_run_average, evaluate_all,
)
from .tensor import (
    GoalTensor, CostModel, build_got, step5_difference, Step5Difference,
    embed_aoi, embed_voi, embed_aos, embed_mse, embed_aoii, embed_uoi, got_lookup,
    check_diagonal_symmetry, check_multiplicative_env, check_content_independent,
    MultiplicativeEnv, StructureReport, classify,
)
from .system import (
    IDLE, SAMPLE, Observation, SourceModel, EnvModel, ChannelModel, SystemModel,
    SimConfig, SimResult, ExactAverage, step, simulate, simulate_replications, exact_average, derive_seed,
)
from .mdp import MdpModel, RviConfig, MdpSolution, compile_sampling_mdp, rvi_solve, policy_evaluate, brute_force_optimal
from .policies import (
    PolicyState, PolicyKind, Uniform, AgeAware, ChangeAware, OptimalMMSE, OptimalAoII, OptimalGoT,
    POLICY_KINDS, decide, make_policy,
)
