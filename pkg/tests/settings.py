from jtnoma.alm import AlmSettings
from jtnoma.algorithm import AlgorithmSettings
from jtnoma.solvers import PowerSolveConfig, ScheduleSolveConfig

# Shared sizes of randomly drawn micro instances.
MICRO = {"num_sbs": 2, "num_sut": 2, "num_put": 1, "num_subcarriers": 2}
# One subcarrier: the SIC cap keeps every schedule within the oracle grid limit.
ORACLE_MICRO = {"num_sbs": 2, "num_sut": 2, "num_put": 1, "num_subcarriers": 1}
# A lone SUT that two SBSs can serve jointly.
JT_MICRO = {"num_sbs": 2, "num_sut": 1, "num_put": 1, "num_subcarriers": 1}

# Relative agreement of the model with the scalar reference.
REFERENCE_RTOL = 1e-12

# Oracle grid resolution used in tests.
GRID_POINTS = 8
# MOS the full-resolution oracle may trail a solver by, from the grid spacing.
ORACLE_SLACK = 2e-2

# Statistical acceptance protocol.
ACCEPTANCE_SEEDS = list(range(50))
ORACLE_RATIO = 0.95
SCHEME_DOMINANCE_SHARE = 0.8


def fast_alm(**overrides) -> AlmSettings:
    return AlmSettings(**{"max_outer_iters": 30, "max_inner_iters": 100, **overrides})


def fast_settings(max_outer_iters: int = 5) -> AlgorithmSettings:
    return AlgorithmSettings(
        max_outer_iters=max_outer_iters,
        power=PowerSolveConfig(alm=fast_alm()),
        schedule=ScheduleSolveConfig(alm=fast_alm()),
    )
