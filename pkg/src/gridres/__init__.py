"""Resilience analysis of structured feedback controllers under channel-loss attacks."""

from .certify import (
    Assumption1Result,
    LyapunovSolution,
    SdpSettings,
    SdpSolverError,
    assumption1_check,
    common_lyapunov,
    solve_g,
)
from .model import (
    AttackStrategy,
    BlockShapeError,
    BlockSystem,
    LiftedForm,
    RelaxedStrategy,
    closed_loop,
    lifted_form,
    masked_gain,
    validate,
)
from .pathfollow import (
    CriticalityRanking,
    NoZeroCrossingError,
    PathFollowError,
    PathIterate,
    PathSettings,
    PathTrace,
    gradient_g,
    k_attack_from_ranking,
    path_follow,
    project_box,
    rank_channels,
)
from .resilience import (
    AttackReport,
    Channel,
    IndexAnomalyWarning,
    NominalUnstableError,
    SweepVerdict,
    attack_count,
    channels,
    enumerate_attacks,
    exhaustive_verdict,
    resilience_index,
    sweep_attacks,
    worst_attack,
)
from .spectra import Eigenpair, EigensolverError, max_eigpair_sym, spectral_abscissa

__version__ = "0.1.0"

__all__ = [
    "AttackReport",
    "AttackStrategy",
    "Assumption1Result",
    "BlockShapeError",
    "BlockSystem",
    "Channel",
    "CriticalityRanking",
    "Eigenpair",
    "EigensolverError",
    "IndexAnomalyWarning",
    "LiftedForm",
    "LyapunovSolution",
    "NoZeroCrossingError",
    "NominalUnstableError",
    "PathFollowError",
    "PathIterate",
    "PathSettings",
    "PathTrace",
    "RelaxedStrategy",
    "SdpSettings",
    "SdpSolverError",
    "SweepVerdict",
    "assumption1_check",
    "attack_count",
    "channels",
    "closed_loop",
    "common_lyapunov",
    "enumerate_attacks",
    "exhaustive_verdict",
    "gradient_g",
    "k_attack_from_ranking",
    "lifted_form",
    "masked_gain",
    "max_eigpair_sym",
    "path_follow",
    "project_box",
    "rank_channels",
    "resilience_index",
    "solve_g",
    "spectral_abscissa",
    "sweep_attacks",
    "validate",
    "worst_attack",
]
