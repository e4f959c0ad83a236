import numpy as np
import pytest

from gridres import AttackStrategy, BlockSystem, closed_loop, spectral_abscissa
from gridres.cli import builtin


@pytest.fixture(scope="session")
def motivating() -> BlockSystem:
    return builtin("motivating")


def random_system(seed: int, n_sub: int | None = None, gain_scale: float = 0.4,
                  margin: float = 0.1, allow_uncontrolled: bool = True) -> BlockSystem:
    """Seeded random block system with nominal abscissa exactly -margin.

    Dimensions: N in {2, 3, 4} unless given, n_i in {1, 2, 3}, m_i in
    {0, 1, 2} (0 only when allow_uncontrolled).  The diagonal A blocks are
    shifted so the all-ones closed loop has spectral abscissa -margin;
    attacked configurations may or may not stay stable.
    """
    rng = np.random.default_rng(seed)
    n = int(n_sub) if n_sub is not None else int(rng.integers(2, 5))
    state_dims = [int(d) for d in rng.integers(1, 4, size=n)]
    low = 0 if allow_uncontrolled else 1
    input_dims = [int(d) for d in rng.integers(low, 3, size=n)]
    if allow_uncontrolled and all(m == 0 for m in input_dims):
        input_dims[0] = 1
    a_blocks = [[rng.normal(scale=0.5, size=(state_dims[i], state_dims[j]))
                 for j in range(n)] for i in range(n)]
    b_blocks = [rng.normal(scale=1.0, size=(state_dims[i], input_dims[i]))
                for i in range(n)]
    k_blocks = [[rng.normal(scale=gain_scale, size=(input_dims[i], state_dims[j]))
                 for j in range(n)] for i in range(n)]
    sys0 = BlockSystem.from_blocks(state_dims, input_dims, a_blocks, b_blocks, k_blocks)
    sigma = spectral_abscissa(closed_loop(sys0, AttackStrategy.all_ones(n)))
    for i in range(n):
        a_blocks[i][i] = a_blocks[i][i] - (sigma + margin) * np.eye(state_dims[i])
    return BlockSystem.from_blocks(state_dims, input_dims, a_blocks, b_blocks, k_blocks)


def gentle_system(seed: int, n_sub: int = 2, state_dim: int = 2,
                  gain_scale: float = 0.05) -> BlockSystem:
    """Strongly stable system with weak gains; every small attack stays stable."""
    rng = np.random.default_rng(seed)
    state_dims = [state_dim] * n_sub
    input_dims = [state_dim] * n_sub
    a_blocks = [[rng.normal(scale=0.05, size=(state_dim, state_dim))
                 for _ in range(n_sub)] for _ in range(n_sub)]
    for i in range(n_sub):
        a_blocks[i][i] = a_blocks[i][i] - np.eye(state_dim)
    b_blocks = [np.eye(state_dim) for _ in range(n_sub)]
    k_blocks = [[rng.normal(scale=gain_scale, size=(state_dim, state_dim))
                 for _ in range(n_sub)] for _ in range(n_sub)]
    return BlockSystem.from_blocks(state_dims, input_dims, a_blocks, b_blocks, k_blocks)


def random_pure_strategy(seed: int, sys: BlockSystem) -> AttackStrategy:
    """Random pure strategy attacking a random subset of the system's channels."""
    from gridres import channels

    rng = np.random.default_rng(seed)
    chans = channels(sys)
    if not chans:
        return AttackStrategy.all_ones(sys.n_subsystems)
    count = int(rng.integers(0, len(chans) + 1))
    picks = rng.choice(len(chans), size=count, replace=False)
    return AttackStrategy.attacking(
        sys.n_subsystems, [(chans[p].dst, chans[p].src) for p in picks])
