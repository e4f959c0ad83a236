"""Block-structured networked systems and channel-availability strategies.

A system is a network of N subsystems.  Subsystem i carries n_i states and
m_i control inputs (m_i = 0 means the subsystem is uncontrolled).  The plant
couples subsystems through A blocks; the controller feeds remote states back
through K blocks, and each off-diagonal feedback term K_ij x_j travels over a
communication channel that an attacker can sever.  Severing is modeled by a
channel-availability matrix alpha: entry alpha[i, j] scales the gain block
K_ij, 1 meaning intact and 0 meaning lost.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class BlockShapeError(ValueError):
    """A block matrix does not have the shape required by the dimensions."""


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class BlockSystem:
    """Plant + structured controller in block form.

    Attributes
    ----------
    state_dims : tuple of int
        Per-subsystem state dimensions n_i (each >= 1).
    input_dims : tuple of int
        Per-subsystem input dimensions m_i (each >= 0).
    a_blocks : tuple of tuple of ndarray
        a_blocks[i][j] is the n_i x n_j plant coupling block.
    b_blocks : tuple of ndarray
        b_blocks[i] is the n_i x m_i input block.
    k_blocks : tuple of tuple of ndarray
        k_blocks[i][j] is the m_i x n_j feedback gain block.

    Instances are immutable: all stored arrays are read-only copies, so a
    system can be shared freely across threads and worker processes.
    """

    state_dims: tuple[int, ...]
    input_dims: tuple[int, ...]
    a_blocks: tuple[tuple[np.ndarray, ...], ...]
    b_blocks: tuple[np.ndarray, ...]
    k_blocks: tuple[tuple[np.ndarray, ...], ...]

    @classmethod
    def from_blocks(cls, state_dims, input_dims, a_blocks, b_blocks, k_blocks) -> "BlockSystem":
        """Build a system from nested array-likes, copying and freezing them.

        Empty blocks (those with zero rows or columns, as arise when
        m_i = 0) may be passed as [] and are reshaped to their canonical
        empty shape; all other blocks keep the shape they were given so
        that :func:`validate` can report mismatches.
        """
        sd = tuple(int(d) for d in state_dims)
        md = tuple(int(d) for d in input_dims)
        n_sub = len(sd)

        def coerce(block, rows, cols):
            arr = np.asarray(block, dtype=float)
            if arr.size == 0 and rows * cols == 0:
                return _frozen(arr.reshape(rows, cols))
            return _frozen(arr)

        ab = tuple(tuple(coerce(a_blocks[i][j], sd[i], sd[j]) for j in range(n_sub))
                   for i in range(n_sub))
        bb = tuple(coerce(b_blocks[i], sd[i], md[i]) for i in range(n_sub))
        kb = tuple(tuple(coerce(k_blocks[i][j], md[i], sd[j]) for j in range(n_sub))
                   for i in range(n_sub))
        return cls(sd, md, ab, bb, kb)

    @property
    def n_subsystems(self) -> int:
        return len(self.state_dims)

    @property
    def n_states(self) -> int:
        return sum(self.state_dims)

    @property
    def n_inputs(self) -> int:
        return sum(self.input_dims)

    @cached_property
    def state_offsets(self) -> tuple[int, ...]:
        return tuple(np.cumsum((0,) + self.state_dims[:-1]).tolist())

    @cached_property
    def input_offsets(self) -> tuple[int, ...]:
        return tuple(np.cumsum((0,) + self.input_dims[:-1]).tolist())

    @cached_property
    def a_matrix(self) -> np.ndarray:
        """Assembled n x n plant matrix."""
        validate(self)
        return _frozen(np.block([[self.a_blocks[i][j] for j in range(self.n_subsystems)]
                                 for i in range(self.n_subsystems)]))

    @cached_property
    def b_matrix(self) -> np.ndarray:
        """Assembled n x m block-diagonal input matrix."""
        validate(self)
        out = np.zeros((self.n_states, self.n_inputs))
        for i in range(self.n_subsystems):
            r, c = self.state_offsets[i], self.input_offsets[i]
            out[r:r + self.state_dims[i], c:c + self.input_dims[i]] = self.b_blocks[i]
        return _frozen(out)

    @cached_property
    def k_matrix(self) -> np.ndarray:
        """Assembled m x n gain matrix (all channels intact)."""
        validate(self)
        return _frozen(np.block([[self.k_blocks[i][j] for j in range(self.n_subsystems)]
                                 for i in range(self.n_subsystems)]))


def validate(sys: BlockSystem) -> None:
    """Check every block-shape invariant, raising on the first violation.

    Raises
    ------
    BlockShapeError
        Naming the offending block (1-based indices) with expected and
        actual shapes.
    """
    n_sub = sys.n_subsystems
    if n_sub < 1:
        raise BlockShapeError("a system needs at least one subsystem")
    if len(sys.input_dims) != n_sub:
        raise BlockShapeError(
            f"input_dims has {len(sys.input_dims)} entries, expected {n_sub}")
    for i, d in enumerate(sys.state_dims):
        if d < 1:
            raise BlockShapeError(f"state dimension n_{i + 1} = {d} must be >= 1")
    for i, d in enumerate(sys.input_dims):
        if d < 0:
            raise BlockShapeError(f"input dimension m_{i + 1} = {d} must be >= 0")
    if len(sys.a_blocks) != n_sub or any(len(row) != n_sub for row in sys.a_blocks):
        raise BlockShapeError("A_blocks must be an N x N grid of blocks")
    if len(sys.b_blocks) != n_sub:
        raise BlockShapeError("B_blocks must have one block per subsystem")
    if len(sys.k_blocks) != n_sub or any(len(row) != n_sub for row in sys.k_blocks):
        raise BlockShapeError("K_blocks must be an N x N grid of blocks")

    for i in range(n_sub):
        for j in range(n_sub):
            want = (sys.state_dims[i], sys.state_dims[j])
            got = sys.a_blocks[i][j].shape
            if got != want:
                raise BlockShapeError(f"A[{i + 1},{j + 1}] expected {want}, got {got}")
            if not np.all(np.isfinite(sys.a_blocks[i][j])):
                raise BlockShapeError(f"A[{i + 1},{j + 1}] has non-finite entries")
        want = (sys.state_dims[i], sys.input_dims[i])
        got = sys.b_blocks[i].shape
        if got != want:
            raise BlockShapeError(f"B_{i + 1} expected {want}, got {got}")
        if not np.all(np.isfinite(sys.b_blocks[i])):
            raise BlockShapeError(f"B_{i + 1} has non-finite entries")
        for j in range(n_sub):
            want = (sys.input_dims[i], sys.state_dims[j])
            got = sys.k_blocks[i][j].shape
            if got != want:
                raise BlockShapeError(f"K[{i + 1},{j + 1}] expected {want}, got {got}")
            if not np.all(np.isfinite(sys.k_blocks[i][j])):
                raise BlockShapeError(f"K[{i + 1},{j + 1}] has non-finite entries")


@dataclass(frozen=True)
class AttackStrategy:
    """Binary channel-availability matrix with unit diagonal."""

    alpha: np.ndarray

    def __post_init__(self):
        a = _frozen(self.alpha)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("alpha must be a square matrix")
        if not np.all((a == 0.0) | (a == 1.0)):
            raise ValueError("pure strategy entries must be 0 or 1")
        if not np.all(np.diag(a) == 1.0):
            raise ValueError("diagonal entries must equal 1")
        object.__setattr__(self, "alpha", a)

    @classmethod
    def all_ones(cls, n_subsystems: int) -> "AttackStrategy":
        return cls(np.ones((n_subsystems, n_subsystems)))

    @classmethod
    def attacking(cls, n_subsystems: int, channels) -> "AttackStrategy":
        """Strategy with alpha[i-1, j-1] = 0 for each 1-based (dst, src) pair."""
        a = np.ones((n_subsystems, n_subsystems))
        for dst, src in channels:
            if dst == src:
                raise ValueError("cannot attack a diagonal entry")
            a[dst - 1, src - 1] = 0.0
        return cls(a)

    @property
    def attacked_channels(self) -> tuple[tuple[int, int], ...]:
        """1-based (dst, src) pairs with alpha = 0, in row-major order."""
        rows, cols = np.nonzero(self.alpha == 0.0)
        return tuple((int(r) + 1, int(c) + 1) for r, c in zip(rows, cols))


@dataclass(frozen=True)
class RelaxedStrategy:
    """Fractional channel-availability matrix: off-diagonals in [0, 1]."""

    alpha: np.ndarray

    def __post_init__(self):
        a = _frozen(self.alpha)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("alpha must be a square matrix")
        if np.min(a) < 0.0 or np.max(a) > 1.0:
            raise ValueError("relaxed strategy entries must lie in [0, 1]")
        if not np.all(np.diag(a) == 1.0):
            raise ValueError("diagonal entries must equal 1")
        object.__setattr__(self, "alpha", a)

    @classmethod
    def all_ones(cls, n_subsystems: int) -> "RelaxedStrategy":
        return cls(np.ones((n_subsystems, n_subsystems)))


def as_alpha(strategy, n_subsystems: int) -> np.ndarray:
    """Coerce a strategy object or raw matrix to a validated alpha array."""
    if isinstance(strategy, (AttackStrategy, RelaxedStrategy)):
        a = strategy.alpha
    else:
        a = RelaxedStrategy(np.asarray(strategy, dtype=float)).alpha
    if a.shape != (n_subsystems, n_subsystems):
        raise ValueError(
            f"strategy shape {a.shape} does not match N = {n_subsystems}")
    return a


def masked_gain(sys: BlockSystem, strategy) -> np.ndarray:
    """Gain matrix with block (i, j) scaled by alpha[i, j]."""
    alpha = as_alpha(strategy, sys.n_subsystems)
    n_sub = sys.n_subsystems
    return np.block([
        [alpha[i, j] * sys.k_blocks[i][j] for j in range(n_sub)]
        for i in range(n_sub)
    ]).reshape(sys.n_inputs, sys.n_states)


def closed_loop(sys: BlockSystem, strategy) -> np.ndarray:
    """Closed-loop matrix A + B (K masked by alpha).

    At alpha = all-ones this is the nominal closed loop; zeroing alpha[i, j]
    removes the remote feedback term B_i K_ij x_j.
    """
    validate(sys)
    return sys.a_matrix + sys.b_matrix @ masked_gain(sys, strategy)


@dataclass(frozen=True)
class LiftedForm:
    """Affine parameterization of the closed loop in the alpha entries.

    ``k_tilde`` is the m x (n N) block-diagonal stacking whose j-th diagonal
    block is the row [K_j1 | ... | K_jN]; ``selector(i, j)`` places an
    n_j x n_j identity so that sum_ij alpha[i,j] * M_ij reproduces the lifted
    alpha.  Then A + B @ k_tilde @ alpha_tilde equals the masked closed loop
    exactly, for any fractional alpha.
    """

    n_subsystems: int
    state_dims: tuple[int, ...]
    k_tilde: np.ndarray

    @cached_property
    def _offsets(self) -> tuple[int, ...]:
        return tuple(np.cumsum((0,) + self.state_dims[:-1]).tolist())

    @property
    def n_states(self) -> int:
        return sum(self.state_dims)

    def selector(self, dst: int, src: int) -> np.ndarray:
        """Selector M_ij for 1-based (dst, src), shaped (n N) x n."""
        n = self.n_states
        i, j = dst - 1, src - 1
        off = self._offsets[j]
        out = np.zeros((n * self.n_subsystems, n))
        rows = i * n + off
        out[rows:rows + self.state_dims[j], off:off + self.state_dims[j]] = np.eye(
            self.state_dims[j])
        return out

    def alpha_tilde(self, strategy) -> np.ndarray:
        """Lifted (n N) x n availability matrix for the given strategy."""
        alpha = as_alpha(strategy, self.n_subsystems)
        n = self.n_states
        out = np.zeros((n * self.n_subsystems, n))
        for i in range(self.n_subsystems):
            for j in range(self.n_subsystems):
                off = self._offsets[j]
                rows = i * n + off
                out[rows:rows + self.state_dims[j], off:off + self.state_dims[j]] = (
                    alpha[i, j] * np.eye(self.state_dims[j]))
        return out


def lifted_form(sys: BlockSystem) -> LiftedForm:
    """Build the lifted gain and selector family for ``sys``."""
    validate(sys)
    n_sub = sys.n_subsystems
    n = sys.n_states
    k_tilde = np.zeros((sys.n_inputs, n * n_sub))
    for j in range(n_sub):
        row = sys.input_offsets[j]
        k_row = np.hstack([sys.k_blocks[j][l] for l in range(n_sub)]) \
            if sys.input_dims[j] > 0 else np.zeros((0, n))
        k_tilde[row:row + sys.input_dims[j], j * n:(j + 1) * n] = k_row
    return LiftedForm(n_sub, sys.state_dims, _frozen(k_tilde))
