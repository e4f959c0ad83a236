"""Projected gradient ascent of the Lyapunov metric over relaxed strategies.

The ascent maximizes g over the polytope of fractional availability
matrices, starting from all-ones.  Each iteration solves the capped
Lyapunov SDP for the current point (the dual update), extracts an extremal
direction x of the resulting matrix pencil, moves along the Frobenius-
normalized sensitivity of the Rayleigh objective, and projects back onto
the polytope.  The recorded objective is that Rayleigh value; with
backtracking enabled the sequence is nondecreasing, and the run stops the
first time it reaches zero: past that point no capped certificate can
decrease along the path, which is the signature of a destabilizing
direction.

Channels are then ranked by their availability at the zero-crossing
iterate: the lower the remaining availability, the more critical the
channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .certify import SdpSettings, SdpSolverError, solve_g
from .model import AttackStrategy, BlockSystem, RelaxedStrategy, closed_loop, lifted_form, validate
from .resilience import Channel, channels
from .spectra import apply_sign_convention

#: Step-size floor for the backtracking halving loop.
_STEP_FLOOR = 1e-8
#: Gradient norms below this are treated as exactly zero (no normalization).
_GRAD_ZERO = 1e-12
#: Relative eigenvalue gap under which the top eigenspace counts as tied.
_EIG_TIE = 1e-6


class PathFollowError(RuntimeError):
    """SDP failure mid-path; the partial trace is attached as ``trace``.

    The attached trace carries terminal_status "aborted", a value that
    never appears on a completed run.
    """

    def __init__(self, message: str, trace: "PathTrace"):
        super().__init__(message)
        self.trace = trace


class NoZeroCrossingError(RuntimeError):
    """The trace never reached zero, so there is no iterate to rank from."""


@dataclass(frozen=True)
class PathSettings:
    """Step size, stopping tolerance and iteration budget for the ascent."""

    step: float = 0.05
    tol: float = 1e-6
    max_iter: int = 500
    backtracking: bool = True
    sdp: SdpSettings = field(default_factory=SdpSettings)

    def __post_init__(self):
        if self.step <= 0 or self.tol <= 0 or self.max_iter <= 0:
            raise ValueError("step, tol and max_iter must be positive")


@dataclass(frozen=True)
class PathIterate:
    """One visited point: strategy, objective value, raw gradient norm."""

    alpha: RelaxedStrategy
    gamma: float
    grad_norm: float


@dataclass(frozen=True)
class PathTrace:
    """Iterate history of one ascent run."""

    iterates: tuple[PathIterate, ...]
    k_star: int | None
    terminal_status: str  # "converged" | "hit_zero" | "max_iter"
    channels: tuple[Channel, ...]

    @property
    def gammas(self) -> np.ndarray:
        return np.array([it.gamma for it in self.iterates])


@dataclass(frozen=True)
class CriticalityRanking:
    """Channels ordered by availability at the zero-crossing, ascending."""

    entries: tuple[tuple[Channel, float], ...]
    n_subsystems: int

    def __len__(self) -> int:
        return len(self.entries)

    def top(self, k: int) -> tuple[Channel, ...]:
        return tuple(ch for ch, _ in self.entries[:k])


def project_box(alpha: np.ndarray) -> RelaxedStrategy:
    """Euclidean projection onto the relaxed strategy polytope.

    Clips off-diagonal entries to [0, 1] and forces the diagonal to one.
    The polytope is a product of intervals, so the projection is exact and
    idempotent.
    """
    a = np.asarray(alpha, dtype=float)
    out = np.clip(a, 0.0, 1.0)
    np.fill_diagonal(out, 1.0)
    return RelaxedStrategy(out)


def gradient_g(sys: BlockSystem, strategy, p_star: np.ndarray,
               x_star: np.ndarray) -> np.ndarray:
    """Strategy-space sensitivity of the Rayleigh objective at (P*, x*).

    Entry (i, j) is tr(X* P* B Ktilde M_ij) with X* = x* x*', evaluated
    through the lifted parameterization; the diagonal and entries of
    uncontrolled destinations are identically zero and returned as exact
    zeros.  The strategy argument fixes nothing beyond the channel set:
    the sensitivity of an affine map does not depend on the base point.
    """
    validate(sys)
    x = np.asarray(x_star, dtype=float)
    if abs(np.linalg.norm(x) - 1.0) > 1e-8:
        raise ValueError("x_star must have unit norm")
    lift = lifted_form(sys)
    n = sys.n_states
    # tr(X P B Ktilde M_ij) = w[(i-1)n + off_j : ...] . x_j  with  w = Ktilde' B' P x
    w = lift.k_tilde.T @ (sys.b_matrix.T @ (p_star @ x))
    out = np.zeros((sys.n_subsystems, sys.n_subsystems))
    for ch in channels(sys):
        i, j = ch.dst - 1, ch.src - 1
        off = sys.state_offsets[j]
        rows = i * n + off
        out[i, j] = w[rows:rows + sys.state_dims[j]] @ x[off:off + sys.state_dims[j]]
    return out


def _ascent_vector(s_matrix: np.ndarray, p_star: np.ndarray) -> np.ndarray:
    """Extremal direction of the pencil, deterministic under degeneracy.

    At any certified-stable point the optimal pencil equals t* I exactly,
    so its top eigenspace is the whole space and a raw eigensolver vector
    is numerical noise (and BLAS-build dependent).  The tie is resolved by
    the dominant eigenvector of the certificate P* itself, which is unique
    and reproducible; away from degeneracy the pencil's own top
    eigenvector is used.
    """
    w, v = np.linalg.eigh(s_matrix)
    scale = max(1.0, abs(float(w[-1])))
    if len(w) > 1 and (w[-1] - w[-2]) <= _EIG_TIE * scale:
        _, pv = np.linalg.eigh(p_star)
        return apply_sign_convention(pv[:, -1].copy())
    return apply_sign_convention(v[:, -1].copy())


def _rayleigh(sys: BlockSystem, alpha: np.ndarray, p_star: np.ndarray,
              x: np.ndarray) -> float:
    a_cl = closed_loop(sys, RelaxedStrategy(alpha))
    return float(x @ (a_cl.T @ p_star + p_star @ a_cl) @ x)


def _run_single(sys: BlockSystem, settings: PathSettings,
                alpha0: np.ndarray) -> PathTrace:
    chans = tuple(channels(sys))
    iterates: list[PathIterate] = []

    def finish(status: str) -> PathTrace:
        k_star = next((k for k, it in enumerate(iterates) if it.gamma >= 0.0), None)
        return PathTrace(tuple(iterates), k_star, status, chans)

    alpha = np.array(alpha0, dtype=float)
    gamma_carry: float | None = None
    for _ in range(settings.max_iter):
        try:
            sol = solve_g(sys, RelaxedStrategy(alpha), settings.sdp)
        except SdpSolverError as exc:
            raise PathFollowError(str(exc), finish("aborted")) from exc
        a_cl = closed_loop(sys, RelaxedStrategy(alpha))
        s_matrix = a_cl.T @ sol.p_star + sol.p_star @ a_cl
        s_matrix = (s_matrix + s_matrix.T) / 2.0
        x = _ascent_vector(s_matrix, sol.p_star)
        eta = gradient_g(sys, RelaxedStrategy(alpha), sol.p_star, x)
        grad_norm = float(np.linalg.norm(eta))

        gamma_here = float(x @ s_matrix @ x) if gamma_carry is None else gamma_carry
        iterates.append(PathIterate(RelaxedStrategy(alpha), gamma_here, grad_norm))

        if gamma_here >= 0.0:
            return finish("hit_zero")
        if len(iterates) >= 2 and iterates[-1].gamma - iterates[-2].gamma <= settings.tol:
            return finish("converged")
        if grad_norm < _GRAD_ZERO:
            return finish("converged")

        direction = eta / grad_norm
        step = settings.step
        accepted = None
        while step >= _STEP_FLOOR:
            candidate = project_box(alpha + step * direction).alpha
            gamma_cand = _rayleigh(sys, candidate, sol.p_star, x)
            if gamma_cand >= gamma_here - 1e-12 or not settings.backtracking:
                accepted = (candidate, gamma_cand)
                break
            step *= 0.5
        if accepted is None:
            return finish("converged")
        alpha, gamma_carry = accepted

    return finish("max_iter")


def path_follow(sys: BlockSystem, settings: PathSettings | None = None,
                restarts: int = 0, seed: int = 0) -> PathTrace:
    """Run the ascent from all-ones, optionally with random restarts.

    Parameters
    ----------
    sys : BlockSystem
    settings : PathSettings, optional
    restarts : int
        Additional runs from random interior strategies (seeded); the
        trace with the best terminal objective wins, ties going to the
        earlier run.  The default of zero matches the plain algorithm.
    seed : int
        Seed for the restart draws.

    Returns
    -------
    PathTrace
        Every visited iterate with its objective and gradient norm;
        ``k_star`` indexes the first iterate whose objective reached zero.

    Raises
    ------
    PathFollowError
        On SDP failure; the partial trace survives on the exception.
    """
    settings = settings or PathSettings()
    validate(sys)
    n_sub = sys.n_subsystems

    starts = [np.ones((n_sub, n_sub))]
    rng = np.random.default_rng(seed)
    for _ in range(max(0, restarts)):
        alpha = np.ones((n_sub, n_sub))
        for ch in channels(sys):
            alpha[ch.dst - 1, ch.src - 1] = rng.uniform(0.05, 0.95)
        starts.append(alpha)

    best: PathTrace | None = None
    for alpha0 in starts:
        trace = _run_single(sys, settings, alpha0)
        if best is None or trace.iterates[-1].gamma > best.iterates[-1].gamma:
            best = trace
    assert best is not None
    return best


def rank_channels(trace: PathTrace) -> CriticalityRanking:
    """Rank channels by their availability at the zero-crossing iterate.

    Raises
    ------
    NoZeroCrossingError
        If the trace never reached zero; criticality is only read off at
        the first iterate whose objective is nonnegative.
    """
    if trace.k_star is None:
        raise NoZeroCrossingError(
            "objective never reached zero; no iterate to rank channels from")
    alpha_star = trace.iterates[trace.k_star].alpha.alpha
    entries = sorted(
        ((ch, float(alpha_star[ch.dst - 1, ch.src - 1])) for ch in trace.channels),
        key=lambda item: (item[1], item[0]),
    )
    n_sub = alpha_star.shape[0]
    return CriticalityRanking(tuple(entries), n_sub)


def k_attack_from_ranking(ranking: CriticalityRanking, k: int) -> AttackStrategy:
    """Pure strategy attacking exactly the k most critical channels."""
    if k < 0 or k > len(ranking):
        raise ValueError(f"k = {k} out of range 0..{len(ranking)}")
    return AttackStrategy.attacking(
        ranking.n_subsystems, [(ch.dst, ch.src) for ch in ranking.top(k)])
