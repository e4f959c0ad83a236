"""Lyapunov SDP machinery: the stability metric g and common-certificate checks.

The central object is the capped Lyapunov metric

    g(alpha) = min { lambda_max(A(alpha)' P + P A(alpha)) : 0 <= P <= lambda_P I }

computed as the semidefinite program

    minimize t  s.t.  A(alpha)' P + P A(alpha) <= t I,  0 <= P <= lambda_P I.

g is never positive (P = 0 is feasible), and g < 0 exactly when the closed
loop is Hurwitz: it is the fastest certified decay rate achievable by a
quadratic certificate whose spectrum is capped at lambda_P.  The cap makes
the value finite and positively homogeneous in lambda_P.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .model import BlockSystem, closed_loop


class SdpSolverError(RuntimeError):
    """The conic solver failed to produce a solution within tolerances.

    The epigraph problem is strictly feasible by construction (P = 0 with
    large t), so an "infeasible" solver status is also reported through
    this error: it can only indicate solver failure.
    """


@dataclass(frozen=True)
class SdpSettings:
    """Tolerances and cap for the Lyapunov SDPs.

    lambda_p is the spectral cap on the certificate P.  Its value only
    scales g (positive homogeneity); signs and the resilience index are
    invariant to it.
    """

    lambda_p: float = 1.0
    tol_feas: float = 1e-8
    tol_gap: float = 1e-7
    max_sdp_iters: int = 200

    def __post_init__(self):
        if self.lambda_p <= 0 or self.tol_feas <= 0 or self.tol_gap <= 0:
            raise ValueError("lambda_p and tolerances must be positive")
        if self.max_sdp_iters <= 0:
            raise ValueError("max_sdp_iters must be positive")


@dataclass(frozen=True)
class LyapunovSolution:
    """Certificate pair returned by the g(alpha) SDP.

    feas_residual is the worst constraint violation of (t_star, p_star)
    re-evaluated by direct eigenvalue computation; gap_estimate is the
    primal-dual objective gap reconstructed from the solver's multipliers.
    Both are reported unscaled; on success they are within their
    tolerances scaled by the problem's natural size
    max(1, lambda_p) * max(1, ||A(alpha)||).
    """

    t_star: float
    p_star: np.ndarray
    feas_residual: float
    gap_estimate: float


def _solver_chain(settings: SdpSettings):
    accuracy = min(settings.tol_feas, settings.tol_gap) / 100.0
    accuracy = max(accuracy, 1e-12)
    yield "CLARABEL", dict(
        solver=cp.CLARABEL,
        max_iter=max(settings.max_sdp_iters, 50),
        tol_gap_abs=accuracy,
        tol_gap_rel=accuracy,
        tol_feas=accuracy,
    )
    yield "SCS", dict(solver=cp.SCS, eps=accuracy * 10, max_iters=100_000)


def _solve_problem(problem: cp.Problem, settings: SdpSettings, verify=None) -> str:
    """Run the solver chain until one solution passes ``verify``.

    ``verify`` is called after each successful solve and returns an error
    string, or None to accept.  Solver statuses other than optimal count
    as failures: the problems posed here are strictly feasible by
    construction, so infeasibility reports can only be solver failures.
    """
    failures = []
    for name, options in _solver_chain(settings):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # accuracy is re-checked below
                problem.solve(**options)
        except cp.SolverError as exc:
            failures.append(f"{name}: {exc}")
            continue
        if problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or problem.value is None:
            failures.append(f"{name}: status {problem.status}")
            continue
        detail = verify() if verify is not None else None
        if detail is None:
            return name
        failures.append(f"{name}: {detail}")
    raise SdpSolverError("; ".join(failures) if failures else "no solver available")


def _sym(m: np.ndarray) -> np.ndarray:
    return (m + m.T) / 2.0


def solve_g(sys: BlockSystem, strategy, settings: SdpSettings | None = None) -> LyapunovSolution:
    """Solve the capped Lyapunov SDP for a fixed strategy.

    Parameters
    ----------
    sys : BlockSystem
    strategy : AttackStrategy | RelaxedStrategy | ndarray
        Channel availability; fractional entries are allowed.
    settings : SdpSettings, optional

    Returns
    -------
    LyapunovSolution
        With ``t_star`` approximating g(alpha) and ``p_star`` the optimal
        capped certificate.

    Raises
    ------
    SdpSolverError
        On solver non-convergence, or when the returned solution violates
        the feasibility/gap tolerances on re-evaluation.
    """
    settings = settings or SdpSettings()
    a_cl = closed_loop(sys, strategy)
    n = a_cl.shape[0]
    lam = settings.lambda_p

    p_var = cp.Variable((n, n), symmetric=True)
    t_var = cp.Variable()
    lyap_cone = t_var * np.eye(n) - a_cl.T @ p_var - p_var @ a_cl >> 0
    pos_cone = p_var >> 0
    cap_cone = lam * np.eye(n) - p_var >> 0
    problem = cp.Problem(cp.Minimize(t_var), [lyap_cone, pos_cone, cap_cone])

    def residuals():
        t_val = float(t_var.value)
        p_val = _sym(np.asarray(p_var.value))
        s_matrix = _sym(a_cl.T @ p_val + p_val @ a_cl)
        p_eigs = np.linalg.eigvalsh(p_val)
        feas = max(
            0.0,
            float(np.linalg.eigvalsh(s_matrix)[-1] - t_val),
            float(-p_eigs[0]),
            float(p_eigs[-1] - lam),
        )
        # Dual objective of the epigraph SDP is -lambda_P tr(Z), Z the cap multiplier.
        z_dual = cap_cone.dual_value
        gap = float("inf") if z_dual is None else abs(t_val + lam * float(np.trace(z_dual)))
        return t_val, p_val, feas, gap

    # Tolerances are calibrated at cap 1 and unit data norm; the pencil's
    # scale grows with both the cap and the closed-loop norm, so acceptable
    # residuals scale with them (absolute 1e-8 on a norm-50 pencil would
    # demand more relative accuracy than double precision solvers deliver).
    scale = max(1.0, lam) * max(1.0, float(np.linalg.norm(a_cl, 2)))

    def verify():
        _, _, feas, gap = residuals()
        if feas > settings.tol_feas * scale or gap > settings.tol_gap * scale:
            return (f"residuals beyond tolerance (feas {feas:.2e} > "
                    f"{settings.tol_feas * scale:.0e} or gap {gap:.2e} > "
                    f"{settings.tol_gap * scale:.0e})")
        return None

    _solve_problem(problem, settings, verify)
    t_star, p_star, feas_residual, gap_estimate = residuals()
    return LyapunovSolution(t_star, p_star, feas_residual, gap_estimate)


def common_lyapunov(sys: BlockSystem, strategy_a, strategy_b,
                    settings: SdpSettings | None = None) -> np.ndarray | None:
    """Find one capped certificate valid for two strategies at once.

    Solves  min s  s.t.  A(alpha_k)' P + P A(alpha_k) <= s I  (k = 1, 2),
    0 <= P <= lambda_P I, tr P = 1, and declares the joint certificate set
    empty when the optimal margin exceeds 10 * tol_feas.  The trace
    normalization stands in for P != 0: the Lyapunov inequalities are
    homogeneous in P, and a trace-one P satisfies the cap whenever
    lambda_P >= 1 (required).

    Returns
    -------
    ndarray or None
        A witness P on success; None when the normalized feasibility
        problem is infeasible within tolerance.

    Raises
    ------
    SdpSolverError
        On solver non-convergence (distinct from infeasibility).
    ValueError
        If lambda_p < 1 (the normalization needs headroom under the cap).
    """
    settings = settings or SdpSettings()
    if settings.lambda_p < 1.0:
        raise ValueError("common_lyapunov requires lambda_p >= 1")
    a_one = closed_loop(sys, strategy_a)
    a_two = closed_loop(sys, strategy_b)
    n = a_one.shape[0]

    p_var = cp.Variable((n, n), symmetric=True)
    s_var = cp.Variable()
    eye = np.eye(n)
    constraints = [
        s_var * eye - a_one.T @ p_var - p_var @ a_one >> 0,
        s_var * eye - a_two.T @ p_var - p_var @ a_two >> 0,
        p_var >> 0,
        settings.lambda_p * eye - p_var >> 0,
        cp.trace(p_var) == 1.0,
    ]
    problem = cp.Problem(cp.Minimize(s_var), constraints)
    threshold = 10.0 * settings.tol_feas

    def verify():
        margin = float(s_var.value)
        if margin > threshold:
            return None  # infeasibility verdict needs no witness check
        p_out = _sym(np.asarray(p_var.value))
        worst = max(
            float(np.linalg.eigvalsh(_sym(a.T @ p_out + p_out @ a))[-1])
            for a in (a_one, a_two)
        )
        p_eigs = np.linalg.eigvalsh(p_out)
        if (worst > threshold or p_eigs[0] < -threshold
                or p_eigs[-1] > settings.lambda_p + threshold
                or abs(float(np.trace(p_out)) - 1.0) > threshold):
            return f"joint certificate failed re-verification (residual {worst:.2e})"
        return None

    _solve_problem(problem, settings, verify)
    if float(s_var.value) > threshold:
        return None
    return _sym(np.asarray(p_var.value))


@dataclass(frozen=True)
class Assumption1Result:
    """Outcome of the pairwise joint-certificate sweep."""

    holds: bool
    failing_pair: tuple[int, int] | None = None


def assumption1_check(sys: BlockSystem, strategies,
                      settings: SdpSettings | None = None) -> Assumption1Result:
    """Check every unordered strategy pair for a joint capped certificate.

    A single-element list degenerates to checking that strategy against
    itself (its own certificate set must be nonempty).  Returns the first
    infeasible pair as indices into ``strategies``.

    Raises
    ------
    SdpSolverError
        Propagated from a pair solve, with the offending pair attached.
    """
    strategies = list(strategies)
    if not strategies:
        raise ValueError("strategy list must be nonempty")
    if len(strategies) == 1:
        pairs = [(0, 0)]
    else:
        pairs = [(i, j) for i in range(len(strategies))
                 for j in range(i + 1, len(strategies))]
    for i, j in pairs:
        try:
            witness = common_lyapunov(sys, strategies[i], strategies[j], settings)
        except SdpSolverError as exc:
            raise SdpSolverError(f"pair ({i}, {j}): {exc}") from exc
        if witness is None:
            return Assumption1Result(False, (i, j))
    return Assumption1Result(True, None)
