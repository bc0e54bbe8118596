"""Orthogonal nonnegatively penalized matrix factorization (ONP-MF).

Augmented Lagrangian scheme that keeps ``V`` exactly row-orthonormal at
every iterate and drives it towards nonnegativity::

    L(U, V, Lam) = 0.5 ||M - U V||_F^2 - <Lam, V> + (rho / 2) ||min(V, 0)||_F^2

Each iteration solves an NNLS problem for ``U``, takes one projected
gradient step on ``V`` (projection onto the Stiefel manifold, adaptive
step length), updates the multipliers with step ``alpha0 / t`` and grows
``rho`` geometrically.  Everything is deterministic.
"""

import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import RankDeficient
from .linalg import (
    as_data_matrix,
    column_norms,
    nnls_solve,
    project_stiefel,
    squared_residual,
    top_k_right_singular_vectors,
)
from .metrics import negativity_residual, orthogonality_residual
from .results import Factorization, RunTrace

__all__ = [
    "OnpMfConfig",
    "OnpMfState",
    "flip_signs",
    "init_v_svd",
    "lagrangian_value",
    "lagrangian_grad_v",
    "projected_gradient_step",
    "update_multipliers",
    "onp_mf",
    "extract_clusters",
    "TRACE_FIELDS",
]

TRACE_FIELDS = ("t", "error", "neg_residual", "orth_residual", "beta", "rho", "elapsed_ms")


@dataclass(frozen=True)
class OnpMfConfig:
    alpha0: float = 100.0
    rho0: float = 0.01
    growth: float = 1.01
    beta0: float = 1.0
    beta_up: float = 2.0
    beta_down: float = 0.5
    beta_max: float = 1e10
    max_trials: int = 20
    max_iter: int = 20000
    neg_tol: float = 1e-3
    rho_max: float = 1e12
    stall_limit: int = 50

    def __post_init__(self):
        for name in ("alpha0", "rho0", "beta0", "beta_max", "neg_tol", "rho_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.growth > 1:
            raise ValueError(f"growth must exceed 1, got {self.growth}")
        if not self.beta_up > 1:
            raise ValueError(f"beta_up must exceed 1, got {self.beta_up}")
        if not 0 < self.beta_down < 1:
            raise ValueError(f"beta_down must lie in (0, 1), got {self.beta_down}")
        if self.max_iter < 1 or self.max_trials < 1:
            raise ValueError("max_iter and max_trials must be at least 1")


@dataclass
class OnpMfState:
    U: np.ndarray
    V: np.ndarray
    Lambda: np.ndarray
    rho: float
    t: int = 0
    beta: float = 1.0


def flip_signs(V):
    """Negate every row whose negative part outweighs its positive part (l2)."""
    V = np.array(V, dtype=float)
    neg = np.linalg.norm(np.minimum(V, 0.0), axis=1)
    pos = np.linalg.norm(np.maximum(V, 0.0), axis=1)
    V[neg > pos] *= -1.0
    return V


def init_v_svd(M, k):
    """Leading ``k`` right singular vectors of ``M``, sign-corrected per row."""
    return flip_signs(top_k_right_singular_vectors(M, k))


def lagrangian_value(M, U, V, Lambda, rho):
    return (
        0.5 * squared_residual(M, U, V)
        - float(np.sum(Lambda * V))
        + 0.5 * rho * float(np.sum(np.minimum(V, 0.0) ** 2))
    )


def lagrangian_grad_v(M, U, V, Lambda, rho):
    """``U^T (U V - M) - Lambda + rho * min(V, 0)``.

    The penalty's derivative at ``v = 0`` is taken as 0.
    """
    UtM = np.asarray(M.T @ U).T
    return (U.T @ U) @ V - UtM - Lambda + rho * np.minimum(V, 0.0)


def projected_gradient_step(M, state, cfg):
    """One projected gradient step on ``V`` with an adaptive step length.

    Starting from ``state.beta``, the step is halved (``beta_down``) until
    the Lagrangian strictly decreases, for at most ``cfg.max_trials``
    trials.  Returns ``(V_new, beta_used)``; ``beta_used == 0`` means no
    decreasing step was found and ``V`` is returned unchanged.

    Raises :class:`RankDeficient` if a trial point cannot be projected.
    """
    U, V, Lam, rho = state.U, state.V, state.Lambda, state.rho
    grad = lagrangian_grad_v(M, U, V, Lam, rho)
    if not np.any(grad):
        return V, 0.0
    current = lagrangian_value(M, U, V, Lam, rho)
    beta = state.beta
    for _ in range(cfg.max_trials):
        trial = project_stiefel(V - beta * grad)
        if lagrangian_value(M, U, trial, Lam, rho) < current:
            return trial, beta
        beta *= cfg.beta_down
    return V, 0.0


def update_multipliers(Lambda, V, alpha0, t):
    """``max(0, Lambda - (alpha0 / t) V)``."""
    if t < 1:
        raise ValueError("iteration counter starts at 1")
    return np.maximum(0.0, Lambda - (alpha0 / t) * V)


def _jitter(V):
    pattern = np.sin(np.arange(V.size, dtype=float)).reshape(V.shape)
    return V + 1e-12 * pattern


def extract_clusters(V):
    """Column ``j`` goes to ``argmax_i V[i, j]`` (lowest index on ties)."""
    return np.argmax(np.asarray(V), axis=0).astype(np.intp)


def onp_mf(M, k, cfg=None, callback=None, **overrides):
    """Run ONP-MF on a nonnegative ``M`` with ``k`` components.

    Parameters
    ----------
    M : array_like or sparse matrix, shape (m, n), nonnegative
    k : int
        Must satisfy ``k <= min(m, n)``.
    cfg : OnpMfConfig, optional
        Defaults to ``OnpMfConfig()``; keyword ``overrides`` replace
        individual fields.
    callback : callable, optional
        Called as ``callback(state)`` after every iteration.

    All-zero columns of ``M`` are excluded from the iterations and get
    zero columns in the returned ``V``; the callback then sees the reduced
    problem.

    Returns
    -------
    factorization : Factorization
        ``V`` has its residual negative entries clamped to zero and ``U``
        re-solved for it; ``objective_unclamped`` is the error before the
        clamp.
    trace : RunTrace
        Columns ``TRACE_FIELDS``.  ``trace.flags`` contains ``"stalled"``
        when the line search failed ``cfg.stall_limit`` times in a row.
    """
    cfg = replace(cfg or OnpMfConfig(), **overrides)
    M = as_data_matrix(M)
    m, n = M.shape
    if not 1 <= k <= min(m, n):
        raise ValueError(f"k={k} must lie in [1, min(m, n)={min(m, n)}]")
    keep = np.flatnonzero(column_norms(M) > 0)
    if keep.size < n:
        # zero columns carry no data; a row of V parked on them would be
        # orthonormal, nonnegative and useless, so they are left out
        if keep.size < k:
            raise ValueError(f"only {keep.size} nonzero columns for k={k}")
        fact, trace = onp_mf(M[:, keep], k, cfg, callback)
        V = np.zeros((k, n))
        V[:, keep] = fact.V
        return replace(fact, V=V), trace

    start = time.perf_counter()
    V = init_v_svd(M, k)
    state = OnpMfState(U=np.zeros((m, k)), V=V, Lambda=np.zeros((k, n)), rho=cfg.rho0, beta=cfg.beta0)
    trace = RunTrace(fields=TRACE_FIELDS)
    stalls = 0

    for t in range(1, cfg.max_iter + 1):
        state.t = t
        state.U = nnls_solve(M, state.V)
        try:
            V_new, beta = projected_gradient_step(M, state, cfg)
        except RankDeficient:
            state.V = _jitter(state.V)
            V_new, beta = projected_gradient_step(M, state, cfg)
        if beta > 0:
            # past a certain length the projected step no longer depends on
            # beta; the cap only keeps repeated doubling finite
            state.beta = min(beta * cfg.beta_up, cfg.beta_max)
            stalls = 0
        else:
            state.beta *= cfg.beta_down**cfg.max_trials
            stalls += 1
        state.V = V_new
        state.Lambda = update_multipliers(state.Lambda, state.V, cfg.alpha0, t)

        neg = negativity_residual(state.V)
        trace.append(
            t,
            np.sqrt(squared_residual(M, state.U, state.V)),
            neg,
            orthogonality_residual(state.V),
            beta,
            state.rho,
            1e3 * (time.perf_counter() - start),
        )
        state.rho = min(cfg.growth * state.rho, cfg.rho_max)
        trace.iterations = t
        if callback is not None:
            callback(state)
        if neg < cfg.neg_tol:
            trace.converged = True
            break
        if stalls >= cfg.stall_limit:
            trace.flags.append("stalled")
            break

    U_raw = nnls_solve(M, state.V)
    unclamped = squared_residual(M, U_raw, state.V)
    V = np.maximum(state.V, 0.0)
    U = nnls_solve(M, V)
    trace.seconds = time.perf_counter() - start
    fact = Factorization(U=U, V=V, objective=squared_residual(M, U, V), objective_unclamped=unclamped)
    return fact, trace
