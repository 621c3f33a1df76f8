"""Sparse recovery methods.

Basis pursuit, the anti-uncertainty operator (AUO) and the Dantzig selector
are compiled to :class:`~auocs.conic.ConicProblem` instances, solved, and
decompiled back to a signal estimate. OMP runs directly on the dictionary.

The l1 norm is handled with a positive/negative split ``theta = p - q`` with
``p, q >= 0``, which keeps every constraint inside zero, nonnegative and
second-order cones.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .conic import (
    ConicProblem,
    NonNeg,
    SecondOrder,
    SolverSettings,
    Status,
    Zero,
    solve_conic,
)
from .linalg import DimensionError, as_mat, as_vec, norm1, norm2

__all__ = [
    "Method",
    "RecoveryMethod",
    "RecoveryResult",
    "Compiled",
    "DegenerateDictionary",
    "compile_bp",
    "compile_auo",
    "compile_ds",
    "decompile",
    "omp",
    "recover",
    "auc_bound",
    "support_detect",
    "DEFAULT_TAU",
    "ZERO_FLOOR",
    "RECOVERY_SETTINGS",
]

DEFAULT_TAU = 0.5
# At 1e-6 the sum of tiny sign violations in p and q can push ||theta||_1
# above t by more than 1e-5 at N = 100; 1e-7 keeps it well inside.
RECOVERY_SETTINGS = SolverSettings(eps_primal=1e-7, eps_dual=1e-7, eps_gap=1e-7)
# Estimates whose largest magnitude is below this are treated as the zero
# vector; a first-order solver never returns exact zeros.
ZERO_FLOOR = 1e-6


class Method(str, enum.Enum):
    BP = "bp"
    AUO = "auo"
    DS = "ds"
    OMP = "omp"


class DegenerateDictionary(ValueError):
    """The active-set least-squares problem in OMP is singular."""


@dataclass(frozen=True)
class RecoveryMethod:
    """A recovery method and its parameter.

    ``delta`` is the uncertainty bound used by AUO, ``lam`` the correlation
    bound used by the Dantzig selector, and OMP stops after ``sparsity`` atoms
    or once the residual norm drops to ``residual_tol``.
    """

    kind: Method
    delta: float | None = None
    lam: float | None = None
    sparsity: int | None = None
    residual_tol: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Method(self.kind))
        if self.kind is Method.AUO:
            if self.delta is None or not self.delta > 0:
                raise ValueError("AUO needs delta > 0 (use BP for delta = 0)")
        elif self.kind is Method.DS:
            if self.lam is None or self.lam < 0:
                raise ValueError("DS needs lam >= 0")
        elif self.kind is Method.OMP:
            # neither stopping rule given: the caller supplies the true
            # sparsity later (see bench)
            if self.sparsity is not None and self.sparsity < 1:
                raise ValueError("OMP sparsity must be >= 1")
            if self.residual_tol is not None and self.residual_tol < 0:
                raise ValueError("OMP residual_tol must be >= 0")

    @classmethod
    def bp(cls):
        return cls(Method.BP)

    @classmethod
    def auo(cls, delta):
        return cls(Method.AUO, delta=delta)

    @classmethod
    def ds(cls, lam):
        return cls(Method.DS, lam=lam)

    @classmethod
    def omp(cls, sparsity=None, residual_tol=None):
        return cls(Method.OMP, sparsity=sparsity, residual_tol=residual_tol)

    @property
    def label(self) -> str:
        return self.kind.value


@dataclass
class RecoveryResult:
    theta_hat: np.ndarray
    t_value: float | None
    objective: float
    solver_status: Status
    support: tuple
    iters: int = 0
    residuals: tuple | None = None


@dataclass(frozen=True)
class Compiled:
    """A compiled cone program plus what is needed to map its solution back."""

    kind: Method
    problem: ConicProblem
    B: np.ndarray
    y: np.ndarray
    delta: float | None = None

    @property
    def N(self) -> int:
        return self.B.shape[1]


def _check_by(B, y):
    B, y = as_mat(B), as_vec(y)
    if B.shape[0] != y.shape[0]:
        raise DimensionError(f"B has {B.shape[0]} rows but y has length {y.shape[0]}")
    return B, y


def compile_bp(B, y) -> Compiled:
    """min ||theta||_1 s.t. B theta = y, over x = (p, q)."""
    B, y = _check_by(B, y)
    M, N = B.shape
    A = np.vstack([np.hstack([B, -B]), -np.eye(2 * N)])
    b = np.concatenate([y, np.zeros(2 * N)])
    c = np.ones(2 * N)
    problem = ConicProblem(c, A, b, (Zero(M), NonNeg(2 * N)))
    return Compiled(Method.BP, problem, B, y)


def compile_auo(B, y, delta: float) -> Compiled:
    """min t s.t. ||y - B theta||_2 <= sqrt(M) delta t, ||theta||_1 <= t.

    Over x = (p, q, t). Row layout: one nonnegative row for the l1 epigraph,
    an (M+1)-dimensional second-order cone for the residual, and 2N rows
    keeping p and q nonnegative.
    """
    if not delta > 0:
        raise ValueError("delta must be positive for AUO; use compile_bp for delta = 0")
    B, y = _check_by(B, y)
    M, N = B.shape
    scale = math.sqrt(M) * delta
    n = 2 * N + 1
    A = np.zeros((1 + (M + 1) + 2 * N, n))
    b = np.zeros(A.shape[0])
    # t - 1'(p + q) >= 0
    A[0, : 2 * N] = 1.0
    A[0, -1] = -1.0
    # (scale * t, y - B(p - q)) in SOC
    A[1, -1] = -scale
    A[2 : M + 2, :N] = B
    A[2 : M + 2, N : 2 * N] = -B
    b[2 : M + 2] = y
    A[M + 2 :, : 2 * N] = -np.eye(2 * N)
    c = np.zeros(n)
    c[-1] = 1.0
    problem = ConicProblem(c, A, b, (NonNeg(1), SecondOrder(M + 1), NonNeg(2 * N)))
    return Compiled(Method.AUO, problem, B, y, delta=float(delta))


def compile_ds(B, y, lam: float) -> Compiled:
    """min ||theta||_1 s.t. ||B'(y - B theta)||_inf <= lam."""
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    B, y = _check_by(B, y)
    N = B.shape[1]
    G = B.T @ B
    By = B.T @ y
    A = np.vstack([
        np.hstack([G, -G]),
        np.hstack([-G, G]),
        -np.eye(2 * N),
    ])
    b = np.concatenate([By + lam, lam - By, np.zeros(2 * N)])
    c = np.ones(2 * N)
    problem = ConicProblem(c, A, b, (NonNeg(2 * N), NonNeg(2 * N)))
    return Compiled(Method.DS, problem, B, y)


def decompile(compiled: Compiled, x, status: Status = Status.OPTIMAL, tau: float = DEFAULT_TAU) -> RecoveryResult:
    """Map a solver point back to a signal estimate.

    The objective is recomputed from the estimate rather than read off the
    solver: ``||theta||_1`` for BP/DS, and for AUO the epigraph value
    ``max(||theta||_1, ||y - B theta||_2 / (sqrt(M) delta))``.
    """
    x = as_vec(x)
    N = compiled.N
    expected = 2 * N + (1 if compiled.kind is Method.AUO else 0)
    if x.shape[0] != expected:
        raise DimensionError(f"expected a point of length {expected}, got {x.shape[0]}")
    theta = x[:N] - x[N : 2 * N]
    l1 = norm1(theta) if N else 0.0
    t_value = None
    objective = l1
    if compiled.kind is Method.AUO:
        t_value = float(x[-1])
        M = compiled.B.shape[0]
        resid = norm2(compiled.y - compiled.B @ theta)
        objective = max(l1, resid / (math.sqrt(M) * compiled.delta))
    return RecoveryResult(
        theta_hat=theta,
        t_value=t_value,
        objective=objective,
        solver_status=status,
        support=support_detect(theta, tau),
    )


def omp(B, y, sparsity: int | None = None, residual_tol: float | None = None, tau: float = DEFAULT_TAU) -> RecoveryResult:
    """Orthogonal matching pursuit.

    Each step picks the column with the largest normalized correlation
    ``|b_j . r| / ||b_j||`` (lowest index on ties), refits least squares on the
    active set and updates the residual. Stops after ``sparsity`` atoms or when
    ``||r||_2 <= residual_tol``; a zero residual always stops.
    """
    B, y = _check_by(B, y)
    M, N = B.shape
    if sparsity is None and residual_tol is None:
        raise ValueError("give sparsity or residual_tol")
    if sparsity is not None and not 1 <= sparsity <= M:
        raise ValueError(f"sparsity must lie in [1, {M}]")
    col_norms = np.sqrt(np.sum(B * B, axis=0))
    if not np.any(col_norms > 0):
        raise DegenerateDictionary("all columns of B are zero")
    max_atoms = sparsity if sparsity is not None else min(M, N)
    tol = residual_tol if residual_tol is not None else 0.0
    safe_norms = np.where(col_norms > 0, col_norms, 1.0)

    active: list[int] = []
    coef = np.zeros(0)
    r = y.copy()
    while len(active) < max_atoms and np.linalg.norm(r) > tol:
        score = np.abs(B.T @ r) / safe_norms
        score[col_norms == 0] = -1.0
        score[active] = -1.0
        j = int(np.argmax(score))
        if score[j] <= 0.0:
            break  # residual is orthogonal to every remaining column
        active.append(j)
        sub = B[:, active]
        Q, R = np.linalg.qr(sub)
        diag = np.abs(np.diag(R))
        if diag.min() <= 1e-12 * max(1.0, diag.max()):
            raise DegenerateDictionary(f"active set {active} is linearly dependent")
        coef = np.linalg.solve(R, Q.T @ y)
        r = y - sub @ coef

    theta = np.zeros(N)
    theta[active] = coef
    return RecoveryResult(
        theta_hat=theta,
        t_value=None,
        objective=float(np.sum(np.abs(theta))),
        solver_status=Status.OPTIMAL,
        support=support_detect(theta, tau),
        iters=len(active),
    )


def recover(B, y, method: RecoveryMethod, settings: SolverSettings | None = None,
            tau: float = DEFAULT_TAU, trace_path=None) -> RecoveryResult:
    """Run ``method`` on (B, y).

    Cone programs are solved with ``settings``, or :data:`RECOVERY_SETTINGS`
    when none are given.
    """
    if method.kind is Method.OMP:
        return omp(B, y, sparsity=method.sparsity, residual_tol=method.residual_tol, tau=tau)
    if method.kind is Method.BP:
        compiled = compile_bp(B, y)
    elif method.kind is Method.AUO:
        compiled = compile_auo(B, y, method.delta)
    else:
        compiled = compile_ds(B, y, method.lam)
    sol = solve_conic(compiled.problem, settings or RECOVERY_SETTINGS, trace_path=trace_path)
    result = decompile(compiled, sol.x, sol.status, tau)
    result.iters = sol.iters
    result.residuals = sol.residuals
    return result


def auc_bound(V, theta, delta: float) -> tuple[float, float, bool]:
    """Check ``||V theta||_2 <= sqrt(M) * delta * ||theta||_1``.

    Returns ``(lhs, rhs, holds)``. The left side equals ``||y - B theta||_2``
    for an exact model ``y = A theta`` and ``B = A + V``.
    """
    V, theta = as_mat(V), as_vec(theta)
    if V.shape[1] != theta.shape[0]:
        raise DimensionError(f"V has {V.shape[1]} columns, theta has length {theta.shape[0]}")
    M = V.shape[0]
    lhs = float(np.linalg.norm(V @ theta))
    rhs = math.sqrt(M) * delta * float(np.sum(np.abs(theta)))
    return lhs, rhs, lhs <= rhs


def support_detect(theta, tau: float = DEFAULT_TAU, zero_floor: float = ZERO_FLOOR) -> tuple:
    """Indices (0-based) with ``|theta_i| >= tau * max_j |theta_j|``.

    Empty when the largest magnitude is at most ``zero_floor``.
    """
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    mags = np.abs(as_vec(theta))
    if mags.size == 0:
        return ()
    peak = mags.max()
    if peak <= zero_floor:
        return ()
    return tuple(int(i) for i in np.flatnonzero(mags >= tau * peak))


