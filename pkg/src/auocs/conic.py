"""First-order solver for cone programs in standard form.

Problems are posed as::

    minimize    c @ x
    subject to  A @ x + s == b,   s in K

where ``K`` is a product of zero, nonnegative, and second-order cones. The
dual is ``maximize -b @ y  s.t.  A.T @ y + c == 0,  y in K*``.

The solver is an operator-splitting (ADMM) iteration: a linear solve with a
Cholesky factor of ``sigma*I + A.T @ R @ A`` computed once, a projection onto
``K``, and a dual update. ``A`` is Ruiz-equilibrated before iterating and the
scaling is undone on output.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, lstsq

from .linalg import DimensionError, as_mat, as_vec

__all__ = [
    "Zero",
    "NonNeg",
    "SecondOrder",
    "ConicProblem",
    "SolverSettings",
    "ConicSolution",
    "Status",
    "NumericalFailure",
    "cone_dim",
    "project_cone",
    "project_dual_cone",
    "solve_conic",
    "residuals",
]


@dataclass(frozen=True)
class ConeBlock:
    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"cone block dimension must be a positive integer, got {self.dim!r}")


@dataclass(frozen=True)
class Zero(ConeBlock):
    """The set {0}. Encodes equality rows."""


@dataclass(frozen=True)
class NonNeg(ConeBlock):
    """The nonnegative orthant."""


@dataclass(frozen=True)
class SecondOrder(ConeBlock):
    """{(t, x) : ||x||_2 <= t}, with ``t`` the first coordinate."""


def cone_dim(cones: Sequence[ConeBlock]) -> int:
    return sum(block.dim for block in cones)


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITERS = "MaxIters"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class NumericalFailure(ArithmeticError):
    """The iteration produced non-finite values."""


@dataclass(frozen=True)
class ConicProblem:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    cones: tuple

    def __post_init__(self):
        c, A, b = as_vec(self.c), as_mat(self.A), as_vec(self.b)
        cones = tuple(self.cones)
        for block in cones:
            if not isinstance(block, ConeBlock):
                raise TypeError(f"not a cone block: {block!r}")
        m, n = A.shape
        if c.shape[0] != n:
            raise DimensionError(f"c has length {c.shape[0]}, A has {n} columns")
        if b.shape[0] != m:
            raise DimensionError(f"b has length {b.shape[0]}, A has {m} rows")
        if cone_dim(cones) != m:
            raise DimensionError(f"cones cover {cone_dim(cones)} rows, A has {m}")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "cones", cones)

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class SolverSettings:
    eps_primal: float = 1e-6
    eps_dual: float = 1e-6
    eps_gap: float = 1e-6
    max_iters: int = 50000
    over_relaxation: float = 1.5
    seed: int = 0
    # step penalty for inequality/cone rows; equality rows use rho * rho_eq_factor
    rho: float = 0.1
    rho_eq_factor: float = 1e3
    sigma: float = 1e-6
    scaling_iters: int = 15
    check_every: int = 10
    # once every residual is below polish_start, try an active-set polish;
    # the interval starts at polish_every and doubles after each failed
    # attempt up to 16x (0 disables)
    polish_every: int = 100
    polish_start: float = 1e-3
    divergence_threshold: float = 1e8

    def __post_init__(self):
        for name in ("eps_primal", "eps_dual", "eps_gap", "rho", "sigma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.over_relaxation < 2:
            raise ValueError("over_relaxation must lie in (0, 2)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class ConicSolution:
    x: np.ndarray
    s: np.ndarray
    dual: np.ndarray
    status: Status
    iters: int
    residuals: tuple = field(default=(math.inf, math.inf, math.inf))


# -- projections -----------------------------------------------------------


class _ConeLayout:
    """Precomputed index sets for blockwise projection."""

    def __init__(self, cones: Sequence[ConeBlock]):
        zero, nonneg, soc = [], [], []
        start = 0
        for block in cones:
            stop = start + block.dim
            if isinstance(block, Zero):
                zero.extend(range(start, stop))
            elif isinstance(block, NonNeg):
                nonneg.extend(range(start, stop))
            elif isinstance(block, SecondOrder):
                soc.append((start, stop))
            else:
                raise TypeError(f"unsupported cone block {block!r}")
            start = stop
        self.dim = start
        self.zero = np.array(zero, dtype=np.intp)
        self.nonneg = np.array(nonneg, dtype=np.intp)
        self.soc = soc

    def project(self, p: np.ndarray) -> np.ndarray:
        out = p.copy()
        if self.zero.size:
            out[self.zero] = 0.0
        if self.nonneg.size:
            out[self.nonneg] = np.maximum(p[self.nonneg], 0.0)
        for start, stop in self.soc:
            out[start:stop] = _project_soc(p[start:stop])
        return out

    def project_dual(self, p: np.ndarray) -> np.ndarray:
        # zero cone's dual is the whole space; the other two are self-dual
        out = p.copy()
        if self.nonneg.size:
            out[self.nonneg] = np.maximum(p[self.nonneg], 0.0)
        for start, stop in self.soc:
            out[start:stop] = _project_soc(p[start:stop])
        return out


def _project_soc(v: np.ndarray) -> np.ndarray:
    t = v[0]
    x = v[1:]
    nx = math.sqrt(float(np.dot(x, x)))
    if nx <= t:
        return v.copy()
    if nx <= -t:
        return np.zeros_like(v)
    alpha = 0.5 * (nx + t)
    out = np.empty_like(v)
    out[0] = alpha
    out[1:] = (alpha / nx) * x
    return out


def project_cone(point, cones: Sequence[ConeBlock]) -> np.ndarray:
    """Euclidean projection of ``point`` onto the product cone, block by block."""
    p = as_vec(point)
    layout = _ConeLayout(cones)
    if p.shape[0] != layout.dim:
        raise DimensionError(f"point has length {p.shape[0]}, cones cover {layout.dim}")
    return layout.project(p)


def project_dual_cone(point, cones: Sequence[ConeBlock]) -> np.ndarray:
    p = as_vec(point)
    layout = _ConeLayout(cones)
    if p.shape[0] != layout.dim:
        raise DimensionError(f"point has length {p.shape[0]}, cones cover {layout.dim}")
    return layout.project_dual(p)


# -- residuals -------------------------------------------------------------


def _residuals(problem: ConicProblem, layout: _ConeLayout, x, s, y) -> tuple[float, float, float]:
    A, b, c = problem.A, problem.b, problem.c
    r_prim = np.linalg.norm(A @ x + s - b) + np.linalg.norm(s - layout.project(s))
    r_dual = np.linalg.norm(A.T @ y + c) + np.linalg.norm(y - layout.project_dual(y))
    pobj = float(c @ x)
    dobj = float(-(b @ y))
    return (
        float(r_prim / (1.0 + np.linalg.norm(b))),
        float(r_dual / (1.0 + np.linalg.norm(c))),
        abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj)),
    )


def residuals(problem: ConicProblem, solution: ConicSolution) -> tuple[float, float, float]:
    """Recompute (primal, dual, gap) residuals of ``solution`` from scratch.

    primal = (||A x + s - b|| + dist(s, K)) / (1 + ||b||)
    dual   = (||A.T y + c|| + dist(y, K*)) / (1 + ||c||)
    gap    = |c.x + b.y| / (1 + |c.x| + |b.y|)
    """
    x, s, y = as_vec(solution.x), as_vec(solution.s), as_vec(solution.dual)
    if x.shape[0] != problem.n or s.shape[0] != problem.m or y.shape[0] != problem.m:
        raise DimensionError("solution does not match problem dimensions")
    return _residuals(problem, _ConeLayout(problem.cones), x, s, y)


# -- solver ----------------------------------------------------------------


def _equilibrate(A: np.ndarray, layout: _ConeLayout, iters: int):
    """Ruiz scaling. Returns (D, E) with D @ A @ E better conditioned.

    Rows belonging to one second-order cone share a single scale factor so
    the scaled cone is still a second-order cone.
    """
    m, n = A.shape
    D = np.ones(m)
    E = np.ones(n)
    As = A.copy()
    for _ in range(iters):
        row = np.max(np.abs(As), axis=1) if n else np.ones(m)
        col = np.max(np.abs(As), axis=0) if m else np.ones(n)
        for start, stop in layout.soc:
            row[start:stop] = np.mean(row[start:stop])
        row = np.where(row < 1e-8, 1.0, row)
        col = np.where(col < 1e-8, 1.0, col)
        d = 1.0 / np.sqrt(row)
        e = 1.0 / np.sqrt(col)
        D *= d
        E *= e
        As = d[:, None] * As * e[None, :]
    D = np.clip(D, 1e-4, 1e4)
    E = np.clip(E, 1e-4, 1e4)
    return D, E


def _polish(A, b, c, layout: _ConeLayout, x, s, z, rounds: int = 3):
    """Active-set refinement of an approximate primal-dual point.

    Rows are ranked by ``z - s``; those with a positive score are taken as
    active (slack zero), the rest inactive (dual zero), keeping at most
    ``n`` active rows. ``x`` is then moved to the nearest point with
    ``A_act x = b_act`` and ``z_act`` to the nearest point with
    ``A_act' z_act = -c``. Nonnegative rows whose polished sign contradicts
    the guess are flipped and the solve repeated, up to ``rounds`` times.
    Returns None when a second-order cone block sits on its boundary, since
    complementarity there is not a linear condition. The caller must
    re-verify the result.
    """
    m, n = A.shape
    score = np.full(m, -np.inf)
    if layout.zero.size:
        score[layout.zero] = np.inf
    if layout.nonneg.size:
        idx = layout.nonneg
        score[idx] = z[idx] - s[idx]
    for start, stop in layout.soc:
        sb, zb = s[start:stop], z[start:stop]
        ns, nz = np.linalg.norm(sb), np.linalg.norm(zb)
        s_interior = sb[0] - np.linalg.norm(sb[1:]) > 1e-3 * ns
        z_interior = zb[0] - np.linalg.norm(zb[1:]) > 1e-3 * nz
        if nz < ns and s_interior:
            continue
        if ns < nz and z_interior:
            score[start:stop] = np.inf
            continue
        return None
    active = score > 0
    if active.sum() > n:
        keep = np.argsort(-score, kind="stable")[:n]
        active[:] = False
        active[keep] = True
    nonneg = np.zeros(m, dtype=bool)
    nonneg[layout.nonneg] = True
    for _ in range(rounds):
        Aa = A[active]
        x_new = x.copy()
        z_new = np.zeros(m)
        if Aa.shape[0]:
            x_new = x + lstsq(Aa, b[active] - Aa @ x, lapack_driver="gelsy", check_finite=False)[0]
            za = z[active]
            z_new[active] = za + lstsq(Aa.T, -c - Aa.T @ za, lapack_driver="gelsy", check_finite=False)[0]
        s_new = b - A @ x_new
        drop = nonneg & active & (z_new < 0)
        add = nonneg & ~active & (s_new < 0)
        if not (drop.any() or add.any()):
            break
        active = (active & ~drop) | add
    return x_new, s_new, z_new


_STREAK = 5
_DIRECTION_TOL = 1e-6


def _infeasible_direction(problem: ConicProblem, layout: _ConeLayout, dz) -> bool:
    """Whether the dual drift ``dz`` certifies primal infeasibility.

    A diverging dual moves along a ray with A'dz = 0, dz in K* and b.dz < 0.
    """
    nz = np.linalg.norm(dz)
    if nz <= 1e-10:
        return False
    return (
        np.linalg.norm(problem.A.T @ dz) <= _DIRECTION_TOL * nz
        and np.linalg.norm(dz - layout.project_dual(dz)) <= _DIRECTION_TOL * nz
        and float(problem.b @ dz) < -_DIRECTION_TOL * nz
    )


def _unbounded_direction(problem: ConicProblem, layout: _ConeLayout, dx) -> bool:
    """Whether the primal drift certifies dual infeasibility (unboundedness).

    A diverging primal moves along a ray with -A dx in K and c.dx < 0.
    """
    nx = np.linalg.norm(dx)
    if nx <= 1e-10:
        return False
    ds = -problem.A @ dx
    return (
        np.linalg.norm(ds - layout.project(ds)) <= _DIRECTION_TOL * nx
        and float(problem.c @ dx) < -_DIRECTION_TOL * nx
    )


def _write_trace(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write("iter,primal_res,dual_res,gap\n")
        for it, rp, rd, g in rows:
            fh.write(f"{it},{rp:.10e},{rd:.10e},{g:.10e}\n")


def solve_conic(problem: ConicProblem, settings: SolverSettings | None = None, trace_path=None) -> ConicSolution:
    """Solve ``problem`` with the splitting iteration described in the module docstring.

    Returns a solution with status ``Optimal`` only when the primal, dual and
    gap residuals (as defined in :func:`residuals`) are all within tolerance.
    Hitting ``max_iters`` is reported through the status, not raised.

    Raises
    ------
    NumericalFailure
        If an iterate becomes non-finite.
    """
    st = settings or SolverSettings()
    layout = _ConeLayout(problem.cones)
    A, b, c = problem.A, problem.b, problem.c
    m, n = A.shape

    D, E = _equilibrate(A, layout, st.scaling_iters)
    As = D[:, None] * A * E[None, :]
    bs = D * b
    cs = E * c
    beta = 1.0 / max(1.0, float(np.linalg.norm(bs)))
    gamma = 1.0 / max(1.0, float(np.linalg.norm(cs)))
    bs *= beta
    cs *= gamma

    rho_scalar = float(st.rho)
    rho_pattern = np.ones(m)
    if layout.zero.size:
        rho_pattern[layout.zero] = st.rho_eq_factor

    def factorize(rho_scalar):
        rho = rho_scalar * rho_pattern
        kkt = st.sigma * np.eye(n) + As.T @ (rho[:, None] * As)
        return rho, cho_factor(kkt, lower=True, check_finite=False)

    rho, factor = factorize(rho_scalar)

    alpha = st.over_relaxation
    x = np.zeros(n)
    s = np.zeros(m)
    y = np.zeros(m)
    trace = [] if trace_path is not None else None
    status = Status.MAX_ITERS
    res = (math.inf, math.inf, math.inf)
    xu = su = zu = None
    it = 0

    last_polish = 0
    prev = None
    inf_streak = unb_streak = 0
    polish_gap = st.polish_every

    def converged(r):
        return r[0] <= st.eps_primal and r[1] <= st.eps_dual and r[2] <= st.eps_gap

    def unscale():
        return E * x / beta, s / (D * beta), -(D * y) / gamma

    for it in range(1, st.max_iters + 1):
        rhs = st.sigma * x - cs + As.T @ (rho * (bs - s) + y)
        xt = cho_solve(factor, rhs, check_finite=False)
        st_ = bs - As @ xt
        x = alpha * xt + (1.0 - alpha) * x
        s_rel = alpha * st_ + (1.0 - alpha) * s
        w = s_rel + y / rho
        s = layout.project(w)
        y = rho * (w - s)

        if it % st.check_every == 0 or it == st.max_iters:
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
                raise NumericalFailure(f"non-finite iterate at iteration {it}")
            xu, su, zu = unscale()
            res = _residuals(problem, layout, xu, su, zu)
            if trace is not None:
                trace.append((it, *res))
            if converged(res):
                status = Status.OPTIMAL
                break
            if (st.polish_every and it - last_polish >= polish_gap
                    and max(res) <= st.polish_start):
                last_polish = it
                polish_gap = min(2 * polish_gap, 16 * st.polish_every)
                polished = _polish(As, bs, cs, layout, x, s, -y)
                if polished is not None:
                    px, ps, pz = polished
                    cand = (E * px / beta, ps / (D * beta), (D * pz) / gamma)
                    cres = _residuals(problem, layout, *cand)
                    if converged(cres):
                        xu, su, zu = cand
                        res = cres
                        status = Status.OPTIMAL
                        break
            if prev is not None:
                dx, dz = xu - prev[0], zu - prev[2]
                inf_streak = inf_streak + 1 if _infeasible_direction(problem, layout, dz) else 0
                unb_streak = unb_streak + 1 if _unbounded_direction(problem, layout, dx) else 0
            prev = (xu, su, zu)
            if np.linalg.norm(zu) > st.divergence_threshold or inf_streak >= _STREAK:
                status = Status.INFEASIBLE
                break
            if np.linalg.norm(xu) > st.divergence_threshold or unb_streak >= _STREAK:
                status = Status.UNBOUNDED
                break

    if xu is None:
        xu, su, zu = unscale()
        res = _residuals(problem, layout, xu, su, zu)
    if trace is not None:
        _write_trace(trace_path, trace)
    return ConicSolution(x=xu, s=su, dual=zu, status=status, iters=it, residuals=res)
