"""Monte Carlo harness for the support-error count rho.

For each trial, rho counts false alarms (estimated nonzero, truly zero) plus
misses (truly nonzero, estimated zero); reports average it over trials.

Every trial draws its instance from ``make_rng(master_seed, sweep_value,
trial)`` and all methods see that same instance, so results do not depend on
execution order or on how many worker processes are used.
"""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .conic import NumericalFailure, SolverSettings, Status
from .model import (
    InstanceConfig,
    MeasurementInstance,
    gen_instance,
    gen_measurement_matrix,
    gen_perturbation,
    gen_sparse_signal,
    make_rng,
)
from .recovery import (
    DEFAULT_TAU,
    RECOVERY_SETTINGS,
    ZERO_FLOOR,
    DegenerateDictionary,
    Method,
    RecoveryMethod,
    recover,
)

log = logging.getLogger(__name__)

__all__ = [
    "HarnessError",
    "SweepConfig",
    "RhoRow",
    "RhoReport",
    "Profile",
    "rho_terms",
    "run_sweep",
    "run_profile",
    "REPORT_HEADER",
    "MAX_FAILURE_FRACTION",
]

REPORT_HEADER = (
    "method", "sweep_var", "sweep_value", "N", "M", "K", "delta", "trials",
    "failures", "rho_mean", "rho_std", "fa_mean", "miss_mean", "seed",
)
MAX_FAILURE_FRACTION = 0.10
_PROFILE_STREAM = 0x50524F46  # separates profile trial streams from sweep streams


class HarnessError(RuntimeError):
    """Too many failed trials for a result to be meaningful."""


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def rho_terms(est_support, true_support, N: int | None = None) -> tuple[int, int]:
    """Return ``(false_alarms, misses)`` for one trial."""
    est, true = set(est_support), set(true_support)
    if N is not None:
        for i in est | true:
            if not 0 <= i < N:
                raise IndexError(f"support index {i} outside [0, {N})")
    return len(est - true), len(true - est)


@dataclass(frozen=True)
class SweepConfig:
    base: InstanceConfig
    sweep_variable: str
    sweep_values: tuple
    methods: tuple
    trials: int = 100
    tau: float = DEFAULT_TAU
    master_seed: int = 0
    settings: SolverSettings = RECOVERY_SETTINGS

    def __post_init__(self):
        if self.sweep_variable not in ("K", "M"):
            raise ValueError("sweep_variable must be 'K' or 'M'")
        object.__setattr__(self, "sweep_values", tuple(int(v) for v in self.sweep_values))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.sweep_values:
            raise ValueError("no sweep values")
        if not self.methods:
            raise ValueError("no methods")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for v in self.sweep_values:
            self.point_config(v)  # validates against the base dimensions

    def point_config(self, value: int) -> InstanceConfig:
        return replace(self.base, **{self.sweep_variable: value})


@dataclass(frozen=True)
class RhoRow:
    method: str
    sweep_var: str
    sweep_value: int
    N: int
    M: int
    K: int
    delta: float
    trials: int
    failures: int
    rho_mean: float
    rho_std: float
    fa_mean: float
    miss_mean: float
    seed: int

    def csv_fields(self) -> list[str]:
        out = []
        for name in REPORT_HEADER:
            v = getattr(self, name)
            out.append(_fmt(v) if isinstance(v, float) else str(v))
        return out


@dataclass
class RhoReport:
    rows: list

    def get(self, method: str, value: int) -> RhoRow:
        for row in self.rows:
            if row.method == method and row.sweep_value == value:
                return row
        raise KeyError((method, value))

    def series(self, method: str) -> tuple[list[int], list[float]]:
        rows = [r for r in self.rows if r.method == method]
        return [r.sweep_value for r in rows], [r.rho_mean for r in rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for row in self.rows:
            w.writerow(row.csv_fields())
        return buf.getvalue()


def _resolve(method: RecoveryMethod, inst: MeasurementInstance) -> RecoveryMethod:
    # OMP with no stopping rule runs with the true sparsity
    if method.kind is Method.OMP and method.sparsity is None and method.residual_tol is None:
        return replace(method, sparsity=max(1, min(inst.config.K, inst.config.M)))
    return method


def _run_methods(inst: MeasurementInstance, methods, settings, tau):
    """Recover with each method; None marks a failed solve."""
    out = []
    for method in methods:
        try:
            res = recover(inst.B, inst.y, _resolve(method, inst), settings, tau)
        except (NumericalFailure, DegenerateDictionary, np.linalg.LinAlgError) as exc:
            log.warning("method %s failed: %s", method.label, exc)
            out.append(None)
            continue
        if res.solver_status is not Status.OPTIMAL:
            log.warning("method %s ended with status %s", method.label, res.solver_status.value)
            out.append(None)
            continue
        out.append(res)
    return out


def _sweep_trial(task):
    config, value, trial = task
    cfg = config.point_config(value)
    inst = gen_instance(cfg, make_rng(config.master_seed, value, trial))
    results = _run_methods(inst, config.methods, config.settings, config.tau)
    truth = inst.support
    return [None if r is None else rho_terms(r.support, truth, cfg.N) for r in results]


def _limit_blas_threads():
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return
    threadpool_limits(1)


def _map(fn, tasks, workers: int):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers, initializer=_limit_blas_threads) as ex:
        return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _check_failures(failures: int, trials: int, what: str) -> None:
    if failures > MAX_FAILURE_FRACTION * trials:
        raise HarnessError(f"{failures}/{trials} failed trials for {what} (limit {MAX_FAILURE_FRACTION:.0%})")


def run_sweep(config: SweepConfig, workers: int = 1) -> RhoReport:
    """Run every method on ``config.trials`` paired instances per sweep value.

    Raises
    ------
    HarnessError
        If more than 10% of the trials of any (method, value) pair fail.
    """
    tasks = [(config, v, t) for v in config.sweep_values for t in range(config.trials)]
    outcomes = _map(_sweep_trial, tasks, workers)
    rows = []
    L = config.trials
    for vi, value in enumerate(config.sweep_values):
        block = outcomes[vi * L : (vi + 1) * L]
        cfg = config.point_config(value)
        for mi, method in enumerate(config.methods):
            terms = [trial[mi] for trial in block if trial[mi] is not None]
            failures = L - len(terms)
            _check_failures(failures, L, f"{method.label} at {config.sweep_variable}={value}")
            fa = np.array([t[0] for t in terms], dtype=float)
            miss = np.array([t[1] for t in terms], dtype=float)
            rho = fa + miss
            rows.append(RhoRow(
                method=method.label,
                sweep_var=config.sweep_variable,
                sweep_value=value,
                N=cfg.N, M=cfg.M, K=cfg.K, delta=cfg.delta,
                trials=L,
                failures=failures,
                rho_mean=float(rho.mean()),
                rho_std=float(rho.std(ddof=1)) if rho.size > 1 else 0.0,
                fa_mean=float(fa.mean()),
                miss_mean=float(miss.mean()),
                seed=config.master_seed,
            ))
    return RhoReport(rows)


# -- averaged recovery profiles --------------------------------------------


@dataclass
class Profile:
    """Averaged normalized magnitudes, one column per method."""

    true: np.ndarray
    columns: dict
    failures: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = list(self.columns)
        w.writerow(["index", "true", *names])
        for i in range(self.true.shape[0]):
            w.writerow([i, _fmt(self.true[i]), *(_fmt(self.columns[n][i]) for n in names)])
        return buf.getvalue()


def _normalize(theta: np.ndarray, how: str) -> np.ndarray:
    mags = np.abs(theta)
    if mags.size == 0 or mags.max() <= ZERO_FLOOR:
        return np.zeros_like(mags)
    if how == "max":
        return mags / mags.max()
    if how == "l2":
        return mags / np.linalg.norm(mags)
    raise ValueError(f"unknown normalization {how!r}")


def _profile_trial(task):
    base, theta, methods, settings, tau, seed, trial, how = task
    rng = make_rng(seed, _PROFILE_STREAM, trial)
    A = gen_measurement_matrix(base.M, base.N, rng, base.matrix_mode)
    V = gen_perturbation(base.M, base.N, base.delta, rng, base.delta_semantics, base.noise_scale)
    inst = MeasurementInstance(theta_true=theta, A=A, V=V, y=A @ theta, config=base)
    inst.validate()
    results = _run_methods(inst, methods, settings, tau)
    return [None if r is None else _normalize(r.theta_hat, how) for r in results]


def run_profile(base: InstanceConfig, methods: Sequence[RecoveryMethod], trials: int,
                master_seed: int = 0, settings: SolverSettings | None = None,
                tau: float = DEFAULT_TAU, normalization: str = "max", workers: int = 1) -> Profile:
    """Average each method's normalized |theta_hat| over ``trials`` instances.

    The true support is drawn once from ``master_seed`` and held fixed; the
    measurement and perturbation matrices are redrawn every trial. A recovery
    whose peak magnitude is negligible contributes a zero vector.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    methods = tuple(methods)
    settings = settings or RECOVERY_SETTINGS
    theta = gen_sparse_signal(base.N, base.K, make_rng(master_seed), base.amplitudes)
    tasks = [(base, theta, methods, settings, tau, master_seed, t, normalization) for t in range(trials)]
    outcomes = _map(_profile_trial, tasks, workers)
    columns, failures = {}, {}
    for mi, method in enumerate(methods):
        ok = [o[mi] for o in outcomes if o[mi] is not None]
        failures[method.label] = trials - len(ok)
        _check_failures(failures[method.label], trials, f"{method.label} profile")
        acc = np.zeros(base.N)
        for vec in ok:
            acc += vec
        columns[method.label] = acc / len(ok)
    return Profile(true=_normalize(theta, normalization), columns=columns, failures=failures)
