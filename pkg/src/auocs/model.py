"""Seeded instance generation and instance files.

An instance is ``y = A @ theta``, ``B = A + V`` with ``V`` bounded by
``delta``. Random streams are numpy ``Generator(PCG64)`` objects seeded
through ``SeedSequence``; :func:`trial_rng` derives an independent stream
from a tuple of integers such as ``(master_seed, sweep_value, trial)`` so
that trials can be generated in any order or in parallel.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import ParseError, as_mat, as_vec, format_array, mat_inf_norm, parse_array

__all__ = [
    "DeltaSemantics",
    "MatrixMode",
    "InstanceConfig",
    "MeasurementInstance",
    "make_rng",
    "trial_rng",
    "gen_sparse_signal",
    "gen_measurement_matrix",
    "gen_perturbation",
    "gen_instance",
    "write_instance",
    "read_instance",
]


class DeltaSemantics(str, enum.Enum):
    ELEMENTWISE = "elementwise"
    ROW_L1 = "rowl1"


class MatrixMode(str, enum.Enum):
    SUBSAMPLED_IDENTITY = "subsampled-identity"
    GAUSSIAN = "gaussian"


def make_rng(*key: int) -> np.random.Generator:
    """PCG64 generator seeded from ``SeedSequence(key)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in key])))


trial_rng = make_rng


@dataclass(frozen=True)
class InstanceConfig:
    N: int
    M: int
    K: int
    delta: float = 0.0
    delta_semantics: DeltaSemantics = DeltaSemantics.ELEMENTWISE
    amplitudes: tuple | None = None  # None means every nonzero is 1
    matrix_mode: MatrixMode = MatrixMode.SUBSAMPLED_IDENTITY
    seed: int = 0
    # standard deviation of the perturbation, as a fraction of delta
    noise_scale: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "delta_semantics", DeltaSemantics(self.delta_semantics))
        object.__setattr__(self, "matrix_mode", MatrixMode(self.matrix_mode))
        object.__setattr__(self, "delta", float(self.delta))
        if self.amplitudes is not None:
            object.__setattr__(self, "amplitudes", tuple(float(a) for a in self.amplitudes))
        if self.N < 1 or self.M < 1:
            raise ValueError("N and M must be positive")
        if not 0 <= self.K <= self.N:
            raise ValueError(f"K must lie in [0, N], got K={self.K}, N={self.N}")
        if self.M > self.N:
            raise ValueError(f"M must not exceed N (M={self.M}, N={self.N})")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.noise_scale <= 0:
            raise ValueError("noise_scale must be positive")
        if self.amplitudes is not None and len(self.amplitudes) != self.K:
            raise ValueError("need exactly K amplitudes")

    def with_(self, **changes) -> "InstanceConfig":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class MeasurementInstance:
    theta_true: np.ndarray
    A: np.ndarray
    V: np.ndarray
    y: np.ndarray
    config: InstanceConfig
    B: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "B", self.A + self.V)

    @property
    def support(self) -> tuple:
        return tuple(int(i) for i in np.flatnonzero(self.theta_true))

    def validate(self) -> None:
        cfg = self.config
        if self.theta_true.shape != (cfg.N,):
            raise ValueError("theta has wrong length")
        for name in ("A", "V", "B"):
            if getattr(self, name).shape != (cfg.M, cfg.N):
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {(cfg.M, cfg.N)}")
        if self.y.shape != (cfg.M,):
            raise ValueError("y has wrong length")
        if np.count_nonzero(self.theta_true) != cfg.K:
            raise ValueError("theta does not have exactly K nonzeros")
        if not np.array_equal(self.y, self.A @ self.theta_true):
            raise ValueError("y != A theta")
        if cfg.delta_semantics is DeltaSemantics.ELEMENTWISE:
            if self.V.size and np.max(np.abs(self.V)) > cfg.delta:
                raise ValueError("perturbation exceeds elementwise bound")
        elif mat_inf_norm(self.V) > cfg.delta:
            raise ValueError("perturbation exceeds row l1 bound")

    def __eq__(self, other):
        if not isinstance(other, MeasurementInstance):
            return NotImplemented
        return (
            self.config == other.config
            and all(np.array_equal(getattr(self, k), getattr(other, k)) for k in ("theta_true", "A", "V", "y", "B"))
        )


def gen_sparse_signal(N: int, K: int, rng: np.random.Generator, amplitudes=None) -> np.ndarray:
    """Length-``N`` vector with ``K`` nonzeros at uniformly drawn positions."""
    if not 0 <= K <= N:
        raise ValueError(f"K must lie in [0, N], got K={K}, N={N}")
    theta = np.zeros(N)
    if K == 0:
        return theta
    positions = np.sort(rng.choice(N, size=K, replace=False))
    theta[positions] = 1.0 if amplitudes is None else np.asarray(amplitudes, dtype=float)
    return theta


def gen_measurement_matrix(M: int, N: int, rng: np.random.Generator,
                           mode: MatrixMode = MatrixMode.SUBSAMPLED_IDENTITY) -> np.ndarray:
    mode = MatrixMode(mode)
    if mode is MatrixMode.SUBSAMPLED_IDENTITY:
        if M > N:
            raise ValueError(f"cannot pick {M} distinct rows from a {N}x{N} identity")
        rows = np.sort(rng.choice(N, size=M, replace=False))
        A = np.zeros((M, N))
        A[np.arange(M), rows] = 1.0
        return A
    return rng.standard_normal((M, N)) / np.sqrt(M)


def gen_perturbation(M: int, N: int, delta: float, rng: np.random.Generator,
                     semantics: DeltaSemantics = DeltaSemantics.ELEMENTWISE,
                     noise_scale: float = 0.5) -> np.ndarray:
    """Bounded Gaussian perturbation.

    Entries are N(0, (noise_scale * delta)^2), redrawn until ``|v| <= delta``.
    Under row-l1 semantics every row whose l1 norm exceeds ``delta`` is then
    rescaled onto it.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    semantics = DeltaSemantics(semantics)
    if delta == 0:
        return np.zeros((M, N))
    sd = noise_scale * delta
    V = rng.normal(0.0, sd, size=(M, N))
    bad = np.abs(V) > delta
    while bad.any():
        V[bad] = rng.normal(0.0, sd, size=int(bad.sum()))
        bad = np.abs(V) > delta
    if semantics is DeltaSemantics.ROW_L1:
        row_l1 = np.sum(np.abs(V), axis=1)
        over = row_l1 > delta
        V[over] *= (delta / row_l1[over])[:, None]
        # rounding can leave a row a hair above delta
        while mat_inf_norm(V) > delta:
            row_l1 = np.sum(np.abs(V), axis=1)
            over = row_l1 > delta
            V[over] = np.nextafter(V[over], 0.0)
    return V


def gen_instance(config: InstanceConfig, rng: np.random.Generator | None = None) -> MeasurementInstance:
    """Draw theta, A and V (in that order) and assemble a checked instance.

    Uses ``make_rng(config.seed)`` unless a stream is passed in.
    """
    if rng is None:
        rng = make_rng(config.seed)
    theta = gen_sparse_signal(config.N, config.K, rng, config.amplitudes)
    A = gen_measurement_matrix(config.M, config.N, rng, config.matrix_mode)
    V = gen_perturbation(config.M, config.N, config.delta, rng, config.delta_semantics, config.noise_scale)
    inst = MeasurementInstance(theta_true=theta, A=A, V=V, y=A @ theta, config=config)
    inst.validate()
    return inst


# -- instance files --------------------------------------------------------

_HEADER_KEYS = ("N", "M", "K", "delta", "delta_semantics", "matrix_mode", "seed")
_SECTIONS = ("theta", "A", "V", "y")


def format_instance(inst: MeasurementInstance) -> str:
    cfg = inst.config
    lines = [
        f"N = {cfg.N}",
        f"M = {cfg.M}",
        f"K = {cfg.K}",
        f"delta = {cfg.delta!r}",
        f"delta_semantics = {cfg.delta_semantics.value}",
        f"matrix_mode = {cfg.matrix_mode.value}",
        f"seed = {cfg.seed}",
        f"noise_scale = {cfg.noise_scale!r}",
    ]
    if cfg.amplitudes is not None:
        lines.append("amplitudes = " + ",".join(repr(a) for a in cfg.amplitudes))
    out = "\n".join(lines) + "\n"
    for name, arr in zip(_SECTIONS, (inst.theta_true, inst.A, inst.V, inst.y)):
        out += f"[{name}]\n" + format_array(arr)
    return out


def write_instance(path: str | os.PathLike, inst: MeasurementInstance) -> None:
    with open(path, "w") as fh:
        fh.write(format_instance(inst))


def parse_instance(text: str) -> MeasurementInstance:
    lines = text.splitlines()
    header: dict[str, str] = {}
    i = 0
    while i < len(lines) and not lines[i].startswith("["):
        line = lines[i].strip()
        if line:
            key, sep, value = line.partition("=")
            if not sep:
                raise ParseError(f"expected 'key = value', got {line!r}", i + 1)
            header[key.strip()] = value.strip()
        i += 1
    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise ParseError(f"missing header keys: {', '.join(missing)}", i + 1)

    arrays = {}
    for name in _SECTIONS:
        if i >= len(lines):
            raise ParseError(f"truncated: missing section [{name}]", i + 1)
        if lines[i].strip() != f"[{name}]":
            raise ParseError(f"expected section [{name}], got {lines[i].strip()!r}", i + 1)
        i += 1
        arr = parse_array(lines[i:], first_lineno=i + 1, vector=name in ("theta", "y"))
        i += 1 + (arr.shape[0])
        arrays[name] = arr

    try:
        amps = header.get("amplitudes")
        config = InstanceConfig(
            N=int(header["N"]),
            M=int(header["M"]),
            K=int(header["K"]),
            delta=float(header["delta"]),
            delta_semantics=header["delta_semantics"],
            matrix_mode=header["matrix_mode"],
            seed=int(header["seed"]),
            noise_scale=float(header.get("noise_scale", 0.5)),
            amplitudes=None if amps is None else tuple(float(a) for a in amps.split(",") if a.strip()),
        )
    except ValueError as exc:
        raise ParseError(f"invalid header: {exc}", 1) from None

    inst = MeasurementInstance(
        theta_true=as_vec(arrays["theta"]), A=as_mat(arrays["A"]), V=as_mat(arrays["V"]),
        y=as_vec(arrays["y"]), config=config,
    )
    try:
        inst.validate()
    except ValueError as exc:
        raise ValueError(f"instance does not match its header: {exc}") from None
    return inst


def read_instance(path: str | os.PathLike) -> MeasurementInstance:
    with open(path) as fh:
        return parse_instance(fh.read())
