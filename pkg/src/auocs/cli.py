"""Command-line interface: ``auocs {gen,recover,bench,profile}``.

Exit codes: 0 success, 1 runtime or harness error, 2 usage error.
Every command first prints its fully resolved configuration as a
``config: {...}`` JSON line.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

import numpy as np

from . import __version__
from .bench import HarnessError, SweepConfig, run_profile, run_sweep
from .conic import SolverSettings
from .linalg import ParseError, write_array
from .model import DeltaSemantics, InstanceConfig, MatrixMode, gen_instance, read_instance, write_instance
from .recovery import DEFAULT_TAU, Method, RecoveryMethod, recover

log = logging.getLogger("auocs")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _method_list(text: str) -> list[str]:
    names = [v.strip().lower() for v in text.split(",") if v.strip()]
    valid = {m.value for m in Method}
    for name in names:
        if name not in valid:
            raise argparse.ArgumentTypeError(f"unknown method {name!r} (choose from {', '.join(sorted(valid))})")
    if not names:
        raise argparse.ArgumentTypeError("empty method list")
    return names


def _add_instance_flags(p, n=500, m=125, k=6, delta=0.7):
    p.add_argument("--n", type=int, default=n, help="signal length N")
    p.add_argument("--m", type=int, default=m, help="measurement count M")
    p.add_argument("--k", type=int, default=k, help="number of nonzeros K")
    p.add_argument("--delta", type=float, default=delta, help="perturbation bound")
    p.add_argument("--delta-semantics", choices=[s.value for s in DeltaSemantics], default="elementwise")
    p.add_argument("--matrix-mode", choices=[s.value for s in MatrixMode], default="subsampled-identity")
    p.add_argument("--noise-scale", type=float, default=0.5, help="perturbation std as a fraction of delta")
    p.add_argument("--seed", type=int, default=0)


def _add_solver_flags(p):
    p.add_argument("--tol", type=float, default=1e-7, help="solver tolerance (primal, dual and gap)")
    p.add_argument("--max-iters", type=int, default=50000)


def _add_method_flags(p):
    p.add_argument("--lambda", dest="lam", type=float, help="Dantzig selector bound (required for ds)")
    p.add_argument("--sparsity", type=int, help="OMP atom count (bench/profile default: true K)")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU, help="relative support threshold")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="auocs",
        description="Sparse recovery under measurement-matrix uncertainty.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instance file")
    _add_instance_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-config", action="store_true", help="print the resolved configuration and exit")

    p = sub.add_parser("recover", help="recover a signal from an instance file")
    p.add_argument("--instance", required=True)
    p.add_argument("--method", choices=[m.value for m in Method], required=True)
    p.add_argument("--delta", type=float, help="uncertainty bound used by auo (required for auo)")
    p.add_argument("--residual-tol", type=float, help="OMP residual stopping tolerance")
    _add_method_flags(p)
    _add_solver_flags(p)
    p.add_argument("--trace", help="write per-iteration solver residuals to this CSV")
    p.add_argument("--out", help="write the estimate in vector text format")
    p.add_argument("--dump-config", action="store_true")

    p = sub.add_parser("bench", help="Monte Carlo rho sweep over K or M")
    _add_instance_flags(p, n=100, m=25, k=3)
    sweep = p.add_mutually_exclusive_group(required=True)
    sweep.add_argument("--m-list", type=_int_list)
    sweep.add_argument("--k-list", type=_int_list)
    p.add_argument("--methods", type=_method_list, default=["bp", "auo"])
    p.add_argument("--solver-delta", type=float, help="delta given to auo (default: --delta)")
    _add_method_flags(p)
    _add_solver_flags(p)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--out", required=True)
    p.add_argument("--dump-config", action="store_true")

    p = sub.add_parser("profile", help="fixed-support averaged recovery profile")
    _add_instance_flags(p, n=100, m=25, k=6)
    p.add_argument("--methods", type=_method_list, default=["bp", "auo"])
    p.add_argument("--solver-delta", type=float, help="delta given to auo (default: --delta)")
    _add_method_flags(p)
    _add_solver_flags(p)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--normalization", choices=["max", "l2"], default="max")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-config", action="store_true")
    return parser


def _instance_config(parser, args, **override) -> InstanceConfig:
    try:
        return InstanceConfig(
            N=override.get("N", args.n), M=override.get("M", args.m), K=override.get("K", args.k),
            delta=args.delta, delta_semantics=args.delta_semantics,
            matrix_mode=args.matrix_mode, seed=args.seed, noise_scale=args.noise_scale,
        )
    except ValueError as exc:
        parser.error(str(exc))


def _settings(parser, args) -> SolverSettings:
    try:
        return SolverSettings(eps_primal=args.tol, eps_dual=args.tol, eps_gap=args.tol, max_iters=args.max_iters)
    except ValueError as exc:
        parser.error(str(exc))


def _make_method(parser, name: str, delta, lam, sparsity, residual_tol=None) -> RecoveryMethod:
    try:
        if name == "auo":
            if delta is None:
                parser.error("--method auo requires --delta")
            return RecoveryMethod.auo(delta)
        if name == "ds":
            if lam is None:
                parser.error("ds requires --lambda")
            return RecoveryMethod.ds(lam)
        if name == "omp":
            return RecoveryMethod.omp(sparsity=sparsity, residual_tol=residual_tol)
        return RecoveryMethod.bp()
    except ValueError as exc:
        parser.error(str(exc))


def _check_tau(parser, tau):
    if not 0 < tau < 1:
        parser.error("--tau must lie in (0, 1)")


def _print_config(cfg: dict) -> None:
    print("config: " + json.dumps(cfg, sort_keys=True))


def _cfg_dict(cfg: InstanceConfig) -> dict:
    return {
        "N": cfg.N, "M": cfg.M, "K": cfg.K, "delta": cfg.delta,
        "delta_semantics": cfg.delta_semantics.value, "matrix_mode": cfg.matrix_mode.value,
        "noise_scale": cfg.noise_scale, "seed": cfg.seed,
    }


def _settings_dict(st: SolverSettings) -> dict:
    return {"tol": st.eps_primal, "max_iters": st.max_iters, "over_relaxation": st.over_relaxation}


def _method_dict(m: RecoveryMethod) -> dict:
    d = {"method": m.label}
    if m.kind is Method.AUO:
        d["delta"] = m.delta
    elif m.kind is Method.DS:
        d["lambda"] = m.lam
    elif m.kind is Method.OMP:
        d["sparsity"] = m.sparsity if m.sparsity is not None else "true-K"
        if m.residual_tol is not None:
            d["residual_tol"] = m.residual_tol
    return d


def cmd_gen(parser, args) -> int:
    cfg = _instance_config(parser, args)
    _print_config({"command": "gen", **_cfg_dict(cfg), "out": args.out})
    if args.dump_config:
        return 0
    inst = gen_instance(cfg)
    write_instance(args.out, inst)
    print(f"instance N={cfg.N} M={cfg.M} K={cfg.K} delta={cfg.delta!r} "
          f"semantics={cfg.delta_semantics.value} matrix={cfg.matrix_mode.value} seed={cfg.seed} -> {args.out}")
    return 0


def cmd_recover(parser, args) -> int:
    _check_tau(parser, args.tau)
    if args.method == "omp" and args.sparsity is None and args.residual_tol is None:
        parser.error("--method omp requires --sparsity or --residual-tol")
    method = _make_method(parser, args.method, args.delta, args.lam, args.sparsity, args.residual_tol)
    st = _settings(parser, args)
    _print_config({"command": "recover", "instance": args.instance, **_method_dict(method),
                   **_settings_dict(st), "tau": args.tau, "out": args.out, "trace": args.trace})
    if args.dump_config:
        return 0
    inst = read_instance(args.instance)
    res = recover(inst.B, inst.y, method, st, args.tau, trace_path=args.trace)
    print(f"status: {res.solver_status.value}")
    print(f"iterations: {res.iters}")
    print(f"objective: {res.objective!r}")
    if res.t_value is not None:
        M = inst.config.M
        l1 = float(np.sum(np.abs(res.theta_hat)))
        resid = float(np.linalg.norm(inst.y - inst.B @ res.theta_hat))
        bound = math.sqrt(M) * method.delta * res.t_value
        print(f"t: {res.t_value!r}")
        print(f"l1_norm: {l1!r} (<= t: {l1 <= res.t_value + 1e-5})")
        print(f"residual_norm: {resid!r} (<= sqrt(M)*delta*t = {bound!r}: {resid <= bound + 1e-5})")
    print("support: " + ",".join(str(i) for i in res.support))
    if args.out:
        write_array(args.out, res.theta_hat)
    return 0


def _methods(parser, args, delta) -> list[RecoveryMethod]:
    return [_make_method(parser, name, delta, args.lam, args.sparsity) for name in args.methods]


def cmd_bench(parser, args) -> int:
    _check_tau(parser, args.tau)
    if args.trials < 1 or args.threads < 1:
        parser.error("--trials and --threads must be >= 1")
    var, values = ("M", args.m_list) if args.m_list is not None else ("K", args.k_list)
    base = _instance_config(parser, args)
    for v in values:
        _instance_config(parser, args, **{var: v})
    solver_delta = args.solver_delta if args.solver_delta is not None else args.delta
    methods = _methods(parser, args, solver_delta)
    st = _settings(parser, args)
    config = SweepConfig(base=base, sweep_variable=var, sweep_values=values, methods=methods,
                         trials=args.trials, tau=args.tau, master_seed=args.seed, settings=st)
    _print_config({"command": "bench", **_cfg_dict(base), "sweep_var": var, "sweep_values": values,
                   "methods": [_method_dict(m) for m in methods], "trials": args.trials, "tau": args.tau,
                   **_settings_dict(st), "threads": args.threads, "out": args.out})
    if args.dump_config:
        return 0
    report = run_sweep(config, workers=args.threads)
    with open(args.out, "w") as fh:
        fh.write(report.to_csv())
    for row in report.rows:
        print(f"{row.method:>4} {var}={row.sweep_value:<4} rho={row.rho_mean:.3f} "
              f"(fa={row.fa_mean:.3f}, miss={row.miss_mean:.3f}, failures={row.failures})")
    return 0


def cmd_profile(parser, args) -> int:
    _check_tau(parser, args.tau)
    if args.trials < 1 or args.threads < 1:
        parser.error("--trials and --threads must be >= 1")
    base = _instance_config(parser, args)
    solver_delta = args.solver_delta if args.solver_delta is not None else args.delta
    methods = _methods(parser, args, solver_delta)
    st = _settings(parser, args)
    _print_config({"command": "profile", **_cfg_dict(base), "methods": [_method_dict(m) for m in methods],
                   "trials": args.trials, "tau": args.tau, "normalization": args.normalization,
                   **_settings_dict(st), "threads": args.threads, "out": args.out})
    if args.dump_config:
        return 0
    prof = run_profile(base, methods, args.trials, master_seed=args.seed, settings=st, tau=args.tau,
                       normalization=args.normalization, workers=args.threads)
    with open(args.out, "w") as fh:
        fh.write(prof.to_csv())
    support = prof.true > 0
    for name, col in prof.columns.items():
        off = col[~support].max() if (~support).any() else 0.0
        on = col[support].min() if support.any() else 0.0
        print(f"{name:>4} min on-support={on:.4f} max off-support={off:.4f} failures={prof.failures[name]}")
    return 0


_COMMANDS = {"gen": cmd_gen, "recover": cmd_recover, "bench": cmd_bench, "profile": cmd_profile}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return _COMMANDS[args.command](parser, args)
    except (HarnessError, ParseError, OSError, ValueError) as exc:
        print(f"auocs: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
