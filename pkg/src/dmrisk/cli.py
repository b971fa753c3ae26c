"""Command line: calibrate, solve, benchmark, trace-export.

Exit codes: 0 ok, 2 bad input (config, data files), 3 calibration failure,
4 solver failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from dmrisk import kernels
from dmrisk.config import RunConfig, load_config
from dmrisk.dm import DMSpec, GammaMatrix, component_losses, single_copula_losses
from dmrisk.errors import DMRiskError, DomainError, InputError
from dmrisk.fixtures import FIXTURE_VERSION
from dmrisk.importance import ISSpec, fit_is_densities, is_sample, is_var_avar_gradient
from dmrisk.sa import SAConfig, avar_standard_error, empirical_var_avar, fit_component_densities, sa_solve, select_copulas
from dmrisk.saa import SAAConfig, saa_search

__all__ = ["main", "run_calibrate", "run_solve", "run_benchmark", "run_trace_export", "EXIT_OK", "EXIT_INPUT", "EXIT_CALIBRATION", "EXIT_SOLVER"]

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CALIBRATION = 3
EXIT_SOLVER = 4


class _Failure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _origin(exc: BaseException) -> str:
    """Innermost dmrisk module in the traceback, for error messages."""
    name = "dmrisk"
    tb = exc.__traceback__
    while tb is not None:
        mod = tb.tb_frame.f_globals.get("__name__", "")
        if mod.startswith("dmrisk."):
            name = mod
        tb = tb.tb_next
    return name


def _streams(seed: int) -> dict:
    names = ("density", "sa", "saa", "benchmark", "is")
    return dict(zip(names, np.random.SeedSequence(seed).spawn(len(names))))


def _spec(cfg: RunConfig) -> DMSpec:
    if cfg.problem is None:
        raise InputError("the configuration has no [problem] section")
    return cfg.problem.build()


def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


# library entry points


def run_benchmark(cfg: RunConfig, spec: DMSpec | None = None) -> dict:
    """Plain Monte Carlo AV@R with one copula for the whole dependence."""
    spec = spec or _spec(cfg)
    bench = cfg.benchmark
    if bench is None:
        raise InputError("the configuration has no [benchmark] section")
    if bench.copula == "central":
        copula = spec.central
    else:
        k = int(bench.copula)
        if not 1 <= k <= spec.K:
            raise DomainError(f"benchmark copula {k} is not among the {spec.K} candidates")
        copula = spec.candidates[k - 1]
    p = cfg.problem.p
    losses = single_copula_losses(copula, spec.marginals, spec.aggregation, bench.samples, _streams(cfg.seed)["benchmark"])
    v, c = empirical_var_avar(losses, p)
    return {"copula": bench.copula, "samples": bench.samples, "var": v, "avar": c, "avar_se": avar_standard_error(losses, p, v)}


def _sa(cfg: RunConfig, spec: DMSpec, stop: bool = True):
    s = _streams(cfg.seed)
    bank = component_losses(spec, cfg.sa.density_samples, s["density"])
    dens = fit_component_densities(bank, cfg.sa.grid)
    sac = SAConfig(
        p=cfg.problem.p,
        a=cfg.sa.a,
        n_per_iter=cfg.sa.n_per_iter,
        t_min=cfg.sa.t_min,
        t_max=cfg.sa.t_max,
        threshold=cfg.sa.threshold,
        seed=s["sa"],
        stop=stop,
    )
    init = GammaMatrix(np.asarray(cfg.sa.gamma_init, dtype=float)) if cfg.sa.gamma_init is not None else None
    return sa_solve(spec, sac, dens, init), dens


def run_trace_export(cfg: RunConfig, out: Path) -> dict:
    """SA for all t_max iterations (no stopping) written to sa_trace.csv."""
    spec = _spec(cfg)
    trace, _ = _sa(cfg, spec, stop=False)
    out.mkdir(parents=True, exist_ok=True)
    trace.to_csv(out / "sa_trace.csv")
    return {"iterations": trace.t_star, "avar": _floats(trace.avar)}


def run_solve(cfg: RunConfig, out: Path | None = None) -> dict:
    """Component banks and kernel tables, SA with stopping, copula selection, SAA on the reduced grid."""
    started = time.perf_counter()
    spec = _spec(cfg)
    p = cfg.problem.p
    report: dict = {
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "spec_hash": spec.spec_hash(),
        "fixture_version": FIXTURE_VERSION,
        "backend": kernels.BACKEND,
        "problem": {"d": spec.d, "m": spec.m, "K": spec.K, "p": p, "alpha": _floats(spec.alpha)},
    }
    if cfg.benchmark is not None:
        report["benchmark"] = run_benchmark(cfg, spec)

    trace, dens = _sa(cfg, spec)
    report["sa"] = {
        "t_star": trace.t_star,
        "initial_avar": trace.avar[0],
        "initial_avar_se": trace.avar_se[0],
        "final_avar": trace.avar[-1],
        "final_avar_se": trace.avar_se[-1],
        "sd_last_10": trace.sd_last(10),
        "final_gamma": _floats(trace.gammas[-1]),
        "n_per_iter": cfg.sa.n_per_iter,
        "a": cfg.sa.a,
    }

    k_star = min(cfg.saa.k_star, spec.K)
    selected = select_copulas(trace.final_gamma, trace.final_grad, k_star)
    report["selection"] = {"k_star": k_star, "selected": [j + 1 for j in selected]}

    s = _streams(cfg.seed)
    bank = component_losses(spec, cfg.saa.samples, s["saa"], columns=selected)
    saac = SAAConfig(
        p=p, eps=cfg.saa.eps, h=cfg.saa.h, rounds=cfg.saa.rounds, N=cfg.saa.samples, max_grid=cfg.saa.max_grid, threads=cfg.threads
    )
    res = saa_search(bank, spec.alpha, p, selected, saac)
    report["saa"] = {
        "avar": res.avar,
        "var": res.var,
        "avar_se": res.avar_se,
        "gamma": _floats(res.gamma_full(spec.K).values),
        "selected": [j + 1 for j in res.selected],
        "grid_points": int(res.values.size),
        "h": cfg.saa.h,
        "rounds": cfg.saa.rounds,
        "samples": cfg.saa.samples,
    }

    if cfg.is_ is not None:
        iss = ISSpec(tuple(cfg.is_.tilts), tuple(cfg.is_.shift))
        s_fit, s_draw = s["is"].spawn(2)
        idens = fit_is_densities(spec, iss, cfg.is_.density_samples, s_fit, cfg.sa.grid)
        gamma = trace.final_gamma
        y, logr, floor = is_sample(spec, iss, gamma, cfg.is_.samples, np.random.default_rng(s_draw), idens)
        v, c, _ = is_var_avar_gradient(y, logr, idens.f.g, idens.f.mixture(gamma, spec.alpha), spec.alpha, p)
        report["importance_sampling"] = {"var": v, "avar": c, "samples": cfg.is_.samples, "floor_fraction": floor}

    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        trace.to_csv(out / "sa_trace.csv")
        res.to_csv(out / "saa_grid.csv")
    report["timing"] = {"wall_clock_s": time.perf_counter() - started}
    return report


def run_calibrate(cfg: RunConfig, base: Path) -> dict:
    """Fit marginals and dependence from CSV data; the manifest feeds a [problem] section."""
    from dmrisk import calibration as cal

    c = cfg.calibrate
    if c is None:
        raise InputError("the configuration has no [calibrate] section")
    path = Path(c.data)
    if not path.is_absolute():
        path = base / path
    # reading problems are input errors, everything after is a calibration failure
    if c.kind == "compound":
        data = cal.read_records_csv(path)
    else:
        data = cal.read_panel_csv(path)
    try:
        if c.kind == "spliced":
            manifest = cal.calibrate_spliced(data, c.horizon, c.p_l, c.p_u, c.cuts, cfg.threads)
        elif c.kind == "compound":
            manifest = cal.calibrate_compound(*data, zero_seed=c.zero_seed)
        else:
            manifest = cal.calibrate_inverse_gaussian(data)
    except (DMRiskError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        raise _Failure(EXIT_CALIBRATION, f"calibration failed in {_origin(exc)}: {exc}") from exc
    manifest["data"] = str(path)
    manifest["config_hash"] = cfg.config_hash()
    manifest["fixture_version"] = FIXTURE_VERSION
    return manifest


# command line


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dmrisk", description="Worst-case AV@R with Distorted Mix copulas")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (
        ("calibrate", "fit marginals and copulas from CSV data"),
        ("solve", "SA, copula selection and SAA; writes report.json and traces"),
        ("benchmark", "single-copula Monte Carlo AV@R"),
        ("trace-export", "full SA trajectory without early stopping"),
    ):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", required=True, help="TOML or JSON run configuration")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        sp.add_argument("--threads", type=int, help="worker threads for grid evaluation")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--samples", type=int, help="override every Monte Carlo sample size")
    return ap


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _run(args) -> int:
    cfg_path = Path(args.config)
    try:
        cfg = load_config(cfg_path)
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise InputError(f"--seed must lie in [0, 2^64), got {args.seed}")
        if args.threads is not None and args.threads < 1:
            raise InputError("--threads must be >= 1")
        if args.samples is not None and args.samples < 2:
            raise InputError("--samples must be >= 2")
        cfg = cfg.with_overrides(args.seed, args.threads, args.out, args.samples)
    except InputError as exc:
        raise _Failure(EXIT_INPUT, str(exc)) from exc
    out = Path(cfg.output)

    if args.command == "calibrate":
        try:
            manifest = run_calibrate(cfg, cfg_path.parent)
        except InputError as exc:
            raise _Failure(EXIT_INPUT, str(exc)) from exc
        _write_json(out / "calibration.json", manifest)
        print(f"wrote {out / 'calibration.json'}")
        return EXIT_OK

    # model construction errors are input errors; the rest belong to the solver
    try:
        spec = _spec(cfg)
    except (InputError, DomainError, ValueError) as exc:
        raise _Failure(EXIT_INPUT, f"invalid problem in {cfg_path}: {exc}") from exc
    try:
        if args.command == "benchmark":
            rep = run_benchmark(cfg, spec)
            _write_json(out / "report.json", {"benchmark": rep, "seed": cfg.seed, "config_hash": cfg.config_hash()})
            print(f"benchmark AV@R {rep['avar']:.6g} (se {rep['avar_se']:.3g})")
        elif args.command == "trace-export":
            rep = run_trace_export(cfg, out)
            print(f"wrote {out / 'sa_trace.csv'} ({rep['iterations']} iterations)")
        else:
            rep = run_solve(cfg, out)
            _write_json(out / "report.json", rep)
            print(f"SAA AV@R {rep['saa']['avar']:.6g} with candidates {rep['saa']['selected']}; wrote {out / 'report.json'}")
    except InputError as exc:
        raise _Failure(EXIT_INPUT, str(exc)) from exc
    except (DMRiskError, ArithmeticError, ValueError, MemoryError, np.linalg.LinAlgError) as exc:
        raise _Failure(EXIT_SOLVER, f"{_origin(exc)}: {exc} (config: {cfg_path})") from exc
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _run(args)
    except _Failure as f:
        print(f"dmrisk {args.command}: {f}", file=sys.stderr)
        if f.code == EXIT_SOLVER and f.__cause__ is not None:
            traceback.print_exception(f.__cause__, limit=-3, file=sys.stderr)
        return f.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
