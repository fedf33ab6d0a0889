"""Command-line driver: simulate / compare / uq / analyze.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 I/O error.
Every run is reproducible from (scenario file, seed); `--threads` is accepted
for symmetry but never changes results.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, macro, micro, output, uq
from .core import (
    AccidentCapacity,
    ConfigError,
    MacroField,
    ModelParams,
    NumericalError,
    micro_speed_Vtilde,
    micro_speed_equilibrium,
)
from .particle import particle_init, run_particle
from .scenario import KNOWN_MODELS, Scenario, load_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


MICRO_SPEED_LAWS = {
    "linear": micro_speed_Vtilde,
    "equilibrium": micro_speed_equilibrium,
}


def run_model(scenario: Scenario, model: str, seed: int = 0, y=None,
              out_times=None, micro_speed: str = "linear"):
    """Run one model on the scenario grid; returns {time: MacroField}."""
    params, grid, capacity = scenario.params, scenario.grid, scenario.capacity
    if isinstance(capacity, AccidentCapacity) and y is None:
        raise ConfigError("accident capacity requires --accident-size (or a "
                          "uq command) to fix the half-width Y")
    if micro_speed not in MICRO_SPEED_LAWS:
        raise ConfigError(f"unknown micro speed law {micro_speed!r}")
    if model == "macro1":
        return macro.run_first_order(scenario.rho0_field(), capacity, params,
                                     grid, y=y, out_times=out_times)
    if model == "macro2":
        return macro.run_second_order(scenario.rho0_field(),
                                      scenario.h0_field(), capacity, params,
                                      grid, y=y, out_times=out_times)
    if model == "micro":
        state = micro.micro_init_from_density(scenario.rho0, params.N,
                                              params.L, grid)
        return micro.run_micro(state, capacity, params, grid, y=y,
                               out_times=out_times,
                               speed_law=MICRO_SPEED_LAWS[micro_speed])
    if model == "particle":
        ens = particle_init(scenario.rho0, scenario.h0, params.N, grid)
        return run_particle(ens, capacity, params, grid, seed=seed, y=y,
                            out_times=out_times)
    raise ConfigError(f"unknown model {model!r}")


def _parse_times(arg, params: ModelParams):
    if arg is None:
        return None
    return tuple(float(v) for v in arg.split(","))


def _write_run(out_dir: Path, fields: dict, meta: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for t, field in sorted(fields.items()):
        output.write_fields_csv(out_dir / output.fields_filename(t), field)
    output.write_metadata(out_dir / "metadata.json", meta)


def _mass_drift(fields: dict, grid) -> float:
    times = sorted(fields)
    m0 = macro.total_mass(fields[times[0]].rho, grid)
    mT = macro.total_mass(fields[times[-1]].rho, grid)
    return abs(mT - m0) / max(abs(m0), 1e-300)


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    model = args.model or scenario.model
    if model is None:
        raise ConfigError("no model given (use --model or the scenario key)")
    times = _parse_times(args.times, scenario.params)
    fields = run_model(scenario, model, seed=args.seed, y=args.accident_size,
                       out_times=times, micro_speed=args.micro_speed)
    meta = {
        "model": model,
        "scheme": "lax-friedrichs" if model.startswith("macro") else "euler",
        "dx": scenario.grid.dx,
        "dt": scenario.params.dt,
        "T": scenario.params.T,
        "seed": args.seed,
        "mass_drift": _mass_drift(fields, scenario.grid),
    }
    _write_run(Path(args.out), fields, meta)
    return EXIT_OK


def cmd_compare(args) -> int:
    scenario = load_scenario(args.scenario)
    models = args.models.split(",")
    for m in models:
        if m not in KNOWN_MODELS:
            raise ConfigError(f"unknown model {m!r}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    T = scenario.params.T
    finals = {}
    for m in models:
        fields = run_model(scenario, m, seed=args.seed,
                           y=args.accident_size, out_times=(0.0, T),
                           micro_speed=args.micro_speed)
        finals[m] = fields[T]
        for t, field in sorted(fields.items()):
            output.write_fields_csv(
                out_dir / f"fields_{m}_t{t:g}.csv", field)

    lines = ["model_a,model_b,l1_rho,l1_rho_rel"]
    for i, a in enumerate(models):
        for b in models[i:]:
            d = l1_distance(finals[a], finals[b])
            rel = d / max(macro.total_mass(np.abs(finals[a].rho),
                                           scenario.grid), 1e-300)
            lines.append(f"{a},{b},{d!r},{rel!r}")
    (out_dir / "l1_distances.csv").write_text("\n".join(lines) + "\n")
    output.write_metadata(out_dir / "metadata.json",
                          {"models": models, "T": T, "seed": args.seed})
    return EXIT_OK


def l1_distance(a: MacroField, b: MacroField) -> float:
    if a.grid != b.grid:
        raise ConfigError("fields live on different grids")
    return float(np.sum(np.abs(a.rho - b.rho)) * a.grid.dx)


def cmd_uq(args) -> int:
    scenario = load_scenario(args.scenario)
    if scenario.uq is None:
        raise ConfigError("scenario lacks a uq section")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_samples = args.samples or scenario.uq.n_samples
    n_nodes = args.nodes or scenario.uq.pce_nodes
    order = args.order if args.order is not None else scenario.uq.pce_order
    model = args.model
    meta = {
        "mode": args.uq_mode,
        "model": model,
        "seed": args.seed,
        "distribution": scenario.uq.distribution,
        "alpha": scenario.uq.alpha,
        "beta": scenario.uq.beta,
    }

    if args.uq_mode == "mc":
        stats = uq.monte_carlo(scenario, model, n_samples, seed=args.seed)
        output.write_stats_csv(out_dir / "mc_summary.csv", stats)
        meta["n_samples"] = n_samples
    elif args.uq_mode == "pce":
        if scenario.uq.distribution != "uniform":
            raise ConfigError("the Galerkin expansion supports the uniform "
                              "distribution only")
        runner = uq.run_pce_macro if model == "macro2" else uq.run_pce_micro
        fields = runner(scenario, n_nodes=n_nodes, K=order,
                        out_times=(scenario.params.T,))
        for t, field in sorted(fields.items()):
            output.write_fields_csv(
                out_dir / f"pce_expectation_t{t:g}.csv", field)
        meta.update(n_nodes=n_nodes, order=order)
    elif args.uq_mode == "convergence":
        if scenario.uq.distribution != "uniform":
            raise ConfigError("the Galerkin expansion supports the uniform "
                              "distribution only")
        stats = uq.monte_carlo(scenario, model, n_samples, seed=args.seed)
        result = uq.pce_convergence_study(scenario, model, stats)
        output.write_stats_csv(out_dir / "mc_summary.csv", stats)
        output.write_convergence_csv(out_dir / "convergence.csv", result)
        meta.update(n_samples=n_samples, rate_rho=result.rate_rho,
                    rate_h=result.rate_h)
    else:
        raise ConfigError(f"unknown uq mode {args.uq_mode!r}")

    output.write_metadata(out_dir / "metadata.json", meta)
    return EXIT_OK


def _analysis_params(args) -> ModelParams:
    return ModelParams(gamma=args.gamma, eta=args.eta)


def cmd_analyze(args) -> int:
    params = _analysis_params(args)
    state = analysis.StateUHC(rho=args.rho, h=args.h, c=args.c)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.analyze_mode == "eigen":
        dec = analysis.eigenstructure(state, params)
        report = {
            "lambdas": list(dec.lambdas),
            "eigenvectors": [list(r) for r in dec.vectors],
            "strictly_hyperbolic": dec.strictly_hyperbolic,
            "eigen_residual": analysis.eigen_residual(state, params),
            "genuine_nonlinearity_2": analysis.genuine_nonlinearity_2(
                state, params),
            "nonlinearity_diagnostic": analysis.nonlinearity_diagnostic(
                state, params),
        }
        (out_dir / "eigen.json").write_text(
            json.dumps(report, indent=2) + "\n")
    elif args.analyze_mode == "curves":
        sigma, states = analysis.rarefaction_curve(
            args.family, state, args.sigma_max, args.n_steps, params)
        lam = np.array([analysis.eigenstructure(
            analysis.StateUHC(*s), params).lambdas[args.family - 1]
            for s in states])
        lines = ["sigma,rho,h,c,lambda"]
        for s, (rho, h, c), lv in zip(sigma, states, lam):
            lines.append(",".join(repr(float(v)) for v in (s, rho, h, c, lv)))
        (out_dir / f"curve_family{args.family}.csv").write_text(
            "\n".join(lines) + "\n")
    elif args.analyze_mode == "rh":
        if None in (args.rho_right, args.h_right, args.c_right):
            raise ConfigError("rh mode needs --rho-right, --h-right and "
                              "--c-right")
        right = analysis.StateUHC(rho=args.rho_right, h=args.h_right,
                                  c=args.c_right)
        res = analysis.rh_residual(state, right, args.speed, params)
        (out_dir / "rh.json").write_text(
            json.dumps({"residuals": list(res)}, indent=2) + "\n")
    else:
        raise ConfigError(f"unknown analyze mode {args.analyze_mode!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trafficflow",
        description="Multiscale traffic flow simulation and UQ toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--scenario", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=0,
                       help="0 = auto; results never depend on this")
        p.add_argument("--accident-size", type=float, default=None,
                       help="fixed accident half-width Y for deterministic "
                            "runs with the accident capacity")
        p.add_argument("--micro-speed", choices=sorted(MICRO_SPEED_LAWS),
                       default="linear",
                       help="follow-the-leader speed law: 'linear' (1 - u) "
                            "or 'equilibrium' (V(H(u)), shares wave speeds "
                            "with the macroscopic solvers)")

    p = sub.add_parser("simulate", help="run a single model")
    add_common(p)
    p.add_argument("--model", choices=KNOWN_MODELS)
    p.add_argument("--times", help="comma-separated output times")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run several models on a shared grid")
    add_common(p)
    p.add_argument("--models", required=True,
                   help="comma-separated model list")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("uq", help="Monte Carlo / polynomial chaos studies")
    p.add_argument("uq_mode", choices=("mc", "pce", "convergence"))
    add_common(p)
    p.add_argument("--model", choices=("micro", "macro2"), default="macro2")
    p.add_argument("--samples", type=int)
    p.add_argument("--nodes", type=int)
    p.add_argument("--order", type=int)
    p.set_defaults(func=cmd_uq)

    p = sub.add_parser("analyze", help="eigenstructure and wave curves")
    p.add_argument("analyze_mode", choices=("eigen", "curves", "rh"))
    p.add_argument("--out", required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--eta", type=float, default=1e-2)
    p.add_argument("--family", type=int, choices=(1, 2, 3), default=2)
    p.add_argument("--sigma-max", type=float, default=0.5)
    p.add_argument("--n-steps", type=int, default=100)
    p.add_argument("--rho-right", type=float)
    p.add_argument("--h-right", type=float)
    p.add_argument("--c-right", type=float)
    p.add_argument("--speed", type=float, default=0.0)
    p.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
