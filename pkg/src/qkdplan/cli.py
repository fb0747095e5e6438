"""Command-line entry point: ``qkdplan {optimize,generate,compare,export,verify}``.

Exit codes: 0 success, 1 internal failure, 2 usage error, 3 input error,
4 solver stopped at a limit (or found no deployment), 5 verification failed.
Defaults can be overridden through ``QKDPLAN_*`` environment variables.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import yaml

from . import __version__
from .builder import BASELINES, MODES, BuildConfig, build_model
from .evaluate import (
    average_comparisons,
    compare_modes,
    compute_gsod,
    deployment_from_result,
    format_plot_data,
    format_table,
)
from .instances import GenSpec, gen_family, nsfnet_fixture, read_family, write_family
from .model import export_lp, format_solution, read_solution
from .rates import C2CRateModel, CSCRateModel, RateConfig, compute_rates
from .solver import NumericalError, SolverConfig, solve_milp, verify
from .topology import (
    DemandMatrix,
    InputError,
    Topology,
    dump_demands,
    dump_topology,
    read_demands,
    read_topology,
)

log = logging.getLogger("qkdplan")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_INPUT, EXIT_LIMIT, EXIT_VERIFY = 0, 1, 2, 3, 4, 5
SUCCESS_STATUSES = ("optimal", "gap-limit")
ENV_PREFIX = "QKDPLAN_"


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class _Default:
    env: str
    cast: Callable
    value: object

    def resolve(self):
        raw = os.environ.get(ENV_PREFIX + self.env)
        if raw is None:
            return self.value
        try:
            return self.cast(raw)
        except ValueError as exc:
            raise UsageError(f"bad value for {ENV_PREFIX}{self.env}: {raw!r}") from exc


DEFAULTS = {
    "budget": _Default("BUDGET", float, 10000.0),
    "q1": _Default("Q1", float, 1.0),
    "q2": _Default("Q2", float, 100.0),
    "time_limit": _Default("TIME_LIMIT", float, 7200.0),
    "mip_gap": _Default("MIP_GAP", float, 0.01),
    "solution_limit": _Default("SOLUTION_LIMIT", int, 200),
    "seed": _Default("SEED", int, 0),
    "workers": _Default("WORKERS", int, 1),
}


def _model_flags(p: argparse.ArgumentParser, with_mode: bool = True) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--budget", type=float, default=DEFAULTS["budget"].resolve(), help="total budget C")
    g.add_argument("--q1", type=float, default=DEFAULTS["q1"].resolve(), help="CSC device cost relative to C2C")
    g.add_argument("--q2", type=float, default=DEFAULTS["q2"].resolve(), help="cost of trusting one node")
    if with_mode:
        g.add_argument("--mode", choices=MODES, default="hybrid")
        sel = g.add_mutually_exclusive_group()
        sel.add_argument("--selection", dest="relay_selection", action="store_true", default=True,
                         help="optimize which nodes are trusted (default)")
        sel.add_argument("--no-selection", dest="relay_selection", action="store_false",
                         help="trust nodes per --baseline instead")
    g.add_argument("--baseline", choices=BASELINES, default="all-nodes",
                   help="trusted set when relay selection is off")
    g.add_argument("--big-m", default="auto", help="big-M constant or 'auto'")
    g.add_argument("--no-tighten", dest="tighten_trust", action="store_false",
                   help="omit the T <= I tightening rows")


def _rate_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("rate models")
    c2c, csc = C2CRateModel(), CSCRateModel()
    g.add_argument("--r0", type=float, default=c2c.r0, help="C2C rate at zero length [kbps]")
    g.add_argument("--alpha", type=float, default=c2c.alpha, help="C2C fiber loss [dB/km]")
    g.add_argument("--l-max", type=float, default=c2c.l_max, help="C2C length cutoff [km]")
    g.add_argument("--r0-hat", type=float, default=csc.r0_hat, help="CSC rate at zero length [kbps]")
    g.add_argument("--csc-alpha", type=float, default=csc.alpha, help="CSC fiber loss [dB/km]")
    g.add_argument("--asym-gamma", type=float, default=csc.asym_gamma, help="CSC asymmetry penalty [dB/km]")
    g.add_argument("--l-max-total", type=float, default=csc.l_max_total, help="CSC total length cutoff [km]")
    g.add_argument("--rates-config", type=Path, help="YAML rate config with per-edge overrides")


def _solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--time-limit", type=float, default=DEFAULTS["time_limit"].resolve(), help="seconds")
    g.add_argument("--mip-gap", type=float, default=DEFAULTS["mip_gap"].resolve())
    g.add_argument("--solution-limit", type=int, default=DEFAULTS["solution_limit"].resolve())
    g.add_argument("--feas-tol", type=float, default=1e-6)
    g.add_argument("--opt-tol", type=float, default=1e-7)
    g.add_argument("--seed", type=int, default=DEFAULTS["seed"].resolve())
    g.add_argument("--workers", type=int, default=DEFAULTS["workers"].resolve())


def _instance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--topology", default="nsfnet", help="topology YAML file, or 'nsfnet' for the bundled fixture")
    p.add_argument("--demands", type=Path, help="demand CSV (defaults to the fixture's demands for 'nsfnet')")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qkdplan", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="solve one instance and write the deployment")
    _instance_flags(p)
    _model_flags(p)
    _rate_flags(p)
    _solver_flags(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("generate", help="write a random instance family")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--avg-degree", type=float, default=3.0)
    p.add_argument("--length-range", type=float, nargs=2, default=(10.0, 500.0), metavar=("LO", "HI"))
    p.add_argument("--demand-range", type=float, nargs=2, default=(100.0, 500.0), metavar=("LO", "HI"))
    p.add_argument("--user-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=DEFAULTS["seed"].resolve())
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("compare", help="six-cell mode comparison of an instance or a family")
    _instance_flags(p)
    p.add_argument("--family", type=Path, help="family directory written by 'generate'")
    _model_flags(p, with_mode=False)
    _rate_flags(p)
    _solver_flags(p)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("export", help="write the model in LP format")
    _instance_flags(p)
    _model_flags(p)
    _rate_flags(p)
    p.add_argument("--out", type=Path, required=True, help="LP file path")

    p = sub.add_parser("verify", help="check a solution file against a model")
    p.add_argument("--artifact", type=Path, help="directory written by 'optimize'")
    _instance_flags(p)
    _model_flags(p)
    _rate_flags(p)
    p.add_argument("--solution", type=Path, help="'name = value' solution file")
    p.add_argument("--feas-tol", type=float, default=1e-6)
    p.add_argument("--out", type=Path, help="write the report as JSON here")
    return parser


# -- config assembly ----------------------------------------------------------


def _build_config(args, mode: str | None = None, selection: bool | None = None) -> BuildConfig:
    big_m = args.big_m
    if big_m != "auto":
        try:
            big_m = float(big_m)
        except ValueError as exc:
            raise UsageError(f"--big-m must be 'auto' or a number, got {big_m!r}") from exc
    try:
        return BuildConfig(
            budget=args.budget, q1=args.q1, q2=args.q2,
            mode=mode or getattr(args, "mode", "hybrid"),
            relay_selection=getattr(args, "relay_selection", True) if selection is None else selection,
            big_m=big_m, tighten_trust=args.tighten_trust, baseline=args.baseline,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _solver_config(args) -> SolverConfig:
    try:
        return SolverConfig(
            time_limit_s=args.time_limit, mip_gap=args.mip_gap, solution_limit=args.solution_limit,
            feas_tol=args.feas_tol, opt_tol=args.opt_tol, seed=args.seed, workers=args.workers,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _rate_config(args) -> RateConfig:
    try:
        base = RateConfig(
            c2c=C2CRateModel(args.r0, args.alpha, args.l_max),
            csc=CSCRateModel(args.r0_hat, args.csc_alpha, args.asym_gamma, args.l_max_total),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.rates_config is None:
        return base
    path = args.rates_config
    try:
        doc = yaml.safe_load(path.read_text()) or {}
        data = base.to_dict()
        for key in ("c2c", "csc"):
            data[key].update(doc.get(key, {}))
        for key in ("c2c_overrides", "csc_overrides"):
            data[key] = {str(k): v for k, v in (doc.get(key) or {}).items()}
        unknown = set(doc) - set(data)
        if unknown:
            raise ValueError(f"unknown field(s) {sorted(unknown)}")
        return RateConfig.from_dict(data)
    except OSError as exc:
        raise InputError(f"cannot read rate config: {exc.strerror}", str(path)) from exc
    except (yaml.YAMLError, ValueError, TypeError, AttributeError) as exc:
        raise InputError(f"bad rate config: {exc}", str(path)) from exc


def _load_instance(topology: str, demands: Path | None) -> tuple[Topology, DemandMatrix, dict]:
    if topology == "nsfnet":
        topo, default_demands = nsfnet_fixture()
        source = {"topology": "nsfnet"}
    else:
        path = Path(topology)
        if not path.exists():
            raise InputError("no such file", str(path))
        topo, default_demands = read_topology(path), None
        source = {"topology": str(path)}
    if demands is not None:
        if not demands.exists():
            raise InputError("no such file", str(demands))
        default_demands = read_demands(demands)
        source["demands"] = str(demands)
    elif default_demands is None:
        raise UsageError("--demands is required unless --topology is 'nsfnet'")
    else:
        source["demands"] = "nsfnet"
    return topo, default_demands, source


def _effective_config(build: BuildConfig | None, solver: SolverConfig | None, rates: RateConfig | None,
                      source: dict) -> dict:
    cfg = {"version": __version__, "source": source}
    if build is not None:
        cfg["build"] = build.to_dict()
    if solver is not None:
        cfg["solver"] = solver.to_dict()
        cfg["seed"] = solver.seed
    if rates is not None:
        cfg["rates"] = rates.to_dict()
    return cfg


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=1, sort_keys=False, default=str) + "\n")


# -- subcommands --------------------------------------------------------------


def cmd_optimize(args) -> int:
    build, solver, rate_cfg = _build_config(args), _solver_config(args), _rate_config(args)
    topo, demands, source = _load_instance(args.topology, args.demands)
    model = build_model(topo, demands, compute_rates(topo, rate_cfg), build)
    result = solve_milp(model, solver)
    config = _effective_config(build, solver, rate_cfg, source)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    # instance copies make the artifact self-contained for 'verify --artifact'
    (out / "topology.yaml").write_text(dump_topology(topo))
    (out / "demands.csv").write_text(dump_demands(demands))
    _write_json(out / "config.json", config)
    _write_json(out / "result.json", {"config": config, **result.to_dict()})
    print(f"status {result.status}  objective {result.objective}  bound {result.bound}  gap {result.gap:.3g}")
    if not result.has_solution:
        return EXIT_LIMIT
    (out / "solution.sol").write_text(
        format_solution(result.assignment, {"status": result.status, "seed": solver.seed, "model": model.name})
    )
    provenance = {"config": config, "status": result.status, "stats": result.stats}
    dep = deployment_from_result(model, result, demands, build, provenance)
    _write_json(out / "deployment.json", dep.to_dict())
    print(f"G-SoD {compute_gsod(dep):.6g}  cost {dep.cost:g} / {build.budget:g}")
    return EXIT_OK if result.status in SUCCESS_STATUSES else EXIT_LIMIT


def cmd_generate(args) -> int:
    try:
        spec = GenSpec(
            n_nodes=args.nodes, instances=args.instances, avg_degree=args.avg_degree,
            length_range_km=tuple(args.length_range), demand_range_kbps=tuple(args.demand_range),
            user_fraction=args.user_fraction, seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    family = gen_family(spec)
    write_family(family, args.out, {"version": __version__, "seed": spec.seed})
    print(f"wrote {len(family)} instances to {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    build, solver, rate_cfg = _build_config(args), _solver_config(args), _rate_config(args)
    comparisons = []
    if args.family is not None:
        if not (args.family / "manifest.json").exists():
            raise InputError("not a family directory (manifest.json missing)", str(args.family))
        family = read_family(args.family)
        for inst in family:
            rates = compute_rates(inst.topology, rate_cfg)
            comparisons.append(compare_modes(inst.topology, inst.demands, rates, build, solver,
                                             label=f"instance {inst.index}"))
        summary = average_comparisons(comparisons, label=f"family n={family.spec.n_nodes}")
        plot = format_plot_data([(family.spec.n_nodes, summary)])
        source = {"family": str(args.family), "spec": family.spec.to_dict()}
    else:
        topo, demands, source = _load_instance(args.topology, args.demands)
        summary = compare_modes(topo, demands, compute_rates(topo, rate_cfg), build, solver,
                                label=topo.name or source["topology"])
        comparisons.append(summary)
        plot = format_plot_data([(summary.label, summary)])
    config = _effective_config(build, solver, rate_cfg, source)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    table = format_table(summary)
    (out / "table.txt").write_text(f"# config: {json.dumps(config, default=str)}\n" + table)
    (out / "plot.csv").write_text(plot)
    _write_json(out / "comparison.json", {
        "config": config, "summary": summary.to_dict(), "instances": [c.to_dict() for c in comparisons],
    })
    print(table, end="")
    return EXIT_LIMIT if summary.partial else EXIT_OK


def cmd_export(args) -> int:
    build, rate_cfg = _build_config(args), _rate_config(args)
    topo, demands, _ = _load_instance(args.topology, args.demands)
    model = build_model(topo, demands, compute_rates(topo, rate_cfg), build)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    export_lp(model, args.out)
    print(f"wrote {len(model.variables)} variables, {len(model.constraints)} constraints to {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.artifact is not None:
        art = args.artifact
        cfg_path = art / "config.json"
        if not cfg_path.exists():
            raise InputError("not an optimize artifact (config.json missing)", str(art))
        config = json.loads(cfg_path.read_text())
        build = BuildConfig(**config["build"])
        rate_cfg = RateConfig.from_dict(config["rates"])
        topo, demands = read_topology(art / "topology.yaml"), read_demands(art / "demands.csv")
        solution_path = args.solution or art / "solution.sol"
    else:
        if args.solution is None:
            raise UsageError("verify needs --artifact or --solution")
        build, rate_cfg = _build_config(args), _rate_config(args)
        topo, demands, _ = _load_instance(args.topology, args.demands)
        solution_path = args.solution
    if not Path(solution_path).exists():
        raise InputError("no such file", str(solution_path))
    model = build_model(topo, demands, compute_rates(topo, rate_cfg), build)
    try:
        values = read_solution(solution_path)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    report = verify(model, values, args.feas_tol)
    if args.out is not None:
        _write_json(args.out, report.to_dict())
    print(f"checked {report.checked_constraints} constraints, {report.checked_variables} variables: "
          f"{len(report.violations)} violation(s); objective {report.objective}")
    for v in report.violations[:20]:
        print(f"  {v}")
    return EXIT_OK if report.ok else EXIT_VERIFY


COMMANDS = {
    "optimize": cmd_optimize,
    "generate": cmd_generate,
    "compare": cmd_compare,
    "export": cmd_export,
    "verify": cmd_verify,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        parser = build_parser()
    except UsageError as exc:
        print(f"qkdplan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"qkdplan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"qkdplan: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"qkdplan: solver failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        log.debug("internal failure", exc_info=True)
        print(f"qkdplan: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
