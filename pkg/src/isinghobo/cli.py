"""Command line entry point ``isinghobo``.

Every subcommand also accepts ``--config FILE``: a flat ``key=value`` text
file whose keys are the long flag names (``max-iters=20`` or
``max_iters=20``). Flags given on the command line override the file.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import bench
from .constrained import AlmConfig, AlmIterate, solve_alm
from .hobo import HoboConfig, minimize_hobo
from .model import read_polynomial, write_polynomial
from .quadratize import quadratize
from .solvers import DsbConfig, SaConfig, solve_exhaustive, solve_quadratic
from .swipt import ScenarioConfig, SwiptInstance, ThresholdMode, generate_instance, to_constrained_problem


def _ints(text: str) -> list[int]:
    return [int(t) for t in str(text).split(",") if t.strip()]


def _floats(text: str) -> list[float]:
    return [float(t) for t in str(text).split(",") if t.strip()]


def _words(text: str) -> list[str]:
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _xi0(text: str):
    return "auto" if text == "auto" else float(text)


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", choices=["dsb", "sa", "exhaustive"], default="dsb")
    p.add_argument("--steps", type=int, default=1000, help="dSB steps or SA sweeps")
    p.add_argument("--dt", type=float, default=0.5)
    p.add_argument("--b0", type=float, default=1.0)
    p.add_argument("--xi0", type=_xi0, default="auto")
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)


def _solver_config(args):
    if args.solver == "dsb":
        return DsbConfig(steps=args.steps, dt=args.dt, b0=args.b0, xi0=args.xi0, restarts=args.restarts, seed=args.seed)
    if args.solver == "sa":
        return SaConfig(sweeps=args.steps, restarts=args.restarts, seed=args.seed)
    return None


def _write_rows(path, header, rows) -> None:
    fh = sys.stdout if path in (None, "-") else open(path, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args) -> int:
    poly = read_polynomial(args.model)
    if poly.degree > 2:
        raise SystemExit("solve expects a quadratic model; use `hobo` for higher orders")
    if args.solver == "exhaustive":
        res = solve_exhaustive(poly)
    else:
        res = solve_quadratic(poly, args.solver, _solver_config(args))
    print(json.dumps(res.to_dict()))
    return 0


def cmd_hobo(args) -> int:
    poly = read_polynomial(args.poly)
    cfg = HoboConfig(max_iters=args.max_iters, stall_limit=args.stall_limit, solver=args.solver,
                     solver_config=_solver_config(args), seed=args.seed)
    res = minimize_hobo(poly, cfg)
    _write_rows(args.out, res.trace.header, res.trace.rows())
    print(json.dumps({"value": res.value, "assignment": res.best.values.tolist()}), file=sys.stderr)
    return 0


def cmd_quadratize(args) -> int:
    poly = read_polynomial(args.poly)
    res = quadratize(poly)
    out = Path(args.out) if args.out else Path(args.poly).with_suffix(".quad.txt")
    write_polynomial(res.quadratic, out)
    subs_path = Path(args.subs) if args.subs else out.with_suffix(".subs.json")
    subs_path.write_text(json.dumps([s.to_dict() for s in res.substitutions], indent=1) + "\n")
    print(json.dumps({**res.counts(), "original_vars": res.original_num_vars, "aux_vars": res.num_aux,
                      "quadratic_file": str(out), "substitutions_file": str(subs_path)}))
    return 0


def _load_problem_instance(spec: str) -> SwiptInstance:
    """``path.json`` or ``swipt:n=14,delta=500,seed=0,channel=3[,mode=...]``."""
    if spec.startswith("swipt:"):
        opts = dict(kv.split("=", 1) for kv in spec[len("swipt:"):].split(",") if kv)
        scenario = ScenarioConfig(n_elements=int(opts.get("n", 10)), delta=float(opts.get("delta", 500)),
                                  seed=int(opts.get("seed", 0)),
                                  threshold_mode=ThresholdMode.parse(opts.get("mode", "quadratic_root")))
        return generate_instance(scenario, int(opts.get("channel", 0)))
    return SwiptInstance.load(spec)


def cmd_alm(args) -> int:
    inst = _load_problem_instance(args.problem)
    inner_solver = args.inner_solver
    if inner_solver == "quadratize-sa":
        cfg = AlmConfig(lambda0=args.lambda0, mu0=args.mu0, rho=args.rho, min_iters=args.min_iters,
                        max_iters=args.max_iters, inner_method="quadratize", quad_solver="sa", seed=args.seed)
    else:
        inner = HoboConfig(solver=inner_solver, repair_always=True)
        cfg = AlmConfig(lambda0=args.lambda0, mu0=args.mu0, rho=args.rho, min_iters=args.min_iters,
                        max_iters=args.max_iters, inner=inner, seed=args.seed)
    res = solve_alm(to_constrained_problem(inst), cfg)
    _write_rows(args.out, AlmIterate.header, [t.row() for t in res.trace])
    summary = {"feasible": res.feasible, "objective": res.objective, "outer_iters": res.outer_iters}
    if res.assignment is not None:
        summary["assignment"] = res.assignment.values.tolist()
        summary["snr_linear"] = inst.snr(res.assignment.values)
    print(json.dumps(summary), file=sys.stderr)
    return 0


def cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scenario = ScenarioConfig(n_elements=args.n, delta=args.delta, seed=args.seed,
                              threshold_mode=ThresholdMode.parse(args.threshold_mode))
    for cid in range(args.channels):
        inst = generate_instance(scenario, cid)
        inst.save(out / f"instance_N{args.n}_d{args.delta:g}_s{args.seed}_c{cid}.json")
    print(json.dumps({"written": args.channels, "out": str(out), "c_uW": generate_instance(scenario, 0).c}))
    return 0


def _experiment(args, n_values, delta_values) -> bench.ExperimentConfig:
    scenario = ScenarioConfig(threshold_mode=ThresholdMode.parse(args.threshold_mode))
    alm = AlmConfig(min_iters=args.alm_min_iters, max_iters=args.alm_max_iters)
    return bench.ExperimentConfig(
        n_values=n_values, delta_values=delta_values, schemes=tuple(_words(args.schemes)),
        channels_per_point=args.channels, screen=not args.no_screen, scan_channels=args.scan_channels,
        max_scan=args.max_scan, reference=args.reference, seed=args.seed, scenario=scenario, alm=alm,
        random_samples=args.random_samples, workers=args.workers, out_dir=args.out,
    )


def cmd_bench_sweep(args) -> int:
    cfg = _experiment(args, _ints(args.n), _floats(args.delta))
    _, summary = bench.run_sweep(cfg)
    print(json.dumps(summary, indent=1))
    return 0


def cmd_bench_timing(args) -> int:
    cfg = _experiment(args, _ints(args.n), _floats(args.delta))
    rows = bench.run_timing(cfg.n_values, cfg.schemes, channels=args.channels, cfg=cfg)
    path = None
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        path = str(Path(args.out) / "timing.csv")
    _write_rows(path, bench.TIMING_SUMMARY_FIELDS, rows)
    return 0


def cmd_bench_converge(args) -> int:
    if args.problem:
        inst = _load_problem_instance(args.problem)
    else:
        scenario = ScenarioConfig(n_elements=_ints(args.n)[0], delta=_floats(args.delta)[0], seed=args.seed,
                                  threshold_mode=ThresholdMode.parse(args.threshold_mode))
        inst = generate_instance(scenario, args.channel)
    cfg = _experiment(args, [inst.n], [inst.delta])
    scheme = _words(args.schemes)[0]
    rows = bench.run_convergence(inst, scheme, cfg, seed=args.seed)
    path = None
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        path = str(Path(args.out) / "convergence.csv")
    _write_rows(path, bench.CONVERGENCE_FIELDS, rows)
    return 0


# ---------------------------------------------------------------------------
# parser


def _bench_flags(p: argparse.ArgumentParser, n_default: str, delta_default: str, schemes_default: str) -> None:
    p.add_argument("--n", default=n_default, help="comma separated RIS sizes")
    p.add_argument("--delta", default=delta_default, help="comma separated EH requirements (uW)")
    p.add_argument("--channels", type=int, default=50)
    p.add_argument("--schemes", default=schemes_default, help=f"comma separated subset of {','.join(bench.SCHEMES)}")
    p.add_argument("--reference", default="exhaustive", choices=bench.SCHEMES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-screen", action="store_true")
    p.add_argument("--scan-channels", type=int, default=0)
    p.add_argument("--max-scan", type=int, default=20000)
    p.add_argument("--threshold-mode", default="quadratic_root")
    p.add_argument("--alm-min-iters", type=int, default=20)
    p.add_argument("--alm-max-iters", type=int, default=50)
    p.add_argument("--random-samples", type=int, default=5000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isinghobo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, parent=sub):
        p = parent.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="key=value file with default flag values")
        p.set_defaults(func=func)
        return p

    p = add("solve", cmd_solve, "minimize a quadratic polynomial model")
    p.add_argument("--model", required=True)
    _add_solver_flags(p)

    p = add("hobo", cmd_hobo, "Taylor-surrogate minimization of a higher-order polynomial")
    p.add_argument("--poly", required=True)
    p.add_argument("--max-iters", type=int, default=30)
    p.add_argument("--stall-limit", type=int, default=3)
    p.add_argument("--out", default=None, help="trace CSV (default stdout)")
    _add_solver_flags(p)

    p = add("quadratize", cmd_quadratize, "reduce a polynomial to quadratic form")
    p.add_argument("--poly", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--subs", default=None)

    p = add("alm", cmd_alm, "augmented Lagrangian on a SWIPT instance")
    p.add_argument("--problem", required=True, help="instance JSON or swipt:n=..,delta=..,seed=..,channel=..")
    p.add_argument("--lambda0", type=float, default=3.0)
    p.add_argument("--mu0", type=float, default=5.5)
    p.add_argument("--rho", type=float, default=1.1)
    p.add_argument("--min-iters", type=int, default=10)
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--inner-solver", choices=["dsb", "sa", "exhaustive", "quadratize-sa"], default="dsb")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="trace CSV (default stdout)")

    p = add("gen", cmd_gen, "write SWIPT instance files")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, default=500.0)
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold-mode", default="quadratic_root")
    p.add_argument("--out", required=True)

    b = sub.add_parser("bench", help="experiment harness").add_subparsers(dest="bench_command", required=True)
    p = add("sweep-n", cmd_bench_sweep, "sweep the RIS size", b)
    _bench_flags(p, "10,14,16,20", "500", "alm_dsb,exhaustive,random")
    p = add("sweep-delta", cmd_bench_sweep, "sweep the EH requirement", b)
    _bench_flags(p, "20", "200,300,500,700,800", "alm_dsb,exhaustive")
    p = add("timing", cmd_bench_timing, "median solver wall-clock per N", b)
    _bench_flags(p, "10,12,14,16,18,20", "500", "alm_dsb,exhaustive")
    p = add("converge", cmd_bench_converge, "per-iteration convergence trace", b)
    _bench_flags(p, "16", "500", "alm_dsb")
    p.add_argument("--problem", default=None)
    p.add_argument("--channel", type=int, default=0)
    return parser


def read_config(path) -> dict[str, str]:
    """Parse a ``key=value`` file; ``#`` starts a comment, blank lines are ignored."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("_", "-")] = value
    return out


def _config_tokens(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Expand ``--config FILE`` into flag tokens placed before the explicit flags."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2:]
    # locate the leaf subparser to learn which flags are switches
    ns, _ = parser.parse_known_args(rest)
    leaf = parser
    for name in (ns.command, getattr(ns, "bench_command", None)):
        if name is None:
            break
        action = next(a for a in leaf._actions if isinstance(a, argparse._SubParsersAction))
        leaf = action.choices[name]
    cut = 2 if ns.command == "bench" else 1
    tokens = []
    for key, value in read_config(path).items():
        flag = f"--{key}"
        act = leaf._option_string_actions.get(flag)
        if act is None:
            raise SystemExit(f"unknown config key {key!r}")
        if act.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                tokens.append(flag)
        else:
            tokens += [flag, value]
    return rest[:cut] + tokens + rest[cut:]


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    argv = _config_tokens(parser, argv)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
