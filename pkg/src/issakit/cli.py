"""Command-line front end.

Exit codes: 0 ok, 1 verification failed, 2 infeasible design, 3 infeasible
mid-episode (partial trace written), 64 usage or config error, 65 trace schema
mismatch, 66 scan on a non-2D control space.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

from issakit.config import ConfigError, RunConfig, design_report
from issakit.core import RobotState, SecondOrderRobot
from issakit.ctrigger import TriggerProps
from issakit.harness.bench import bench_phase1
from issakit.harness.episode import EpisodeInfeasible, run_episode
from issakit.harness.oracles import safe_control_fraction
from issakit.harness.trace import (
    EpisodeTrace,
    SchemaError,
    read_trace_csv,
    sidecar_path,
    write_sidecar,
    write_trace_csv,
)
from issakit.harness.verify import check_finite_time_convergence, check_forward_invariance
from issakit.safety_index import InfeasibleError, synthesize_k

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INFEASIBLE = 2
EXIT_EPISODE_INFEASIBLE = 3
EXIT_USAGE = 64
EXIT_SCHEMA = 65
EXIT_NOT_2D = 66


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


TOY_DEFAULT = {
    "model": "toy",
    "limits": None,
    "obstacles": [{"cx": 0.7, "cy": 0.2, "radius": 0.25}],
    "index": {"mode": "discrete", "eta0": 0.006, "r": 0.25, "R": 0.25, "micro_dt": 1e-5},
    "sim": {"steps": 100, "dt": 0.01, "start": {"px": 0.0, "py": 0.0, "theta": 0.0}},
    "policy": {"type": "constant_forward", "params": {"control": [0.8, 0.0]}},
    "issa": {"grid_max_refinements": 8},
    "seed": 0,
}


def _print_report(report, extra) -> None:
    for key, val in extra.items():
        print(f"{key} = {val:.9g}")
    for c in report.checks:
        tag = "PASS" if c.ok else "FAIL"
        print(f"{tag}  {c.name}  lhs={c.lhs:.9g} rhs={c.rhs:.9g} slack={c.slack:.9g}{'  (' + c.note + ')' if c.note else ''}")


def _load(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    return cfg.with_overrides(getattr(args, "seed", None), getattr(args, "steps", None), getattr(args, "mode", None))


# -- commands ----------------------------------------------------------------------------------


def cmd_synthesize(args) -> int:
    cfg = _load(args)
    report, extra = design_report(cfg)
    if cfg.model == "toy":
        print("toy model: no design rule applies")
        return EXIT_OK
    _print_report(report, extra)
    if args.k_min:
        params = cfg.build_params()
        try:
            k = synthesize_k(cfg.build_limits(), params.n, params.sigma, params.d_min)
            print(f"k_min = {k:.12g}")
        except InfeasibleError as exc:
            print(f"k_min: infeasible ({exc})")
    if not report.ok:
        for c in report.failing:
            print(f"infeasible: {c.name}", file=sys.stderr)
        return EXIT_INFEASIBLE
    print("feasible")
    return EXIT_OK


def _summary(trace: EpisodeTrace) -> dict:
    phis = trace.column("phi")
    conv = next((r.t for r in trace.records if r.phi <= 0), None)
    return {
        "steps": len(trace),
        "interventions": sum(r.intervened for r in trace.records),
        "trigger_fired": sum(r.trigger_fired for r in trace.records),
        "max_phi0": max(trace.column("phi0")) if trace.records else None,
        "max_phi": max(phis) if phis else None,
        "converged_step": conv,
    }


def _run_and_write(cfg: RunConfig, out: Path, extra_meta: dict | None = None) -> tuple[int, EpisodeTrace]:
    props = cfg.trigger_props()
    env = cfg.build_env()
    policy = cfg.build_policy(env.model)
    code = EXIT_OK
    try:
        trace = run_episode(env, policy, cfg.build_stack(props), cfg.sim.steps, cfg.seed)
    except EpisodeInfeasible as exc:
        trace = exc.trace
        print(f"infeasible at step {exc.step}: {exc.cause}", file=sys.stderr)
        code = EXIT_EPISODE_INFEASIBLE
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out)
    summary = _summary(trace)
    meta = {
        "config": cfg.to_dict(),
        "trigger_props": None if props is None else dataclasses.asdict(props),
        "seed": cfg.seed,
        "model": trace.meta.get("model"),
        "flags": trace.flags,
        "summary": summary,
    }
    if extra_meta:
        meta.update(extra_meta)
    write_sidecar(sidecar_path(out), meta)
    for key, val in summary.items():
        print(f"{key}: {val}")
    for flag in trace.flags:
        print(f"flag: {flag}")
    return code, trace


def cmd_simulate(args) -> int:
    cfg = _load(args)
    if cfg.model == "second_order":
        report, extra = design_report(cfg)
        if not report.ok:
            _print_report(report, extra)
            for c in report.failing:
                print(f"infeasible: {c.name}", file=sys.stderr)
            return EXIT_INFEASIBLE
    code, _ = _run_and_write(cfg, Path(args.out))
    return code


def cmd_toy(args) -> int:
    if args.config:
        cfg = RunConfig.load(args.config)
    else:
        cfg = RunConfig.from_dict(json.loads(json.dumps(TOY_DEFAULT)))
    cfg = cfg.with_overrides(args.seed, args.steps, args.mode)
    if cfg.model != "toy":
        raise ConfigError("the toy command needs a toy-model config")
    code, trace = _run_and_write(cfg, Path(args.out))
    env = cfg.build_env()
    phis = trace.column("phi")
    if trace.records:
        last = trace.records[-1]
        nxt = env.model.step(RobotState(last.px, last.py, last.theta, last.v), (last.u_app_0, last.u_app_1), env.dt)
        phis = phis + [env.index.value(nxt, env.obstacles)]
    rises = [t for t in range(len(phis) - 1) if phis[t + 1] > phis[t] > 0]
    bad = [t for t in range(len(phis) - 1) if trace.records[t].intervened and phis[t + 1] > phis[t]]
    print(f"final_phi: {phis[-1] if phis else None!r}")
    print(f"steps_with_phi_rising_while_positive: {len(rises)}")
    print(f"intervened_steps_with_phi_rising: {len(bad)}")
    return code


def cmd_verify(args) -> int:
    cfg = RunConfig.load(args.config)
    try:
        trace = read_trace_csv(args.trace)
    except OSError as exc:
        raise ConfigError(f"cannot read trace: {exc}") from None
    ok = True
    fi = check_forward_invariance(trace)
    print(f"forward_invariant: {fi.forward_invariant}")
    if fi.first_violation_step is not None:
        print(f"first_violation_step: {fi.first_violation_step}")
    for flag in fi.assumption_flags:
        print(f"flag: {flag}")
    ok &= fi.forward_invariant
    if cfg.index.mode == "discrete" and cfg.ctrigger.enabled:
        side = sidecar_path(args.trace)
        props = None
        if side.exists():
            raw = json.loads(side.read_text()).get("trigger_props")
            props = TriggerProps(**raw) if raw else None
        if props is None:
            props = cfg.trigger_props()
        rep = check_finite_time_convergence(trace, cfg.index.eta0, props)
        print(f"convergence_step: {rep.convergence_step}")
        print(f"bound_steps: {rep.bound_steps}")
        print(f"bound_violated: {rep.bound_violated}")
        for flag in rep.assumption_flags:
            print(f"flag: {flag}")
        ok &= not rep.bound_violated
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def _parse_state(text: str) -> RobotState:
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(f"--state expects comma-separated numbers, got {text!r}") from None
    if len(vals) not in (3, 4):
        raise ConfigError("--state expects px,py,theta[,v]")
    return RobotState.from_array(vals)


def cmd_scan(args) -> int:
    cfg = _load(args)
    model = cfg.build_model()
    if len(model.control_box) != 2:
        print(f"scan needs a 2D control space, got {len(model.control_box)} dimensions", file=sys.stderr)
        return EXIT_NOT_2D
    if args.k is not None:
        cfg = dataclasses.replace(cfg, index=dataclasses.replace(cfg.index, k=args.k))
    state = _parse_state(args.state)
    env = cfg.build_env()
    index = env.index
    scan = safe_control_fraction(state, env.checker, index, env.obstacles, env.dt, args.resolution)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u1", "u2", "delta_phi", "status"])
        for u, dphi, safe in zip(scan.controls, scan.delta_phi, scan.safe):
            w.writerow([repr(float(u[0])), repr(float(u[1])), repr(float(dphi)), "SAFE" if safe else "UNSAFE"])
    print(f"safe_fraction: {scan.fraction!r}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load(args)
    if cfg.model != "second_order":
        raise ConfigError("bench needs a second_order config")
    try:
        n_dirs = [int(x) for x in args.n_dirs.split(",")]
    except ValueError:
        raise ConfigError(f"--n-dirs expects comma-separated integers, got {args.n_dirs!r}") from None
    if any(n < 1 for n in n_dirs):
        raise ConfigError("n_dirs must be >= 1")
    limits = cfg.build_limits()
    rows = bench_phase1(SecondOrderRobot(limits), cfg.build_params(), limits, cfg.build_issa(force=True),
                        args.trials, n_dirs, cfg.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n_dirs", "success_rate", "mean_candidates", "mean_queries", "wall_ms"])
        for r in rows:
            wall = f"{r.wall_ms:.3f}" if args.timing else "NA"
            w.writerow([r.n_dirs, repr(r.success_rate), repr(r.mean_candidates), repr(r.mean_queries), wall])
    for r in rows:
        print(f"n_dirs={r.n_dirs} success_rate={r.success_rate:.3f} mean_candidates={r.mean_candidates:.2f} "
              f"mean_queries={r.mean_queries:.1f} wall_ms={r.wall_ms:.1f}")
    return EXIT_OK


# -- entry point -------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="issakit", description="Black-box safe control toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config_required=True, out=True):
        sp.add_argument("--config", required=config_required)
        if out:
            sp.add_argument("--out", required=True)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--steps", type=int)
        sp.add_argument("--mode")

    sp = sub.add_parser("synthesize", help="check design rules for a config")
    common(sp, out=False)
    sp.add_argument("--k-min", action="store_true", help="also print the smallest k passing the continuous rule")
    sp.set_defaults(func=cmd_synthesize)

    sp = sub.add_parser("simulate", help="run one episode and write a trace")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("verify", help="check a trace for invariance and convergence")
    sp.add_argument("trace")
    sp.add_argument("--config", required=True)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("toy", help="toy unicycle comparison of discrete and continuous checks")
    common(sp, config_required=False)
    sp.set_defaults(func=cmd_toy)

    sp = sub.add_parser("scan", help="delta-phi grid over the control space at one state")
    common(sp)
    sp.add_argument("--state", required=True, help="px,py,theta[,v]")
    sp.add_argument("--k", type=float)
    sp.add_argument("--resolution", type=int, default=41)
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser("bench", help="phase-1 success rate per direction count")
    common(sp)
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--n-dirs", default="3,5,10,20")
    sp.add_argument("--timing", action="store_true", help="write wall-clock times into the CSV")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "mode", None) == "continuous-approx" and args.command != "toy":
        print("--mode continuous-approx is only available for the toy command", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaError as exc:
        print(f"trace schema mismatch: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
