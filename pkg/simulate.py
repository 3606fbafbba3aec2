"""Command-line entry point: run scenarios, size the converter, show scenarios."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from acceptance import evaluate, write_check
from config import configure_logging, load_config
from errors import FracGridError
from events import EventType, SimEvent, SimEventBus
from metrics import summarize_case
from power_stage import BoostSizing, size_from
from scenario import BUILTIN_NAMES, dump_scenario, load_scenario
from session import CONTROLLER_CHOICES, ReportTable, RunRequest, RunSession, emit_outputs
from sim_engine import run, run_comparison

logger = logging.getLogger(__name__)


def _console(event: SimEvent):
    if event.type is EventType.RUN_STARTED:
        d = event.data
        print(f"\n{'='*60}")
        print(f"Run {d['mode'].upper()}  scenario={d['scenario']}  fidelity={d['fidelity']}  dt={d['dt']:g} s")
        print(f"{'='*60}")
    elif event.type is EventType.CASE_STARTED:
        d = event.data
        print(f"Case {d['case_id']}: {d['irradiance']:g} W/m2, {d['temperature']:g} C "
              f"(MPP {d['p_mpp']:.1f} W)  t={event.time:.3f} s")
    elif event.type is EventType.LOW_DC_LINK:
        print(f"  ⚠ DC link below floor at t={event.time:.4f} s ({event.data.get('x3', 0.0):.1f} V)")
    elif event.type is EventType.RUN_ERROR:
        print(f"  Run failed: {event.message}")


def cmd_run(args) -> int:
    config = load_config({
        "scenario": args.scenario,
        "controller": args.controller,
        "fidelity": args.fidelity,
        "dt": args.dt,
        "out": args.out,
        "workers": args.workers,
        "log_level": args.log_level,
        "csv": args.csv or None,
        "plots": args.plots or None,
        "report": args.report or None,
        "check": args.check or None,
    })
    configure_logging(config["log_level"])
    req = RunRequest.from_config(config)
    sc = load_scenario(req.scenario).with_overrides(fidelity=req.fidelity, dt=req.dt)

    bus = SimEventBus()
    bus.subscribe(None, _console)
    session = RunSession(req, bus)
    print(f"Session directory: {session.dir}")

    try:
        if req.controller == "both":
            result = run_comparison(sc, workers=req.workers, bus=bus)
            logs = {"fo": result.fo, "io": result.io}
            summaries = {"fo": [p[0] for p in result.summaries], "io": [p[1] for p in result.summaries]}
        else:
            log = run(replace(sc, mode=req.controller), bus)
            logs = {req.controller: log}
            summaries = {req.controller: [summarize_case(log, span) for span in log.analysable_cases]}
    except KeyboardInterrupt:
        print("\n*** Run interrupted ***")
        session.finalize("interrupted")
        return 130
    except FracGridError as exc:
        session.finalize(f"error: {exc}")
        raise

    for mode, log in logs.items():
        session.log_run(mode, log, summaries[mode])
    print()
    print(ReportTable.from_summaries(summaries).to_text(), end="")
    for path in emit_outputs(logs, summaries, req, sc):
        logger.debug("wrote %s", path)

    status = 0
    reason = "stopped" if any(log.aborted for log in logs.values()) else "completed"
    if req.check:
        results = evaluate(logs, summaries, lossless=sc.plant.lossless)
        path = write_check(results, req.out / "check.json")
        failed = [r for r in results if not r.passed]
        print(f"\nAcceptance: {len(results) - len(failed)}/{len(results)} passed ({path})")
        for r in failed:
            case = f" case {r.case_id}" if r.case_id is not None else ""
            print(f"  FAIL {r.name}{case}: {r.value} (band {r.band})")
        if failed:
            status = 1
            reason = "check_failed"
    session.finalize(reason)
    return status


def cmd_size(args) -> int:
    z = BoostSizing(v_in=args.v_in, v_out=args.v_out, delta_i=args.delta_i, delta_v=args.delta_v,
                    f_s=args.f_s, p_g=args.p_g, duty=args.duty, t_on=args.t_on)
    for name, value in size_from(z).items():
        print(f"{name:8} {value:.6g}")
    return 0


def cmd_show(args) -> int:
    print(dump_scenario(load_scenario(args.scenario)), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="fracgrid: fractional-order backstepping control of a grid-tied PV system"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="Simulate a scenario and write the selected outputs")
    p.add_argument("--scenario", default=None,
                   help=f"Built-in name ({', '.join(BUILTIN_NAMES)}) or path to a YAML file (default: paper)")
    p.add_argument("--controller", choices=CONTROLLER_CHOICES, default=None,
                   help="Controller stack to run (default: both)")
    p.add_argument("--fidelity", choices=("averaged", "switched"), default=None,
                   help="Plant model (default: the scenario's)")
    p.add_argument("--dt", type=float, default=None, help="Integration step in seconds")
    p.add_argument("--out", default=None, help="Output directory (default: $FRACGRID_OUT_DIR or ./runs)")
    p.add_argument("--csv", action="store_true", help="Write the decimated log of each run as CSV")
    p.add_argument("--plots", action="store_true", help="Write the PNG figures")
    p.add_argument("--report", action="store_true", help="Write report.txt and report.csv")
    p.add_argument("--check", action="store_true", help="Evaluate the acceptance bands and write check.json")
    p.add_argument("--workers", type=int, default=None, help="Processes for the FO/IO comparison (default: 1)")
    p.add_argument("--log-level", default=None, help="Logging level (default: WARNING)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("size", help="Boost inductor and DC-link capacitor sizing")
    p.add_argument("--v-in", type=float, default=203.0, help="Input voltage (V)")
    p.add_argument("--v-out", type=float, default=400.0, help="Output voltage (V)")
    p.add_argument("--delta-i", type=float, default=1.0, help="Inductor ripple current (A)")
    p.add_argument("--delta-v", type=float, default=0.1, help="DC-link ripple as a fraction of v_out")
    p.add_argument("--f-s", type=float, default=100e3, help="Boost switching frequency (Hz)")
    p.add_argument("--p-g", type=float, default=1492.0, help="Grid power (W)")
    p.add_argument("--duty", type=float, default=None, help="Duty cycle for the output-voltage estimate")
    p.add_argument("--t-on", type=float, default=None, help="Switch on-time (s); overrides --duty")
    p.set_defaults(func=cmd_size)

    p = sub.add_parser("show", help="Print a scenario as YAML")
    p.add_argument("scenario", help="Built-in name or path to a YAML file")
    p.set_defaults(func=cmd_show)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FracGridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
