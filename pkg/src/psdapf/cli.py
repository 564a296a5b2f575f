#!/usr/bin/env python3
"""
Command-line front end.

Usage:
  psdapf run --scenario crossing_hand --planner psdapf --out out/
  psdapf compare --scenario crossing_hand --planners sdapf,psdapf --out out/
  psdapf calibrate --data turns.csv --out out/
  psdapf scenarios
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .errors import InputError, ParameterError, PsdapfError
from .human_signal import (
    bin_turn_samples,
    fit_turn_regression,
    read_calibration_csv,
    regression_residual,
)
from .planner import PlannerMode, PlannerParams
from .sim import (
    Scenario,
    bundled_scenario_path,
    bundled_scenarios,
    fmt,
    load_scenario,
    round9,
    run,
)

EXIT_OK, EXIT_INPUT, EXIT_DNF = 0, 1, 2

EXIT_CODES_HELP = """\
exit codes:
  0  success (every run reached the goal; calibration fitted)
  1  input error (unreadable scenario/config/data, unknown planner, bad parameter)
  2  at least one run did not finish (collision, timeout or local minimum);
     outputs are still written
"""

COMPARE_COLUMNS = (
    "mode", "path_length", "min_clearance", "sharp_turn_count", "time_to_goal",
    "collided", "mean_speed", "reached_goal", "reason",
)


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for DNF here.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _resolve_scenario(name: str) -> Scenario:
    path = Path(name)
    if not path.exists() and name in bundled_scenarios():
        path = bundled_scenario_path(name)
    return load_scenario(path)


def _parse_modes(text: str) -> list[PlannerMode]:
    modes = [PlannerMode.parse(part) for part in text.split(",") if part.strip()]
    if not modes:
        raise ValueError("no planner given")
    return list(dict.fromkeys(modes))


def _parse_set(items: list[str]) -> list[tuple[str, float]]:
    out = []
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ParameterError(f"--set expects section.name=value, got {item!r}")
        try:
            out.append((key.strip(), float(value)))
        except ValueError as exc:
            raise ParameterError(f"--set {key}: not a number: {value!r}") from exc
    return out


def build_params(scenario: Scenario, config_path: str | None, sets: list[str]) -> PlannerParams:
    """defaults < scenario planner block < --config file < --set flags."""
    params = scenario.planner_params()
    if config_path:
        try:
            doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {config_path}: {exc}") from exc
        params = params.updated(doc.get("planner", doc))
    for key, value in _parse_set(sets):
        params = params.with_override(key, value)
    return params


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _run_modes(args, modes: list[PlannerMode]) -> tuple[int, list[tuple[str, dict]]]:
    scenario = _resolve_scenario(args.scenario)
    params = build_params(scenario, args.config, args.set)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    status = EXIT_OK
    for mode in modes:
        traj, metrics = run(scenario, mode, params)
        _write_text(out / f"{mode.value}.csv", traj.to_csv())
        m = metrics.to_dict()
        _write_text(out / f"{mode.value}.metrics.json", json.dumps(m, indent=2, sort_keys=True) + "\n")
        rows.append((mode.value, m))
        print(f"{scenario.name} {mode.value:7s} "
              f"turns={m['sharp_turn_count']} clearance={fmt(m['min_clearance'])} "
              f"time_to_goal={m['time_to_goal']} path={fmt(m['path_length'])}"
              + (f" [{m['reason']}]" if m["reason"] else ""))
        if not metrics.reached_goal or metrics.collided:
            status = EXIT_DNF
    return status, rows


def cmd_run(args) -> int:
    """Run one or more planners; write <mode>.csv and <mode>.metrics.json."""
    status, _ = _run_modes(args, _parse_modes(args.planner))
    return status


def cmd_compare(args) -> int:
    """Run several planners on the same scenario and tabulate their metrics."""
    status, rows = _run_modes(args, _parse_modes(args.planners))
    out = Path(args.out)
    with open(out / "compare.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARE_COLUMNS)
        for mode, m in rows:
            cells = []
            for col in COMPARE_COLUMNS[1:]:
                v = m[col]
                cells.append("" if v is None else fmt(v) if isinstance(v, float) else v)
            w.writerow([mode, *cells])
    return status


def cmd_calibrate(args) -> int:
    """Bin turn measurements, fit distance = alpha + beta * angle."""
    samples = read_calibration_csv(args.data)
    table = bin_turn_samples(samples)
    reg = fit_turn_regression(table)
    residual = regression_residual(table, reg)
    doc = {
        "table": [
            {"scale_deg": s, "distance_m": None if v is None else round9(v)}
            for s, v in zip(table.scales_deg, table.values)
        ],
        "alpha": round9(reg.alpha),
        "beta": round9(reg.beta),
        "residual_ss": round9(residual),
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / "calibration.json", json.dumps(doc, indent=2) + "\n")
    print(f"alpha={fmt(reg.alpha)} m  beta={fmt(reg.beta)} m/rad  residual={fmt(residual)}")
    return EXIT_OK


def cmd_scenarios(args) -> int:
    for name in bundled_scenarios():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="psdapf",
        description="Expression- and attention-aware potential-field planner simulator.",
        epilog=EXIT_CODES_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--scenario", required=True,
                       help="scenario JSON path, or the name of a bundled scenario")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="JSON planner config overriding the scenario's block")
        p.add_argument("--set", action="append", metavar="SECTION.NAME=VALUE",
                       help="override one parameter, e.g. adaptation.s_b=0.01 (repeatable)")
        p.add_argument("--seed", type=int, help="accepted for compatibility; runs are deterministic")

    p = sub.add_parser("run", help="run planner(s) on a scenario", epilog=EXIT_CODES_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    common(p)
    p.add_argument("--planner", "--planners", dest="planner", required=True,
                   help="apf, sdapf or psdapf (comma-separated for several)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="compare planners side by side", epilog=EXIT_CODES_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    common(p)
    p.add_argument("--planners", "--planner", dest="planners", default="apf,sdapf,psdapf",
                   help="comma-separated planners (default: apf,sdapf,psdapf)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("calibrate", help="fit the turn-angle to arm-distance line",
                       epilog=EXIT_CODES_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--data", required=True, help="CSV with volunteer,angle_deg,distance_m")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("scenarios", help="list bundled scenarios")
    p.set_defaults(func=cmd_scenarios)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PsdapfError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, ValueError) and "planner" in str(exc):
            parser.print_usage(sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
