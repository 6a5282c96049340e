"""Command-line entry points for scenario sampling and benchmark runs.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors.  The
EQUIFLOW_OUT environment variable supplies the default output directory
for ``run``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .bench import (
    CaseSpec,
    emit_plot,
    estimate_reference_optimum,
    fig1_suite,
    fig2_suite,
    fit_loglog_slope,
    load_oracle,
    read_metrics_csv,
    run_case,
    save_oracle,
    schedule_for_delay,
)
from .dynamics import DelayModel
from .errors import EquiflowError, SchemaError, UsageError
from .ingest import (
    ScenarioConfig,
    grid_network,
    load_scenario,
    load_tntp,
    sample_scenario,
    save_scenario,
    to_road_network,
)
from .schedules import StepSchedule


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="equiflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("sample", help="sample a routing scenario onto a network")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--network", help="TNTP network file")
    src.add_argument("--synthetic", metavar="RxC", help="synthetic grid, e.g. 5x5")
    p.add_argument("--use-native-bpr", action="store_true",
                   help="keep the TNTP file's BPR columns instead of sampling them")
    p.add_argument("--players", type=int, default=200)
    p.add_argument("--routes", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--free-flow-range", type=float, nargs=2, default=(2.0, 3.0))
    p.add_argument("--coefficient-range", type=float, nargs=2, default=(3.0, 13.0))
    p.add_argument("--capacity-range", type=float, nargs=2, default=(60.0, 80.0))
    p.add_argument("--power-range", type=float, nargs=2, default=(1.0, 1.5))
    p.add_argument("--demand-range", type=float, nargs=2, default=(10.0, 20.0))
    p.add_argument("--out", required=True, help="scenario JSON path")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("oracle", help="estimate the reference optimum of a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--budget", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="oracle metadata JSON path")
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("run", help="run benchmark cases and write metrics CSVs")
    p.add_argument("--scenario", required=True)
    which = p.add_mutually_exclusive_group(required=True)
    which.add_argument("--suite", choices=("fig1", "fig2"))
    which.add_argument("--case", help="case-spec JSON file")
    p.add_argument("--horizon", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=1,
                   help="repeat each case over this many consecutive seeds")
    p.add_argument("--oracle", help="oracle metadata JSON (anchors the gap column)")
    p.add_argument("--out", default=None, help="output directory (default $EQUIFLOW_OUT or .)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("slope", help="fit a log-log envelope slope to a metrics CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--kmin", type=int, required=True)
    p.add_argument("--kmax", type=int, required=True)
    p.add_argument("--floor", type=float, default=0.0,
                   help="drop rows whose envelope gap is at or below this")
    p.set_defaults(func=_cmd_slope)

    p = sub.add_parser("plot", help="render metrics CSVs as a log-log SVG")
    p.add_argument("csvs", nargs="+", metavar="CSV")
    p.add_argument("--out", required=True, help="SVG path")
    p.set_defaults(func=_cmd_plot)

    return parser


def cli(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            raise UsageError("a subcommand is required")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(parser.format_usage(), file=sys.stderr, end="")
        return 1
    try:
        args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(parser.format_usage(), file=sys.stderr, end="")
        return 1
    except (EquiflowError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(cli(sys.argv[1:]))


def _cmd_sample(args):
    if args.synthetic:
        try:
            rows, cols = (int(v) for v in args.synthetic.lower().split("x"))
        except ValueError:
            raise UsageError(f"--synthetic expects RxC, got {args.synthetic!r}") from None
        topology = grid_network(rows, cols)
    else:
        topology = to_road_network(load_tntp(args.network), use_native_bpr=args.use_native_bpr)
    config = ScenarioConfig(
        player_count=args.players,
        routes_per_player=args.routes,
        free_flow_range=tuple(args.free_flow_range),
        coefficient_range=tuple(args.coefficient_range),
        capacity_range=tuple(args.capacity_range),
        power_range=tuple(args.power_range),
        demand_range=tuple(args.demand_range),
        seed=args.seed,
    )
    game = sample_scenario(topology, config)
    save_scenario(game, args.out)
    print(f"wrote {args.out}: {game.n_players} players on "
          f"{game.network.node_count} nodes / {game.network.edge_count} edges")


def _cmd_oracle(args):
    game = load_scenario(args.scenario)
    result = estimate_reference_optimum(game, args.budget, seed=args.seed)
    save_oracle(result, args.out)
    print(f"wrote {args.out}: phi_star={result.phi_star!r} "
          f"epsilon_oracle={result.epsilon_oracle!r}")


def _case_from_document(doc: dict, bundle, default_horizon: int) -> CaseSpec:
    for key in ("label", "delay"):
        if key not in doc:
            raise SchemaError(f"case document is missing {key!r}")
    delay_doc = doc["delay"]
    kind = delay_doc.get("kind")
    if kind == "none":
        delay = DelayModel.none()
    elif kind in ("deterministic_power", "stochastic_uniform"):
        delay = DelayModel(kind, delay_doc.get("D", 1.0), delay_doc.get("alpha", 0.0))
    else:
        raise SchemaError(f"unknown delay kind {kind!r}")
    sched_doc = doc.get("schedule", "auto")
    if sched_doc == "auto":
        schedule = schedule_for_delay(delay, bundle)
    else:
        family = sched_doc.get("family")
        a0 = sched_doc.get("a0")
        beta = sched_doc.get("beta", 0.0)
        if a0 is None:
            schedule = schedule_for_delay(delay, bundle)
            a0 = schedule.a0
        schedule = StepSchedule(family, a0, beta)
    return CaseSpec(
        label=doc["label"],
        delay=delay,
        schedule=schedule,
        horizon=int(doc.get("horizon", default_horizon)),
    )


def _cmd_run(args):
    game = load_scenario(args.scenario)
    phi_star = 0.0
    if args.oracle:
        phi_star = load_oracle(args.oracle).phi_star
    out_dir = Path(args.out if args.out is not None else os.environ.get("EQUIFLOW_OUT", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.suite:
        builder = fig1_suite if args.suite == "fig1" else fig2_suite
        cases = builder(game.smoothness, horizon=args.horizon)
    else:
        doc = json.loads(Path(args.case).read_text())
        cases = [_case_from_document(doc, game.smoothness, args.horizon)]
    for case in cases:
        for offset in range(args.seeds):
            seed = args.seed + offset
            suffix = f"_seed{seed}" if args.seeds > 1 else ""
            out_csv = out_dir / f"{case.label}{suffix}.csv"
            run_case(game, case, seed, phi_star, out_csv=out_csv)
            print(f"wrote {out_csv}")


def _cmd_slope(args):
    table = read_metrics_csv(args.csv)
    slope = fit_loglog_slope(table["k"], table["gap"], args.kmin, args.kmax,
                             gap_floor=args.floor)
    print(repr(slope))


def _cmd_plot(args):
    runs = []
    for csv_path in args.csvs:
        table = read_metrics_csv(csv_path)
        runs.append((Path(csv_path).stem, table["k"], table["gap"]))
    emit_plot(runs, args.out)
    print(f"wrote {args.out}")
