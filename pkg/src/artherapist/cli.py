"""Batch driver: simulate sessions, score stored ones, sweep behavior
grids, render patient reports, and serve the HTTP API.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Every command
is deterministic given its flags and seeds; when --seed is omitted a
random one is drawn once and printed so the run stays reproducible
after the fact.
"""

from __future__ import annotations

import argparse
import json
import secrets
import socket
import sys
from pathlib import Path

from . import presets, runner, storage
from .reporting import (
    SESSION_COLUMNS,
    metrics_csv_row,
    render_report_figures,
    render_sweep_figures,
    write_report_csv,
    write_sweep_csv,
)
from .rng import RandomStream
from .simulator import BehaviorParams, sweep
from .storage import Store

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

#: synthetic wall-clock step between simulated sessions (seconds)
SIMULATED_CLOCK_STEP = 60.0


def probability(raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{raw}' is not a number") from None
    if not (0.0 <= value <= 1.0):
        raise argparse.ArgumentTypeError(f"{value} is outside the range [0, 1]")
    return value


def positive_int(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{raw}' is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"{value} must be >= 1")
    return value


def seed_value(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{raw}' is not an integer") from None
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be >= 0")
    return value


def resolve_seed(seed: int | None) -> int:
    if seed is None:
        seed = secrets.randbits(48)
        print(f"seed: {seed} (drawn randomly; pass --seed {seed} to reproduce)")
    return seed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="artherapist",
        description="Run, score, and serve attention-training game sessions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run synthetic patients through sessions")
    sim.add_argument("--patients", type=positive_int, default=1, help="number of synthetic patients")
    sim.add_argument("--sessions", type=positive_int, default=1, help="sessions per patient")
    sim.add_argument("--seed", type=seed_value, default=None, help="master seed")
    sim.add_argument("--attention", type=probability, default=0.75)
    sim.add_argument("--impulsivity", type=probability, default=0.15)
    sim.add_argument("--dropout", type=probability, default=0.05)
    sim.add_argument("--store", required=True, help="store root directory")

    met = sub.add_parser("metrics", help="print the measure vector of a stored session")
    met.add_argument("--session", required=True)
    met.add_argument("--store", required=True)
    met.add_argument("--format", choices=("table", "csv", "json"), default="table")

    swp = sub.add_parser("sweep", help="aggregate metrics over a behavior grid")
    swp.add_argument("--grid", required=True, help="JSON file: list of behavior parameter cells")
    swp.add_argument("--sessions-per-cell", type=positive_int, default=100)
    swp.add_argument("--out", required=True, help="output CSV path")
    swp.add_argument("--seed", type=seed_value, default=0, help="session config seed stream")
    swp.add_argument("--tries", type=positive_int, default=10)
    swp.add_argument("--theta", type=float, default=5.0, help="per-try budget, seconds")
    swp.add_argument("--no-figures", action="store_true", help="skip the response-curve PNGs")

    rep = sub.add_parser("report", help="write a patient's report CSV and figures")
    rep.add_argument("--patient", required=True)
    rep.add_argument("--store", required=True)
    rep.add_argument("--out", required=True, help="output directory")

    srv = sub.add_parser("serve", help="run the HTTP API")
    srv.add_argument("--listen", default="127.0.0.1:8077", help="host:port")
    srv.add_argument("--store", required=True)

    return parser


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    seed = resolve_seed(args.seed)
    try:
        store = Store(args.store)
    except OSError as exc:
        print(f"error: cannot open store: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    try:
        _seed_default_documents(store)
        master = RandomStream(seed)
        clock = 0.0
        summary = []
        for p in range(args.patients):
            patient_id = f"p{p + 1:03d}"
            if patient_id not in store.list_documents("patient"):
                store.create_document(
                    "patient", patient_id,
                    {"id": patient_id, "level": 1, "preferences": []},
                )
            pis = []
            for k in range(args.sessions):
                tags = f"patient/{p}/session/{k}"
                behavior = BehaviorParams(
                    attention=args.attention,
                    impulsivity=args.impulsivity,
                    dropout_hazard=args.dropout,
                    seed=master.split(f"{tags}/behavior").seed,
                )
                outcome = runner.run_simulated_session(
                    store,
                    patient_id=patient_id,
                    program_id=presets.DEFAULT_PROGRAM_ID,
                    session_id=f"{patient_id}-s{k + 1:03d}",
                    config_seed=master.split(f"{tags}/config").seed,
                    behavior=behavior,
                    wall_start=clock,
                )
                clock += SIMULATED_CLOCK_STEP
                if outcome.metrics.pi is not None:
                    pis.append(outcome.metrics.pi)
            mean_pi = sum(pis) / len(pis) if pis else None
            summary.append((patient_id, args.sessions, mean_pi))
    except storage.StorageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    print(f"{'patient':<10}{'sessions':>10}{'mean PI':>12}")
    for patient_id, sessions, mean_pi in summary:
        shown = "-" if mean_pi is None else f"{mean_pi:.4f}"
        print(f"{patient_id:<10}{sessions:>10}{shown:>12}")
    return EXIT_OK


def _seed_default_documents(store: Store) -> None:
    if presets.DEFAULT_GAME_ID not in store.list_documents("game"):
        store.create_document("game", presets.DEFAULT_GAME_ID, presets.default_game_body())
    if presets.DEFAULT_PROGRAM_ID not in store.list_documents("program"):
        store.create_document(
            "program", presets.DEFAULT_PROGRAM_ID, presets.default_program_body()
        )
    if presets.DEFAULT_DOCTOR_ID not in store.list_documents("doctor"):
        store.create_document(
            "doctor", presets.DEFAULT_DOCTOR_ID, presets.default_doctor_body()
        )


def cmd_metrics(args) -> int:
    store = Store(args.store)
    try:
        metrics = runner.score_stored_session(store, args.session)
    except storage.StorageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    if args.format == "json":
        print(json.dumps({"session_id": args.session, "metrics": metrics.to_dict()}, indent=2))
    elif args.format == "csv":
        print(",".join(SESSION_COLUMNS))
        print(",".join(metrics_csv_row(args.session, metrics)))
    else:
        print(f"session {args.session}")
        for key, value in metrics.to_dict().items():
            shown = "-" if value is None else f"{value:.6f}"
            print(f"  {key:<4} {shown}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    grid_path = Path(args.grid)
    try:
        raw = json.loads(grid_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read grid: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not isinstance(raw, list) or not raw:
        print("error: grid must be a non-empty JSON list of parameter cells", file=sys.stderr)
        return EXIT_USAGE
    try:
        grid = [BehaviorParams.from_dict(cell) for cell in raw]
    except (ValueError, TypeError) as exc:
        print(f"error: bad grid cell: {exc}", file=sys.stderr)
        return EXIT_USAGE

    config = presets.sweep_session_config(
        tries=args.tries, try_time=args.theta, seed=args.seed
    )
    cells = sweep(grid, args.sessions_per_cell, config)

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(out_path, cells)
    print(f"wrote {out_path} ({len(cells)} cells x {args.sessions_per_cell} sessions)")
    if not args.no_figures:
        for figure in render_sweep_figures(cells, out_path.parent):
            print(f"wrote {figure}")
    return EXIT_OK


def cmd_report(args) -> int:
    store = Store(args.store)
    try:
        store.get_document("patient", args.patient)
    except storage.NotFound as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    rows = []
    for record in store.load_progress(args.patient):
        if record.decision == "override" or not store.session_exists(record.session_id):
            continue
        rows.append((record, runner.score_stored_session(store, record.session_id)))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "report.csv"
    write_report_csv(csv_path, rows)
    print(f"wrote {csv_path} ({len(rows)} sessions)")
    for figure in render_report_figures(args.patient, rows, out_dir):
        print(f"wrote {figure}")
    return EXIT_OK


def cmd_serve(args) -> int:
    host, _, port_raw = args.listen.rpartition(":")
    if not host or not port_raw.isdigit():
        print(f"error: --listen expects host:port, got '{args.listen}'", file=sys.stderr)
        return EXIT_USAGE
    port = int(port_raw)

    # surface bind failures as a plain runtime error before uvicorn starts
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        print(f"error: cannot bind {args.listen}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        probe.close()

    import uvicorn

    from .service import create_app

    store = Store(args.store)
    app = create_app(store)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "metrics": cmd_metrics,
        "sweep": cmd_sweep,
        "report": cmd_report,
        "serve": cmd_serve,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
