"""Command-line entry point.

Subcommands: detect, stretch, simulate, serve, replay, analyze, score,
allocate. Analysis and scoring subcommands print machine-readable JSON
on stdout; diagnostics go to stderr. Exit codes: 0 success, 1 runtime
failure (missing file, malformed input), 2 usage error.

The PACE_LOG environment variable (error | warn | info | debug, default
warn) controls diagnostic verbosity.
"""

from __future__ import annotations

import argparse
import asyncio
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from . import evalkit, stats
from .core import load_timeline, save_timeline
from .laughtrack import DetectorConfig, decode_wav, detect_punchlines, encode_wav, extract_features
from .session import LearnerModel, SessionConfig, read_log, replay, simulate, write_log
from .timestretch import WsolaParams, stretch

logger = logging.getLogger(__name__)

LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def _configure_logging() -> None:
    name = os.environ.get("PACE_LOG", "warn").strip().lower()
    level = LOG_LEVELS.get(name)
    if level is None:
        level = logging.WARNING
        if name:
            print(f"warning: unknown PACE_LOG level {name!r}, using warn", file=sys.stderr)
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


def _print_json(data: Any) -> None:
    json.dump(data, sys.stdout, allow_nan=False)
    sys.stdout.write("\n")


def _read_numbers(path: str) -> list[float]:
    """All numeric tokens in a file, split on commas and whitespace."""
    text = Path(path).read_text(encoding="utf-8")
    tokens = text.replace(",", " ").split()
    try:
        return [float(tok) for tok in tokens]
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric value: {exc}") from exc


def _read_rows(path: str) -> list[list[float]]:
    """CSV rows of numbers, one respondent per row; an initial header row is skipped."""
    rows: list[list[float]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for number, row in enumerate(csv.reader(fh), start=1):
            cells = [cell.strip() for cell in row if cell.strip()]
            if not cells:
                continue
            try:
                rows.append([float(cell) for cell in cells])
            except ValueError:
                if not rows and number == 1:
                    continue
                raise ValueError(f"{path}: non-numeric row {number}: {row}") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


def _as_items(row: Sequence[float], path: str) -> tuple[int, ...]:
    items = []
    for value in row:
        if not float(value).is_integer():
            raise ValueError(f"{path}: questionnaire items must be integers, got {value}")
        items.append(int(value))
    return tuple(items)


def _mean_sd(values: Sequence[float]) -> tuple[float, float | None]:
    mean = sum(values) / len(values)
    if len(values) < 2:
        return mean, None
    var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return mean, math.sqrt(var)


# -- subcommand handlers -------------------------------------------------------


def _cmd_detect(args: argparse.Namespace) -> int:
    audio = decode_wav(Path(args.audio).read_bytes())
    cfg = DetectorConfig(
        on_threshold=args.on,
        off_threshold=args.off,
        min_duration=args.min_dur,
        merge_gap=args.merge_gap,
    )
    features = extract_features(audio, cfg)
    timeline = detect_punchlines(features, cfg, audio.duration)
    save_timeline(timeline, args.out)
    logger.info("wrote %d segments to %s", len(timeline.segments), args.out)
    return 0


def _cmd_stretch(args: argparse.Namespace) -> int:
    audio = decode_wav(Path(args.infile).read_bytes())
    out = stretch(audio, args.rate, WsolaParams())
    Path(args.out).write_bytes(encode_wav(out))
    logger.info(
        "stretched %.2f s to %.2f s at rate %.2f", audio.duration, out.duration, args.rate
    )
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    timeline = load_timeline(args.timeline)
    learner = LearnerModel.parse(args.learner)
    session_id = args.session_id or Path(args.out).stem
    cfg = SessionConfig(timeline=timeline, session_id=session_id)
    log = simulate(cfg, learner)
    write_log(log, args.out)
    logger.info(
        "simulated %d punchlines: final rate %.1f, viewing time %.1f s",
        log.final_state.punchlines_seen,
        log.final_state.rate,
        log.viewing_time,
    )
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    from .server import run_server

    timeline = load_timeline(args.timeline)
    cfg = SessionConfig(timeline=timeline, session_id=args.session_id)
    try:
        asyncio.run(run_server(cfg, host=args.host, port=args.port, log_dir=args.log_dir))
    except KeyboardInterrupt:
        pass
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    log = read_log(args.log)
    result = replay(log)
    _print_json(
        {
            "session_id": result.config.session_id,
            "events": len(result.events),
            "commands": len(result.commands),
            "final_rate": result.final_state.rate,
            "viewing_time": result.viewing_time,
            "match": True,
        }
    )
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    a = _read_numbers(args.a)
    b = _read_numbers(args.b)
    result = stats.mann_whitney_u(a, b, alternative=args.alternative)
    try:
        g: float | None = stats.hedges_g(a, b)
    except ValueError as exc:
        logger.warning("effect size unavailable: %s", exc)
        g = None
    _print_json(
        {
            "u": result.statistic,
            "p": result.p_value,
            "method": result.method.value,
            "n1": result.n1,
            "n2": result.n2,
            "g": g,
        }
    )
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    rows = _read_rows(args.responses)
    if args.instrument == "sus":
        scores = [evalkit.score_sus(evalkit.SusResponse(_as_items(row, args.responses))) for row in rows]
        mean, sd = _mean_sd(scores)
        _print_json(
            {
                "instrument": "sus",
                "n": len(scores),
                "scores": scores,
                "mean": mean,
                "sd": sd,
                "adjective": evalkit.sus_adjective(mean),
            }
        )
        return 0
    responses = []
    for row in rows:
        if args.weighted:
            if len(row) != 12:
                raise ValueError(
                    f"{args.responses}: weighted TLX rows need 6 subscales + 6 weights, got {len(row)}"
                )
            responses.append(
                evalkit.TlxResponse(tuple(row[:6]), _as_items(row[6:], args.responses))
            )
        else:
            responses.append(evalkit.TlxResponse(tuple(row)))
    scores = [evalkit.score_tlx(r) for r in responses]
    mean, sd = _mean_sd(scores)
    _print_json(
        {
            "instrument": "tlx",
            "weighted": bool(args.weighted),
            "n": len(scores),
            "scores": scores,
            "mean": mean,
            "sd": sd,
        }
    )
    return 0


def _cmd_allocate(args: argparse.Namespace) -> int:
    scores = [value for row in _read_rows(args.scores) for value in row]
    assignment = evalkit.allocate_groups(scores, args.k)
    _print_json(
        {
            "k": args.k,
            "n": len(scores),
            "groups": [list(group) for group in assignment.groups],
            "group_means": list(assignment.group_means),
            "spread": assignment.mean_spread,
        }
    )
    return 0


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pace",
        description="Laugh-adaptive playback: detection, stretching, sessions, and scoring.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="segment laugh-track punchlines from a WAV file")
    p.add_argument("--audio", required=True, help="input WAV (PCM16)")
    p.add_argument("--out", required=True, help="output timeline JSON")
    p.add_argument("--on", type=float, default=0.6, help="hysteresis on threshold")
    p.add_argument("--off", type=float, default=0.4, help="hysteresis off threshold")
    p.add_argument("--min-dur", type=float, default=0.5, help="minimum segment seconds")
    p.add_argument("--merge-gap", type=float, default=0.4, help="merge segments closer than this")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("stretch", help="change playback rate with steady pitch")
    p.add_argument("--in", dest="infile", required=True, help="input WAV (PCM16)")
    p.add_argument("--rate", type=float, required=True, help="playback rate in [0.6, 1.0]")
    p.add_argument("--out", required=True, help="output WAV")
    p.set_defaults(func=_cmd_stretch)

    p = sub.add_parser("simulate", help="run a learner model through a timeline")
    p.add_argument("--timeline", required=True, help="timeline JSON")
    p.add_argument(
        "--learner",
        required=True,
        help="never | always | threshold:0.8 | logistic:slope=8,midpoint=0.8,seed=0",
    )
    p.add_argument("--out", required=True, help="output session log (JSON Lines)")
    p.add_argument("--session-id", default=None, help="session id (default: output stem)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("serve", help="serve a live session over WebSockets")
    p.add_argument("--timeline", required=True, help="timeline JSON")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--log-dir", default=None, help="directory for the session log")
    p.add_argument("--session-id", default="session")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("replay", help="re-derive a session log and verify it matches")
    p.add_argument("log", help="session log (JSON Lines)")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("analyze", help="rank-test two samples (U, p, Hedges' g)")
    p.add_argument("--a", required=True, help="first sample file (numbers)")
    p.add_argument("--b", required=True, help="second sample file (numbers)")
    p.add_argument(
        "--alternative",
        choices=list(stats.ALTERNATIVES),
        default="two_sided",
    )
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("score", help="score questionnaire responses")
    p.add_argument("instrument", choices=["sus", "tlx"])
    p.add_argument("responses", help="CSV, one respondent per row")
    p.add_argument(
        "--weighted",
        action="store_true",
        help="TLX rows carry 6 subscales followed by 6 pairwise weights",
    )
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("allocate", help="deal scores into balanced groups")
    p.add_argument("scores", help="CSV of scores")
    p.add_argument("--k", type=int, required=True, help="number of groups")
    p.set_defaults(func=_cmd_allocate)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        missing = exc.filename or str(exc)
        print(f"error: file not found: {missing}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
