"""Command-line front end.

Subcommands: verify-identity, experiment, scan, streams. Angles are given in
degrees; negative values need the ``--angles=...`` form so argparse does not
read them as flags. Exit codes: 0 success, 1 usage or configuration error,
2 data or parse error, 3 broken arithmetic invariant.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    ScanGrid,
    violation_search_chsh,
    violation_search_three,
    wss_feasibility_scan,
)
from .corrcore import BinaryStream, MatchedStreamSet, bell_identity_four, bell_identity_three
from .errors import DataError, InvariantBreach, UsageError
from .gedanken import (
    Acquisition,
    ExperimentProtocol,
    chsh_experiment,
    run_delayed_choice,
    three_correlation_experiment,
)
from .models import CorrelationFunction, SingletSource, bell_linear_model, nonlocal_toy_model
from .substreams import fresh_seed

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

SOURCES = {
    "singlet": SingletSource,
    "bell-linear": bell_linear_model,
    "nonlocal-toy": nonlocal_toy_model,
}


# ---------------------------------------------------------------------------
# parsing helpers


def parse_angles(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"cannot parse angles {text!r}; expected comma-separated degrees") from None


def parse_grid(text: str) -> tuple[float, float, int]:
    try:
        lo, hi, steps = text.split(":")
        return float(lo), float(hi), int(steps)
    except ValueError:
        raise UsageError(f"cannot parse grid {text!r}; expected lo:hi:steps") from None


def parse_refine(text: str) -> tuple[int, float]:
    try:
        rounds, shrink = text.split(":")
        return int(rounds), float(shrink)
    except ValueError:
        raise UsageError(f"cannot parse refinement {text!r}; expected rounds:shrink") from None


def parse_function(spec: str) -> CorrelationFunction:
    name, _, arg = spec.partition(":")
    if name == "cosine":
        return CorrelationFunction.cosine()
    if name == "neg-cosine":
        return CorrelationFunction.neg_cosine()
    if name == "bell-linear":
        return CorrelationFunction.bell_linear()
    if name == "exponential":
        return CorrelationFunction.exponential(float(arg) if arg else 1.0)
    if name == "tabulated":
        if not arg:
            raise UsageError("tabulated needs a file: tabulated:PATH")
        try:
            table = np.loadtxt(arg, delimiter=None, ndmin=2)
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read table {arg}: {exc}") from None
        return CorrelationFunction.tabulated([tuple(r[:2]) for r in table], angular=False)
    raise UsageError(f"unknown correlation function {spec!r}")


def _token(tok: str, lineno: int) -> int:
    if tok in ("+1", "1"):
        return 1
    if tok in ("-1", "−1"):
        return -1
    raise DataError(f"line {lineno}: entry {tok!r} is not +1 or -1")


def read_stream_file(path: str | os.PathLike) -> MatchedStreamSet:
    """Parse whitespace-separated +1/-1 columns; an optional ``#`` line names them."""
    labels = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if labels is None and not rows:
                    labels = [t.split("=")[0] for t in line[1:].split()]
                continue
            row = [_token(t, lineno) for t in line.split()]
            if rows and len(row) != len(rows[0]):
                raise DataError(f"line {lineno}: expected {len(rows[0])} columns, found {len(row)}")
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=np.int8)
    width = arr.shape[1]
    if labels is None or len(labels) != width:
        labels = [f"s{k}" for k in range(width)]
    return MatchedStreamSet(tuple(labels), tuple(BinaryStream._trusted(arr[:, k]) for k in range(width)))


def format_stream_table(streams: MatchedStreamSet) -> str:
    header = []
    for label in streams.labels:
        setting = streams.settings.get(label)
        header.append(f"{label}={math.degrees(setting[1]):.6f}" if setting else label)
    body = np.where(streams.as_array() == 1, "+1", "-1")
    lines = ["# " + " ".join(header)]
    lines.extend(" ".join(row) for row in body)
    return "\n".join(lines) + "\n"


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def emit(args, payload: dict, csv_header: list[str] | None = None, csv_rows: list[list] | None = None) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    table = _csv_text(csv_header, csv_rows) if csv_header is not None else None
    fmt = args.format
    if args.out is None:
        if fmt in ("json", "both"):
            sys.stdout.write(text)
        if fmt in ("csv", "both") and table is not None:
            sys.stdout.write(table)
        return
    stem = Path(args.out)
    if stem.suffix in (".json", ".csv"):
        stem = stem.with_suffix("")
    if fmt in ("json", "both"):
        atomic_write(stem.with_suffix(".json"), text)
    if fmt in ("csv", "both") and table is not None:
        atomic_write(stem.with_suffix(".csv"), table)


def _seed(args) -> int:
    if args.seed is None:
        args.seed = fresh_seed()
        print(f"no --seed given; using seed {args.seed}", file=sys.stderr)
    return args.seed


def _deg(x: float) -> float:
    return round(math.degrees(x), 6)


def _split_angles(args) -> tuple[list[float], list[float]]:
    angles = [math.radians(x) for x in parse_angles(args.angles)]
    if len(angles) == 3:
        return angles[:1], angles[1:]
    if len(angles) == 4:
        return angles[:2], angles[2:]
    raise UsageError("--angles takes 3 values (a,b,b') or 4 values (a,a',b,b')")


def _config(args, **extra) -> dict:
    out = {
        k: v
        for k, v in sorted(vars(args).items())
        if k not in ("func", "out", "input") and v is not None
    }
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# subcommands


def _generated_streams(args) -> MatchedStreamSet:
    model = SOURCES[args.model]()
    if args.model == "singlet":
        raise UsageError("the singlet source has no counterfactual streams; use bell-linear or nonlocal-toy")
    a_set, b_set = _split_angles(args)
    streams, _ = run_delayed_choice(model, a_set, b_set, args.locality == "local", args.trials, _seed(args))
    return streams


def _identity_checks(streams: MatchedStreamSet) -> list[tuple[str, tuple[str, ...], object]]:
    cols, labels = streams.streams, streams.labels
    if len(cols) == 3:
        return [("three", labels, bell_identity_three(*cols))]
    if len(cols) == 4:
        return [("four", labels, bell_identity_four(*cols))]
    if len(cols) == 6:
        # a, a', then B streams grouped by A setting: b|a, b'|a, b|a', b'|a'
        picks = [(0, 2, 3), (1, 4, 5)]
        return [("three", tuple(labels[i] for i in p), bell_identity_three(*(cols[i] for i in p))) for p in picks]
    raise DataError(f"expected 3, 4 or 6 streams, found {len(cols)}")


def cmd_verify_identity(args) -> int:
    if args.input:
        streams = read_stream_file(args.input)
        source = {"file": str(args.input)}
    else:
        streams = _generated_streams(args)
        source = {"generated": _config(args)}
    checks = _identity_checks(streams)
    holds = all(rep.holds for _, _, rep in checks)
    payload = {
        "command": "verify-identity",
        "source": source,
        "n": streams.n,
        "streams": list(streams.labels),
        "identities": [{"identity": kind, "labels": list(labs), **rep.to_dict()} for kind, labs, rep in checks],
        "holds": holds,
    }
    emit(args, payload, ["identity", "labels", "lhs", "rhs", "slack", "holds"],
         [[k, " ".join(l), float(r.lhs), float(r.rhs), float(r.slack), r.holds] for k, l, r in checks])
    if not holds:
        raise InvariantBreach("matched streams failed an identity that no finite data can violate")
    return EXIT_OK


def cmd_experiment(args) -> int:
    source = SOURCES[args.model]()
    a_set, b_set = _split_angles(args)
    protocol = ExperimentProtocol(
        acquisition=Acquisition(args.acquisition),
        a_settings=a_set,
        b_settings=b_set,
        locality=args.locality == "local",
        trials=args.trials,
        seed=_seed(args),
    )
    run = chsh_experiment if protocol.four_correlation else three_correlation_experiment
    report = run(protocol, source)
    payload = {
        "command": "experiment",
        "config": _config(args),
        "protocol": protocol.describe(),
        "seed": protocol.seed,
        "report": report.to_dict(),
    }
    rows = [
        [label, _deg(report.settings[label][0]), _deg(report.settings[label][1]), c.value, c.n, c.sum, c.stderr]
        for label, c in report.correlations.items()
    ]
    emit(args, payload, ["pair", "setting1_deg", "setting2_deg", "value", "n", "sum", "stderr"], rows)
    return EXIT_OK


def cmd_scan(args) -> int:
    f = parse_function(args.model)
    objective = args.objective
    if args.grid:
        lo, hi, steps = parse_grid(args.grid)
    elif objective == "wss":
        lo, hi, steps = (0.0, 180.0, 64) if f.angular else (0.0, 3.0, 64)
    else:
        lo, hi, steps = -180.0, 180.0, 64
    rounds, shrink = parse_refine(args.refine) if args.refine else (4, 0.25)
    to_rad = math.radians if f.angular else float
    grid = ScanGrid(to_rad(lo), to_rad(hi), steps, rounds, shrink)
    from_rad = _deg if f.angular else (lambda x: round(x, 12))
    payload = {
        "command": "scan",
        "config": _config(args, grid=f"{lo}:{hi}:{steps}", refine=f"{rounds}:{shrink}"),
        "function": f.describe(),
        "units": "degrees" if f.angular else "coordinate",
    }
    if objective == "wss":
        verdict = wss_feasibility_scan(f, grid)
        payload["verdict"] = {
            "feasible": verdict.feasible,
            "worst_triple": [from_rad(x) for x in verdict.worst_triple],
            "worst_slack": verdict.worst_slack,
            "violation_count": len(verdict.violations),
            "resolution": from_rad(grid.resolution),
            "tolerance": verdict.tolerance,
        }
        rows = [[*(from_rad(x) for x in t), s] for t, s in verdict.violations]
        emit(args, payload, ["x1", "x2", "x3", "slack"], rows)
        return EXIT_OK
    if objective == "three":
        result, names = violation_search_three(f, grid), ["a", "b", "b2"]
    else:
        result, names = violation_search_chsh(f, grid), ["a", "a2", "b", "b2"]
    payload["search"] = {
        "objective": objective,
        "best_angles": [from_rad(x) for x in result.best_angles],
        "best_value": result.best_value,
        "resolution": from_rad(grid.resolution),
    }
    rows = [[stage, *(from_rad(x) for x in ang), val] for stage, (ang, val) in enumerate(result.history)]
    emit(args, payload, ["stage", *names, "value"], rows)
    return EXIT_OK


def cmd_streams(args) -> int:
    streams = _generated_streams(args)
    text = format_stream_table(streams)
    count = len(streams)
    if args.out is None:
        sys.stdout.write(text)
        print(f"streams: {count}", file=sys.stderr)
    else:
        atomic_write(Path(args.out), text)
        print(json.dumps({"streams": count, "labels": list(streams.labels), "seed": args.seed}))
    return EXIT_OK


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bellstreams", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, model_default="bell-linear", angles_default="0,90,-45,45"):
        p.add_argument("--model", default=model_default)
        p.add_argument("--angles", default=angles_default, help="degrees, comma-separated")
        p.add_argument("--trials", type=int, default=100_000)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--locality", choices=["local", "nonlocal"], default="local")
        p.add_argument("--out", default=None)

    def fmt(p):
        p.add_argument("--format", choices=["json", "csv", "both"], default="json")

    p = sub.add_parser("verify-identity", help="check the finite-data identity on matched streams")
    p.add_argument("input", nargs="?", help="stream file; omitted means generate streams")
    common(p)
    fmt(p)
    p.set_defaults(func=cmd_verify_identity)

    p = sub.add_parser("experiment", help="run a delayed-choice experiment")
    common(p)
    p.add_argument("--acquisition", choices=["matched", "unmatched"], default="unmatched")
    fmt(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("scan", help="feasibility scan or violation search for a correlation function")
    p.add_argument("--model", default="cosine",
                   help="cosine | neg-cosine | bell-linear | exponential[:LENGTH] | tabulated:PATH")
    p.add_argument("--objective", choices=["wss", "three", "chsh"], default="wss")
    p.add_argument("--grid", default=None, help="lo:hi:steps (degrees for angular functions)")
    p.add_argument("--refine", default=None, help="rounds:shrink")
    p.add_argument("--out", default=None)
    fmt(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("streams", help="emit the delayed-choice stream table")
    common(p)
    p.set_defaults(func=cmd_streams)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command != "scan" and args.model not in SOURCES:
        print(f"error: unknown model {args.model!r}; choose from {sorted(SOURCES)}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except InvariantBreach as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
