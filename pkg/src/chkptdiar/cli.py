"""Command-line entry point: ``chkptdiar {run,score,synth,bench}``.

Exit codes: 0 on success, 1 on a usage error, 2 on a data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence, TextIO

from chkptdiar.core import CLUSTERING_MODES, RECLUSTER_MODES, Config, InvalidInputError
from chkptdiar.formats import (
    read_embeddings,
    read_rttm,
    segments_to_turns,
    write_embeddings,
    write_rttm,
)
from chkptdiar.pipeline import run_stream
from chkptdiar.scoring import score_der
from chkptdiar.synth import synthesize

EXIT_USAGE = 1
EXIT_DATA = 2

# flag dest -> Config field
_FLAG_FIELDS = {
    "clustering": "clustering_mode",
    "recluster": "recluster_mode",
    "ahc_threshold": "ahc_stop_threshold",
    "graph_threshold": "graph_threshold",
    "checkpoint_k": "checkpoint_k",
    "duration_threshold": "speaker_duration_threshold",
    "naive_threshold": "naive_recluster_threshold",
    "baseline3_threshold": "baseline3_threshold",
    "collar": "collar",
    "graph_pruning": "graph_pruning",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_config_file(fh: TextIO) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    types = Config.field_types()
    values = {}
    for lineno, raw in enumerate(fh, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            raise UsageError(f"config line {lineno}: expected key=value")
        key = key.replace("-", "_")
        if key not in types:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        kind = types[key]
        try:
            values[key] = _parse_bool(value) if kind is bool else kind(value)
        except ValueError as exc:
            raise UsageError(f"config line {lineno}: {exc}") from None
    return values


def build_config(args: argparse.Namespace) -> Config:
    """Defaults, overridden by the config file, overridden by flags."""
    values = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                values.update(read_config_file(fh))
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
    for dest, name in _FLAG_FIELDS.items():
        flag = getattr(args, dest, None)
        if flag is not None:
            values[name] = flag
    try:
        return Config(**values)
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from None


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value file with Config fields")
    p.add_argument("--clustering", choices=CLUSTERING_MODES)
    p.add_argument("--recluster", choices=RECLUSTER_MODES)
    p.add_argument("--ahc-threshold", type=float, help="AHC stopping similarity")
    p.add_argument("--graph-threshold", type=float, help="edge threshold of the speaker graph")
    p.add_argument("--checkpoint-k", type=int, help="clusters kept in the checkpoint (>= 2)")
    p.add_argument("--duration-threshold", type=float, help="seconds for a cluster to count as a speaker")
    p.add_argument("--naive-threshold", type=float, help="similarity for naive re-clustering")
    p.add_argument("--baseline3-threshold", type=float)
    p.add_argument("--collar", type=float, help="accepted for symmetry with score; unused here")
    p.add_argument("--no-graph-pruning", dest="graph_pruning", action="store_const", const=False)


def _open_out(path: str | None):
    return sys.stdout if path in (None, "-") else open(path, "w")


def _write_json(path: str, payload: dict) -> None:
    out = _open_out(path)
    try:
        json.dump(payload, out)
        out.write("\n")
    finally:
        if out is not sys.stdout:
            out.close()


def _load_stream(path: str):
    fh = sys.stdin if path == "-" else open(path)
    try:
        return list(read_embeddings(fh))
    finally:
        if fh is not sys.stdin:
            fh.close()


def _print_label(segment_id: int, label: int) -> None:
    print(f"{segment_id}\t{label}", flush=True)


def cmd_run(args) -> int:
    config = build_config(args)
    segments = _load_stream(args.input)
    on_label = _print_label if args.emit_per_step else None
    labels, _ = run_stream(segments, config, baseline3=args.baseline3, on_label=on_label)
    turns = segments_to_turns([(e.start, e.end) for e in segments], labels)
    out = _open_out(args.output)
    try:
        write_rttm(out, turns, args.file_id)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_score(args) -> int:
    with open(args.reference) as fh:
        ref = read_rttm(fh)
    with open(args.hypothesis) as fh:
        hyp = read_rttm(fh)
    report = score_der(ref, hyp, collar=args.collar)
    print(f"miss           {report.miss:.3f} s")
    print(f"false alarm    {report.false_alarm:.3f} s")
    print(f"confusion      {report.confusion:.3f} s")
    print(f"scored total   {report.scored_total:.3f} s")
    print(f"DER            {report.der:.3f}")
    payload = {**report.as_dict(), "collar": args.collar}
    if args.json:
        _write_json(args.json, payload)
    else:
        print(json.dumps(payload))
    return 0


def cmd_synth(args) -> int:
    stream = synthesize(
        args.speakers,
        args.segments,
        dim=args.dim,
        intra_cos=args.intra_cos,
        inter_cos=args.inter_cos,
        seed=args.seed,
    )
    with open(args.output, "w") as out:
        write_embeddings(out, stream.embeddings)
    if args.rttm:
        with open(args.rttm, "w") as out:
            write_rttm(out, stream.reference(), args.file_id)
    return 0


def _variant_config(base: Config, name: str) -> tuple[Config, bool]:
    if name == "baseline3":
        return base, True
    clustering, _, recluster = name.partition("+")
    changes = {"clustering_mode": clustering}
    if recluster:
        changes["recluster_mode"] = recluster
    try:
        return base.with_updates(**changes), False
    except InvalidInputError as exc:
        raise UsageError(f"bad variant {name!r}: {exc}") from None


def cmd_bench(args) -> int:
    config = build_config(args)
    names = [n.strip() for n in args.compare.split(",")] if args.compare else [None]
    variants = [(n or "default", *(_variant_config(config, n) if n else (config, args.baseline3))) for n in names]
    segments = _load_stream(args.input)
    results = {}
    for name, cfg, base3 in variants:
        # untimed warm-up so that JIT loading is not charged to the first steps
        run_stream(segments[:8], cfg, baseline3=base3)
        _, report = run_stream(segments, cfg, baseline3=base3)
        results[name] = report
        first, last = report.decile_means()
        print(
            f"{name:<14} steps={len(report.step_times)} total={report.total:.3f}s "
            f"mean={report.mean * 1e3:.3f}ms first10%={first * 1e3:.3f}ms last10%={last * 1e3:.3f}ms"
        )
    payload = {name: {**r.as_dict(), "step_times_s": r.step_times} for name, r in results.items()}
    if len(results) == 2:
        (a, ra), (b, rb) = results.items()
        ratio = ra.total / rb.total if rb.total > 0 else float("inf")
        print(f"speedup {a}/{b} = {ratio:.2f}x")
        payload["speedup"] = {"numerator": a, "denominator": b, "ratio": ratio}
    if args.json:
        _write_json(args.json, payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chkptdiar", description="Online speaker diarization over embedding streams.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="label an embedding stream and write RTTM")
    p.add_argument("input", help="embedding JSONL file, or - for stdin")
    p.add_argument("-o", "--output", help="RTTM destination (default stdout)")
    p.add_argument("--baseline3", action="store_true", help="use the greedy one-pass clusterer")
    p.add_argument("--emit-per-step", action="store_true", help="print segment_id<TAB>label after every step")
    p.add_argument("--file-id", default="stream")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("score", help="diarization error rate of a hypothesis RTTM")
    p.add_argument("reference")
    p.add_argument("hypothesis")
    p.add_argument("--collar", type=float, default=Config.collar)
    p.add_argument("--json", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("synth", help="generate a synthetic stream with ground truth")
    p.add_argument("--speakers", type=int, required=True)
    p.add_argument("--segments", type=int, required=True)
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--intra-cos", type=float, default=0.95)
    p.add_argument("--inter-cos", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="embedding JSONL destination")
    p.add_argument("--rttm", help="ground-truth RTTM destination")
    p.add_argument("--file-id", default="stream")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="time one or more system variants on a stream")
    p.add_argument("input")
    p.add_argument(
        "--compare",
        help="comma-separated variants such as ahc,chkpt or chkpt+graph,chkpt+none,baseline3",
    )
    p.add_argument("--baseline3", action="store_true")
    p.add_argument("--json", help="write per-step timings and summaries as JSON")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"chkptdiar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidInputError, OSError) as exc:
        print(f"chkptdiar: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
