"""Command-line interface.

Subcommands: convert, notearray, pianoroll, analyze, unfold, align.
Exit codes: 0 success, 1 usage error, 2 parse error, 3 analysis or
structure error.  Warnings go to stderr; --strict turns them into errors.
Multiple inputs are processed in parallel and emitted in input order.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import analysis
from .document import ScoreDocument
from .exceptions import (
    DegenerateInputError,
    EmptyInputError,
    EncodeError,
    FeatureError,
    FormatDetectionError,
    IdentityError,
    MissingContextError,
    ParseError,
    RangeError,
    ScorelineWarning,
    StructureError,
)
from .formats import load_performance, load_score, read_bytes, sniff_format
from .formats.matchfile import load_corresp, load_match
from .formats.midi import save_midi
from .formats.musicxml import save_musicxml
from .model import PerformedPart, notes_sorted
from .notearray import note_array, note_array_to_csv
from .pianoroll import compute_pianoroll, pianoroll_to_csv, pianoroll_to_pgm
from .unfold import enumerate_unfoldings, unfold_maximal

USAGE_ERROR, PARSE_ERROR, ANALYSIS_ERROR = 1, 2, 3

SCORE_EXTENSIONS = {".musicxml": "musicxml", ".xml": "musicxml",
                    ".krn": "kern", ".mei": "mei", ".mid": "midi",
                    ".midi": "midi"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scoreline",
        description="Symbolic music toolkit: parse, convert, analyze.")
    parser.add_argument("--strict", action="store_true",
                        help="escalate warnings to errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p_convert = sub.add_parser("convert", help="convert between score formats")
    p_convert.add_argument("input")
    p_convert.add_argument("output")
    p_convert.add_argument("--to", choices=("musicxml", "midi"),
                           help="output format (default: from extension)")

    p_na = sub.add_parser("notearray", help="emit a note array as CSV")
    p_na.add_argument("inputs", nargs="+")
    p_na.add_argument("--include-time-signature", action="store_true")
    p_na.add_argument("--as", dest="reading", default="auto",
                      choices=("auto", "score", "performance"),
                      help="how to read MIDI inputs (default: performance)")
    p_na.add_argument("-o", "--output", default="-")

    p_pr = sub.add_parser("pianoroll", help="emit a piano roll")
    p_pr.add_argument("inputs", nargs="+")
    p_pr.add_argument("--time-div", type=int, required=True)
    p_pr.add_argument("--unit", default=None,
                      choices=("div", "quarter", "beat", "sec"))
    p_pr.add_argument("--piano-range", action="store_true")
    p_pr.add_argument("--fill", default="full", choices=("full", "onset_only"))
    p_pr.add_argument("--format", dest="out_format", default="csv",
                      choices=("csv", "pgm"))
    p_pr.add_argument("--as", dest="reading", default="auto",
                      choices=("auto", "score", "performance"))
    p_pr.add_argument("-o", "--output", default="-")

    p_an = sub.add_parser("analyze", help="run an estimator")
    p_an.add_argument("inputs", nargs="+")
    group = p_an.add_mutually_exclusive_group(required=True)
    group.add_argument("--key", action="store_true")
    group.add_argument("--spelling", action="store_true")
    group.add_argument("--voices", action="store_true")
    p_an.add_argument("--as", dest="reading", default="auto",
                      choices=("auto", "score", "performance"))
    p_an.add_argument("-o", "--output", default="-")

    p_un = sub.add_parser("unfold", help="enumerate or materialize unfoldings")
    p_un.add_argument("input")
    group = p_un.add_mutually_exclusive_group(required=True)
    group.add_argument("--list", action="store_true")
    group.add_argument("--maximal", action="store_true")
    p_un.add_argument("-o", "--output", default="-")

    p_al = sub.add_parser("align", help="inspect alignment files")
    p_al.add_argument("input")
    p_al.add_argument("--stats", action="store_true")
    p_al.add_argument("--pairs", action="store_true",
                      help="emit label,score_id,perf_id CSV")
    p_al.add_argument("--notes", action="store_true",
                      help="emit the performance note array CSV")
    return parser


def _read_input(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    data, _name = read_bytes(path)
    return data


def _load_any(path: str, reading: str, strict: bool):
    """Load one input as a score or performance per the requested reading."""
    data = _read_input(path)
    source = data if path == "-" else path  # keep the name in error messages
    fmt = sniff_format(data)
    if fmt == "match":
        performance, _alignment, score = load_match(data, strict=strict,
                                                    source_name=path)
        if reading == "score" and score is not None:
            return score
        return performance
    if fmt == "midi":
        if reading == "score":
            from .formats.midi import load_score_midi

            return load_score_midi(source, strict=strict, source_name=path)
        return load_performance(source, strict=strict)
    if reading == "performance":
        raise FormatDetectionError(f"{fmt} input cannot be read as a performance",
                                   source=path)
    return load_score(source, strict=strict)


def _emit_warnings(source, path: str):
    items = getattr(source, "warnings", None) or []
    for item in items:
        print(f"warning: {path}: {item}", file=sys.stderr)


def _write_output(payload, out_spec: str, path: str, extension: str,
                  multiple: bool):
    data = payload.encode("utf-8") if isinstance(payload, str) else payload
    if out_spec == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
        return
    target = Path(out_spec)
    if multiple:
        target.mkdir(parents=True, exist_ok=True)
        target = target / (Path(path).stem + extension)
    tmp = target.with_name(target.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, target)


def _per_file(inputs, worker):
    """Run worker(path) for every input in parallel, yield in input order."""
    if len(inputs) == 1:
        yield inputs[0], worker(inputs[0])
        return
    with ThreadPoolExecutor(max_workers=min(8, len(inputs))) as pool:
        for path, result in zip(inputs, pool.map(worker, inputs)):
            yield path, result


def cmd_convert(args) -> int:
    source = _read_input(args.input) if args.input == "-" else args.input
    doc = load_score(source, strict=args.strict)
    _emit_warnings(doc, args.input)
    fmt = args.to
    if fmt is None:
        suffix = Path(args.output).suffix.lower()
        fmt = SCORE_EXTENSIONS.get(suffix)
        if fmt not in ("musicxml", "midi"):
            print(f"error: cannot infer output format from {args.output!r}",
                  file=sys.stderr)
            return USAGE_ERROR
    if fmt == "musicxml":
        if args.output == "-":
            save_musicxml(doc, sys.stdout)
        else:
            save_musicxml(doc, args.output)
    else:
        if args.output == "-":
            save_midi(doc, sys.stdout.buffer)
        else:
            save_midi(doc, args.output)
    return 0


def cmd_notearray(args) -> int:
    def worker(path):
        source = _load_any(path, args.reading, args.strict)
        _emit_warnings(source, path)
        arr = note_array(source,
                         include_time_signature=args.include_time_signature)
        return note_array_to_csv(arr)

    multiple = len(args.inputs) > 1
    for path, text in _per_file(args.inputs, worker):
        _write_output(text, args.output, path, ".csv", multiple)
    return 0


def cmd_pianoroll(args) -> int:
    def worker(path):
        source = _load_any(path, args.reading, args.strict)
        _emit_warnings(source, path)
        roll = compute_pianoroll(source, time_unit=args.unit,
                                 time_div=args.time_div,
                                 piano_range=args.piano_range, fill=args.fill)
        if args.out_format == "pgm":
            return pianoroll_to_pgm(roll)
        return pianoroll_to_csv(roll)

    multiple = len(args.inputs) > 1
    extension = ".pgm" if args.out_format == "pgm" else ".csv"
    for path, text in _per_file(args.inputs, worker):
        _write_output(text, args.output, path, extension, multiple)
    return 0


def cmd_analyze(args) -> int:
    def worker(path):
        source = _load_any(path, args.reading, args.strict)
        _emit_warnings(source, path)
        if args.key:
            return analysis.estimate_key(source) + "\n"
        if args.spelling:
            spelled = analysis.estimate_spelling(source)
            ids = _note_ids(source)
            lines = ["id,step,alter,octave"]
            lines += [f"{i},{r['step']},{r['alter']},{r['octave']}"
                      for i, r in zip(ids, spelled)]
            return "\n".join(lines) + "\n"
        voices = analysis.estimate_voices(source)
        ids = _note_ids(source)
        lines = ["id,voice"]
        lines += [f"{i},{v}" for i, v in zip(ids, voices)]
        return "\n".join(lines) + "\n"

    multiple = len(args.inputs) > 1
    for path, text in _per_file(args.inputs, worker):
        if multiple and args.output == "-":
            sys.stdout.write(f"# {path}\n")
        _write_output(text, args.output, path, ".csv" if not args.key else ".txt",
                      multiple)
    return 0


def _note_ids(source):
    if isinstance(source, PerformedPart):
        return [n.id for n in source.notes]
    if isinstance(source, ScoreDocument):
        ids = []
        for part in source.iter_parts():
            ids.extend(n.id for n in notes_sorted(part))
        return ids
    return [n.id for n in notes_sorted(source)]


def cmd_unfold(args) -> int:
    source = _read_input(args.input) if args.input == "-" else args.input
    doc = load_score(source, strict=args.strict)
    _emit_warnings(doc, args.input)
    parts = doc.part_list()
    if args.list:
        lines = []
        for part in parts:
            for playout in enumerate_unfoldings(part):
                body = " ".join(f"{s.start_div}:{s.end_div}" for s in playout)
                prefix = f"{part.id}\t" if len(parts) > 1 else ""
                lines.append(prefix + body)
        _write_output("\n".join(lines) + "\n", args.output, args.input,
                      ".txt", False)
        return 0
    unfolded = [unfold_maximal(part) for part in parts]
    from .model import PartGroup

    out_doc = ScoreDocument(PartGroup("root", unfolded), doc.source_format)
    if args.output == "-":
        save_musicxml(out_doc, sys.stdout)
    else:
        save_musicxml(out_doc, args.output)
    return 0


def cmd_align(args) -> int:
    data = _read_input(args.input)
    fmt = sniff_format(data)
    performance = None
    if fmt == "match":
        performance, alignment, _score = load_match(data, strict=args.strict,
                                                    source_name=args.input)
        _emit_warnings(performance, args.input)
    elif fmt == "corresp":
        alignment = load_corresp(data, strict=args.strict, source_name=args.input)
    else:
        raise FormatDetectionError("not an alignment file", source=args.input)

    shown = False
    if args.pairs:
        lines = ["label,score_id,perf_id"]
        lines += [f"{p.label},{p.score_id or ''},{p.perf_id or ''}"
                  for p in alignment]
        sys.stdout.write("\n".join(lines) + "\n")
        shown = True
    if args.notes:
        if performance is None:
            print("error: corresp files carry no performance notes",
                  file=sys.stderr)
            return USAGE_ERROR
        sys.stdout.write(note_array_to_csv(note_array(performance)))
        shown = True
    if args.stats or not shown:
        counts = alignment.label_counts()
        total = max(len(alignment), 1)
        for label in ("match", "insertion", "deletion", "ornament"):
            sys.stdout.write(f"{label}: {counts[label]}\n")
        sys.stdout.write(f"match_rate: {counts['match'] / total:.4f}\n")
    return 0


COMMANDS = {
    "convert": cmd_convert,
    "notearray": cmd_notearray,
    "pianoroll": cmd_pianoroll,
    "analyze": cmd_analyze,
    "unfold": cmd_unfold,
    "align": cmd_align,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else USAGE_ERROR
    try:
        with warnings.catch_warnings():
            if args.strict:
                warnings.simplefilter("error", ScorelineWarning)
                return COMMANDS[args.command](args)
            warnings.simplefilter("always", ScorelineWarning)
            with _route_warnings_to_stderr():
                return COMMANDS[args.command](args)
    except ScorelineWarning as exc:
        print(f"error: {exc}", file=sys.stderr)
        return PARSE_ERROR
    except (ParseError, FormatDetectionError, IdentityError, EncodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return PARSE_ERROR
    except (MissingContextError, EmptyInputError, DegenerateInputError,
            StructureError, FeatureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ANALYSIS_ERROR
    except RangeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


class _route_warnings_to_stderr:
    def __enter__(self):
        self._previous = warnings.showwarning
        warnings.showwarning = self._show
        return self

    def _show(self, message, category, filename, lineno, file=None, line=None):
        if issubclass(category, ScorelineWarning):
            print(f"warning: {message}", file=sys.stderr)
        else:
            self._previous(message, category, filename, lineno, file, line)

    def __exit__(self, *exc_info):
        warnings.showwarning = self._previous
        return False


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
