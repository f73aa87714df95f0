"""Command-line entry point: encode, decode, inspect, strip, stats."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import GfvError
from .gfv_payload import RepresentationKind
from .nal_mux import DEFAULT_GFV_PAYLOAD_TYPE, join_annexb, split_annexb, strip_sei
from .neural_io import Translator, ToyGenerator, load_weights
from .picture import read_ppm, write_ppm
from .pipeline import (
    DecodeOptions,
    Networks,
    SequenceManifest,
    decode_sequence,
    encode_sequence,
    iter_gfv,
)
from .rate_stats import (
    BitLog,
    format_percent,
    per_picture_series,
    summarize,
    windowed_base_ratio,
    write_series_csv,
    write_summary_json,
)

log = logging.getLogger("gfvsei")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--payload-type", type=int, default=DEFAULT_GFV_PAYLOAD_TYPE,
                   help=f"SEI payload type of GFV messages (default {DEFAULT_GFV_PAYLOAD_TYPE}, "
                        "a placeholder value)")
    p.add_argument("--codec-family", choices=["avc", "hevc", "vvc"], default="vvc")
    p.add_argument("--coord-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--matrix-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gfvsei", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", help="attach GFV SEI messages to a base stream")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--log", type=Path, help="write the per-picture bit log (CSV)")
    p.add_argument("--precision", type=int, help="override precision_bits")
    pred = p.add_mutually_exclusive_group()
    pred.add_argument("--prediction", dest="prediction", action="store_true", default=None)
    pred.add_argument("--no-prediction", dest="prediction", action="store_false")
    _common(p)
    p.set_defaults(payload_type=None, codec_family=None)

    p = sub.add_parser("decode", help="reconstruct frames from a GFV stream")
    p.add_argument("--in", dest="input", required=True, type=Path)
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--log", type=Path)
    p.add_argument("--sigma", type=float, help="motion kernel width in pixels "
                                               "(default 0.1 x min(width, height))")
    p.add_argument("--base-image", type=Path, help="PPM texture replacing the decoded base "
                                                   "picture (animation mode)")
    p.add_argument("--translator", type=Path, help="GFVT weights file")
    p.add_argument("--target-kind", choices=[k.name for k in RepresentationKind])
    p.add_argument("--target-coords", type=int, nargs=2, metavar=("N", "D"))
    p.add_argument("--target-matrices", type=int, nargs=3, metavar=("M", "R", "C"))
    _common(p)

    p = sub.add_parser("inspect", help="dump every GFV SEI field")
    p.add_argument("--in", dest="input", required=True, type=Path)
    p.add_argument("--out", type=Path, help="write the dump here instead of stdout")
    p.add_argument("--values", type=int, default=4, help="values shown per parameter set")
    _common(p)

    p = sub.add_parser("strip", help="remove SEI NAL units")
    p.add_argument("--in", dest="input", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--gfv-only", action="store_true",
                   help="only drop SEI NAL units carrying the GFV payload type")
    _common(p)

    p = sub.add_parser("stats", help="rate summary from a bit log")
    p.add_argument("--log", required=True, type=Path)
    p.add_argument("--fps", type=float, default=25.0)
    p.add_argument("--summary", type=Path, help="write summary JSON")
    p.add_argument("--series", type=Path, help="write per-picture CSV")
    p.add_argument("--count-base", action="store_true",
                   help="include base-picture bits in the per-picture series")
    p.add_argument("--window", type=int, help="also report ratios over windows of N pictures")
    return parser


def _check_inputs(args) -> None:
    for name in ("manifest", "input", "log", "base_image", "translator"):
        path = getattr(args, name, None)
        if path is None or (name == "log" and args.command != "stats"):
            continue
        if not path.is_file():
            raise UsageError(f"{path}: no such file")


def _decode_options(args) -> DecodeOptions:
    return DecodeOptions(
        payload_type=args.payload_type,
        codec_family=args.codec_family,
        coord_range=tuple(args.coord_range) if args.coord_range else None,
        matrix_range=tuple(args.matrix_range) if args.matrix_range else None,
    )


def cmd_encode(args) -> None:
    m = SequenceManifest.from_json(args.manifest)
    if args.precision is not None:
        m.precision_bits = args.precision
    if args.prediction is not None:
        m.prediction = args.prediction
    if args.payload_type is not None:
        m.payload_type = args.payload_type
    if args.codec_family is not None:
        m.codec_family = args.codec_family
    if args.coord_range:
        m.coord_range = tuple(args.coord_range)
    if args.matrix_range:
        m.matrix_range = tuple(args.matrix_range)
    stream, bitlog = encode_sequence(m)
    args.out.write_bytes(stream)
    if args.log:
        bitlog.write_csv(args.log)
    log.info("wrote %d bytes, %d pictures", len(stream), len(bitlog))


def cmd_decode(args) -> None:
    options = _decode_options(args)
    if args.base_image:
        options.base_image = read_ppm(args.base_image)
    translator = None
    if args.translator:
        if not args.target_kind:
            raise UsageError("--translator needs --target-kind")
        translator = Translator(load_weights(args.translator), args.target_kind,
                                tuple(args.target_coords) if args.target_coords else None,
                                tuple(args.target_matrices) if args.target_matrices else None)
    networks = Networks(translator=translator, generator=ToyGenerator(args.sigma))
    frames, bitlog = decode_sequence(args.input.read_bytes(), networks, options)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for k, frame in enumerate(frames):
        write_ppm(args.out_dir / f"frame_{k:05d}.ppm", frame)
    if args.log:
        bitlog.write_csv(args.log)
    log.info("wrote %d frames to %s", len(frames), args.out_dir)


def _fmt_values(arr, n):
    flat = np.asarray(arr).ravel()
    shown = " ".join(f"{v:g}" if isinstance(v, float) else str(v) for v in flat[:n].tolist())
    return shown + (" ..." if flat.size > n else "")


def cmd_inspect(args) -> None:
    lines = []
    n = 0
    for ev in iter_gfv(args.input.read_bytes(), _decode_options(args)):
        for j, d in enumerate(ev.messages):
            p = d.params
            own = bool(ev.pictures) and j == ev.carried
            lines.append(f"GFV SEI #{n}  (access unit {ev.index}"
                         f"{', base picture' if own else ''})")
            lines.append(f"  kind={p.kind.name} coordinate_present={int(d.coords_q is not None)} "
                         f"matrix_present={int(d.matrices_q is not None)} "
                         f"prediction={int(p.prediction)} precision={p.precision_bits} "
                         f"payload_bits={d.bit_length}")
            if p.translator_uri or p.generator_uri:
                lines.append(f"  translator_uri={p.translator_uri!r} "
                             f"generator_uri={p.generator_uri!r}")
            if d.coords_q is not None:
                N, D = d.coords_q.shape
                lines.append(f"  coords N={N} D={D} q=[{_fmt_values(d.coords_q, args.values)}]"
                             f" v=[{_fmt_values(p.coords, args.values)}]")
            if d.matrices_q is not None:
                M, R, C = d.matrices_q.shape
                lines.append(f"  matrices M={M} R={R} C={C} q=[{_fmt_values(d.matrices_q, args.values)}]"
                             f" v=[{_fmt_values(p.matrices, args.values)}]")
            n += 1
    lines.append(f"{n} GFV SEI message(s)")
    text = "\n".join(lines) + "\n"
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)


def cmd_strip(args) -> None:
    aus = split_annexb(args.input.read_bytes(), args.codec_family)
    stripped = strip_sei(aus, args.payload_type if args.gfv_only else None)
    args.out.write_bytes(join_annexb(stripped))


def cmd_stats(args) -> None:
    bitlog = BitLog.read_csv(args.log)
    summary = summarize(bitlog, args.fps)
    sys.stdout.write(
        f"pictures={summary.pictures} base_bits={summary.base_bits} "
        f"sei_bits={summary.sei_bits} total_bits={summary.total_bits}\n"
        f"base ratio {format_percent(summary.base_ratio_percent)} "
        f"kbps={summary.kbps:.4f} at {args.fps:g} fps\n"
    )
    if args.window:
        ratios = windowed_base_ratio(bitlog, args.window)
        sys.stdout.write("windowed " + " ".join(format_percent(r) for r in ratios) + "\n")
    if args.summary:
        write_summary_json(args.summary, summary)
    if args.series:
        write_series_csv(args.series, per_picture_series(bitlog, args.count_base))


COMMANDS = {
    "encode": cmd_encode,
    "decode": cmd_decode,
    "inspect": cmd_inspect,
    "strip": cmd_strip,
    "stats": cmd_stats,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        _check_inputs(args)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except (GfvError, ValueError, OSError) as exc:
        print(f"gfvsei: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> None:
    sys.exit(run())
