"""``adicmean`` command line: generate, analyze, classify, dimension, verify.

Exit status: 0 success, 1 verification failure, 2 input or spec error.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import specfile
from .classify import (
    DEFAULT_DELTA,
    DEFAULT_TAIL,
    CheckpointLadder,
    default_ladder,
    lemma1_check,
    rows_to_csv,
    track_digits,
    verdict_from_rows,
)
from .constructors import run_boundaries
from .digitcore import as_fraction, materialize, read_digits, write_digits
from .errors import AdicError, DomainError
from .fractal import (
    CylinderCoverSpec,
    DimensionEstimate,
    besicovitch_eggleston_dimension,
    box_counting_estimate,
    crossover_dimension,
    read_points,
    sample_block_shuffles,
    sample_c1,
    sample_uniform,
    volume_slope,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class UsageError(AdicError):
    pass


def _rational(text: str) -> Fraction:
    try:
        return as_fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational: {text!r} ({exc})") from None


def _rationals(text: str) -> list[Fraction]:
    return [_rational(t.strip()) for t in text.split(",") if t.strip()]


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- inputs ------------------------------------------------------------------


def _load_digits(args):
    """(digits, source or None, provenance) from --input or --spec."""
    if bool(args.input) == bool(args.spec):
        raise UsageError("give exactly one of --input or --spec")
    if args.input:
        try:
            digits = read_digits(args.input)
        except FileNotFoundError:
            raise UsageError(f"no such file: {args.input}") from None
        horizon = args.horizon or len(digits)
        if horizon > len(digits):
            raise DomainError(f"--horizon {horizon} exceeds the {len(digits)} digits in {args.input}")
        return digits[:horizon], None, {"input": Path(args.input).name}
    if not args.horizon:
        raise UsageError("--horizon is required with --spec")
    built = specfile.load(args.spec, args.seed)
    return materialize(built.source, args.horizon).digits, built.source, {"spec": built.document, "seed": args.seed}


def _ladder(text: str | None, source, n: int) -> CheckpointLadder:
    if text in (None, "default"):
        if source is None:
            return CheckpointLadder.geometric(n)
        return default_ladder(source, n)
    if text.startswith("geometric"):
        parts = text.split(":")[1:]
        n0 = int(parts[0]) if parts else 100
        ratio = _rational(parts[1]) if len(parts) > 1 else Fraction(3, 2)
        return CheckpointLadder.geometric(n, n0, ratio)
    if text == "blocks":
        if source is None or not source.block_structured:
            raise UsageError("--ladder blocks needs a block-structured --spec")
        ends = materialize(source, n).boundaries
        return CheckpointLadder.of(int(b) for b in ends if b >= 1)
    try:
        return CheckpointLadder.of(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise UsageError(f"bad --ladder {text!r}") from None


# -- commands ----------------------------------------------------------------


def cmd_generate(args) -> int:
    if not args.spec or not args.out or not args.horizon:
        raise UsageError("generate needs --spec, --out and --horizon")
    built = specfile.load(args.spec, args.seed)
    prefix = materialize(built.source, args.horizon)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_digits(args.out, prefix.digits, args.format)
    meta = {
        "spec": built.document,
        "seed": args.seed,
        "horizon": args.horizon,
        "format": args.format,
        "source": built.source.describe(),
        "block_boundaries": [int(b) for b in prefix.boundaries],
        "regime_switches": run_boundaries(built.source, args.horizon),
    }
    Path(args.out + ".meta.json").write_text(_dump_json(meta))
    return EXIT_OK


def cmd_analyze(args) -> int:
    digits, source, _prov = _load_digits(args)
    ladder = _ladder(args.ladder, source, len(digits))
    _emit(rows_to_csv(track_digits(digits, 4, ladder)), args.out)
    return EXIT_OK


def cmd_classify(args) -> int:
    digits, source, prov = _load_digits(args)
    ladder = _ladder(args.ladder, source, len(digits))
    verdict = verdict_from_rows(track_digits(digits, 4, ladder), args.delta, args.tail_fraction)
    doc = verdict.to_json()
    check = lemma1_check(verdict)
    doc["pattern_check"] = {"ok": check.ok, "message": check.message}
    doc["config"] = prov
    _emit(_dump_json(doc), args.out)
    return EXIT_OK


def cmd_dimension(args) -> int:
    if args.mode == "formula":
        if not args.tau:
            raise UsageError("formula mode needs --tau")
        est = DimensionEstimate(
            besicovitch_eggleston_dimension(args.tau), "formula", {"tau": [str(t) for t in args.tau]}
        )
    elif args.mode == "crossover":
        spec = CylinderCoverSpec(args.k)
        a0 = crossover_dimension(spec)
        est = DimensionEstimate(
            a0, "crossover",
            {"k": args.k, "slope_per_block_at": {str(a): str(volume_slope(spec, a)) for a in (a0 / 2, a0, 2 * a0)}},
        )
    else:
        if args.input:
            points = read_points(args.input)
        elif args.sample == "uniform":
            points = sample_uniform(args.count, args.max_rank, args.seed)
        elif args.sample == "block-shuffle":
            points = sample_block_shuffles(args.tau or [Fraction(1, 2)] * 2 + [0, 0], args.count, args.max_rank, args.seed)
        elif args.sample == "c1":
            points = sample_c1(args.count, args.max_rank, args.seed, k=args.k)
        else:
            raise UsageError("box-count mode needs --input or --sample")
        est = box_counting_estimate(points, args.max_rank)
        est.diagnostics["config"] = {
            "input": Path(args.input).name if args.input else None,
            "sample": None if args.input else args.sample,
            "seed": args.seed,
        }
    _emit(est.dumps(), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import VerifyConfig, run_all

    cfg = VerifyConfig(horizon=args.horizon or 10**6, seed=args.seed, inject_fault=args.inject_fault)
    results = run_all(cfg)
    lines = [r.line() for r in results]
    failed = [r for r in results if not r.passed]
    lines.append(f"{len(results) - len(failed)}/{len(results)} checks passed")
    for r in failed:
        lines.append(f"failing invariant: {r.name}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_FAIL if failed else EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adicmean", allow_abbrev=False, description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *, stream=True):
        sp.add_argument("--out", help="output path (stdout when omitted)")
        sp.add_argument("--horizon", type=int, help="number of digits")
        sp.add_argument("--seed", type=int, default=0)
        if stream:
            sp.add_argument("--spec", help="construction file (JSON)")
            sp.add_argument("--input", help="digit-stream file (ASCII or packed)")
            sp.add_argument("--ladder", help="'default', 'blocks', 'geometric[:n0[:ratio]]' or n1,n2,...")

    g = sub.add_parser("generate", allow_abbrev=False, help="write a constructed digit stream")
    g.add_argument("--spec")
    g.add_argument("--out")
    g.add_argument("--horizon", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--format", choices=("ascii", "packed"), default="ascii")
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("analyze", allow_abbrev=False, help="checkpoint statistics as CSV")
    common(a)
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("classify", allow_abbrev=False, help="empirical class guess as JSON")
    common(c)
    c.add_argument("--delta", type=_rational, default=DEFAULT_DELTA)
    c.add_argument("--tail-fraction", type=_rational, default=DEFAULT_TAIL)
    c.set_defaults(func=cmd_classify)

    d = sub.add_parser("dimension", allow_abbrev=False, help="dimension formulas and box counting")
    common(d, stream=False)
    d.add_argument("--mode", choices=("formula", "crossover", "box-count"), required=True)
    d.add_argument("--tau", type=_rationals)
    d.add_argument("--k", type=int, default=4)
    d.add_argument("--input", help="points file, one ASCII digit string per line")
    d.add_argument("--sample", choices=("uniform", "block-shuffle", "c1"))
    d.add_argument("--count", type=int, default=10**4)
    d.add_argument("--max-rank", type=int, default=10)
    d.set_defaults(func=cmd_dimension)

    v = sub.add_parser("verify", allow_abbrev=False, help="run the built-in property suites")
    common(v, stream=False)
    v.add_argument("--inject-fault", action="store_true", help="corrupt one digit of a permuted stream")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (AdicError, OSError) as exc:
        print(f"adicmean {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
