"""Command-line entry point: ``qubitgain <command> [options]``.

Every command writes a table either as CSV (default) or as a versioned JSON
document.  Relative ``--output`` paths are resolved against
``$QUBITGAIN_OUTPUT_DIR`` when that variable is set.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .bayes import (
    PriorDensity,
    average_gain,
    fit_asymptote,
    marginal_probability,
    simulate_experiment,
)
from .haar import MAX_COPIES, METHODS, verify_spectrum
from .local import local_gain, local_spectrum
from .spin import spectrum

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "QUBITGAIN_OUTPUT_DIR"
EXIT_OK, EXIT_FAILED, EXIT_INVALID = 0, 1, 2


class ValidationError(ValueError):
    pass


def parse_prior(text: str) -> PriorDensity:
    text = text.strip()
    if text == "quadratic":
        return PriorDensity.quadratic()
    if text == "uniform":
        return PriorDensity.uniform()
    if text.startswith("poly:"):
        try:
            coeffs = [Fraction(c) for c in text[5:].split(",")]
            return PriorDensity.polynomial(coeffs)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"bad polynomial prior {text!r}: {exc}") from exc
    raise ValidationError(f"unknown prior {text!r} (use quadratic, uniform or poly:c0,c1,...)")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ValidationError(f"expected comma-separated integers, got {text!r}") from exc
    if not values:
        raise ValidationError("empty N list")
    return values


def _float_list(text: str) -> list[float]:
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from exc
    if not values:
        raise ValidationError("empty list")
    return values


def _positive(n: int, name: str = "N") -> int:
    if n < 1:
        raise ValidationError(f"{name} must be >= 1, got {n}")
    return n


def _b_values(values: list[float]) -> list[float]:
    for b in values:
        if not 0.0 <= b <= 1.0:
            raise ValidationError(f"b must lie in [0, 1], got {b}")
    return values


def _fmt(x, sci: bool = False) -> str:
    if isinstance(x, float):
        if not math.isfinite(x):
            return str(x)
        return f"{x:.6e}" if sci else f"{x:.6f}"
    return str(x)


def _jsonable(x, sci: bool = False):
    if isinstance(x, float):
        if not math.isfinite(x):
            return None
        return float(f"{x:.6e}") if sci else float(f"{x:.6f}")
    if isinstance(x, Fraction):
        return str(x)
    return x


def render(command: str, config: dict, columns: list[str], rows: list[list], fmt: str,
           meta: dict | None = None, sci: frozenset = frozenset()) -> str:
    """Serialize a result table; columns named in ``sci`` keep 7 significant digits."""
    flags = [c in sci for c in columns]
    if fmt == "json":
        doc = {
            "schema_version": SCHEMA_VERSION,
            "generator": f"qubitgain {__version__}",
            "command": command,
            "config": config,
            "columns": columns,
            "rows": [
                dict(zip(columns, (_jsonable(v, f) for v, f in zip(row, flags)))) for row in rows
            ],
        }
        if meta:
            doc["meta"] = {k: _jsonable(v, k in sci) for k, v in meta.items()}
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v, f) for v, f in zip(row, flags)])
    return buf.getvalue()


def _emit(text: str, output: str | None) -> None:
    if not output:
        sys.stdout.write(text)
        return
    path = Path(output)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_spectrum(args) -> tuple[int, str]:
    N = _positive(args.n)
    bs = _b_values(_float_list(args.b))
    columns = ["j", "copies", "block_dim"]
    for b in bs:
        columns += [f"weight@{b:g}", f"lambda@{b:g}"]
    rows = []
    for blk in spectrum(N):
        row = [str(blk.j), blk.copies, blk.block_dim]
        for b in bs:
            row += [blk.weight(b), blk.eigenvalue(b)]
        rows.append(row)
    config = {"N": N, "b": bs}
    return EXIT_OK, render("spectrum", config, columns, rows, args.format)


def cmd_table(args) -> tuple[int, str]:
    ns = [_positive(n) for n in _int_list(args.n)]
    prior = parse_prior(args.prior)
    unit = "nats" if args.nats else "bits"
    scale = math.log(2.0) if args.nats else 1.0
    rows = []
    for N in ns:
        rep = average_gain(spectrum(N), prior, nodes=args.nodes)
        rows.append([N, rep.average_gain * scale, rep.quad_error * scale])
    config = {"N": ns, "prior": prior.name, "nodes": args.nodes, "unit": unit}
    return EXIT_OK, render("table", config, ["N", f"gain_{unit}", "quad_error"], rows, args.format,
                           sci=frozenset({"quad_error"}))


def _read_table(path: str) -> list[tuple[float, float]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if len(header) < 2 or header[0] != "N":
            raise ValidationError(f"{path}: expected a table with columns N,<gain>")
        return [(float(r[0]), float(r[1])) for r in reader if r]


def cmd_fit(args) -> tuple[int, str]:
    if args.input:
        points = _read_table(args.input)
    else:
        prior = parse_prior(args.prior)
        points = [(N, average_gain(spectrum(_positive(N)), prior).average_gain)
                  for N in _int_list(args.n)]
    slope, intercept = fit_asymptote(points, min_n=args.min_n)
    used = sorted(n for n, _ in points if n >= args.min_n)
    config = {"min_n": args.min_n, "points": len(used), "source": args.input or args.n}
    return EXIT_OK, render("fit", config, ["slope", "intercept", "n_min", "n_max"],
                           [[slope, intercept, int(used[0]), int(used[-1])]], args.format)


def cmd_oracle(args) -> tuple[int, str]:
    N = _positive(args.n)
    if N > MAX_COPIES:
        raise ValidationError(f"oracle limited to N <= {MAX_COPIES}")
    bs = _b_values(_float_list(args.b))
    if args.budget is not None:
        _positive(args.budget, "budget")
    _positive(args.workers, "workers")
    rep = verify_spectrum(N, bs, method=args.method, budget=args.budget, seed=args.seed,
                          tolerance=args.tolerance, workers=args.workers)
    columns = ["b", "j", "closed", "trace", "eigen_sum", "block_spread", "stderr", "deviation",
               "allowed"]
    rows = [[r[c] for c in columns] for r in rep.rows]
    config = {"N": N, "b": bs, "method": args.method, "budget": args.budget, "seed": args.seed,
              "tolerance": args.tolerance}
    meta = {"max_deviation": rep.max_deviation, "max_stderr": rep.max_stderr,
            "passed": rep.passed}
    sci = frozenset({"closed", "trace", "eigen_sum", "block_spread", "stderr", "deviation",
                     "allowed", "max_deviation", "max_stderr"})
    text = render("oracle", config, columns, rows, args.format, meta, sci=sci)
    return (EXIT_OK if rep.passed else EXIT_FAILED), text


def cmd_local(args) -> tuple[int, str]:
    N = _positive(args.n)
    prior = parse_prior(args.prior)
    rep = local_gain(N, prior, nodes=args.nodes)
    rows = [[str(blk.j), blk.copies, blk.copy_dim, p, g]
            for blk, p, g in zip(local_spectrum(N), rep.marginals, rep.outcome_gains)]
    config = {"N": N, "prior": prior.name, "nodes": args.nodes}
    meta = {"average_gain_bits": rep.average_gain, "quad_error_bits": rep.quad_error}
    return EXIT_OK, render("local", config, ["j", "copies", "copy_dim", "marginal", "gain_bits"],
                           rows, args.format, meta)


def cmd_simulate(args) -> tuple[int, str]:
    N = _positive(args.n)
    trials = _positive(args.trials, "trials")
    prior = parse_prior(args.prior)
    if args.b_true is not None:
        _b_values([args.b_true])
    spec = spectrum(N)
    trace = simulate_experiment(spec, prior, trials=trials, seed=args.seed, b_true=args.b_true)
    freqs = trace.frequencies()
    rows = []
    for k, blk in enumerate(spec, start=1):
        rows.append([k, str(blk.j), float(freqs[k - 1]), marginal_probability(spec, k, prior),
                     float(trace.posterior_mean[k - 1]), float(trace.outcome_gain[k - 1])])
    if args.trace:
        _emit(trace.to_csv(), args.trace)
    config = {"N": N, "trials": trials, "seed": args.seed, "prior": prior.name,
              "b_true": args.b_true}
    meta = {"seed": args.seed, "mean_gain_bits": trace.mean_gain(),
            "expected_gain_bits": average_gain(spec, prior).average_gain}
    columns = ["outcome", "j", "frequency", "marginal", "posterior_mean", "gain_bits"]
    return EXIT_OK, render("simulate", config, columns, rows, args.format, meta)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qubitgain", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--output", "-o", help="write here instead of stdout")
        return p

    p = common(sub.add_parser("spectrum", help="block structure of the N-copy state"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--b", default="0,0.5,1", help="comma-separated b values for the weights")
    p.set_defaults(func=cmd_spectrum)

    p = common(sub.add_parser("table", help="optimal expected gain for a list of N"))
    p.add_argument("--n", default="1,2,3,4,5,10,20,40,60,80")
    p.add_argument("--prior", default="quadratic")
    p.add_argument("--nodes", type=int, default=200)
    p.add_argument("--nats", action="store_true", help="report nats instead of bits")
    p.set_defaults(func=cmd_table)

    p = common(sub.add_parser("fit", help="least-squares slope of gain against log2 N"))
    p.add_argument("--input", help="CSV produced by the table command")
    p.add_argument("--n", default="40,50,60,70,80", help="N values to compute when no --input")
    p.add_argument("--prior", default="quadratic")
    p.add_argument("--min-n", type=float, default=40)
    p.set_defaults(func=cmd_fit)

    p = common(sub.add_parser("oracle", help="check closed forms against group integration"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--b", default="0,0.3,0.7,1")
    p.add_argument("--method", choices=METHODS, default="euler-quadrature")
    p.add_argument("--budget", type=int, default=None,
                   help="polar nodes (quadrature) or samples (monte-carlo)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-8)
    p.add_argument("--workers", type=int, default=1, help="threads for Monte Carlo batches")
    p.set_defaults(func=cmd_oracle)

    p = common(sub.add_parser("local", help="optimal mixing estimation on one qubit side"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--prior", default="quadratic")
    p.add_argument("--nodes", type=int, default=200)
    p.set_defaults(func=cmd_local)

    p = common(sub.add_parser("simulate", help="sample outcomes of the optimal measurement"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--prior", default="quadratic")
    p.add_argument("--b-true", type=float, default=None, help="fix b instead of drawing it")
    p.add_argument("--trace", help="also write the per-trial trace CSV here")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "nodes", 2) < 2:
        print("error: --nodes must be >= 2", file=sys.stderr)
        return EXIT_INVALID
    try:
        code, text = args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    _emit(text, args.output)
    return code


if __name__ == "__main__":
    sys.exit(main())
