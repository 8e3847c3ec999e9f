"""Command-line interface.

Exit codes: 0 Identifiable, 1 NotIdentifiable, 2 Indeterminate for verdicts;
64 for unparsable input or invalid parameters.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import norms
from .exceptions import ConvergenceError, InvalidParameterError, RankDeficientError, SizeCapError
from .experiment import (
    agreement,
    boundary_csv,
    boundary_table,
    fmt,
    load_config,
    read_gram_file,
    run_phase_diagram,
    write_phase_csv,
)
from .finite_sample import finite_sample_report, required_samples
from .identifiability import (
    Method,
    Status,
    directional_derivative,
    population_verdict,
    tangent_direction,
    violating_direction,
)
from .models import SG, parse_model

EXIT_USAGE = 64
EXIT_CODES = {Status.IDENTIFIABLE: 0, Status.NOT_IDENTIFIABLE: 1, Status.INDETERMINATE: 2}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(text, out):
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise UsageError(f"cannot write {out}: {exc.strerror}") from exc
    else:
        sys.stdout.write(text)


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"{args.command} requires {', '.join(missing)}")


def cmd_verdict(args) -> int:
    _require(args, "gram", "model")
    lines = []
    v = population_verdict(read_gram_file(args.gram), parse_model(args.model), Method(args.method))
    lines.append(f"status: {v.status.value}")
    lines.append(f"condition: {v.condition.value}")
    lines.append(f"lhs: {fmt(v.lhs)}")
    lines.append(f"rhs: {fmt(v.rhs)}")
    lines.append(f"margin: {fmt(v.margin)}")
    lines.append(f"lhs_interval: [{fmt(v.lhs_bounds[0])}, {fmt(v.lhs_bounds[1])}]")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_CODES[v.status]


def _norm_param(model):
    return norms.Subset(model.s) if isinstance(model, SG) else norms.Bernoulli(model.p)


def cmd_bounds(args) -> int:
    _require(args, "model")
    lines = []
    if args.z is not None:
        try:
            z = np.array([float(v) for v in args.z.replace(",", " ").split()])
        except ValueError as exc:
            raise UsageError(f"cannot parse --z: {exc}") from exc
    elif args.vector is not None:
        try:
            z = np.loadtxt(args.vector, ndmin=1).ravel()
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read vector file {args.vector}: {exc}") from exc
    elif args.gram is not None and args.column is not None:
        g = read_gram_file(args.gram)
        if not 0 <= args.column < g.K:
            raise UsageError(f"--column must lie in [0, {g.K - 1}]")
        z = g.column_without_diagonal(args.column)
    else:
        raise UsageError("bounds needs --z, --vector, or --gram with --column")
    if z.size == 0:
        raise UsageError("empty vector")
    param = _norm_param(parse_model(args.model))
    lo, hi = norms.dual_norm_bounds(z, param)
    lines.append(f"lower: {fmt(lo)}")
    try:
        cert = norms.dual_norm_exact(z, param)
        lines.append(f"exact: {fmt(cert.value)}")
        lines.append(f"gap: {fmt(cert.gap)}")
    except SizeCapError as exc:
        lines.append(f"exact: unavailable ({exc})")
    lines.append(f"upper: {fmt(hi)}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_boundary(args) -> int:
    _require(args, "K", "model_kind", "sparsity")
    gram = read_gram_file(args.gram) if args.family == "gram_file" else None
    if args.family == "gram_file" and gram is None:
        raise UsageError("gram_file family needs --gram")
    try:
        values = [float(v) for v in args.sparsity.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse --sparsity: {exc}") from exc
    rows = boundary_table(args.K, args.family, args.model_kind, values, gram)
    _emit(boundary_csv(rows), args.out)
    return 0


def cmd_phase_diagram(args) -> int:
    _require(args, "config", "out")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out = Path(args.out)
    if not out.parent.exists():
        raise UsageError(f"output directory {out.parent} does not exist")
    cells = run_phase_diagram(cfg, workers=args.workers)
    write_phase_csv(cells, cfg.margin_band, out)
    frac, n = agreement(cells, cfg.margin_band)
    print(f"cells: {len(cells)}; agreement {fmt(frac)} over {n} cells with |margin| > {fmt(cfg.margin_band)}")
    return 0


def cmd_samplesize(args) -> int:
    _require(args, "gram", "model", "eps", "target")
    lines = []
    g = read_gram_file(args.gram)
    model = parse_model(args.model)
    n = required_samples(g, model, args.eps, args.target, Method(args.method))
    r = finite_sample_report(g, model, args.eps, n, Method(args.method))
    lines.append(f"side: {r.side.value}")
    lines.append(f"N: {n}")
    lines.append(f"prob_lower_bound: {fmt(r.prob_lower_bound)}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_derivcheck(args) -> int:
    """Sample random tangent directions and compare one-sided derivative signs
    with the exact verdict; exit 0 when consistent, 3 when a sign contradicts it."""
    _require(args, "gram", "model")
    lines = []
    g = read_gram_file(args.gram)
    model = parse_model(args.model)
    v = population_verdict(g, model, Method.EXACT)
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    plus, minus = math.inf, -math.inf
    for _ in range(args.directions):
        a = tangent_direction(g, rng.standard_normal((g.K, g.K)))
        plus = min(plus, directional_derivative(g, model, a, "+"))
        minus = max(minus, directional_derivative(g, model, a, "-"))
    lines.append(f"status: {v.status.value}")
    lines.append(f"margin: {fmt(v.margin)}")
    lines.append(f"directions: {args.directions}")
    lines.append(f"min_right_derivative: {fmt(plus)}")
    lines.append(f"max_left_derivative: {fmt(minus)}")
    consistent = True
    if v.status is Status.IDENTIFIABLE:
        consistent = plus > 0 and minus < 0
    elif v.status is Status.NOT_IDENTIFIABLE:
        d = directional_derivative(g, model, violating_direction(g, model), "+")
        lines.append(f"violating_direction_right_derivative: {fmt(d)}")
        consistent = d < 0
    lines.append(f"consistent: {str(consistent).lower()}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0 if consistent else 3


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="l1ident", description="Local identifiability of complete dictionaries under l1 minimization.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, gram=True, model=True, method=False):
        if gram:
            sp.add_argument("--gram", help="Gram file: K on the first line, then K rows of K reals")
        if model:
            sp.add_argument("--model", help="sg:<s> or bg:<p>")
        if method:
            sp.add_argument("--method", choices=["exact", "bounds"], default="exact")
        sp.add_argument("--out", help="write output here instead of stdout")
        sp.add_argument("--seed", type=int)

    s = sub.add_parser("verdict", help="population identifiability verdict")
    common(s, method=True)
    s.set_defaults(func=cmd_verdict)

    s = sub.add_parser("bounds", help="sandwich bounds and certified dual norm of a vector")
    common(s)
    s.add_argument("--z", help="vector as comma or space separated values")
    s.add_argument("--vector", help="file of whitespace separated values")
    s.add_argument("--column", type=int, help="use M0[-j, j] of --gram (0-based j)")
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("boundary", help="critical collinearity per sparsity value (CSV)")
    common(s, model=False)
    s.add_argument("--K", type=int)
    s.add_argument("--family", choices=["constant_mu", "minimal_mu", "gram_file"], default="constant_mu")
    s.add_argument("--model-kind", dest="model_kind", type=str.upper, choices=["SG", "BG"])
    s.add_argument("--sparsity", help="comma separated s or p values")
    s.set_defaults(func=cmd_boundary)

    s = sub.add_parser("phase-diagram", help="Monte Carlo phase diagram (CSV)")
    common(s, gram=False, model=False)
    s.add_argument("--config", help="INI config with a [grid] section")
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_phase_diagram)

    s = sub.add_parser("samplesize", help="signals needed for a target guarantee")
    common(s, method=True)
    s.add_argument("--eps", type=float)
    s.add_argument("--target", type=float)
    s.set_defaults(func=cmd_samplesize)

    s = sub.add_parser("derivcheck", help="directional-derivative consistency check")
    common(s)
    s.add_argument("--directions", type=int, default=1000)
    s.set_defaults(func=cmd_derivcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InvalidParameterError, RankDeficientError, SizeCapError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 70


if __name__ == "__main__":
    raise SystemExit(main())
