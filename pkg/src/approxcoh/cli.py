"""Command-line entry point: ``approxcoh <subcommand> ...``.

Every command prints one JSON document (or writes CSV for experiments)
carrying the tool version and the full configuration.  Exit codes: 0 ok,
1 precondition violation, 2 budget exceeded, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cohomology import (
    Cochain,
    FiltrationTag,
    LinearMap,
    coboundary,
    defect,
    is_approx_cocycle,
)
from .corrector import (
    MatrixCochain,
    cyclic_rank1_correct,
    greedy_correct,
    minimax_correct,
    minimax_growth_experiment,
    rows_to_csv,
    synthesize,
    verify_distance,
)
from .errors import BudgetExceeded, EmptyLevelError, PreconditionError
from .ffpoly import parse_poly
from .gowers import PhaseFunction, delta_degree, gowers_norm
from .limits import InverseSystem, koenig_select, lift_correction
from .rank import rank

EXIT_OK, EXIT_PRECONDITION, EXIT_BUDGET, EXIT_USAGE = 0, 1, 2, 64
DEFAULT_BUDGET = 10**8


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise PreconditionError(f"cannot read {path}: {exc.strerror}") from exc


def _read_json(path):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise PreconditionError(f"{path} is not valid JSON: {exc.msg}") from exc


def _workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    return max(1, int(os.environ.get("APPROXCOH_WORKERS", "1") or 1))


def _config(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(args, result, out=None) -> None:
    doc = {"tool": "approxcoh", "version": __version__, "command": args.command,
           "config": _config(args), "result": result}
    text = json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n"
    target = out if out is not None else args.out
    if target:
        Path(target).write_text(text)
    else:
        sys.stdout.write(text)


# --- subcommands -------------------------------------------------------------


def cmd_rank(args):
    P = parse_poly(_read_text(args.input))
    res = rank(P, method=args.method, ext_degree=args.ext_degree, max_r=args.max_r,
               budget=args.budget)
    out = res.to_dict()
    if res.certificate is not None:
        out["certificate_verified"] = res.certificate.verify(P)
    _emit(args, out)


def _load_phase(args) -> PhaseFunction:
    path = Path(args.input)
    if path.suffix == ".npy":
        if args.p is None:
            raise PreconditionError("--p is required for .npy tables")
        table = np.load(path)
        if table.ndim == 2:
            return _rows_phase(table.tolist(), args.p, args.k)
        return _table_phase(table.ravel(), args.p, args.k)
    if path.suffix == ".csv":
        p, k = args.p, args.k
        rows = []
        for line in _read_text(path).splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].replace(",", " ").split():
                    key, _, val = tok.partition("=")
                    if key == "p" and p is None:
                        p = int(val)
                    elif key == "k" and args.k == 1:
                        k = int(val)
                continue
            try:
                rows.append([int(v) for v in line.replace(",", " ").split()])
            except ValueError as exc:
                raise PreconditionError(f"bad CSV row {line!r}") from exc
        if p is None:
            raise PreconditionError("CSV tables need a '# p=<p> k=<k>' header or --p")
        if rows and all(len(r) == 1 for r in rows):
            return _table_phase([r[0] for r in rows], p, k)
        return _rows_phase(rows, p, k)
    return PhaseFunction.from_poly(parse_poly(_read_text(path)))


def _rows_phase(rows, p, k):
    """Rows ``x_1, ..., x_n, value``; every point of F_p^n exactly once, any order."""
    if p is None:
        raise PreconditionError("--p is required for value tables")
    widths = {len(r) for r in rows}
    if len(widths) != 1 or widths == {0}:
        raise PreconditionError("value-table rows must all have n coordinates and one value")
    n = widths.pop() - 1
    values = [None] * p**n
    for r in rows:
        x = r[:-1]
        if any(not 0 <= c < p for c in x):
            raise PreconditionError(f"coordinate out of range in row {r}")
        i = 0
        for c in x:
            i = i * p + c
        if values[i] is not None:
            raise PreconditionError(f"point {tuple(x)} listed twice")
        values[i] = r[-1]
    if any(v is None for v in values):
        raise PreconditionError(f"value table must list all {p ** n} points")
    return PhaseFunction.from_table(p, n, np.asarray(values, dtype=np.int64), k)


def _table_phase(values, p, k):
    values = np.asarray(values, dtype=np.int64)
    n, size = 0, 1
    while size < len(values):
        size *= p
        n += 1
    if size != len(values):
        raise PreconditionError(f"table length {len(values)} is not a power of p = {p}")
    return PhaseFunction.from_table(p, n, values, k)


def cmd_gowers(args):
    f = _load_phase(args)
    res = gowers_norm(f, args.m, algorithm=args.algorithm, budget=args.budget)
    _emit(args, res.to_dict())


def cmd_delta_degree(args):
    f = _load_phase(args)
    deg = delta_degree(f, args.max_d, budget=args.budget)
    _emit(args, {"p": f.p, "k": f.k, "nvars": f.nvars,
                 "delta_degree": deg if deg is not None else f"> {args.max_d}"})


def _load_cochain(path) -> Cochain:
    return Cochain.from_json(_read_json(path))


def _filtration(args, A):
    d = args.d if args.d is not None else max(A.max_degree(), 2)
    return FiltrationTag(args.filtration, d)


def cmd_defect(args):
    A = _load_cochain(args.cochain)
    rep = defect(A, _filtration(args, A))
    _emit(args, rep.to_dict())


def cmd_cocycle_check(args):
    A = _load_cochain(args.cochain)
    filt = _filtration(args, A)
    rep = defect(A, filt)
    status = is_approx_cocycle(A, args.i, filt)
    _emit(args, {"approx_cocycle": "indeterminate" if status is None else status,
                 "level": args.i, "defect": rep.to_dict()})


def cmd_coboundary(args):
    c = _load_cochain(args.cochain)
    if args.n is not None and c.degree != args.n:
        raise PreconditionError(f"--n {args.n} does not match the cochain degree {c.degree}")
    dc = coboundary(c)
    ddc = coboundary(dc)
    out = dc.to_json()
    out["dd_zero"] = all(P.is_zero() for P in ddc.values)
    _emit(args, out)


def cmd_correct(args):
    data = _read_json(args.cochain)
    if args.method == "cyclic":
        res = cyclic_rank1_correct(MatrixCochain.from_json(data))
        _emit(args, res.to_dict())
        return
    A = Cochain.from_json(data)
    d = args.d
    if args.method == "exhaustive":
        res = minimax_correct(A, d=d, budget=args.budget)
    else:
        res = greedy_correct(A, d=d, seed=args.seed, iterations=args.iterations)
    lo, hi = verify_distance(A, res.chi, d)
    out = res.to_dict()
    out["verified_distance"] = {"lower": lo, "upper": hi}
    _emit(args, out)


def cmd_synthesize(args):
    chi = LinearMap.from_json(_read_json(args.chi))
    syn = synthesize(chi, args.noise_rank, args.noise_model, args.seed, args.d)
    _emit(args, syn.to_dict())


def cmd_koenig(args):
    system = InverseSystem.from_json(_read_json(args.system))
    seq = koenig_select(system)
    out = seq.to_dict()
    out["verified"] = seq.verify(system)
    _emit(args, out)


def cmd_lift(args):
    P = _load_cochain(args.input)
    res = lift_correction(P, args.C, depth=args.depth, d=args.d)
    _emit(args, res.to_dict())


def _int_range(text: str) -> list[int]:
    text = text.strip()
    try:
        if ":" in text or "-" in text[1:]:
            sep = ":" if ":" in text else "-"
            lo, hi = text.split(sep, 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(t) for t in text.split(",") if t]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad range {text!r}; use 1-3, 1:3 or 1,2,3") from exc


def cmd_experiment(args):
    rows = minimax_growth_experiment(args.p, args.d, args.n_range, args.s_range, r=args.r,
                                     samples=args.samples, budget=args.budget, seed=args.seed)
    header = (f"# approxcoh {__version__} experiment minimax-growth "
              + " ".join(f"{k}={v}" for k, v in _config(args).items() if k != "out") + "\n")
    text = header + rows_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# --- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                        help="cap on enumerated items (default 1e8)")
    common.add_argument("--workers", type=int, default=None,
                        help="worker count (default $APPROXCOH_WORKERS or 1)")
    common.add_argument("--seed", type=int, default=0, help="64-bit seed for randomized steps")

    parser = _Parser(prog="approxcoh", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"approxcoh {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="<subcommand>")
    sub.required = True

    p = sub.add_parser("rank", parents=[common], help="certified rank of a homogeneous polynomial")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=("auto", "quad", "subspace"), default="auto")
    p.add_argument("--ext-degree", type=int, default=2)
    p.add_argument("--max-r", type=int, default=None)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("gowers", parents=[common], help="exact Gowers U^m norm")
    p.add_argument("--input", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--algorithm", choices=("naive", "derivative"), default="naive")
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--k", type=int, default=1)
    p.set_defaults(func=cmd_gowers)

    p = sub.add_parser("delta-degree", parents=[common], help="degree by iterated differences")
    p.add_argument("--table", "--input", dest="input", required=True,
                   help=".poly, .csv (rows: coordinates, value) or .npy value table")
    p.add_argument("--max-d", type=int, default=8)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--k", type=int, default=1)
    p.set_defaults(func=cmd_delta_degree)

    for name, func, helptext in (("defect", cmd_defect, "rank defect of a 1-cochain"),
                                 ("cocycle-check", cmd_cocycle_check, "approximate cocycle test")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--cochain", required=True)
        p.add_argument("--filtration", choices=("Ad", "Bd"), default="Ad")
        p.add_argument("--d", type=int, default=None)
        if name == "cocycle-check":
            p.add_argument("--i", type=int, required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("coboundary", parents=[common], help="coboundary of a cochain")
    p.add_argument("--cochain", required=True)
    p.add_argument("--n", type=int, default=None, help="expected degree of the input cochain")
    p.set_defaults(func=cmd_coboundary)

    p = sub.add_parser("correct", parents=[common], help="search a correcting homomorphism")
    p.add_argument("--cochain", required=True)
    p.add_argument("--method", choices=("exhaustive", "greedy", "cyclic"), default="exhaustive")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--iterations", type=int, default=50)
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("synthesize", parents=[common], help="chi plus low-rank noise")
    p.add_argument("--chi", required=True)
    p.add_argument("--noise-rank", type=int, required=True)
    p.add_argument("--noise-model", choices=("constant", "iid"), default="iid")
    p.add_argument("--d", type=int, default=None)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("koenig", parents=[common], help="compatible thread of an inverse system")
    p.add_argument("--system", required=True)
    p.set_defaults(func=cmd_koenig)

    p = sub.add_parser("lift", parents=[common], help="lift level-wise corrections")
    p.add_argument("--input", required=True, help="cochain JSON on V_N")
    p.add_argument("--C", type=int, required=True)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("experiment", help="experiments")
    exp = p.add_subparsers(dest="experiment", parser_class=_Parser, metavar="<experiment>")
    exp.required = True
    e = exp.add_parser("minimax-growth", parents=[common], help="worst-case minimax distance table")
    e.add_argument("--p", type=int, required=True)
    e.add_argument("--d", type=int, required=True)
    e.add_argument("--n-range", type=_int_range, required=True)
    e.add_argument("--s-range", type=_int_range, required=True)
    e.add_argument("--r", type=int, default=1, help="defect bound")
    e.add_argument("--samples", type=int, default=200)
    e.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "workers", None) is not None:
        os.environ["APPROXCOH_WORKERS"] = str(_workers(args))
    try:
        args.func(args)
    except BudgetExceeded as exc:
        print(json.dumps({"error": "budget exceeded", "what": exc.what,
                          "required": exc.required, "budget": exc.budget}), file=sys.stderr)
        return EXIT_BUDGET
    except (PreconditionError, EmptyLevelError) as exc:
        print(json.dumps({"error": "precondition violated", "message": str(exc)}), file=sys.stderr)
        return EXIT_PRECONDITION
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
