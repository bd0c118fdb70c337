"""Command-line front-end.

Five commands over one problem-file format: count (weighted model counts at
one or more domain sizes), table (cardinality-indexed counts as CSV), mln
(partition functions and marginals), check (lifted pipeline against the
brute-force oracle), explain (the compiled form and its rewrite trace).

Exit codes: 0 success, 1 for input or validation problems (including a
failed check), 2 when an engine or oracle limit was hit.  Output goes to
stdout or, with -o, through a same-directory temp file and os.replace, so
a crash never leaves a partial file behind.  Identical input and options
give byte-identical output whatever --workers is; the json-lines format is
the one exception, since it carries wall-clock provenance.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from decimal import Decimal, localcontext
from typing import Callable, Sequence

from .engine import CellGraph, EngineLimit
from .logic import Top
from .mln import MlnError, exp_multiplier, marginal, partition_function
from .oracle import DEFAULT_ATOM_CAP, OracleCapExceeded, brute_wfomc, brute_wmc_table
from .parser import (
    MlnDecl,
    ParseError,
    ProblemFile,
    parse_formula_text,
    parse_problem,
    print_formula,
)
from .rationals import ONE, Rat, rat
from .transform import (
    CompiledProblem,
    MultiplierUndefined,
    clause_to_formula,
    compile_file,
    compile_problem,
    evaluate_multiplier,
    format_factor,
)
from .wmc import (
    InterpolationCheckFailed,
    LiftedCounter,
    TableError,
    WmcTable,
    _specialized,
    condition_holds,
    dft_wmc_table,
)

EXIT_OK = 0
EXIT_USER = 1
EXIT_LIMIT = 2

BACKENDS = ("interpolation", "multivariate", "dft")
FORMATS = ("plain", "csv", "json-lines")


class UsageError(Exception):
    """Bad option combination or malformed option value."""


@dataclass
class RunConfig:
    command: str
    path: str
    sizes: list[int] | None = None  # None: fall back to the file's domain line
    backend: str = "interpolation"
    workers: int = 1
    fmt: str = "plain"
    explain: bool = False
    oracle_check: bool = False
    atom_cap: int = DEFAULT_ATOM_CAP
    tolerance: float = 1e-6
    scale: tuple[int, bool, int, bool] | None = None
    decimal: int | None = None
    query: str | None = None
    exp_weights: bool = False
    max_denominator: int = 10**12
    output: str | None = None
    corrupt_multiplier: Rat | None = None
    atomic_fastpath: bool = True
    merge_guards: bool = True


# -- option parsing ------------------------------------------------------------


def parse_sizes(text: str) -> list[int]:
    m = re.fullmatch(r"(\d+)(?:\.\.(\d+))?", text.strip())
    if not m:
        raise UsageError(f"bad size {text!r}: expected N or LO..HI")
    lo = int(m.group(1))
    hi = int(m.group(2)) if m.group(2) else lo
    if lo < 1 or hi < lo:
        raise UsageError(f"bad size range {text!r}")
    return list(range(lo, hi + 1))


_SCALE_RE = re.compile(r"\s*(\d+)(\^n)?\s*(?:/\s*(\d+)(\^n)?\s*)?$")


def parse_scale(text: str) -> tuple[int, bool, int, bool]:
    """BASE['^n'] optionally over /BASE['^n'], e.g. '1/2^n'."""
    m = _SCALE_RE.fullmatch(text)
    if not m:
        raise UsageError(f"bad scale {text!r}: expected INT[^n][/INT[^n]]")
    num, den = int(m.group(1)), int(m.group(3)) if m.group(3) else 1
    if den == 0:
        raise UsageError("scale denominator is zero")
    return num, bool(m.group(2)), den, bool(m.group(4))


def scale_value(spec: tuple[int, bool, int, bool], n: int) -> Rat:
    num, num_pow, den, den_pow = spec
    top = rat(num) ** n if num_pow else rat(num)
    bot = rat(den) ** n if den_pow else rat(den)
    return top / bot


def parse_rational(text: str) -> Rat:
    m = re.fullmatch(r"\s*(-?\d+)\s*(?:/\s*(\d+)\s*)?", text)
    if not m or (m.group(2) and int(m.group(2)) == 0):
        raise UsageError(f"bad rational {text!r}")
    return rat(int(m.group(1))) / rat(int(m.group(2) or 1))


# -- value rendering -----------------------------------------------------------


def fmt_rat(q: Rat) -> str:
    q = rat(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def fmt_decimal(q: Rat, digits: int) -> str:
    q = rat(q)
    with localcontext() as ctx:
        ctx.prec = len(str(abs(q.numerator))) + digits + 10
        d = Decimal(int(q.numerator)) / Decimal(int(q.denominator))
        return str(d.quantize(Decimal(1).scaleb(-digits)))


def fmt_value(v, decimal: int | None) -> str:
    if isinstance(v, float):
        return f"{v:.{decimal}f}" if decimal is not None else repr(v)
    return fmt_decimal(v, decimal) if decimal is not None else fmt_rat(v)


# -- shared plumbing -----------------------------------------------------------


def load_problem(path: str) -> ProblemFile:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_problem(fh.read())
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from e


def resolve_sizes(cfg: RunConfig, problem: ProblemFile) -> list[int]:
    if cfg.sizes is not None:
        return cfg.sizes
    if problem.domain_size is not None:
        return [problem.domain_size]
    raise UsageError("no domain size: pass --n or add a domain line to the file")


def compile_from(cfg: RunConfig, problem: ProblemFile) -> CompiledProblem:
    return compile_file(
        problem, atomic_fastpath=cfg.atomic_fastpath, merge_guards=cfg.merge_guards
    )


def reject_mln(problem: ProblemFile, command: str) -> None:
    if problem.has_mln():
        raise UsageError(f"file declares mln formulas; {command} would ignore them (use the mln command)")


def effective(cp: CompiledProblem, n: int) -> CompiledProblem:
    return _specialized(cp, n) if cp.needs_specialization(n) else cp


def probe_count(cp: CompiledProblem, marked: Sequence[str], n: int, backend: str) -> int:
    """Engine evaluations one table costs: grid nodes plus the held-out one."""
    if not marked:
        return 1
    radix = 1
    for name in marked:
        if cp.vocab.arity(name) == 2:
            radix *= n * n + 1
    return radix if backend == "dft" else radix + 1


def emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(target), prefix=".wfomc2-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def json_line(pairs: dict) -> str:
    return json.dumps(pairs, separators=(", ", ": "))


# -- dft evaluation ------------------------------------------------------------
# The transform backend is float-valued, so it bypasses LiftedCounter and
# mirrors its specialization and multiplier handling here.


def dft_count(cp: CompiledProblem, n: int, tol: float) -> float:
    cp = effective(cp, n)
    mult = float(evaluate_multiplier(cp.factors, n))
    if isinstance(cp.card_condition, Top):
        graph = CellGraph(cp.cnf, cp.vocab, cp.weights, marked=())
        return float(graph.evaluate(n)) * mult
    entries, _ = dft_wmc_table(cp.cnf, cp.vocab, cp.weights, cp.psi, n, tol=tol)
    total = 0.0
    for key, value in entries.items():
        if condition_holds(cp.card_condition, dict(zip(cp.psi, key)), n):
            total += value
    return total * mult


def dft_table(
    cp: CompiledProblem, user_psi: Sequence[str], n: int, tol: float
) -> tuple[tuple[int, ...], dict[tuple[int, ...], float]]:
    cp = effective(cp, n)
    mult = float(evaluate_multiplier(cp.factors, n))
    marked = tuple(dict.fromkeys(tuple(user_psi) + cp.psi))
    entries, _ = dft_wmc_table(cp.cnf, cp.vocab, cp.weights, marked, n, tol=tol)
    kept: dict[tuple[int, ...], float] = {}
    for key, value in entries.items():
        counts = dict(zip(marked, key))
        if condition_holds(cp.card_condition, counts, n):
            sub = tuple(counts[name] for name in user_psi)
            kept[sub] = kept.get(sub, 0.0) + value * mult
    bounds = tuple(n ** cp.vocab.arity(name) for name in user_psi)
    return bounds, kept


# -- count ---------------------------------------------------------------------


def _count_job(payload: tuple[CompiledProblem, int, str, float]):
    cp, n, backend, tol = payload
    if backend == "dft":
        return dft_count(cp, n, tol)
    return LiftedCounter(cp, backend=backend).count_detailed(n).value


def compute_counts(cfg: RunConfig, cp: CompiledProblem, sizes: list[int]) -> tuple[list, list[float]]:
    """Raw per-size values and wall times; order follows sizes."""
    if cfg.workers > 1 and len(sizes) > 1:
        jobs = [(cp, n, cfg.backend, cfg.tolerance) for n in sizes]
        start = time.perf_counter()
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            values = list(pool.map(_count_job, jobs))
        elapsed = (time.perf_counter() - start) / len(sizes)
        return values, [elapsed * 1000.0] * len(sizes)
    counter = LiftedCounter(cp, backend=cfg.backend)
    values, walls = [], []
    for n in sizes:
        start = time.perf_counter()
        if cfg.backend == "dft":
            values.append(dft_count(cp, n, cfg.tolerance))
        else:
            values.append(counter.count_detailed(n).value)
        walls.append((time.perf_counter() - start) * 1000.0)
    return values, walls


def run_oracle_check(cfg: RunConfig, problem: ProblemFile, sizes: list[int], values: list) -> None:
    for n, got in zip(sizes, values):
        want = brute_wfomc(
            problem.sentence(), problem.vocab, problem.weights, n, atom_cap=cfg.atom_cap
        )
        if isinstance(got, float):
            ref = float(want)
            ok = abs(got - ref) <= cfg.tolerance * max(1.0, abs(ref))
        else:
            ok = got == want
        if not ok:
            raise UsageError(f"oracle mismatch at n={n}: computed {got}, brute force {fmt_rat(want)}")


def cmd_count(cfg: RunConfig, problem: ProblemFile, sizes: list[int]) -> tuple[str, int]:
    reject_mln(problem, "count")
    cp = compile_from(cfg, problem)
    values, walls = compute_counts(cfg, cp, sizes)
    if cfg.oracle_check:
        run_oracle_check(cfg, problem, sizes, values)
    if cfg.explain:
        print(render_explain(cfg, cp, []), file=sys.stderr)
    scaled = []
    for n, v in zip(sizes, values):
        s = scale_value(cfg.scale, n) if cfg.scale else ONE
        if cfg.corrupt_multiplier is not None:
            s = s * cfg.corrupt_multiplier
        scaled.append(v * float(s) if isinstance(v, float) else v * s)
    if cfg.fmt == "plain":
        text = " ".join(fmt_value(v, cfg.decimal) for v in scaled) + "\n"
    elif cfg.fmt == "csv":
        lines = ["n,value"] if cfg.backend == "dft" or cfg.decimal is not None else ["n,value_num,value_den"]
        for n, v in zip(sizes, scaled):
            if cfg.backend == "dft" or cfg.decimal is not None:
                lines.append(f"{n},{fmt_value(v, cfg.decimal)}")
            else:
                q = rat(v)
                lines.append(f"{n},{q.numerator},{q.denominator}")
        text = "\n".join(lines) + "\n"
    else:
        lines = []
        for n, v, wall in zip(sizes, scaled, walls):
            eff = effective(cp, n)
            marked = eff.psi if not isinstance(eff.card_condition, Top) else ()
            row = {
                "command": "count",
                "n": n,
                "value": fmt_value(v, cfg.decimal),
                "backend": cfg.backend,
                "nodes": probe_count(eff, marked, n, cfg.backend),
                "factors": [format_factor(f) for f in eff.factors],
            }
            if cfg.scale:
                row["scale"] = fmt_rat(scale_value(cfg.scale, n))
            if cfg.corrupt_multiplier is not None:
                row["corrupt_multiplier"] = fmt_rat(cfg.corrupt_multiplier)
            row["wall_ms"] = round(wall, 3)
            lines.append(json_line(row))
        text = "\n".join(lines) + "\n"
    return text, EXIT_OK


# -- table ---------------------------------------------------------------------


def cmd_table(cfg: RunConfig, problem: ProblemFile, sizes: list[int]) -> tuple[str, int]:
    reject_mln(problem, "table")
    if not problem.psi:
        raise UsageError("table needs a psi section naming the tracked predicates")
    if len(sizes) != 1:
        raise UsageError("table runs at a single size; pass --n N")
    n = sizes[0]
    cp = compile_from(cfg, problem)
    psi = tuple(problem.psi)
    start = time.perf_counter()
    if cfg.backend == "dft":
        bounds, float_entries = dft_table(cp, psi, n, cfg.tolerance)
        entries: dict[tuple[int, ...], object] = dict(float_entries)
    else:
        table = LiftedCounter(cp, backend=cfg.backend).table(psi, n)
        bounds, entries = table.bounds, dict(table.entries)
    wall = (time.perf_counter() - start) * 1000.0
    if cfg.corrupt_multiplier is not None:
        c = cfg.corrupt_multiplier
        entries = {k: v * float(c) if isinstance(v, float) else v * c for k, v in entries.items()}
    if cfg.explain:
        print(render_explain(cfg, cp, []), file=sys.stderr)
    if cfg.fmt in ("plain", "csv"):
        if cfg.backend == "dft":
            lines = [",".join(f"n_{p}" for p in psi) + ",value"]
            for key in sorted(float_entries):
                lines.append(",".join(str(k) for k in key) + f",{fmt_value(entries[key], cfg.decimal)}")
            text = "\n".join(lines) + "\n"
        else:
            text = WmcTable(psi, bounds, entries).to_csv()
        return text, EXIT_OK
    eff = effective(cp, n)
    marked = tuple(dict.fromkeys(psi + eff.psi))
    meta = {
        "command": "table",
        "n": n,
        "preds": list(psi),
        "bounds": list(bounds),
        "backend": cfg.backend,
        "nodes": probe_count(eff, marked, n, cfg.backend),
        "factors": [format_factor(f) for f in eff.factors],
        "wall_ms": round(wall, 3),
    }
    lines = [json_line(meta)]
    for key in sorted(entries):
        lines.append(json_line({"counts": list(key), "value": fmt_value(entries[key], cfg.decimal)}))
    return "\n".join(lines) + "\n", EXIT_OK


# -- mln -----------------------------------------------------------------------


def apply_exp_weights(problem: ProblemFile, max_den: int) -> tuple[ProblemFile, list[tuple[Rat, Rat]]]:
    """Reread each soft multiplier m as the exponent in e^m."""
    decls, recorded = [], []
    for d in problem.mln:
        if d.multiplier is None:
            decls.append(d)
            continue
        m = exp_multiplier(float(d.multiplier), max_den)
        recorded.append((d.multiplier, m))
        decls.append(MlnDecl(m, d.formula))
    return replace(problem, mln=decls), recorded


def cmd_mln(cfg: RunConfig, problem: ProblemFile, sizes: list[int]) -> tuple[str, int]:
    if cfg.backend == "dft":
        raise UsageError("mln needs an exact backend (marginals are ratios)")
    approx: list[tuple[Rat, Rat]] = []
    if cfg.exp_weights:
        problem, approx = apply_exp_weights(problem, cfg.max_denominator)
    query = None
    if cfg.query is not None:
        query = parse_formula_text(cfg.query, problem.vocab)
    values, walls = [], []
    for n in sizes:
        start = time.perf_counter()
        if query is not None:
            values.append(marginal(problem, query, n, backend=cfg.backend, atom_cap=cfg.atom_cap))
        else:
            values.append(partition_function(problem, n, backend=cfg.backend))
        walls.append((time.perf_counter() - start) * 1000.0)
    kind = "marginal" if query is not None else "partition"
    approx_strs = [f"exp-weight {fmt_rat(w)} -> {fmt_rat(m)}" for w, m in approx]
    if cfg.fmt == "plain":
        lines = list(approx_strs)
        lines.append(" ".join(fmt_value(v, cfg.decimal) for v in values))
        return "\n".join(lines) + "\n", EXIT_OK
    if cfg.fmt == "csv":
        lines = [f"# {s}" for s in approx_strs]
        if cfg.decimal is not None:
            lines.append("n,value")
            lines.extend(f"{n},{fmt_value(v, cfg.decimal)}" for n, v in zip(sizes, values))
        else:
            lines.append("n,value_num,value_den")
            for n, v in zip(sizes, values):
                q = rat(v)
                lines.append(f"{n},{q.numerator},{q.denominator}")
        return "\n".join(lines) + "\n", EXIT_OK
    lines = []
    for n, v, wall in zip(sizes, values, walls):
        row = {
            "command": "mln",
            "kind": kind,
            "n": n,
            "value": fmt_value(v, cfg.decimal),
            "backend": cfg.backend,
        }
        if cfg.exp_weights:
            row["exp_multipliers"] = [fmt_rat(m) for _, m in approx]
        row["wall_ms"] = round(wall, 3)
        lines.append(json_line(row))
    return "\n".join(lines) + "\n", EXIT_OK


# -- check ---------------------------------------------------------------------


def cmd_check(cfg: RunConfig, problem: ProblemFile, sizes: list[int]) -> tuple[str, int]:
    reject_mln(problem, "check")
    if cfg.backend == "dft":
        raise UsageError("check compares exact values; use interpolation or multivariate")
    cp = compile_from(cfg, problem)
    counter = LiftedCounter(cp, backend=cfg.backend)
    corrupt = cfg.corrupt_multiplier
    lines = []
    for n in sizes:
        if problem.psi:
            table = counter.table(tuple(problem.psi), n)
            lifted = dict(table.entries)
            if corrupt is not None:
                lifted = {k: v * corrupt for k, v in lifted.items()}
            brute = brute_wmc_table(
                problem.sentence(), problem.vocab, problem.weights, n,
                list(problem.psi), atom_cap=cfg.atom_cap,
            )
            for key in sorted(set(lifted) | set(brute)):
                a, b = lifted.get(key), brute.get(key)
                if a != b:
                    lines.append(
                        f"n={n}: MISMATCH at {key}: lifted "
                        f"{fmt_rat(a) if a is not None else '(absent)'}, brute force "
                        f"{fmt_rat(b) if b is not None else '(absent)'}"
                    )
                    return "\n".join(lines) + "\n", EXIT_USER
            lines.append(f"n={n}: EXACT-MATCH (table, {len(brute)} nonzero rows)")
        else:
            got = counter.count(n)
            if corrupt is not None:
                got = got * corrupt
            want = brute_wfomc(
                problem.sentence(), problem.vocab, problem.weights, n, atom_cap=cfg.atom_cap
            )
            if got != want:
                lines.append(f"n={n}: MISMATCH: lifted {fmt_rat(got)}, brute force {fmt_rat(want)}")
                return "\n".join(lines) + "\n", EXIT_USER
            lines.append(f"n={n}: EXACT-MATCH (count {fmt_rat(want)})")
    return "\n".join(lines) + "\n", EXIT_OK


# -- explain ---------------------------------------------------------------------


def render_explain(cfg: RunConfig, cp: CompiledProblem, sizes: list[int]) -> str:
    out = [f"sentence: {print_formula(cp.source_sentence)}"]
    out.append("")
    out.append("rewrite steps:")
    out.append(cp.trace.render() if cp.trace.steps else "  (none)")
    out.append("")
    out.append(f"clauses ({len(cp.cnf)}):")
    for c in cp.cnf:
        out.append(f"  {print_formula(clause_to_formula(c))}")
    cond = "(none)" if isinstance(cp.card_condition, Top) else print_formula(cp.card_condition)
    out.append("")
    out.append(f"cardinality condition: {cond}")
    out.append(f"tracked predicates: {', '.join(cp.psi) if cp.psi else '(none)'}")
    factors = ", ".join(format_factor(f) for f in cp.factors) if cp.factors else "(none)"
    out.append(f"multiplier factors: {factors}")
    generated = [p.name for p in cp.vocab.predicates if p.name.startswith("@")]
    out.append(f"generated predicates: {', '.join(generated) if generated else '(none)'}")
    weighted = [
        f"{p.name} ({fmt_rat(cp.weights.get(p.name)[0])}, {fmt_rat(cp.weights.get(p.name)[1])})"
        for p in cp.vocab.predicates
        if not cp.weights.is_default(p.name)
    ]
    out.append(f"weights: {', '.join(weighted) if weighted else '(all 1, 1)'}")
    for n in sizes:
        eff = effective(cp, n)
        marked = eff.psi if not isinstance(eff.card_condition, Top) else ()
        graph = CellGraph(eff.cnf, eff.vocab, eff.weights, marked=marked)
        note = " (recompiled: bound exceeds n)" if eff is not cp else ""
        out.append(
            f"n={n}: cells={graph.cell_count} branches={len(graph.branches)} "
            f"probes={probe_count(eff, marked, n, cfg.backend)}{note}"
        )
    return "\n".join(out)


def cmd_explain(cfg: RunConfig, problem: ProblemFile, sizes: list[int]) -> tuple[str, int]:
    if problem.has_mln():
        from .mln import encode_problem

        sentence, vocab, weights = encode_problem(problem)
        cp = compile_problem(
            sentence, vocab, weights,
            atomic_fastpath=cfg.atomic_fastpath, merge_guards=cfg.merge_guards,
        )
    else:
        cp = compile_from(cfg, problem)
    return render_explain(cfg, cp, sizes) + "\n", EXIT_OK


# -- argument wiring -----------------------------------------------------------


def build_arg_parser() -> argparse.ArgumentParser:
    root = argparse.ArgumentParser(
        prog="wfomc2",
        description="Exact weighted model counting for two-variable logic with counting quantifiers.",
    )
    sub = root.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, *, backends: bool = True, fmt: bool = True) -> None:
        p.add_argument("path", help="problem file")
        p.add_argument("--n", dest="sizes", default=None,
                       help="domain size N or range LO..HI (default: the file's domain line)")
        if backends:
            p.add_argument("--backend", choices=BACKENDS, default="interpolation")
            p.add_argument("--tolerance", type=float, default=1e-6,
                           help="imaginary-residue bound for the dft backend")
        if fmt:
            p.add_argument("--format", dest="fmt", choices=FORMATS, default="plain")
        p.add_argument("-o", "--output", default=None, help="write atomically to this file")
        p.add_argument("--no-atomic-fastpath", dest="atomic_fastpath", action="store_false",
                       help="always name counting bodies, even bare atoms")
        p.add_argument("--no-guard-merge", dest="merge_guards", action="store_false",
                       help="encode each guarded counting constraint separately")

    p = sub.add_parser("count", help="weighted model count at one or more sizes")
    common(p)
    p.add_argument("--workers", type=int, default=1, help="processes for a size range")
    p.add_argument("--scale", default=None, help="multiply each count, e.g. 1/2^n")
    p.add_argument("--decimal", type=int, default=None, metavar="DIGITS",
                   help="render values as decimals")
    p.add_argument("--oracle-check", action="store_true",
                   help="verify every count against brute-force enumeration")
    p.add_argument("--atom-cap", type=int, default=DEFAULT_ATOM_CAP,
                   help="ground-atom limit for oracle paths")
    p.add_argument("--explain", action="store_true", help="print the rewrite trace to stderr")
    p.add_argument("--corrupt-multiplier", default=None, help=argparse.SUPPRESS)

    p = sub.add_parser("table", help="cardinality-indexed counts as CSV")
    common(p)
    p.add_argument("--decimal", type=int, default=None, metavar="DIGITS")
    p.add_argument("--explain", action="store_true", help="print the rewrite trace to stderr")
    p.add_argument("--corrupt-multiplier", default=None, help=argparse.SUPPRESS)

    p = sub.add_parser("mln", help="partition function or marginal of a weighted-formula file")
    common(p)
    p.add_argument("--query", default=None, help="closed formula; prints P[query] instead of Z")
    p.add_argument("--exp-weights", action="store_true",
                   help="treat multipliers as exponents: m becomes a rational near e^m")
    p.add_argument("--max-denominator", type=int, default=10**12,
                   help="denominator bound for --exp-weights rationals")
    p.add_argument("--decimal", type=int, default=None, metavar="DIGITS")
    p.add_argument("--atom-cap", type=int, default=DEFAULT_ATOM_CAP,
                   help="ground-atom limit for ground-query marginals")

    p = sub.add_parser("check", help="compare the lifted pipeline against brute force")
    common(p, fmt=False)
    p.add_argument("--atom-cap", type=int, default=DEFAULT_ATOM_CAP)
    p.add_argument("--corrupt-multiplier", default=None, help=argparse.SUPPRESS)

    p = sub.add_parser("explain", help="show the compiled form and rewrite trace")
    common(p, backends=False, fmt=False)
    p.add_argument("--backend", choices=BACKENDS, default="interpolation",
                   help="backend assumed for the probe counts")
    return root


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=args.command, path=args.path)
    if args.sizes is not None:
        cfg.sizes = parse_sizes(args.sizes)
    for name in (
        "backend", "fmt", "workers", "tolerance", "decimal", "query", "exp_weights",
        "max_denominator", "output", "oracle_check", "atom_cap", "explain",
        "atomic_fastpath", "merge_guards",
    ):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    if getattr(args, "scale", None) is not None:
        cfg.scale = parse_scale(args.scale)
    if getattr(args, "corrupt_multiplier", None) is not None:
        cfg.corrupt_multiplier = parse_rational(args.corrupt_multiplier)
    if cfg.workers < 1:
        raise UsageError("--workers must be at least 1")
    return cfg


COMMANDS: dict[str, Callable[[RunConfig, ProblemFile, list[int]], tuple[str, int]]] = {
    "count": cmd_count,
    "table": cmd_table,
    "mln": cmd_mln,
    "check": cmd_check,
    "explain": cmd_explain,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        problem = load_problem(cfg.path)
        sizes = resolve_sizes(cfg, problem) if cfg.command != "explain" else (
            cfg.sizes if cfg.sizes is not None
            else ([problem.domain_size] if problem.domain_size is not None else [])
        )
        text, code = COMMANDS[cfg.command](cfg, problem, sizes)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USER
    except (UsageError, MlnError, TableError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USER
    except (EngineLimit, OracleCapExceeded, InterpolationCheckFailed, MultiplierUndefined) as e:
        print(f"limit: {e}", file=sys.stderr)
        return EXIT_LIMIT
    emit(text, cfg.output)
    return code


if __name__ == "__main__":
    sys.exit(main())
