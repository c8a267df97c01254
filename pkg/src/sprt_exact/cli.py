"""Command-line interface.

Parses a model specification (inline Erlang, rate ratio, or JSON file),
dispatches to the library, and writes machine-readable results: JSON for
single computations, CSV for figure-data sweeps.  Figure sweeps also render
a PNG next to the CSV unless ``--no-plot`` is given.

Exit codes: 0 success, 2 invalid input (diagnostic names the offending
field or error class), 3 numerical failure (error class named).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import phasetype, sim, solver, sprt
from .exceptions import NumericalError, ValidationError

_FLOAT_FMT = "%.17g"  # lossless double round trip


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_model_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model (exactly one source)")
    g.add_argument("--model", help="path to a PH model JSON document")
    g.add_argument("--erlang", metavar="N,LAMBDA", help="canonical Erlang shortcut")
    g.add_argument(
        "--rho",
        type=float,
        help="Erlang rate ratio; implies theta=1, lambda0=rho/(1-rho)",
    )
    p.add_argument("--phases", type=int, default=2, help="phase count used with --rho")
    p.add_argument("--theta", type=float, default=1.0, help="tilt parameter (> 0)")


def _add_output_args(p: argparse.ArgumentParser, default_format: str) -> None:
    p.add_argument("--output", default="-", help="output path ('-' for stdout)")
    p.add_argument(
        "--format", choices=("json", "csv"), default=default_format, help="output format"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sprt-exact",
        description="Exact boundaries, errors and sample-size analysis for the "
        "sequential likelihood-ratio test with phase-type observations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tilt", help="exponentially tilted model parameters")
    _add_model_args(p)
    _add_output_args(p, "json")

    p = sub.add_parser("errors", help="error probabilities for given boundaries")
    _add_model_args(p)
    p.add_argument("--a", type=float, required=True, help="lower boundary (<= 0)")
    p.add_argument("--b", type=float, required=True, help="upper boundary (>= 0)")
    p.add_argument("--alpha0", type=float, help="optional target used to report bounds")
    p.add_argument("--alpha1", type=float, help="optional target used to report bounds")
    _add_output_args(p, "json")

    p = sub.add_parser("solve", help="boundaries achieving target errors")
    _add_model_args(p)
    p.add_argument("--alpha0", type=float, required=True)
    p.add_argument("--alpha1", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    _add_output_args(p, "json")

    p = sub.add_parser("expected-n", help="expected observation counts")
    _add_model_args(p)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--hypothesis", choices=("H0", "H1", "both"), default="both")
    _add_output_args(p, "json")

    p = sub.add_parser("pgf", help="E z^N at the given z values")
    _add_model_args(p)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--z", required=True, help="comma-separated z values in (0,1]")
    p.add_argument("--hypothesis", choices=("H0", "H1"), default="H0")
    _add_output_args(p, "json")

    p = sub.add_parser("region", help="achievable-error region boundary")
    _add_model_args(p)
    p.add_argument("--grid-size", type=int, default=25)
    _add_output_args(p, "json")

    p = sub.add_parser("bayes", help="penalty-minimizing boundaries")
    _add_model_args(p)
    p.add_argument("--pi", type=float, required=True, help="prior probability of the null")
    p.add_argument("--c", type=float, default=0.1, help="cost per observation")
    p.add_argument("--c0", type=float, default=1.0, help="Type I cost")
    p.add_argument("--c1", type=float, default=2.0, help="Type II cost")
    _add_output_args(p, "json")

    p = sub.add_parser("simulate", help="Monte Carlo estimates for given boundaries")
    _add_model_args(p)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--hypothesis", choices=("H0", "H1"), default="H0")
    p.add_argument("--replications", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--max-steps", type=int, default=1_000_000)
    p.add_argument("--z-points", default="", help="comma-separated z values")
    _add_output_args(p, "json")

    p = sub.add_parser("figure", help="figure-data sweeps (CSV, plus PNG rendering)")
    p.add_argument(
        "kind",
        choices=("boundaries", "expected-n", "region", "bayes-ab", "bayes-posterior"),
    )
    p.add_argument("--rho-grid", metavar="LO:HI:COUNT", help="uniform rate-ratio grid")
    p.add_argument("--rho-list", metavar="R1,R2,...", help="explicit rate ratios")
    p.add_argument("--phases", type=int, default=2)
    p.add_argument("--alpha0", type=float, default=0.05)
    p.add_argument("--alpha1", type=float, default=0.025)
    p.add_argument("--grid-size", type=int, default=25, help="nodes per region branch")
    p.add_argument("--pi-list", default="0.3,0.7", help="priors for the bayes panels")
    p.add_argument("--c", type=float, default=0.1)
    p.add_argument("--c0", type=float, default=1.0)
    p.add_argument("--c1", type=float, default=2.0)
    p.add_argument("--no-plot", action="store_true", help="skip PNG rendering")
    _add_output_args(p, "csv")

    return parser


# ---------------------------------------------------------------------------
# Model loading and small helpers
# ---------------------------------------------------------------------------


def _load_problem(args) -> sprt.TestProblem:
    sources = [s for s in ("model", "erlang", "rho") if getattr(args, s, None) is not None]
    if len(sources) != 1:
        raise ValidationError(
            "exactly one of --model, --erlang, --rho must be given "
            f"(got {sources or 'none'})"
        )
    if args.rho is not None:
        if not 0.0 < args.rho < 1.0:
            raise ValidationError(f"--rho must lie in (0,1), got {args.rho}")
        if args.theta != 1.0:
            raise ValidationError("--rho normalizes the slope; omit --theta")
        ph0 = phasetype.erlang(args.phases, args.rho / (1.0 - args.rho))
        return sprt.make_problem(ph0, 1.0)
    if args.erlang is not None:
        try:
            n_str, lam_str = args.erlang.split(",")
            ph0 = phasetype.erlang(int(n_str), float(lam_str))
        except (ValueError, TypeError) as exc:
            raise ValidationError(f"--erlang expects 'N,LAMBDA', got {args.erlang!r}") from exc
        return sprt.make_problem(ph0, args.theta)
    with open(args.model, encoding="utf-8") as fh:
        doc = json.load(fh)
    return sprt.make_problem(phasetype.from_spec_dict(doc), args.theta)


def _parse_grid(args) -> list[float]:
    if (args.rho_grid is None) == (args.rho_list is None):
        raise ValidationError("give exactly one of --rho-grid or --rho-list")
    if args.rho_grid is not None:
        try:
            lo_s, hi_s, n_s = args.rho_grid.split(":")
            lo, hi, count = float(lo_s), float(hi_s), int(n_s)
        except ValueError as exc:
            raise ValidationError(
                f"--rho-grid expects 'LO:HI:COUNT', got {args.rho_grid!r}"
            ) from exc
        if count < 1:
            raise ValidationError("--rho-grid COUNT must be positive")
        grid = list(np.linspace(lo, hi, count))
    else:
        try:
            grid = [float(tok) for tok in args.rho_list.split(",") if tok]
        except ValueError as exc:
            raise ValidationError(f"--rho-list expects floats, got {args.rho_list!r}") from exc
    for rho in grid:
        if not 0.0 < rho < 1.0:
            raise ValidationError(f"rate ratio must lie in (0,1), got {rho}")
    return grid


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok]
    except ValueError as exc:
        raise ValidationError(f"{flag} expects comma-separated floats, got {text!r}") from exc


def _thread_count() -> int:
    raw = os.environ.get("SPRT_EXACT_THREADS", "0")
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValidationError(f"SPRT_EXACT_THREADS must be an integer, got {raw!r}") from exc
    if value < 0:
        raise ValidationError(f"SPRT_EXACT_THREADS must be >= 0, got {value}")
    return value if value > 0 else min(32, os.cpu_count() or 1)


def _grid_map(fn, items):
    """Evaluate fn over grid nodes, preserving order, annotating failures."""
    results = [None] * len(items)

    def guarded(i):
        try:
            return fn(items[i])
        except Exception as exc:
            raise type(exc)(f"at grid node {i} (rho={items[i]!r}): {exc}") from exc

    workers = min(_thread_count(), max(len(items), 1))
    if workers <= 1:
        for i in range(len(items)):
            results[i] = guarded(i)
        return results
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(guarded, i): i for i in range(len(items))}
        for fut, i in futures.items():
            results[i] = fut.result()
    return results


# ---------------------------------------------------------------------------
# Command implementations -> (fieldnames, rows) for csv or dict for json
# ---------------------------------------------------------------------------


def _cmd_tilt(args):
    problem = _load_problem(args)
    t = problem.tilted
    return {
        "nu1": t.tilted.nu.tolist(),
        "T1": t.tilted.T.tolist(),
        "t1": t.tilted.t.tolist(),
        "delta": t.delta.tolist(),
        "g0_theta": t.g0_theta,
        "d": t.d,
    }


def _cmd_errors(args):
    problem = _load_problem(args)
    pair = sprt.errors(problem, sprt.Boundaries(a=args.a, b=args.b))
    out = {"alpha0": pair.alpha0, "alpha1": pair.alpha1}
    if (args.alpha0 is None) != (args.alpha1 is None):
        raise ValidationError("targets need both --alpha0 and --alpha1")
    if args.alpha0 is not None:
        target = sprt.ErrorPair(alpha0=args.alpha0, alpha1=args.alpha1)
        wa, wb = sprt.wald_bounds(target)
        blo, bhi = sprt.b_bounds(problem, target)
        out.update(
            {"target_alpha0": args.alpha0, "target_alpha1": args.alpha1,
             "wald_a": wa, "wald_b": wb, "b_low": blo, "b_high": bhi}
        )
    return out


def _cmd_solve(args):
    problem = _load_problem(args)
    target = sprt.ErrorPair(alpha0=args.alpha0, alpha1=args.alpha1)
    bounds = solver.solve_boundaries(problem, target, tol=args.tol)
    achieved = sprt.errors(problem, bounds)
    return {
        "a": bounds.a,
        "b": bounds.b,
        "achieved_alpha0": achieved.alpha0,
        "achieved_alpha1": achieved.alpha1,
        "E0N": sprt.expected_n(problem, bounds, "H0"),
        "E1N": sprt.expected_n(problem, bounds, "H1"),
    }


def _cmd_expected_n(args):
    problem = _load_problem(args)
    bounds = sprt.Boundaries(a=args.a, b=args.b)
    out = {}
    if args.hypothesis in ("H0", "both"):
        out["E0N"] = sprt.expected_n(problem, bounds, "H0")
    if args.hypothesis in ("H1", "both"):
        out["E1N"] = sprt.expected_n(problem, bounds, "H1")
    return out


def _cmd_pgf(args):
    problem = _load_problem(args)
    bounds = sprt.Boundaries(a=args.a, b=args.b)
    zs = _parse_float_list(args.z, "--z")
    if not zs:
        raise ValidationError("--z needs at least one value")
    return {
        "hypothesis": args.hypothesis,
        "values": {repr(z): sprt.pgf_n(problem, bounds, z, args.hypothesis) for z in zs},
    }


def _cmd_region(args):
    problem = _load_problem(args)
    region = solver.optimality_region(problem, args.grid_size)
    as_pairs = lambda curve: [[p.alpha0, p.alpha1] for p in curve]
    return {
        "star_point": [region.star_point.alpha0, region.star_point.alpha1],
        "lower_curve": as_pairs(region.lower_curve),
        "upper_curve": as_pairs(region.upper_curve),
    }


def _cmd_bayes(args):
    problem = _load_problem(args)
    spec = solver.PenaltySpec(prior=args.pi, c=args.c, c0=args.c0, c1=args.c1)
    bounds, post = solver.bayes_optimal(problem, spec)
    out = {"a": bounds.a, "b": bounds.b, "pi": args.pi,
           "penalty": solver.penalty(problem, bounds, spec)}
    if isinstance(post, solver.PosteriorBoundaries):
        out.update({"unique": True, "a_star": post.a_star, "b_star": post.b_star})
    else:
        out.update({"unique": False, "reason": post.reason})
    return out


def _cmd_simulate(args):
    problem = _load_problem(args)
    bounds = sprt.Boundaries(a=args.a, b=args.b)
    config = sim.SimConfig(
        replications=args.replications, seed=args.seed, max_steps=args.max_steps
    )
    zs = tuple(_parse_float_list(args.z_points, "--z-points")) if args.z_points else ()
    result = sim.run(problem, bounds, args.hypothesis, config, z_points=zs)
    est = lambda e: None if e is None else {"value": e.value, "se": e.se}
    return {
        "hypothesis": result.hypothesis,
        "replications": result.replications,
        "lower_exit": est(result.lower_exit),
        "upper_exit": est(result.upper_exit),
        "alpha0_hat": est(result.alpha0_hat),
        "alpha1_hat": est(result.alpha1_hat),
        "mean_n": est(result.mean_n),
        "pgf_at": {repr(z): est(e) for z, e in result.pgf_at.items()},
        "capped_count": result.capped_count,
    }


# ---------------------------------------------------------------------------
# Figure sweeps
# ---------------------------------------------------------------------------


def _rho_problem(rho: float, phases: int) -> sprt.TestProblem:
    return sprt.make_problem(phasetype.erlang(phases, rho / (1.0 - rho)), 1.0)


def _figure_boundaries(args):
    grid = _parse_grid(args)
    target = sprt.ErrorPair(alpha0=args.alpha0, alpha1=args.alpha1)

    def node(rho):
        problem = _rho_problem(rho, args.phases)
        bounds = solver.solve_boundaries(problem, target)
        wa, wb = sprt.wald_bounds(target)
        blo, bhi = sprt.b_bounds(problem, target)
        return [rho, bounds.a, bounds.b, wa, wb, blo, bhi]

    return ["rho", "a", "b", "wald_a", "wald_b", "b_low", "b_high"], _grid_map(node, grid)


def _figure_expected_n(args):
    grid = _parse_grid(args)
    target = sprt.ErrorPair(alpha0=args.alpha0, alpha1=args.alpha1)
    wa, wb = sprt.wald_bounds(target)

    def node(rho):
        problem = _rho_problem(rho, args.phases)
        bounds = solver.solve_boundaries(problem, target)
        exact = max(
            sprt.expected_n(problem, bounds, "H0", route="direct"),
            sprt.expected_n(problem, bounds, "H1", route="direct"),
        )
        wald_bounds_pair = sprt.Boundaries(a=wa, b=wb)
        conservative = max(
            sprt.expected_n(problem, wald_bounds_pair, "H0", route="direct"),
            sprt.expected_n(problem, wald_bounds_pair, "H1", route="direct"),
        )
        return [rho, exact, conservative]

    return ["rho", "max_en", "max_en_wald"], _grid_map(node, grid)


def _figure_region(args):
    grid = _parse_grid(args)

    def node(rho):
        problem = _rho_problem(rho, args.phases)
        region = solver.optimality_region(problem, args.grid_size)
        rows = [[rho, "star", region.star_point.alpha0, region.star_point.alpha1]]
        rows += [[rho, "b0", p.alpha0, p.alpha1] for p in region.lower_curve]
        rows += [[rho, "a0", p.alpha0, p.alpha1] for p in region.upper_curve]
        return rows

    nested = _grid_map(node, grid)
    return ["rho", "branch", "alpha0", "alpha1"], [r for rows in nested for r in rows]


def _figure_bayes(args, posterior: bool):
    grid = _parse_grid(args)
    priors = _parse_float_list(args.pi_list, "--pi-list")

    def node(rho):
        problem = _rho_problem(rho, args.phases)
        rows = []
        for prior in priors:
            spec = solver.PenaltySpec(prior=prior, c=args.c, c0=args.c0, c1=args.c1)
            bounds, post = solver.bayes_optimal(problem, spec)
            unique = isinstance(post, solver.PosteriorBoundaries)
            if posterior:
                rows.append(
                    [rho, prior,
                     post.a_star if unique else math.nan,
                     post.b_star if unique else math.nan,
                     int(unique)]
                )
            else:
                rows.append([rho, prior, bounds.a, bounds.b, int(unique)])
        return rows

    nested = _grid_map(node, grid)
    flat = [r for rows in nested for r in rows]
    if posterior:
        return ["rho", "pi", "a_star", "b_star", "unique"], flat
    return ["rho", "pi", "a", "b", "unique"], flat


_FIGURES = {
    "boundaries": lambda args: _figure_boundaries(args),
    "expected-n": lambda args: _figure_expected_n(args),
    "region": lambda args: _figure_region(args),
    "bayes-ab": lambda args: _figure_bayes(args, posterior=False),
    "bayes-posterior": lambda args: _figure_bayes(args, posterior=True),
}


def figure_emit(kind: str, args) -> tuple[list, list]:
    """Figure-panel data as ``(header, rows)`` for the given grid options.

    The numbers are plain library outputs; rendering happens separately.
    """
    if kind not in _FIGURES:
        raise ValidationError(f"unknown figure kind {kind!r}")
    return _FIGURES[kind](args)


def _cmd_figure(args):
    header, rows = figure_emit(args.kind, args)
    return {"header": header, "rows": rows, "kind": args.kind}


# ---------------------------------------------------------------------------
# Output writing and plotting
# ---------------------------------------------------------------------------


def _format_cell(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return _FLOAT_FMT % v
    return str(v)


def _render_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_format_cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _write_text(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _plot_figure(kind: str, header: list, rows: list, png_path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cols = {name: [row[i] for row in rows] for i, name in enumerate(header)}
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if kind == "boundaries":
        ax.plot(cols["rho"], cols["a"], "b-", label="a")
        ax.plot(cols["rho"], cols["b"], "r-", label="b")
        ax.plot(cols["rho"], cols["wald_a"], "b--", label="classical bound on a")
        ax.plot(cols["rho"], cols["wald_b"], "r--", label="classical bound on b")
        ax.plot(cols["rho"], cols["b_low"], "r:", label="sharpened bounds on b")
        ax.plot(cols["rho"], cols["b_high"], "r:")
        ax.set_xlabel("rho")
        ax.set_ylabel("boundary")
    elif kind == "expected-n":
        ax.plot(cols["rho"], cols["max_en"], "b-", label="exact boundaries")
        ax.plot(cols["rho"], cols["max_en_wald"], "b--", label="classical-bound boundaries")
        ax.set_xlabel("rho")
        ax.set_ylabel("max(E0 N, E1 N)")
    elif kind == "region":
        for rho in sorted(set(cols["rho"])):
            pts = [
                (a0, a1)
                for r, br, a0, a1 in rows
                if r == rho and br in ("b0", "a0", "star")
            ]
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            ax.plot(xs, ys, ".", label=f"rho={rho:g}")
        ax.set_xlabel("alpha0")
        ax.set_ylabel("alpha1")
    else:  # bayes-ab / bayes-posterior
        y1, y2 = ("a", "b") if kind == "bayes-ab" else ("a_star", "b_star")
        for prior in sorted(set(cols["pi"])):
            sel = [row for row in rows if row[1] == prior]
            xs = [row[0] for row in sel]
            ax.plot(xs, [row[2] for row in sel], label=f"{y1}, pi={prior:g}")
            ax.plot(xs, [row[3] for row in sel], label=f"{y2}, pi={prior:g}")
        ax.set_xlabel("rho")
        ax.set_ylabel("boundary")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)


def _emit(args, payload) -> None:
    if args.command == "figure":
        header, rows = payload["header"], payload["rows"]
        if args.format == "json":
            _write_text(args.output, json.dumps({"header": header, "rows": rows}) + "\n")
        else:
            _write_text(args.output, _render_csv(header, rows))
        if not args.no_plot and args.output != "-":
            png = os.path.splitext(args.output)[0] + ".png"
            _plot_figure(payload["kind"], header, rows, png)
        return
    if args.format == "csv":
        flat = {k: v for k, v in payload.items() if isinstance(v, (int, float, str))}
        _write_text(args.output, _render_csv(list(flat), [list(flat.values())]))
        return
    _write_text(args.output, json.dumps(payload, indent=2, sort_keys=True) + "\n")


_DISPATCH = {
    "tilt": _cmd_tilt,
    "errors": _cmd_errors,
    "solve": _cmd_solve,
    "expected-n": _cmd_expected_n,
    "pgf": _cmd_pgf,
    "region": _cmd_region,
    "bayes": _cmd_bayes,
    "simulate": _cmd_simulate,
    "figure": _cmd_figure,
}


def parse_and_dispatch(argv=None) -> int:
    """Run one CLI invocation; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        payload = _DISPATCH[args.command](args)
        _emit(args, payload)
    except (ValidationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


def main() -> None:
    sys.exit(parse_and_dispatch())
