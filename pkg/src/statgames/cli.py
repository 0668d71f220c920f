"""Command-line front end.

    statgames solve --game bayes --N 1 --KA 0 --KB 1 --M 2
    statgames sweep --game fisher --N 4 --M 10 --out grid.csv
    statgames sweep --table bayes-prior --out table4.json
    statgames strategy-plot --N 1 --KA 0 --KB 1 --M 2 --out plot.svg
    statgames verify-suite --max-M 4

Output depends only on the flags: floats are written with 12 significant
digits, undefined quantities are ``null`` (JSON) or empty (CSV).
Exit codes: 0 success, 1 usage/solver error, 2 refuted certificate.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import random
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from fractions import Fraction
from importlib import resources
from pathlib import Path

import click

from . import bayes, iso, limits, oracle
from .dist import GameClass, GameSpec, Kind, binom_pmfs, classify
from .errors import Refuted, StatGamesError
from .fisher import binomial_fisher, solve_fisher

FIELDS = [
    "N", "K_A", "K_B", "M", "x_A", "x_B", "gamma", "class", "degenerate", "conjecture",
    "P_star", "theta_star", "k_star", "nu_star", "v_star", "s_star",
    "G_over_log2", "U_star", "err_bound", "splits",
]
GAMES = ("fisher", "bayes", "iso")
TABLE_GRID = [round(0.1 * i, 1) for i in range(1, 10)]


# --- formatting ----------------------------------------------------------------

def fmt(x):
    """JSON-ready value: 12 significant digits, None for undefined."""
    if x is None or isinstance(x, (bool, str)):
        return x
    if isinstance(x, int):
        return x
    if isinstance(x, Fraction):
        x = float(x)
    if isinstance(x, dict):
        return {str(k): fmt(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [fmt(v) for v in x]
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.12g}")


def csv_cell(x) -> str:
    x = fmt(x)
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.12g}"
    if isinstance(x, dict):
        return ";".join(f"{k}:{csv_cell(v)}" for k, v in x.items())
    return str(x)


def dumps(doc) -> str:
    return json.dumps(fmt(doc), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def schema_text() -> str:
    return resources.files("statgames").joinpath("schema.json").read_text(encoding="utf-8")


# --- records -------------------------------------------------------------------

def _record(**kw) -> dict:
    rec = dict.fromkeys(FIELDS)
    rec.update(kw)
    return rec


def _exact(x):
    return str(x) if isinstance(x, Fraction) else None


def fisher_record(spec: GameSpec) -> dict:
    eq = solve_fisher(spec)
    return _record(N=spec.N, K_A=spec.K_A, K_B=spec.K_B, M=spec.M, **{"class": eq.game_class.value},
                   degenerate=eq.game_class is not GameClass.NONTRIVIAL, conjecture=False,
                   P_star=eq.P_star, k_star=eq.k_star, nu_star=eq.nu_star, v_star=eq.v_star,
                   s_star=eq.s_star)


def _betting_fields(eq, **kw) -> dict:
    G = getattr(eq, "G_over_log2", None)
    U = getattr(eq, "U_star", None)
    return _record(**{"class": eq.game_class.value},
                   degenerate=eq.game_class is not GameClass.NONTRIVIAL, conjecture=False,
                   P_star=eq.P_star, theta_star=eq.theta_star, G_over_log2=G, U_star=U,
                   err_bound=eq.err_bound, splits=eq.splits, **kw)


def solve_record(game: str, N: int, KA: int, KB: int, M: int, gamma=None) -> dict:
    spec = _spec(game, N, KA, KB, M, gamma)
    if game == "fisher":
        return fisher_record(spec)
    if game == "bayes":
        return _betting_fields(bayes.solve_bayes(spec), N=N, K_A=KA, K_B=KB, M=M)
    return _betting_fields(iso.solve_iso(spec), N=N, K_A=KA, K_B=KB, M=M, gamma=gamma)


def binomial_record(game: str, N: int, xa: float, xb: float, gamma=None) -> dict:
    base = dict(N=N, x_A=xa, x_B=xb, gamma=gamma if game == "iso" else None)
    if game == "fisher":
        eq = binomial_fisher(N, xa, xb)
        return _record(**base, **{"class": eq.game_class.value},
                       degenerate=eq.game_class is not GameClass.NONTRIVIAL, conjecture=False,
                       P_star=eq.P_star, k_star=eq.k_star, nu_star=eq.nu_star,
                       v_star=eq.v_star, s_star=eq.s_star)
    if xa == xb or N == 0:
        cls = GameClass.BLIND
        return _record(**base, **{"class": cls.value}, degenerate=True, conjecture=False,
                       P_star=0.5, theta_star=0.0)
    d = binom_pmfs(N, xa, xb)
    if game == "bayes":
        eq = bayes.solve_distributions(d)
    else:
        eq = iso.solve_iso_distributions(d, gamma)
    return _betting_fields(eq, **base)


def table_records(table: str) -> list[dict]:
    out = []
    for xa in TABLE_GRID:
        for xb in TABLE_GRID:
            if xb <= xa:
                continue
            if table == "fisher-policy":
                out.append(_record(x_A=xa, x_B=xb, s_star=limits.fisher_policy_limit(xa, xb),
                                   degenerate=False, conjecture=False))
            else:
                out.append(_record(x_A=xa, x_B=xb, P_star=limits.bayes_prior_approx(xa, xb),
                                   degenerate=False, conjecture=False))
    return out


def _cell(task):
    kind, args = task
    if kind == "finite":
        return solve_record(*args)
    return binomial_record(*args)


def _spec(game: str, N, KA, KB, M, gamma=None) -> GameSpec:
    kind = {"fisher": Kind.FISHER, "bayes": Kind.BAYESIAN, "iso": Kind.STATISTICAL}[game]
    return GameSpec(N, KA, KB, M, kind, gamma if game == "iso" else None)


def _pool_map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


# --- output --------------------------------------------------------------------

def render(records: list[dict], fmt_name: str) -> str:
    if fmt_name == "json":
        return dumps(records)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELDS)
    for r in records:
        w.writerow([csv_cell(r[f]) for f in FIELDS])
    return buf.getvalue()


def write_atomic(path: Path, text: str) -> None:
    """Write via a temp file in the same directory; nothing is left behind on failure."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _range(text: str | None, M: int) -> list[int]:
    if text is None:
        return list(range(M + 1))
    lo, _, hi = text.partition(":")
    try:
        vals = list(range(int(lo), int(hi or lo) + 1))
    except ValueError:
        raise click.BadParameter(f"expected LO:HI, got {text!r}") from None
    if not vals:
        raise click.BadParameter(f"empty range {text!r}")
    return vals


def _x_grid(step: float) -> list[float]:
    if not step > 0 or step >= 1:
        raise click.BadParameter("--x-step must lie in (0, 1)")
    n = round(1 / step)
    xs = [round(i * step, 12) for i in range(1, n + 1)]
    return [x for x in xs if 0 < x < 1]


# --- strategy plot -------------------------------------------------------------

def strategy_svg(spec: GameSpec, size: int = 600) -> str:
    """Tile diagram of the Fisher equilibrium profile.

    Columns are PII's actions: scenario A takes width P*, B the rest, each
    split evenly over its sequences.  Rows are PI's actions: phi_hat takes
    height nu*, phi_check the rest, each split evenly over the sampled
    subsets.  A tile is coloured by whether PI wins.
    """
    spec = GameSpec(*spec.canonical().astuple())
    eq = solve_fisher(spec)
    cls = classify(spec)
    um = oracle.enumerate_game(spec)
    hat, chk, nu = oracle._threshold_keys(spec, cls, eq)
    hat_rows, chk_rows = oracle._profile_sums(um, hat, chk)
    P = Fraction(eq.P_star) if eq.P_star is not None else Fraction(1, 2)
    nu = Fraction(nu)
    cols_A = [j for j, c in enumerate(um.cols) if c[0] == "A"]
    cols_B = [j for j, c in enumerate(um.cols) if c[0] == "B"]

    def spans(blocks):
        out, pos = [], Fraction(0)
        for idx, share in blocks:
            for i in idx:
                w = share / len(idx)
                out.append((i, pos, w))
                pos += w
        return out

    xs = spans([(cols_A, P), (cols_B, 1 - P)])
    ys = spans([(hat_rows, nu), (chk_rows, 1 - nu)])

    def num(v: Fraction) -> str:
        return f"{float(v) * size:.12g}"

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f"<title>Equilibrium strategy plot G{spec.astuple()}: P*={eq.P_star}, "
        f"nu*={nu}, v*={eq.v_star}</title>",
        "<style>.win{fill:#3b7dd8}.lose{fill:#d84a3b}</style>",
    ]
    for i, y, h in ys:
        if h == 0:
            continue
        for j, x, w in xs:
            if w == 0:
                continue
            cls_name = "win" if um.U[i, j] else "lose"
            lines.append(f'<rect class="{cls_name}" x="{num(x)}" y="{num(y)}" '
                         f'width="{num(w)}" height="{num(h)}"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


# --- verify suite ----------------------------------------------------------------

def _suite_specs(max_M: int, seed, samples: int) -> list[tuple]:
    specs = [(N, a, b, M) for M in range(max_M + 1) for N in range(M + 1)
             for a in range(M + 1) for b in range(M + 1)]
    if seed is not None:
        rng = random.Random(seed)
        found, tries = 0, 0
        while found < samples and tries < 100 * samples:
            tries += 1
            M = rng.randint(max_M + 1, max_M + 4)
            t = (rng.randint(1, M), rng.randint(0, M), rng.randint(0, M), M)
            if classify(GameSpec(*t)) is GameClass.NONTRIVIAL:
                specs.append(t)
                found += 1
    return specs


def _verify_one(task) -> dict:
    params, perturb = task
    spec = GameSpec(*params)
    eq = solve_fisher(spec)
    cls = eq.game_class
    if perturb and cls is GameClass.NONTRIVIAL:
        shift = Fraction(1, 100) if eq.nu_star <= Fraction(99, 100) else -Fraction(1, 100)
        eq = replace(eq, nu_star=eq.nu_star + shift)
    rec = {"spec": list(params), "class": cls.value}
    try:
        cert = oracle.verify_fisher(spec, eq)
        rec.update(value=str(cert.value), nash_ok=True)
        if cls is GameClass.NONTRIVIAL:
            bspec = GameSpec(*params, Kind.BAYESIAN)
            oracle.verify_bayes(bspec, bayes.solve_bayes(bspec), grid=201)
    except Refuted as exc:
        rec.update(value=None, nash_ok=False, reason=str(exc))
    return rec


# --- commands --------------------------------------------------------------------

@click.group()
def cli():
    """Equilibria of statistical guessing games."""


def _game_options(f):
    for opt in reversed([
        click.option("--N", "N", type=int, required=True),
        click.option("--KA", "KA", type=int, required=True),
        click.option("--KB", "KB", type=int, required=True),
        click.option("--M", "M", type=int, required=True),
    ]):
        f = opt(f)
    return f


@cli.command()
@click.option("--game", type=click.Choice(GAMES), required=True)
@_game_options
@click.option("--gamma", type=float, default=None, help="relative risk aversion (iso games)")
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--method", type=click.Choice([m.value for m in bayes.Method]), default="auto",
              show_default=True, help="root finder for bayes games")
@click.option("--verify", is_flag=True, help="certify the result with the oracle")
def solve(game, N, KA, KB, M, gamma, tol, method, verify):
    """Solve one game and print a JSON report."""
    if game == "iso" and gamma is None:
        raise click.UsageError("--gamma is required for --game iso")
    spec = _spec(game, N, KA, KB, M, gamma)
    report = {"game": game, "spec": {"N": N, "K_A": KA, "K_B": KB, "M": M,
                                      "gamma": gamma if game == "iso" else None}}
    if game == "fisher":
        eq = solve_fisher(spec)
        report.update(eq.as_dict())
        report["exact"] = {k: _exact(getattr(eq, k)) for k in ("nu_star", "P_star", "v_star", "s_star")}
    elif game == "bayes":
        eq = bayes.solve_bayes(spec, bayes.SolverConfig(tol=tol, method=method))
        report.update(eq.as_dict())
    else:
        eq = iso.solve_iso(spec, tol=tol)
        report.update(eq.as_dict())
    code = 0
    if verify:
        check = {"fisher": oracle.verify_fisher, "bayes": oracle.verify_bayes,
                 "iso": oracle.verify_iso}[game]
        try:
            cert = check(spec, eq)
        except Refuted as exc:
            cert, code = exc.certificate, 2
        report["certificate"] = {
            "value": str(cert.value) if isinstance(cert.value, Fraction) else cert.value,
            "nash_ok": cert.nash_ok,
            "worst_row_gap": cert.worst_row_gap,
            "worst_col_gap": cert.worst_col_gap,
            "value_bound": cert.value_bound,
            "failures": list(cert.failures),
        }
    click.echo(dumps(report), nl=False)
    return code


@cli.command()
@click.option("--game", type=click.Choice(GAMES), default="fisher", show_default=True)
@click.option("--N", "N", type=int, default=None)
@click.option("--M", "M", type=int, default=None, help="finite games; omit for binomial games")
@click.option("--KA-range", "ka_range", default=None, help="LO:HI (default 0:M)")
@click.option("--KB-range", "kb_range", default=None, help="LO:HI (default 0:M)")
@click.option("--x-step", type=float, default=None, help="binomial x grid step")
@click.option("--gamma", type=float, default=None)
@click.option("--table", type=click.Choice(["fisher-policy", "bayes-prior"]), default=None,
              help="reproduce an N -> infinity table instead of a game grid")
@click.option("--format", "fmt_name", type=click.Choice(["json", "csv"]), default=None,
              help="default: from the --out suffix")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--jobs", type=int, default=1, show_default=True)
def sweep(game, N, M, ka_range, kb_range, x_step, gamma, table, fmt_name, out, jobs):
    """Solve every cell of a parameter grid and write one record per cell."""
    if fmt_name is None:
        fmt_name = "csv" if out.suffix.lower() == ".csv" else "json"
    if game == "iso" and gamma is None and table is None:
        raise click.UsageError("--gamma is required for --game iso")
    if table is not None:
        records = table_records(table)
    elif M is not None:
        if N is None:
            raise click.UsageError("--N is required")
        tasks = [("finite", (game, N, a, b, M, gamma))
                 for a in _range(ka_range, M) for b in _range(kb_range, M)]
        records = _pool_map(_cell, tasks, jobs)
    elif x_step is not None:
        if N is None:
            raise click.UsageError("--N is required")
        xs = _x_grid(x_step)
        tasks = [("binomial", (game, N, a, b, gamma)) for a in xs for b in xs]
        records = _pool_map(_cell, tasks, jobs)
    else:
        raise click.UsageError("give --M (finite grid), --x-step (binomial grid) or --table")
    write_atomic(out, render(records, fmt_name))
    write_atomic(out.with_name(out.name + ".schema.json"), schema_text())
    click.echo(f"{len(records)} records -> {out}")
    return 0


@cli.command("strategy-plot")
@_game_options
@click.option("--size", type=int, default=600, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
def strategy_plot(N, KA, KB, M, size, out):
    """Write the equilibrium strategy plot of a Fisher game as SVG."""
    write_atomic(out, strategy_svg(GameSpec(N, KA, KB, M), size))
    click.echo(f"strategy plot -> {out}")
    return 0


@cli.command("verify-suite")
@click.option("--max-M", "max_M", type=int, default=4, show_default=True)
@click.option("--seed", type=int, default=None, help="also certify random larger games")
@click.option("--samples", type=int, default=10, show_default=True)
@click.option("--perturb", is_flag=True, help="inject a fault (nu* + 1/100) to test detection")
@click.option("--jobs", type=int, default=1, show_default=True)
def verify_suite(max_M, seed, samples, perturb, jobs):
    """Certify every game with M <= --max-M (plus optional random ones)."""
    tasks = [(s, perturb) for s in _suite_specs(max_M, seed, samples)]
    results = _pool_map(_verify_one, tasks, jobs)
    refuted = [r for r in results if not r["nash_ok"]]
    summary = {
        "games": results,
        "certified": len(results) - len(refuted),
        "nontrivial_certified": sum(r["nash_ok"] and r["class"] == GameClass.NONTRIVIAL.value
                                    for r in results),
        "refuted": len(refuted),
    }
    click.echo(dumps(summary), nl=False)
    return 2 if refuted else 0


def main(argv=None) -> int:
    """Entry point; maps errors to exit codes (1 usage/solver, 2 refuted)."""
    try:
        rv = cli.main(args=argv, prog_name="statgames", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except Refuted as exc:
        click.echo(f"refuted: {exc}", err=True)
        return 2
    except (StatGamesError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return rv or 0


if __name__ == "__main__":
    sys.exit(main())
