"""Command-line entry point: ``ladderstats <command> ...``.

Every command reads an optional JSON ``--config`` with per-concern sections::

    {"leaderboard": {...}, "service": {...}, "simulate": {...}, "qualify": {...}, "bracket": {...}}

Flags given on the command line override config values.  Outputs go to the
paths given with ``-o``/``--figure`` (stdout when ``-o`` is omitted) and are
byte-identical for identical inputs and seeds.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import analysis, btfit, core, ladder, leaderboard, online, statespace

logger = logging.getLogger("ladderstats")


class CLIError(Exception):
    pass


# -- helpers -----------------------------------------------------------------

def load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CLIError(f"config {path}: not valid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise CLIError(f"config {path}: top level must be an object")
    return cfg


def leaderboard_config(cfg: dict, args: argparse.Namespace) -> leaderboard.LeaderboardConfig:
    lc = leaderboard.LeaderboardConfig.from_dict(cfg.get("leaderboard", {}))
    over = {}
    for flag, key in (("replicates", "bootstrap_replicates"), ("seed", "seed"), ("min_games", "fhbt_min_games"),
                      ("metric", "primary_metric")):
        v = getattr(args, flag, None)
        if v is not None:
            over[key] = v
    return replace(lc, **over) if over else lc


def service_config(cfg: dict, data_dir: str | None = None):
    from .service import ServiceConfig

    d = dict(cfg.get("service", {}))
    if "leaderboard" not in d and "leaderboard" in cfg:
        d["leaderboard"] = cfg["leaderboard"]
    if data_dir is not None:
        d["data_dir"] = data_dir
    d.setdefault("data_dir", "ladder-data")
    return ServiceConfig.from_dict(d)


def read_matches(path: str, fmt: str | None, strict: bool = True) -> tuple[str | None, list[core.MatchRecord]]:
    """Matches of one format from a CSV or JSON-lines file."""
    matches = core.read_match_log(path, strict=strict)
    groups = core.split_formats(matches)
    if fmt is not None:
        return fmt, groups.get(fmt, [])
    if len(groups) > 1:
        raise CLIError(f"{path} holds several formats ({', '.join(sorted(groups))}); pick one with --format")
    return (next(iter(groups)) if groups else None), matches


def emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def num(x) -> str:
    return "" if x is None else repr(float(x))


def fhbt_boundary(n: int, every: int | None) -> int:
    return n if not every else n - n % every


def served_payload(fmt: str | None, entries, match_count: int, fhbt_count: int, metric: str) -> dict:
    return {"format": fmt, "metric": metric, "match_count": match_count, "fhbt_match_count": fhbt_count,
            "entries": [e.to_dict() for e in entries]}


def _ladder_entries(matches, lc, refit_every: int | None):
    n = len(matches)
    cut = fhbt_boundary(n, refit_every)
    fit = leaderboard.fit_fhbt(matches[:cut], lc) if cut else None
    return leaderboard.build_leaderboard(matches, lc, fit=fit, use_fit=True), cut


# -- commands ----------------------------------------------------------------

def cmd_ingest(args, cfg) -> None:
    lines = Path(args.input).read_text(encoding="utf-8").splitlines()
    matches, rejections = core.ingest_report(lines)
    for r in rejections:
        print(f"{args.input}:{r.line}: {r.message}", file=sys.stderr)
    if rejections and not args.lenient:
        raise CLIError(f"{len(rejections)} malformed record(s); rerun with --lenient to skip them")
    if args.format:
        matches = [m for m in matches if m.format == args.format]
    text = "".join(core.format_line(m, args.style) + "\n" for m in matches)
    if args.style == "csv":
        text = core.HEADER + "\n" + text
    emit(text, args.output)
    print(f"accepted {len(matches)} match(es), rejected {len(rejections)}", file=sys.stderr)


def cmd_rate(args, cfg) -> None:
    fmt, matches = read_matches(args.input, args.format)
    if args.as_served:
        sc = service_config(cfg)
        lc = sc.config_for(fmt) if fmt else sc.leaderboard
        lc = replace(lc, **({"primary_metric": args.metric} if args.metric else {}))
        every = sc.refit_every
    else:
        lc = leaderboard_config(cfg, args)
        every = args.refit_every
    entries, cut = _ladder_entries(matches, lc, every)
    if args.json:
        text = json.dumps(served_payload(fmt, entries, len(matches), cut, lc.primary_metric),
                          sort_keys=True, separators=(",", ":")) + "\n"
    else:
        text = to_csv(leaderboard.LEADERBOARD_COLUMNS, leaderboard.leaderboard_rows(entries))
    emit(text, args.output)
    if args.trajectory:
        rep = online.replay_ladder(matches, lc.elo, lc.glicko, lc.tie_value)
        online.write_trajectory(rep.trajectory, args.trajectory)
    if args.figure and entries:
        from .plotting import plot_leaderboard
        plot_leaderboard(entries, args.figure)


def cmd_leaderboard(args, cfg) -> None:
    fmt, matches = read_matches(args.input, args.format)
    lc = leaderboard_config(cfg, args)
    entries = leaderboard.build_leaderboard(matches, lc)
    if args.top:
        entries = entries[: args.top]
    if args.output and args.output.endswith(".json"):
        emit(leaderboard.dumps_leaderboard(entries) + "\n", args.output)
    else:
        emit(to_csv(leaderboard.LEADERBOARD_COLUMNS, leaderboard.leaderboard_rows(entries)), args.output)
    agents = [e.agent for e in entries]
    if args.h2h and agents:
        table = core.head_to_head(matches, agents)
        rows = [[r["row"], r["col"], r["wins"], r["losses"], r["ties"]] for r in table.to_rows()]
        emit(to_csv(["agent", "opponent", "wins", "losses", "ties"], rows), args.h2h)
    if entries and (args.figure or args.h2h_figure):
        from .plotting import plot_h2h, plot_leaderboard
        if args.figure:
            plot_leaderboard(entries, args.figure)
        if args.h2h_figure:
            plot_h2h(core.head_to_head(matches, agents), args.h2h_figure)


def cmd_compare(args, cfg) -> None:
    _, matches = read_matches(args.input, args.format)
    lc = leaderboard_config(cfg, args)
    cps = None
    if args.checkpoints:
        cps = [int(x) for x in args.checkpoints.split(",")]
    elif args.every:
        cps = list(range(args.every, len(matches) + 1, args.every)) or [len(matches)]
    comp = analysis.compare_raters(matches, lc, cps)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["checkpoint", "method_a", "method_b", "spearman", "n_agents", "available"])
    for r in comp.rows:
        w.writerow([r.checkpoint, r.method_a, r.method_b, "" if r.rho is None else repr(r.rho),
                    r.n_agents, int(r.available)])
    emit(buf.getvalue(), args.output)
    if args.bands:
        analysis.write_bands(comp, args.bands)
    if args.trajectory:
        online.write_trajectory(comp.trajectory, args.trajectory)
    if args.figure and matches:
        from .plotting import plot_comparison
        plot_comparison(comp, args.figure, max_agents=args.plot_agents)


def cmd_bootstrap(args, cfg) -> None:
    _, matches = read_matches(args.input, args.format)
    lc = leaderboard_config(cfg, args)
    fit = btfit.bt_bootstrap(matches, lc.bt, lc.bootstrap_replicates, lc.seed, args.level)
    rows = []
    for a in fit.agents:
        lo, hi = fit.ci[a]
        rows.append([a, repr(fit.strengths[a]), repr(fit.display_rating[a]), repr(lo), repr(hi), fit.games[a]])
    emit(to_csv(["agent", "strength", "display_rating", "ci_low", "ci_high", "games"], rows), args.output)
    if fit.failed_replicates:
        print(f"{fit.failed_replicates} bootstrap replicate(s) failed and were dropped", file=sys.stderr)


def cmd_simulate(args, cfg) -> None:
    sc = dict(cfg.get("simulate", {}))
    for k in ("agents", "games", "seed", "policy", "spread", "window", "format"):
        v = getattr(args, k if k != "format" else "sim_format", None)
        if v is not None:
            sc[k] = v
    seed = int(sc.get("seed", 0))
    if args.ratings:
        ratings = json.loads(Path(args.ratings).read_text(encoding="utf-8"))
    elif "ratings" in sc:
        ratings = sc["ratings"]
    else:
        n = int(sc.get("agents", 20))
        spread = float(sc.get("spread", 800.0))
        ratings = {f"agent{i:02d}": 1500.0 - spread / 2 + spread * i / max(n - 1, 1) for i in range(n)}
    agents = ladder.agents_from_ratings(ratings)
    policy = ladder.MatchmakingPolicy(kind=sc.get("policy", "uniform"), window=float(sc.get("window", 100.0)))
    games = int(sc.get("games", 500 * len(agents) // 2))
    matches = ladder.simulate_ladder(agents, policy, games, seed, format=sc.get("format", "gen9ou"))
    text = "".join(core.format_line(m, args.style) + "\n" for m in matches)
    emit((core.HEADER + "\n" + text) if args.style == "csv" else text, args.output)
    if args.truth:
        truth = ladder.true_display_ratings(agents)
        emit(to_csv(["agent", "true_display_rating"], [[a, repr(v)] for a, v in truth.items()]), args.truth)


def _load_entries(path: str, fmt: str | None, cfg, args) -> list[leaderboard.LeaderboardEntry]:
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        return [leaderboard.LeaderboardEntry.from_dict(d) for d in json.loads(text)]
    if stripped.startswith("{") and '"entries"' in stripped[:200000]:
        return [leaderboard.LeaderboardEntry.from_dict(d) for d in json.loads(text)["entries"]]
    _, matches = read_matches(path, fmt)
    return leaderboard.build_leaderboard(matches, leaderboard_config(cfg, args))


def cmd_qualify(args, cfg) -> None:
    qc = dict(cfg.get("qualify", {}))
    entries = _load_entries(args.input, args.format, cfg, args)
    quals = ladder.select_qualifiers(
        entries,
        n_elo=args.n_elo if args.n_elo is not None else int(qc.get("n_elo", 2)),
        n_fhbt=args.n_fhbt if args.n_fhbt is not None else int(qc.get("n_fhbt", 6)),
        min_battles=args.min_battles if args.min_battles is not None else int(qc.get("min_battles", 250)),
    )
    rows = [[q.seed, q.agent, q.via, repr(q.elo), num(q.fhbt), q.battles] for q in quals]
    emit(to_csv(["seed", "agent", "via", "elo", "fhbt", "battles"], rows), args.output)


def _read_seeds(path: str) -> list[str]:
    lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if lines and lines[0].startswith("seed,"):
        rows = list(csv.DictReader(lines))
        return [r["agent"] for r in sorted(rows, key=lambda r: int(r["seed"]))]
    return lines


def cmd_bracket(args, cfg) -> None:
    bc = dict(cfg.get("bracket", {}))
    if args.replay:
        bracket = ladder.replay_fixture(ladder.load_bracket_fixture(args.replay))
    else:
        if not (args.seeds and args.matches):
            raise CLIError("bracket needs --replay FIXTURE, or --seeds FILE with --matches FILE")
        seeds = _read_seeds(args.seeds)
        _, matches = read_matches(args.matches, args.format)
        fit = btfit.bt_fit(matches, leaderboard_config(cfg, args).bt)
        length = args.match_length or int(bc.get("match_length", 99))
        seed = args.seed if args.seed is not None else int(bc.get("seed", 0))
        bracket = ladder.run_bracket(seeds, length, fit, seed=seed)
    if args.json:
        doc = {"seeds": list(bracket.seeds), "match_length": bracket.match_length, "champion": bracket.champion,
               "series": [asdict(s) for s in bracket.series]}
        emit(json.dumps(doc, sort_keys=True, indent=1) + "\n", args.output)
    else:
        emit(ladder.format_bracket(bracket), args.output)


def cmd_statespace(args, cfg) -> None:
    names = [r.value for r in statespace.Ruleset] if args.format == "all" else [args.format]
    reports = []
    for name in names:
        rs = statespace.Ruleset(name)
        params = statespace.FormatParameters.for_ruleset(rs)
        reports.append(statespace.battle_space(params, rs, include_pp=args.include_pp))
    parts = [statespace.format_report(r) for r in reports]
    parts.append(statespace.summary_table(reports))
    if args.headline:
        parts.append("quantity\texact\n" + "".join(f"{k}\t{v}\n" for k, v in statespace.headline_numbers().items()))
    if args.effective:
        out = ["usage_profile\teffective_log10\tterms"]
        for label, usage in (("gen1", statespace.OU_USAGE_GEN1), ("gen9", statespace.OU_USAGE_GEN9)):
            total, terms = statespace.effective_team_space(usage)
            out.append(f"{label}\t{total:.3f}\t" + ",".join(f"{k}={v:.3f}" for k, v in terms.items()))
        parts.append("\n".join(out) + "\n")
    emit("\n".join(parts), args.output)
    if args.figure:
        from .plotting import plot_statespace
        plot_statespace(reports, args.figure)


def cmd_svd(args, cfg) -> None:
    if args.synthetic:
        m = analysis.synthetic_score_matrix(seed=args.seed or 0, target=args.target)
        if args.write_matrix:
            analysis.write_score_matrix(m, args.write_matrix)
    elif args.input:
        m = analysis.read_score_matrix(args.input, delimiter="\t" if args.input.endswith(".tsv") else ",")
    else:
        raise CLIError("svd needs an input matrix file or --synthetic")
    lines = []
    target_r2 = None
    if args.target:
        rep = analysis.orthogonality_report(m, args.target, args.k, args.center, args.standardize, args.impute)
        bench = m.drop_columns([args.target])
        lines += [f"target\t{rep.target}", f"models_with_target\t{rep.n_models}",
                  f"benchmark_variance_explained\t{rep.benchmark_variance_explained!r}",
                  f"target_r2\t{rep.target_r2!r}", f"max_spearman\t{rep.max_rho!r}",
                  f"mean_abs_spearman\t{rep.mean_abs_rho!r}"]
        target_r2 = (args.target, rep.target_r2)
    else:
        bench = m
    if args.impute:
        bench = bench.imputed()
    res = analysis.svd_variance(bench, args.k, args.center, args.standardize)
    lines = [f"k\t{res.k}", f"total_variance_explained\t{res.total!r}"] + lines
    lines.append("column\tr2")
    lines += [f"{c}\t{v!r}" for c, v in res.per_column_r2.items()]
    emit("\n".join(lines) + "\n", args.output)
    if args.figure:
        from .plotting import plot_svd
        plot_svd(res, args.figure, target=target_r2)


def _read_usage(path: str) -> list[tuple[str, float]]:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or not "".join(row).strip():
                continue
            if len(row) < 2:
                raise CLIError(f"{path}:{k + 1}: expected name,usage")
            try:
                rows.append((row[0], float(row[1])))
            except ValueError:
                if k == 0:
                    continue  # header
                raise CLIError(f"{path}:{k + 1}: usage {row[1]!r} is not a number") from None
    return rows


def cmd_usage_cdf(args, cfg) -> None:
    curves = {}
    rows = []
    for path in args.inputs:
        label = Path(path).stem
        cdf = statespace.usage_cdf(_read_usage(path))
        curves[label] = [f for _, f in cdf]
        rows += [[label, k, name, repr(f)] for k, (name, f) in enumerate(cdf, start=1)]
    emit(to_csv(["source", "rank", "name", "cumulative_share"], rows), args.output)
    if args.figure:
        from .plotting import plot_usage_cdf
        plot_usage_cdf(curves, args.figure)


def cmd_serve(args, cfg) -> None:
    from .service import serve

    sc = service_config(cfg, args.data_dir)
    over = {k: v for k, v in (("host", args.host), ("port", args.port)) if v is not None}
    serve(replace(sc, **over))


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="ladderstats", description="Rating, ranking and state-space tools for "
                                "competitive game ladders.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
        return sp

    def out(sp, figure=True):
        sp.add_argument("-o", "--output", help="output file (default: stdout)")
        if figure:
            sp.add_argument("--figure", help="write a figure (png/svg/pdf)")

    def fmt(sp):
        sp.add_argument("--format", help="restrict to one format label")

    def rating_flags(sp):
        sp.add_argument("--replicates", type=int, help="bootstrap replicates for FH-BT intervals")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--min-games", type=int, dest="min_games", help="battles needed to show FH-BT")
        sp.add_argument("--metric", choices=leaderboard.PRIMARY_METRICS, help="sort key")

    sp = add("ingest", cmd_ingest, "validate, deduplicate and sort a match file")
    sp.add_argument("input")
    out(sp, figure=False)
    fmt(sp)
    sp.add_argument("--style", choices=("csv", "json"), default="csv")
    sp.add_argument("--lenient", action="store_true", help="skip malformed records instead of failing")

    sp = add("rate", cmd_rate, "compute the leaderboard from a match file or service log")
    sp.add_argument("input")
    out(sp)
    fmt(sp)
    rating_flags(sp)
    sp.add_argument("--json", action="store_true", help="emit the service's leaderboard JSON shape")
    sp.add_argument("--refit-every", type=int, dest="refit_every",
                    help="fit FH-BT only up to the last multiple of N matches")
    sp.add_argument("--as-served", action="store_true", dest="as_served",
                    help="use the service section of the config (leaderboard settings and refit cadence)")
    sp.add_argument("--trajectory", help="also write per-match rating trajectories (CSV)")

    sp = add("leaderboard", cmd_leaderboard, "leaderboard with head-to-head table and figures")
    sp.add_argument("input")
    out(sp)
    fmt(sp)
    rating_flags(sp)
    sp.add_argument("--top", type=int)
    sp.add_argument("--h2h", help="write the head-to-head table (CSV)")
    sp.add_argument("--h2h-figure", dest="h2h_figure", help="write a head-to-head heatmap")

    sp = add("compare", cmd_compare, "rank correlations between Elo, Glicko-1, GXE and FH-BT")
    sp.add_argument("input")
    out(sp)
    fmt(sp)
    rating_flags(sp)
    sp.add_argument("--checkpoints", help="comma-separated match counts")
    sp.add_argument("--every", type=int, help="checkpoint every N matches")
    sp.add_argument("--bands", help="write FH-BT bootstrap bands (CSV)")
    sp.add_argument("--trajectory", help="write rating trajectories (CSV)")
    sp.add_argument("--plot-agents", type=int, default=6, dest="plot_agents")

    sp = add("bootstrap", cmd_bootstrap, "FH-BT fit with bootstrap intervals")
    sp.add_argument("input")
    out(sp, figure=False)
    fmt(sp)
    rating_flags(sp)
    sp.add_argument("--level", type=float, default=0.95)

    sp = add("simulate", cmd_simulate, "generate a synthetic ladder with known strengths")
    out(sp, figure=False)
    sp.add_argument("--agents", type=int)
    sp.add_argument("--ratings", help="JSON object of agent -> true display rating")
    sp.add_argument("--spread", type=float, help="true rating range of generated agents")
    sp.add_argument("--games", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--policy", choices=("uniform", "proximity", "baseline"))
    sp.add_argument("--window", type=float)
    sp.add_argument("--sim-format", dest="sim_format", help="format label for generated matches")
    sp.add_argument("--style", choices=("csv", "json"), default="csv")
    sp.add_argument("--truth", help="write the generating display ratings (CSV)")

    sp = add("qualify", cmd_qualify, "pick tournament qualifiers (top Elo, then top FH-BT)")
    sp.add_argument("input", help="match file, or leaderboard JSON")
    out(sp, figure=False)
    fmt(sp)
    rating_flags(sp)
    sp.add_argument("--n-elo", type=int, dest="n_elo")
    sp.add_argument("--n-fhbt", type=int, dest="n_fhbt")
    sp.add_argument("--min-battles", type=int, dest="min_battles")

    sp = add("bracket", cmd_bracket, "run or replay a single-elimination bracket")
    out(sp, figure=False)
    fmt(sp)
    sp.add_argument("--replay", help="fixture path or bundled name (gen1-finals, gen9-finals)")
    sp.add_argument("--seeds", help="qualifier CSV or one agent per line, in seed order")
    sp.add_argument("--matches", help="match file used to fit win probabilities")
    sp.add_argument("--match-length", type=int, dest="match_length")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--json", action="store_true")

    sp = add("statespace", cmd_statespace, "exact team and battle state-space counts")
    out(sp)
    sp.add_argument("--format", default="all", choices=["all"] + [r.value for r in statespace.Ruleset])
    sp.add_argument("--include-pp", action="store_true", dest="include_pp")
    sp.add_argument("--headline", action="store_true", help="also print the exact intermediate counts")
    sp.add_argument("--effective", action="store_true", help="also print usage-restricted team spaces")

    sp = add("svd", cmd_svd, "low-rank structure of a model x benchmark score matrix")
    sp.add_argument("input", nargs="?")
    out(sp)
    sp.add_argument("-k", type=int, default=2)
    sp.add_argument("--center", action="store_true")
    sp.add_argument("--standardize", action="store_true")
    sp.add_argument("--impute", action="store_true", help="fill missing benchmark scores with column means")
    sp.add_argument("--target", help="column to test against the benchmark subspace")
    sp.add_argument("--synthetic", action="store_true", help="use a random 83 x 49 stand-in matrix")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--write-matrix", dest="write_matrix", help="save the synthetic matrix")

    sp = add("usage-cdf", cmd_usage_cdf, "cumulative usage share curves")
    sp.add_argument("inputs", nargs="+", help="CSV files of name,usage")
    out(sp)

    sp = add("serve", cmd_serve, "run the HTTP leaderboard service")
    sp.add_argument("--data-dir", dest="data_dir")
    sp.add_argument("--host")
    sp.add_argument("--port", type=int)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        args.func(args, cfg)
    except core.IngestError as exc:
        for r in exc.rejections:
            print(f"line {r.line}: {r.message}", file=sys.stderr)
        print(f"ladderstats {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (CLIError, ValueError, KeyError, OSError, TypeError, btfit.BootstrapError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"ladderstats {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
