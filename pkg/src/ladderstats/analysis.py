"""Cross-metric rank agreement and low-rank structure of benchmark score matrices."""

from __future__ import annotations

import csv
import itertools
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .btfit import BTFit, bt_bootstrap, bt_fit
from .core import AgentId, MatchRecord, agents_of
from .leaderboard import LeaderboardConfig
from .online import OnlineRater, TrajectoryPoint, replay_ladder

METHODS = ("elo", "glicko", "gxe", "fhbt")


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman's rho with average ranks for ties (Pearson correlation of the ranks)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("spearman needs two equal-length sequences")
    if x.size < 2:
        raise ValueError("spearman is undefined for fewer than two observations")
    rx, ry = rankdata(x) - (x.size + 1) / 2.0, rankdata(y) - (y.size + 1) / 2.0
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0:
        raise ValueError("spearman is undefined for a constant sequence")
    return max(-1.0, min(1.0, float(rx @ ry) / denom))


@dataclass(frozen=True)
class Ranking:
    """Agents best-first; agents with equal scores share a group."""

    groups: tuple[tuple[AgentId, ...], ...]

    @classmethod
    def from_scores(cls, scores: Mapping[AgentId, float]) -> "Ranking":
        ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        groups = [tuple(a for a, _ in grp) for _, grp in itertools.groupby(ordered, key=lambda kv: kv[1])]
        return cls(tuple(groups))

    @property
    def order(self) -> list[AgentId]:
        return [a for g in self.groups for a in g]

    def position(self, agent: AgentId) -> int:
        for k, g in enumerate(self.groups, start=1):
            if agent in g:
                return k
        raise KeyError(agent)


@dataclass(frozen=True)
class CorrelationRow:
    checkpoint: int
    method_a: str
    method_b: str
    rho: float | None
    n_agents: int
    available: bool


@dataclass
class Comparison:
    checkpoints: list[int]
    rows: list[CorrelationRow]
    scores: dict[int, dict[str, dict[AgentId, float]]]
    trajectory: list[TrajectoryPoint]
    fhbt_bands: dict[int, dict[AgentId, tuple[float, float, float]]] = field(default_factory=dict)

    def rho(self, a: str, b: str, checkpoint: int | None = None) -> float | None:
        cp = self.checkpoints[-1] if checkpoint is None else checkpoint
        for r in self.rows:
            if r.checkpoint == cp and {r.method_a, r.method_b} == {a, b}:
                return r.rho
        raise KeyError((a, b, cp))

    def matrix(self, checkpoint: int | None = None) -> np.ndarray:
        cp = self.checkpoints[-1] if checkpoint is None else checkpoint
        m = np.eye(len(METHODS))
        for i, j in itertools.combinations(range(len(METHODS)), 2):
            v = self.rho(METHODS[i], METHODS[j], cp)
            m[i, j] = m[j, i] = np.nan if v is None else v
        return m

    def rankings(self, checkpoint: int | None = None) -> dict[str, Ranking]:
        cp = self.checkpoints[-1] if checkpoint is None else checkpoint
        return {m: Ranking.from_scores(s) for m, s in self.scores[cp].items()}


def _rho(sa: Mapping[AgentId, float], sb: Mapping[AgentId, float]) -> tuple[float | None, int]:
    common = [a for a in sa if a in sb]
    if len(common) < 2:
        return None, len(common)
    try:
        return spearman([sa[a] for a in common], [sb[a] for a in common]), len(common)
    except ValueError:
        return math.nan, len(common)


def compare_raters(matches: Sequence[MatchRecord], config: LeaderboardConfig = LeaderboardConfig(),
                   checkpoints: Sequence[int] | None = None) -> Comparison:
    """Rank agents by Elo, Glicko-1, GXE and FH-BT at each checkpoint and correlate the rankings.

    Checkpoints are match counts (default: the full history).  FH-BT scores only
    agents with at least ``config.fhbt_min_games`` games; with fewer than two such
    agents the FH-BT column is marked unavailable at that checkpoint.  Bootstrap
    bands use ``config.bootstrap_replicates`` (0 skips them).
    """
    matches = list(matches)
    cps = sorted(set(checkpoints)) if checkpoints else [len(matches)]
    if cps[0] < 0 or cps[-1] > len(matches):
        raise ValueError(f"checkpoints must lie in [0, {len(matches)}]")
    replay = replay_ladder(matches, config.elo, config.glicko, config.tie_value)
    rater = OnlineRater(config.elo, config.glicko, config.tie_value)
    done = 0
    scores: dict[int, dict[str, dict[AgentId, float]]] = {}
    bands: dict[int, dict[AgentId, tuple[float, float, float]]] = {}
    rows: list[CorrelationRow] = []
    for cp in cps:
        for m in matches[done:cp]:
            rater.apply(m)
        done = cp
        prefix = matches[:cp]
        agents = list(rater.glicko)
        s = {
            "elo": {a: rater.elo[a].rating for a in agents},
            "glicko": {a: rater.glicko[a].rating for a in agents},
            "gxe": {a: rater.gxe_state(a).rating for a in agents},
            "fhbt": {},
        }
        eligible = [a for a in agents if rater.glicko[a].games >= config.fhbt_min_games]
        if len(eligible) >= 2 and len(agents_of(prefix)) >= 2:
            if config.bootstrap_replicates > 0:
                fit = bt_bootstrap(prefix, config.bt, config.bootstrap_replicates, config.seed)
            else:
                fit = bt_fit(prefix, config.bt)
            s["fhbt"] = {a: fit.display_rating[a] for a in eligible}
            bands[cp] = {a: (fit.display_rating[a], *(fit.ci[a] if fit.ci else (fit.display_rating[a],) * 2))
                         for a in eligible}
        scores[cp] = s
        for ma, mb in itertools.combinations(METHODS, 2):
            available = bool(s[ma]) and bool(s[mb]) and (("fhbt" not in (ma, mb)) or len(eligible) >= 2)
            rho, n = _rho(s[ma], s[mb]) if available else (None, 0)
            rows.append(CorrelationRow(cp, ma, mb, rho, n, available and rho is not None))
    return Comparison(cps, rows, scores, replay.trajectory, bands)


def write_comparison(comp: Comparison, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["checkpoint", "method_a", "method_b", "spearman", "n_agents", "available"])
        for r in comp.rows:
            w.writerow([r.checkpoint, r.method_a, r.method_b, "" if r.rho is None else repr(r.rho),
                        r.n_agents, int(r.available)])


def write_bands(comp: Comparison, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["checkpoint", "agent", "fhbt", "ci_low", "ci_high"])
        for cp, band in comp.fhbt_bands.items():
            for a, (p, lo, hi) in band.items():
                w.writerow([cp, a, repr(p), repr(lo), repr(hi)])


# -- score matrices ----------------------------------------------------------

MISSING_TOKENS = {"", "na", "nan", "null", "none", "-"}


@dataclass(frozen=True)
class ScoreMatrix:
    rows: tuple[str, ...]
    cols: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.rows), len(self.cols)):
            raise ValueError(f"values shape {v.shape} does not match {len(self.rows)}x{len(self.cols)}")
        if len(set(self.rows)) != len(self.rows) or len(set(self.cols)) != len(self.cols):
            raise ValueError("row and column names must be unique")
        object.__setattr__(self, "values", v)

    @property
    def complete(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.cols.index(name)]

    def drop_columns(self, names: Sequence[str]) -> "ScoreMatrix":
        keep = [i for i, c in enumerate(self.cols) if c not in set(names)]
        return ScoreMatrix(self.rows, tuple(self.cols[i] for i in keep), self.values[:, keep])

    def imputed(self) -> "ScoreMatrix":
        """Missing cells replaced by their column mean."""
        v = self.values.copy()
        means = np.nanmean(np.where(np.isfinite(v), v, np.nan), axis=0)
        if np.any(~np.isfinite(means)):
            raise ValueError("cannot impute a column with no observed values")
        bad = ~np.isfinite(v)
        v[bad] = np.take(means, np.nonzero(bad)[1])
        return replace(self, values=v)


def read_score_matrix(path: str | Path, delimiter: str = ",") -> ScoreMatrix:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader)
        cols = tuple(header[1:])
        names, vals = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or not any(c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
            names.append(row[0])
            cells = []
            for c in row[1:]:
                c = c.strip()
                if c.lower() in MISSING_TOKENS:
                    cells.append(math.nan)
                else:
                    try:
                        cells.append(float(c))
                    except ValueError:
                        raise ValueError(f"line {lineno}: cell {c!r} is not a number") from None
            vals.append(cells)
    return ScoreMatrix(tuple(names), cols, np.array(vals, dtype=float).reshape(len(names), len(cols)))


def write_score_matrix(m: ScoreMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", *m.cols])
        for name, row in zip(m.rows, m.values):
            w.writerow([name, *("" if not np.isfinite(x) else repr(float(x)) for x in row)])


def _prepare(values: np.ndarray, center: bool, standardize: bool) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise ValueError("score matrix has missing entries; impute them explicitly (e.g. ScoreMatrix.imputed())")
    x = values.astype(float)
    if center or standardize:
        x = x - x.mean(axis=0)
    if standardize:
        sd = x.std(axis=0)
        sd[sd == 0] = 1.0
        x = x / sd
    return x


def _transform_vector(y: np.ndarray, center: bool, standardize: bool) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if center or standardize:
        y = y - y.mean()
    if standardize:
        sd = y.std()
        if sd > 0:
            y = y / sd
    return y


@dataclass(frozen=True)
class SVDResult:
    k: int
    total: float
    per_column_r2: dict[str, float]
    singular_values: np.ndarray


def svd_variance(m: ScoreMatrix, k: int, center: bool = False, standardize: bool = False) -> SVDResult:
    """Share of squared Frobenius norm kept by the rank-``k`` truncated SVD, overall and per column."""
    x = _prepare(m.values, center, standardize)
    if not 1 <= k <= min(x.shape):
        raise ValueError(f"k must lie in [1, {min(x.shape)}]")
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    approx = (u[:, :k] * s[:k]) @ vt[:k]
    resid = x - approx
    norm2 = float(np.sum(x * x))
    total = 1.0 - float(np.sum(resid * resid)) / norm2 if norm2 > 0 else 1.0
    col_norm = np.sum(x * x, axis=0)
    col_res = np.sum(resid * resid, axis=0)
    r2 = np.where(col_norm > 0, 1.0 - col_res / np.where(col_norm > 0, col_norm, 1.0), 1.0)
    r2 = np.clip(r2, 0.0, 1.0)
    return SVDResult(k, min(max(total, 0.0), 1.0), dict(zip(m.cols, map(float, r2))), s)


def _left_basis(x: np.ndarray, k: int) -> np.ndarray:
    u, s, _ = np.linalg.svd(x, full_matrices=False)
    tol = s[0] * max(x.shape) * np.finfo(float).eps if s.size else 0.0
    rank = int(np.sum(s > tol))
    if k < 1 or k > rank:
        raise ValueError(f"k={k} exceeds the matrix rank {rank}")
    return u[:, :k]


def project_new_column(m: ScoreMatrix, k: int, new_col: Sequence[float], center: bool = False,
                       standardize: bool = False) -> tuple[float, np.ndarray]:
    """Least-squares fit of ``new_col`` on the top-``k`` left singular vectors of ``m``.

    Returns the fit r^2 and fitted values on the column's original scale.
    """
    y_raw = np.asarray(new_col, dtype=float)
    if y_raw.shape != (len(m.rows),):
        raise ValueError(f"new column must have {len(m.rows)} entries")
    basis = _left_basis(_prepare(m.values, center, standardize), k)
    y = _transform_vector(y_raw, center, standardize)
    fitted = basis @ (basis.T @ y)
    ss = float(y @ y)
    r2 = 1.0 - float(np.sum((y - fitted) ** 2)) / ss if ss > 0 else 1.0
    preds = _untransform(fitted, y_raw, center, standardize)
    return min(max(r2, 0.0), 1.0), preds


def _untransform(fitted: np.ndarray, y_raw: np.ndarray, center: bool, standardize: bool) -> np.ndarray:
    out = fitted
    if standardize:
        sd = y_raw.std()
        out = out * (sd if sd > 0 else 1.0)
    if center or standardize:
        out = out + y_raw.mean()
    return out


@dataclass(frozen=True)
class OrthogonalityReport:
    target: str
    k: int
    n_models: int
    benchmark_variance_explained: float
    target_r2: float
    spearman: dict[str, float]
    max_rho: float
    mean_abs_rho: float


def orthogonality_report(m: ScoreMatrix, target: str, k: int = 2, center: bool = False,
                         standardize: bool = False, impute: bool = False) -> OrthogonalityReport:
    """How much of ``target`` the benchmark matrix's rank-``k`` structure explains.

    The SVD is taken over every other column (all models); the target, which may
    be missing for some models, is regressed on the top-``k`` left singular
    vectors over the models where it is present.  Rank correlations with each
    benchmark use the same models.
    """
    if target not in m.cols:
        raise KeyError(f"target column {target!r} not in matrix")
    y_all = m.column(target)
    bench = m.drop_columns([target])
    if impute:
        bench = bench.imputed()
    var = svd_variance(bench, k, center, standardize)
    present = np.isfinite(y_all)
    if present.sum() < max(k + 1, 3):
        raise ValueError("too few models with a target score")
    basis = _left_basis(_prepare(bench.values, center, standardize), k)[present]
    y = _transform_vector(y_all[present], center, standardize)
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    resid = y - basis @ coef
    ss = float(y @ y)
    r2 = 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0
    rhos = {}
    for c in bench.cols:
        col = bench.column(c)[present]
        try:
            rhos[c] = spearman(col, y_all[present])
        except ValueError:
            continue
    vals = np.array(list(rhos.values()))
    return OrthogonalityReport(
        target=target,
        k=k,
        n_models=int(present.sum()),
        benchmark_variance_explained=var.total,
        target_r2=min(max(r2, 0.0), 1.0),
        spearman=rhos,
        max_rho=float(vals.max()) if vals.size else math.nan,
        mean_abs_rho=float(np.abs(vals).mean()) if vals.size else math.nan,
    )


def synthetic_score_matrix(n_models: int = 83, n_benchmarks: int = 49, rank: int = 2,
                           noise: float = 0.05, target: str | None = "GXE", target_models: int = 16,
                           seed: int = 0) -> ScoreMatrix:
    """Random low-rank-plus-noise stand-in for a model x benchmark matrix.

    When ``target`` is given an extra column is appended, independent of the
    latent factors and observed for only ``target_models`` models.
    """
    rng = np.random.default_rng(seed)
    f = rng.normal(size=(n_models, rank))
    w = rng.normal(size=(rank, n_benchmarks))
    signal = f @ w
    x = 50.0 + 10.0 * (signal + noise * signal.std() * rng.normal(size=signal.shape))
    cols = [f"bench{j:02d}" for j in range(n_benchmarks)]
    if target is not None:
        extra = np.full(n_models, np.nan)
        idx = rng.choice(n_models, size=target_models, replace=False)
        extra[idx] = 50.0 + 10.0 * rng.normal(size=target_models)
        x = np.column_stack([x, extra])
        cols.append(target)
    return ScoreMatrix(tuple(f"model{i:02d}" for i in range(n_models)), tuple(cols), x)
