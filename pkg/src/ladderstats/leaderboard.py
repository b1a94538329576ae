"""Leaderboard assembly across the online and batch metrics."""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .btfit import BTConfig, BTFit, bt_bootstrap, bt_fit
from .core import AgentId, MatchRecord, agents_of
from .online import EloConfig, GlickoConfig, OnlineRater

PRIMARY_METRICS = ("fhbt", "elo", "glicko", "gxe", "winrate", "battles")


@dataclass(frozen=True)
class FHBTScore:
    rating: float
    ci_low: float
    ci_high: float
    strength: float


@dataclass(frozen=True)
class LeaderboardEntry:
    agent: AgentId
    elo: float
    glicko_rating: float
    glicko_rd: float
    gxe: float
    fhbt: FHBTScore | None
    win_rate: float
    battles: int
    wins: int = 0
    losses: int = 0
    ties: int = 0

    def metric(self, name: str) -> float | None:
        if name == "fhbt":
            return None if self.fhbt is None else self.fhbt.rating
        if name == "glicko":
            return self.glicko_rating
        if name == "winrate":
            return self.win_rate
        if name in ("elo", "gxe", "battles"):
            return getattr(self, name)
        raise ValueError(f"unknown metric {name!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LeaderboardEntry":
        d = dict(d)
        if d.get("fhbt") is not None:
            d["fhbt"] = FHBTScore(**d["fhbt"])
        return cls(**d)


@dataclass(frozen=True)
class LeaderboardConfig:
    elo: EloConfig = field(default_factory=EloConfig)
    glicko: GlickoConfig = field(default_factory=GlickoConfig)
    bt: BTConfig = field(default_factory=BTConfig)
    fhbt_min_games: int = 250
    bootstrap_replicates: int = 1000  # 0 reports the point estimate with a degenerate interval
    seed: int = 0
    primary_metric: str = "fhbt"
    tie_value: float = 0.5

    def __post_init__(self):
        if self.primary_metric not in PRIMARY_METRICS:
            raise ValueError(f"primary_metric must be one of {PRIMARY_METRICS}")
        if self.bt.tie_value != self.tie_value:
            object.__setattr__(self, "bt", replace(self.bt, tie_value=self.tie_value))

    @classmethod
    def from_dict(cls, d: dict) -> "LeaderboardConfig":
        d = dict(d)
        if "elo" in d:
            e = dict(d["elo"])
            if "k_schedule" in e:
                e["k_schedule"] = tuple(tuple(p) for p in e["k_schedule"])
            d["elo"] = EloConfig(**e)
        if "glicko" in d:
            d["glicko"] = GlickoConfig(**d["glicko"])
        if "bt" in d:
            d["bt"] = BTConfig(**d["bt"])
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def fit_fhbt(matches: Sequence[MatchRecord], config: LeaderboardConfig) -> BTFit | None:
    if len(agents_of(matches)) < 2:
        return None
    if config.bootstrap_replicates > 0:
        return bt_bootstrap(matches, config.bt, config.bootstrap_replicates, config.seed)
    return bt_fit(matches, config.bt)


def sort_entries(entries: Sequence[LeaderboardEntry], metric: str) -> list[LeaderboardEntry]:
    """Descending by ``metric``; entries lacking it go last, then by more battles and name."""
    def key(e: LeaderboardEntry):
        v = e.metric(metric)
        return (v is None, -(v if v is not None else 0.0), -e.battles, e.agent)
    return sorted(entries, key=key)


def build_leaderboard(matches: Sequence[MatchRecord], config: LeaderboardConfig = LeaderboardConfig(),
                      fit: BTFit | None = None, use_fit: bool = False) -> list[LeaderboardEntry]:
    """One entry per agent, sorted by ``config.primary_metric``.

    FH-BT is fitted over every match but only reported for agents with at least
    ``fhbt_min_games`` battles.  Pass ``use_fit=True`` with ``fit`` to reuse an
    existing Bradley-Terry fit (``None`` meaning no fit available).
    """
    matches = list(matches)
    rater = OnlineRater(config.elo, config.glicko, config.tie_value)
    for m in matches:
        rater.apply(m)
    if not use_fit:
        fit = fit_fhbt(matches, config)
    return assemble_entries(rater, fit, config)


def assemble_entries(rater: OnlineRater, fit: BTFit | None, config: LeaderboardConfig,
                     metric: str | None = None) -> list[LeaderboardEntry]:
    entries = []
    for agent in rater.glicko:
        e, g, x = rater.elo[agent], rater.glicko[agent], rater.gxe_state(agent)
        score = None
        if fit is not None and agent in fit.strengths and g.games >= config.fhbt_min_games:
            point = fit.display_rating[agent]
            lo, hi = fit.ci[agent] if fit.ci else (point, point)
            score = FHBTScore(point, lo, hi, fit.strengths[agent])
        entries.append(LeaderboardEntry(
            agent=agent,
            elo=e.rating,
            glicko_rating=g.rating,
            glicko_rd=g.deviation,
            gxe=x.rating,
            fhbt=score,
            win_rate=g.win_rate(config.tie_value),
            battles=g.games,
            wins=g.wins,
            losses=g.losses,
            ties=g.ties,
        ))
    return sort_entries(entries, metric or config.primary_metric)


LEADERBOARD_COLUMNS = ("rank", "agent", "elo", "glicko_rating", "glicko_rd", "gxe", "fhbt",
                       "fhbt_ci_low", "fhbt_ci_high", "win_rate", "battles", "wins", "losses", "ties")


def leaderboard_rows(entries: Sequence[LeaderboardEntry]) -> list[list[str]]:
    def num(x: float | None) -> str:
        return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(x)

    rows = []
    for rank, e in enumerate(entries, start=1):
        f = e.fhbt
        rows.append([str(rank), e.agent, num(e.elo), num(e.glicko_rating), num(e.glicko_rd), num(e.gxe),
                     num(f and f.rating), num(f and f.ci_low), num(f and f.ci_high), num(e.win_rate),
                     str(e.battles), str(e.wins), str(e.losses), str(e.ties)])
    return rows


def write_leaderboard(entries: Sequence[LeaderboardEntry], path: str | Path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(dumps_leaderboard(entries) + "\n", encoding="utf-8")
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LEADERBOARD_COLUMNS)
        w.writerows(leaderboard_rows(entries))


def dumps_leaderboard(entries: Sequence[LeaderboardEntry]) -> str:
    return json.dumps([e.to_dict() for e in entries], sort_keys=True, separators=(",", ":"))
