"""Sequential raters: Elo, Glicko-1 and the GXE expected-score metric."""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from .core import AgentId, MatchRecord, RatingState, Result, agents_of

Q = math.log(10) / 400.0

METRICS = ("elo", "glicko", "gxe")


@dataclass(frozen=True)
class EloConfig:
    """Elo parameters.

    ``k_schedule`` is a sequence of ``(rating_threshold, K)`` pairs with strictly
    increasing thresholds; a player rated ``r`` uses the K of the last pair whose
    threshold is ``<= r`` (the first pair's K below every threshold).  An empty
    schedule means constant ``k``.
    """

    initial: float = 1500.0
    k: float = 32.0
    k_schedule: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("K must be positive")
        sched = tuple((float(t), float(k)) for t, k in self.k_schedule)
        object.__setattr__(self, "k_schedule", sched)
        for (t0, _), (t1, _) in zip(sched, sched[1:]):
            if t1 <= t0:
                raise ValueError("K schedule thresholds must be strictly increasing")
        if any(k <= 0 for _, k in sched):
            raise ValueError("K must be positive")

    def k_for(self, rating: float) -> float:
        if not self.k_schedule:
            return self.k
        k = self.k_schedule[0][1]
        for threshold, value in self.k_schedule:
            if rating >= threshold:
                k = value
            else:
                break
        return k


@dataclass(frozen=True)
class GlickoConfig:
    initial_rating: float = 1500.0
    initial_rd: float = 350.0
    rd_floor: float = 25.0
    rd_ceiling: float | None = None  # None: initial_rd
    c: float = 0.0
    # reference opponent deviation for GXE; None pairs the player's own rd
    gxe_reference_rd: float | None = None

    def __post_init__(self):
        ceiling = self.initial_rd if self.rd_ceiling is None else self.rd_ceiling
        if not (0 <= self.rd_floor <= self.initial_rd <= ceiling):
            raise ValueError("need 0 <= rd_floor <= initial_rd <= rd_ceiling")
        if self.c < 0:
            raise ValueError("c must be non-negative")

    @property
    def ceiling(self) -> float:
        return self.initial_rd if self.rd_ceiling is None else self.rd_ceiling


def expected_score(ra: float, rb: float) -> float:
    return 1.0 / (1.0 + 10.0 ** ((rb - ra) / 400.0))


def _score(result: Result | float, tie_value: float = 0.5) -> float:
    if isinstance(result, Result):
        return {Result.A_WINS: 1.0, Result.B_WINS: 0.0, Result.TIE: tie_value}[result]
    return float(result)


def elo_update(ra: float, rb: float, result: Result | float,
               config: EloConfig = EloConfig(), tie_value: float = 0.5) -> tuple[float, float]:
    """Return updated ``(ra, rb)``; ``result`` is a Result or A's score in [0, 1]."""
    s = _score(result, tie_value)
    ea = expected_score(ra, rb)
    ka, kb = config.k_for(ra), config.k_for(rb)
    return ra + ka * (s - ea), rb + kb * ((1.0 - s) - (1.0 - ea))


def g(rd: float) -> float:
    """Glicko attenuation factor for an opponent deviation."""
    return 1.0 / math.sqrt(1.0 + 3.0 * Q * Q * rd * rd / (math.pi * math.pi))


def glicko_expected(r: float, rj: float, rdj: float) -> float:
    return 1.0 / (1.0 + 10.0 ** (-g(rdj) * (r - rj) / 400.0))


def glicko_update(player: RatingState, opponents: Sequence[tuple[float, float, float]],
                  config: GlickoConfig = GlickoConfig()) -> RatingState:
    """One Glicko-1 rating period for ``player`` against ``(rating, rd, score)`` results."""
    rd = min(math.sqrt(player.deviation ** 2 + config.c ** 2), config.initial_rd)
    if not opponents:
        if rd == player.deviation:
            return player
        return RatingState(player.rating, rd, player.games, player.wins, player.losses, player.ties)

    r = player.rating
    d_inv = 0.0
    delta = 0.0
    for rj, rdj, s in opponents:
        if rdj < 0:
            raise ValueError("opponent rd must be non-negative")
        gj = g(rdj)
        e = glicko_expected(r, rj, rdj)
        d_inv += gj * gj * e * (1.0 - e)
        delta += gj * (s - e)
    d_inv *= Q * Q
    precision = 1.0 / (rd * rd) + d_inv if rd > 0 else math.inf
    if math.isinf(precision):
        new_r, new_rd = r, 0.0
    else:
        new_r = r + Q / precision * delta
        new_rd = math.sqrt(1.0 / precision)
    new_rd = min(max(new_rd, config.rd_floor), config.ceiling)
    return player.with_results((s for _, _, s in opponents), rating=new_r, deviation=new_rd)


def gxe(rating: float, rd: float, config: GlickoConfig = GlickoConfig()) -> float:
    """Expected score against a reference opponent at the initial rating."""
    if rd < 0:
        raise ValueError("rd must be non-negative")
    ref_rd = rd if config.gxe_reference_rd is None else config.gxe_reference_rd
    combined = math.sqrt(rd * rd + ref_rd * ref_rd)
    return glicko_expected(rating, config.initial_rating, combined)


@dataclass(frozen=True)
class TrajectoryPoint:
    match_index: int
    agent: AgentId
    metric: str
    rating: float
    deviation: float


@dataclass
class OnlineRater:
    """Running Elo and Glicko-1 state for one format ladder (rating period = one game)."""

    elo_config: EloConfig = field(default_factory=EloConfig)
    glicko_config: GlickoConfig = field(default_factory=GlickoConfig)
    tie_value: float = 0.5
    elo: dict[AgentId, RatingState] = field(default_factory=dict)
    glicko: dict[AgentId, RatingState] = field(default_factory=dict)
    count: int = 0

    def ensure(self, agent: AgentId) -> None:
        if agent not in self.elo:
            self.elo[agent] = RatingState(self.elo_config.initial)
            self.glicko[agent] = RatingState(self.glicko_config.initial_rating,
                                             self.glicko_config.initial_rd)

    def apply(self, match: MatchRecord) -> None:
        a, b = match.a, match.b
        self.ensure(a)
        self.ensure(b)
        sa = match.score_a(self.tie_value)
        sb = match.score_for(b, self.tie_value)

        ea, eb = self.elo[a], self.elo[b]
        ra, rb = elo_update(ea.rating, eb.rating, sa, self.elo_config)
        self.elo[a] = ea.with_results([sa], rating=ra)
        self.elo[b] = eb.with_results([sb], rating=rb)

        ga, gb = self.glicko[a], self.glicko[b]
        self.glicko[a] = glicko_update(ga, [(gb.rating, gb.deviation, sa)], self.glicko_config)
        self.glicko[b] = glicko_update(gb, [(ga.rating, ga.deviation, sb)], self.glicko_config)
        self.count += 1

    def gxe_state(self, agent: AgentId) -> RatingState:
        gs = self.glicko[agent]
        value = gxe(gs.rating, gs.deviation, self.glicko_config)
        return RatingState(value, 0.0, gs.games, gs.wins, gs.losses, gs.ties)

    def points(self, agent: AgentId, index: int) -> list[TrajectoryPoint]:
        e, gs, x = self.elo[agent], self.glicko[agent], self.gxe_state(agent)
        return [
            TrajectoryPoint(index, agent, "elo", e.rating, e.deviation),
            TrajectoryPoint(index, agent, "glicko", gs.rating, gs.deviation),
            TrajectoryPoint(index, agent, "gxe", x.rating, x.deviation),
        ]

    def to_dict(self) -> dict:
        def dump(states):
            return {k: [v.rating, v.deviation, v.games, v.wins, v.losses, v.ties]
                    for k, v in states.items()}
        return {"count": self.count, "elo": dump(self.elo), "glicko": dump(self.glicko)}

    def load_dict(self, data: dict) -> None:
        self.count = int(data["count"])
        self.elo = {k: RatingState(v[0], v[1], *map(int, v[2:])) for k, v in data["elo"].items()}
        self.glicko = {k: RatingState(v[0], v[1], *map(int, v[2:])) for k, v in data["glicko"].items()}


@dataclass
class LadderReplay:
    trajectory: list[TrajectoryPoint]
    elo: dict[AgentId, RatingState]
    glicko: dict[AgentId, RatingState]
    gxe: dict[AgentId, RatingState]

    def final(self, metric: str) -> dict[AgentId, RatingState]:
        return {"elo": self.elo, "glicko": self.glicko, "gxe": self.gxe}[metric]

    def series(self, agent: AgentId, metric: str) -> list[TrajectoryPoint]:
        return [p for p in self.trajectory if p.agent == agent and p.metric == metric]


def replay_ladder(matches: Iterable[MatchRecord], elo_config: EloConfig = EloConfig(),
                  glicko_config: GlickoConfig = GlickoConfig(),
                  tie_value: float = 0.5) -> LadderReplay:
    """Fold the raters over ``matches`` (already sorted) and record every state change.

    Index 0 carries every agent's initial state; index ``i`` carries the two
    participants of the i-th match after it is applied.
    """
    matches = list(matches)
    rater = OnlineRater(elo_config, glicko_config, tie_value)
    trajectory: list[TrajectoryPoint] = []
    for agent in agents_of(matches):
        rater.ensure(agent)
        trajectory.extend(rater.points(agent, 0))
    for i, m in enumerate(matches, start=1):
        rater.apply(m)
        trajectory.extend(rater.points(m.a, i))
        trajectory.extend(rater.points(m.b, i))
    return LadderReplay(
        trajectory=trajectory,
        elo=dict(rater.elo),
        glicko=dict(rater.glicko),
        gxe={a: rater.gxe_state(a) for a in rater.glicko},
    )


def write_trajectory(points: Iterable[TrajectoryPoint], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["match_index", "agent", "metric", "rating", "deviation"])
        for p in points:
            w.writerow([p.match_index, p.agent, p.metric, repr(p.rating), repr(p.deviation)])
