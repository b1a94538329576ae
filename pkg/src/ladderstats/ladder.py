"""Synthetic ladders, qualification and single-elimination brackets."""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from .btfit import BTFit, bt_predict
from .core import AgentId, MatchRecord, Result
from .leaderboard import LeaderboardEntry
from .online import EloConfig, elo_update

logger = logging.getLogger(__name__)

SIM_EPOCH = datetime(2025, 10, 20, tzinfo=timezone.utc)


@dataclass(frozen=True)
class SyntheticAgent:
    id: AgentId
    strength: float

    def __post_init__(self):
        if not self.id:
            raise ValueError("agent id must be non-empty")
        if not self.strength > 0:
            raise ValueError("strength must be positive")

    @property
    def display_rating(self) -> float:
        return 1500.0 + 400.0 * math.log10(self.strength)


def agents_from_ratings(ratings: Mapping[AgentId, float]) -> list[SyntheticAgent]:
    """Agents whose strengths reproduce the given display ratings."""
    return [SyntheticAgent(a, 10.0 ** ((r - 1500.0) / 400.0)) for a, r in ratings.items()]


def true_display_ratings(agents: Sequence[SyntheticAgent]) -> dict[AgentId, float]:
    """Display ratings after centring log-strengths, as a fitted model reports them."""
    logs = np.log10([a.strength for a in agents])
    logs = logs - logs.mean()
    return {a.id: 1500.0 + 400.0 * float(x) for a, x in zip(agents, logs)}


@dataclass(frozen=True)
class MatchmakingPolicy:
    """How the simulator picks opponents.

    ``uniform``: both players uniformly at random.
    ``proximity``: a random player, opponent within ``window`` Elo points of the
    simulator's running Elo; the window doubles up to ``max_widenings`` times,
    then the game falls back to a uniform pairing.
    ``baseline``: with probability ``baseline_prob`` a random player meets one of
    ``baselines``, otherwise uniform.
    """

    kind: str = "uniform"
    window: float = 100.0
    max_widenings: int = 3
    baseline_prob: float = 0.5
    baselines: tuple[AgentId, ...] = ()

    def __post_init__(self):
        if self.kind not in ("uniform", "proximity", "baseline"):
            raise ValueError(f"unknown matchmaking policy {self.kind!r}")
        if self.kind == "baseline" and not self.baselines:
            raise ValueError("baseline policy needs at least one baseline agent")


def simulate_ladder(agents: Sequence[SyntheticAgent], policy: MatchmakingPolicy = MatchmakingPolicy(),
                    games: int = 1000, seed: int = 0, format: str = "gen9ou",
                    start: datetime = SIM_EPOCH) -> list[MatchRecord]:
    """Sample ``games`` Bradley-Terry outcomes under a matchmaking policy (seeded, no ties)."""
    if len(agents) < 2:
        raise ValueError("need at least two agents")
    ids = [a.id for a in agents]
    if len(set(ids)) != len(ids):
        raise ValueError("agent ids must be unique")
    strength = np.array([a.strength for a in agents])
    n = len(agents)
    rng = np.random.default_rng(seed)
    elo = np.full(n, 1500.0)
    elo_cfg = EloConfig()
    base_idx = [ids.index(b) for b in policy.baselines]
    fallbacks = 0
    out = []
    for g in range(games):
        i = int(rng.integers(n))
        if policy.kind == "proximity":
            j = -1
            window = policy.window
            for _ in range(policy.max_widenings + 1):
                cand = np.flatnonzero((np.abs(elo - elo[i]) <= window) & (np.arange(n) != i))
                if cand.size:
                    j = int(rng.choice(cand))
                    break
                window *= 2
            if j < 0:
                fallbacks += 1
                j = _other(rng, n, i)
        elif policy.kind == "baseline" and rng.random() < policy.baseline_prob:
            choices = [b for b in base_idx if b != i]
            j = int(rng.choice(choices)) if choices else _other(rng, n, i)
        else:
            j = _other(rng, n, i)
        p = strength[i] / (strength[i] + strength[j])
        a_wins = rng.random() < p
        elo[i], elo[j] = elo_update(elo[i], elo[j], 1.0 if a_wins else 0.0, elo_cfg)
        out.append(MatchRecord(
            id=f"sim{seed}-{g:07d}",
            timestamp=start + timedelta(seconds=g),
            format=format,
            a=ids[i],
            b=ids[j],
            result=Result.A_WINS if a_wins else Result.B_WINS,
        ))
    if fallbacks:
        logger.info("proximity matchmaking fell back to uniform pairing for %d games", fallbacks)
    return out


def _other(rng: np.random.Generator, n: int, i: int) -> int:
    j = int(rng.integers(n - 1))
    return j + 1 if j >= i else j


@dataclass(frozen=True)
class Qualifier:
    seed: int
    agent: AgentId
    via: str  # "elo" or "fhbt"
    elo: float
    fhbt: float | None
    battles: int


class QualificationError(ValueError):
    pass


def select_qualifiers(leaderboard: Sequence[LeaderboardEntry], n_elo: int = 2, n_fhbt: int = 6,
                      min_battles: int = 250) -> list[Qualifier]:
    """Top ``n_elo`` by Elo, then the next ``n_fhbt`` by FH-BT among agents with enough battles.

    Seeds follow that combined order.  Ties break on higher FH-BT, then more
    battles, then agent name.
    """
    def fh(e: LeaderboardEntry) -> float:
        return e.fhbt.rating if e.fhbt is not None else -math.inf

    by_elo = sorted(leaderboard, key=lambda e: (-e.elo, -fh(e), -e.battles, e.agent))
    eligible = [e for e in leaderboard if e.fhbt is not None and e.battles >= min_battles]
    picked_elo = by_elo[:n_elo]
    taken = {e.agent for e in picked_elo}
    pool = sorted((e for e in eligible if e.agent not in taken),
                  key=lambda e: (-fh(e), -e.battles, e.agent))
    if len(picked_elo) < n_elo or len(pool) < n_fhbt:
        short_elo = n_elo - len(picked_elo)
        short_fh = n_fhbt - len(pool)
        raise QualificationError(
            f"not enough eligible agents: need {n_elo} by Elo + {n_fhbt} by FH-BT "
            f"(min {min_battles} battles); short by {max(short_elo, 0)} Elo and {max(short_fh, 0)} FH-BT slot(s)"
        )
    chosen = [(e, "elo") for e in picked_elo] + [(e, "fhbt") for e in pool[:n_fhbt]]
    return [
        Qualifier(seed=k, agent=e.agent, via=via, elo=e.elo,
                  fhbt=None if e.fhbt is None else e.fhbt.rating, battles=e.battles)
        for k, (e, via) in enumerate(chosen, start=1)
    ]


def bracket_order(n: int) -> list[int]:
    """Seed numbers in bracket-slot order, e.g. [1, 8, 4, 5, 2, 7, 3, 6] for 8."""
    if n < 1 or n & (n - 1):
        raise ValueError("bracket size must be a power of two")
    order = [1]
    while len(order) < n:
        size = 2 * len(order)
        order = [x for s in order for x in (s, size + 1 - s)]
    return order


@dataclass(frozen=True)
class Series:
    round: int
    seed_a: int
    a: AgentId
    seed_b: int
    b: AgentId
    wins_a: int
    wins_b: int
    ties: int = 0

    @property
    def winner(self) -> AgentId:
        return self.a if self.wins_a > self.wins_b else self.b

    @property
    def winner_seed(self) -> int:
        return self.seed_a if self.wins_a > self.wins_b else self.seed_b


@dataclass(frozen=True)
class Bracket:
    seeds: tuple[AgentId, ...]
    match_length: int
    rounds: tuple[tuple[Series, ...], ...]

    @property
    def champion(self) -> AgentId:
        return self.rounds[-1][0].winner

    @property
    def final(self) -> Series:
        return self.rounds[-1][0]

    @property
    def series(self) -> list[Series]:
        return [s for r in self.rounds for s in r]


class BracketError(ValueError):
    pass


@dataclass
class RecordedResults:
    """Recorded series between agent pairs: final scores or full game sequences.

    ``games`` lists per-game winners (agent name or ``"tie"``) in play order.
    """

    scores: dict[frozenset, dict[AgentId, int]] = field(default_factory=dict)
    games: dict[frozenset, list[str]] = field(default_factory=dict)

    def add(self, a: AgentId, b: AgentId, wins_a: int | None = None, wins_b: int | None = None,
            games: Sequence[str] | None = None) -> None:
        key = frozenset((a, b))
        if games is not None:
            self.games[key] = list(games)
        if wins_a is not None and wins_b is not None:
            self.scores[key] = {a: int(wins_a), b: int(wins_b)}

    def series(self, a: AgentId, b: AgentId, target: int) -> tuple[int, int, int]:
        key = frozenset((a, b))
        if key in self.games:
            wa = wb = t = 0
            seq = self.games[key]
            for k, w in enumerate(seq):
                if wa >= target or wb >= target:
                    raise BracketError(f"{a} vs {b}: {len(seq) - k} game(s) recorded after the series was decided")
                if w == a:
                    wa += 1
                elif w == b:
                    wb += 1
                elif w == "tie":
                    t += 1
                else:
                    raise BracketError(f"{a} vs {b}: unknown game winner {w!r}")
            if key in self.scores and (self.scores[key][a], self.scores[key][b]) != (wa, wb):
                raise BracketError(f"{a} vs {b}: recorded score disagrees with game sequence")
        elif key in self.scores:
            wa, wb, t = self.scores[key][a], self.scores[key][b], 0
        else:
            raise BracketError(f"no recorded result for {a} vs {b}")
        if max(wa, wb) != target or min(wa, wb) >= target or min(wa, wb) < 0:
            raise BracketError(f"{a} vs {b}: score {wa}-{wb} is not a completed first-to-{target} series")
        return wa, wb, t

    @classmethod
    def from_fixture(cls, data: Mapping) -> "RecordedResults":
        rec = cls()
        for s in data.get("series", []):
            rec.add(s["a"], s["b"], s.get("wins_a"), s.get("wins_b"), s.get("games"))
        return rec


GameSampler = Callable[[AgentId, AgentId, np.random.Generator], str]


def run_bracket(seeds: Sequence[AgentId], match_length: int = 99,
                outcome_source: RecordedResults | BTFit | GameSampler | None = None,
                seed: int = 0) -> Bracket:
    """Play a seeded single-elimination bracket of best-of-``match_length`` series.

    ``outcome_source`` is recorded results, a Bradley-Terry fit to sample games
    from, or a callable ``(a, b, rng) -> "a" | "b" | "tie"`` giving each game.
    Ties never count toward the first-to-``ceil(N/2)`` target.
    """
    seeds = list(seeds)
    if len(set(seeds)) != len(seeds):
        raise BracketError("seeds must be distinct")
    if match_length < 1:
        raise BracketError("match_length must be positive")
    order = bracket_order(len(seeds))
    target = (match_length + 1) // 2
    rng = np.random.default_rng(seed)
    if outcome_source is None:
        raise BracketError("an outcome source is required")

    def play(a: AgentId, b: AgentId) -> tuple[int, int, int]:
        if isinstance(outcome_source, RecordedResults):
            return outcome_source.series(a, b, target)
        if isinstance(outcome_source, BTFit):
            p = bt_predict(outcome_source, a, b)
            sampler = lambda x, y, r: "a" if r.random() < p else "b"  # noqa: E731
        else:
            sampler = outcome_source
        wa = wb = t = 0
        while wa < target and wb < target:
            w = sampler(a, b, rng)
            if w == "a":
                wa += 1
            elif w == "b":
                wb += 1
            elif w == "tie":
                t += 1
                if t > 100 * match_length:
                    raise BracketError(f"{a} vs {b}: series does not terminate")
            else:
                raise BracketError(f"sampler returned {w!r}")
        return wa, wb, t

    slots = [(s, seeds[s - 1]) for s in order]
    rounds = []
    rnd = 1
    while len(slots) > 1:
        played, nxt = [], []
        for (sa, a), (sb, b) in zip(slots[::2], slots[1::2]):
            wa, wb, t = play(a, b)
            s = Series(rnd, sa, a, sb, b, wa, wb, t)
            played.append(s)
            nxt.append((s.winner_seed, s.winner))
        rounds.append(tuple(played))
        slots = nxt
        rnd += 1
    if not rounds:
        raise BracketError("a bracket needs at least two seeds")
    return Bracket(tuple(seeds), match_length, tuple(rounds))


ROUND_NAMES = {1: "Final", 2: "Semifinals", 3: "Quarterfinals"}


def format_bracket(bracket: Bracket) -> str:
    total = len(bracket.rounds)
    lines = [f"best-of-{bracket.match_length} single elimination, {len(bracket.seeds)} seeds"]
    for k, rnd in enumerate(bracket.rounds, start=1):
        lines.append(f"== {ROUND_NAMES.get(total - k + 1, f'Round {k}')} ==")
        for s in rnd:
            lines.append(f"({s.seed_a}) {s.a}\t{s.wins_a}")
            lines.append(f"({s.seed_b}) {s.b}\t{s.wins_b}")
            tie_note = f" ({s.ties} ties)" if s.ties else ""
            lines.append(f"  -> {s.winner} advances{tie_note}")
    lines.append(f"Champion: {bracket.champion}")
    return "\n".join(lines) + "\n"


BUILTIN_FIXTURES = {"gen1-finals": "gen1ou_bracket.json", "gen9-finals": "gen9ou_bracket.json"}


def load_bracket_fixture(ref: str | Path) -> dict:
    """Read a bracket fixture from a path, or a bundled one by name (``gen1-finals``, ``gen9-finals``)."""
    p = Path(ref)
    for cand in (p, p.with_suffix(".json")):
        if cand.is_file():
            return json.loads(cand.read_text(encoding="utf-8"))
    name = BUILTIN_FIXTURES.get(p.stem)
    if name is None:
        raise FileNotFoundError(f"no bracket fixture at {ref!r} (bundled: {', '.join(BUILTIN_FIXTURES)})")
    return json.loads(resources.files("ladderstats.data").joinpath(name).read_text(encoding="utf-8"))


def replay_fixture(data: Mapping) -> Bracket:
    return run_bracket(data["seeds"], data.get("match_length", 99), RecordedResults.from_fixture(data))
