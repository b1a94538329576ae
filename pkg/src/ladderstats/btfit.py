"""Full-history Bradley-Terry fitting by minorization-maximization, with bootstrap intervals.

Strengths are reported with the identifiability constraint ``sum(log pi) = 0``
and on a display scale ``1500 + 400 * log10(pi)`` so they sit on the same axis
as Elo.  By default every agent gets one virtual win and one virtual loss
against a phantom of fixed strength 1, which keeps estimates finite for
undefeated agents and joins disconnected comparison graphs.
"""

from __future__ import annotations

import csv
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .core import AgentId, MatchRecord, agents_of

logger = logging.getLogger(__name__)

DISPLAY_BASE = 1500.0
DISPLAY_SCALE = 400.0


class DisconnectedError(ValueError):
    def __init__(self, components: Sequence[Sequence[AgentId]]):
        self.components = [list(c) for c in components]
        desc = " | ".join(", ".join(c) for c in self.components)
        super().__init__(
            f"comparison graph has {len(self.components)} components: {desc}; "
            "enable regularization or supply connecting matches"
        )


class BootstrapError(RuntimeError):
    pass


@dataclass(frozen=True)
class BTConfig:
    regularization: float = 1.0  # virtual wins (and losses) against the phantom; 0 disables
    tol: float = 1e-10
    max_iter: int = 10_000
    tie_value: float = 0.5
    check_monotone: bool = False


@dataclass(frozen=True)
class PairCounts:
    """Effective wins ``wins[i, j]`` of agent i over agent j (ties split by tie_value)."""

    agents: tuple[AgentId, ...]
    wins: np.ndarray

    @classmethod
    def from_matches(cls, matches: Sequence[MatchRecord], tie_value: float = 0.5,
                     agents: Sequence[AgentId] | None = None) -> "PairCounts":
        names = tuple(agents) if agents is not None else tuple(agents_of(matches))
        index = {a: i for i, a in enumerate(names)}
        ia = np.fromiter((index[m.a] for m in matches), dtype=np.int64, count=len(matches))
        ib = np.fromiter((index[m.b] for m in matches), dtype=np.int64, count=len(matches))
        sa = np.fromiter((m.score_a(tie_value) for m in matches), dtype=float, count=len(matches))
        return cls(names, _tally(len(names), ia, ib, sa))

    @property
    def games(self) -> np.ndarray:
        return self.wins + self.wins.T


def _tally(n: int, ia: np.ndarray, ib: np.ndarray, sa: np.ndarray,
           weights: np.ndarray | None = None) -> np.ndarray:
    w = np.ones_like(sa) if weights is None else weights
    flat = np.bincount(ia * n + ib, weights=w * sa, minlength=n * n)
    flat += np.bincount(ib * n + ia, weights=w * (1.0 - sa), minlength=n * n)
    return flat.reshape(n, n)


@dataclass(frozen=True)
class BTFit:
    agents: tuple[AgentId, ...]
    strengths: Mapping[AgentId, float]
    display_rating: Mapping[AgentId, float]
    converged: bool
    iterations: int
    games: Mapping[AgentId, float]
    log_likelihood: float
    ci: Mapping[AgentId, tuple[float, float]] | None = None
    level: float | None = None
    replicates: np.ndarray | None = field(default=None, compare=False, repr=False)
    failed_replicates: int = 0

    def predict(self, i: AgentId, j: AgentId) -> float:
        return bt_predict(self, i, j)

    def rows(self) -> list[dict[str, object]]:
        out = []
        for a in sorted(self.agents, key=lambda x: (-self.display_rating[x], x)):
            lo, hi = self.ci[a] if self.ci else (math.nan, math.nan)
            out.append({
                "agent": a,
                "strength": self.strengths[a],
                "display_rating": self.display_rating[a],
                "ci_low": lo,
                "ci_high": hi,
                "games": self.games[a],
            })
        return out


def display_rating(strength: float) -> float:
    return DISPLAY_BASE + DISPLAY_SCALE * math.log10(strength)


def log_likelihood(pi: np.ndarray, wins: np.ndarray, reg: float = 0.0) -> float:
    n = wins + wins.T
    mask = n > 0
    ratio = pi[:, None] / (pi[:, None] + pi[None, :])
    ll = float(np.sum(wins[mask] * np.log(ratio[mask])))
    if reg:
        ll += reg * float(np.sum(np.log(pi / (pi + 1.0)) + np.log(1.0 / (pi + 1.0))))
    return ll


def _components(games: np.ndarray) -> list[list[int]]:
    ncomp, labels = connected_components(csr_matrix(games > 0), directed=False)
    return [list(np.flatnonzero(labels == c)) for c in range(ncomp)]


def _best_shift(x: np.ndarray) -> float:
    """Log-scale shift maximizing the phantom terms; only they depend on overall scale.

    The objective is concave in the shift, so this step never lowers the likelihood
    and removes the slow scale mode of plain MM under a weak anchor.
    """
    f = lambda t: float(np.sum(np.tanh(-(t + x) / 2.0)))  # noqa: E731
    lo, hi = -float(x.max()) - 40.0, -float(x.min()) + 40.0
    return brentq(f, lo, hi, xtol=1e-14)


def _mm(wins: np.ndarray, reg: float, tol: float, max_iter: int,
        check_monotone: bool = False) -> tuple[np.ndarray, bool, int]:
    n = wins + wins.T
    w_total = wins.sum(axis=1) + reg
    pi = np.ones(len(w_total))
    prev_ll = log_likelihood(pi, wins, reg) if check_monotone else None
    for it in range(1, max_iter + 1):
        denom = (n / (pi[:, None] + pi[None, :])).sum(axis=1)
        if reg:
            denom = denom + 2.0 * reg / (pi + 1.0)
        new = w_total / denom
        if not reg:
            # scale-free without the phantom anchor
            new = new / math.exp(float(np.mean(np.log(new))))
        elif np.all(np.isfinite(new)) and np.all(new > 0):
            new = new * math.exp(_best_shift(np.log(new)))
        if not np.all(np.isfinite(new)) or np.any(new <= 0):
            return new, False, it
        change = float(np.max(np.abs(new - pi) / pi))
        pi = new
        if check_monotone:
            ll = log_likelihood(pi, wins, reg)
            assert ll >= prev_ll - 1e-9 * max(1.0, abs(prev_ll)), "MM sweep decreased the log-likelihood"
            prev_ll = ll
        if change < tol:
            return pi, True, it
    return pi, False, max_iter


def fit_counts(counts: PairCounts, config: BTConfig = BTConfig()) -> BTFit:
    wins = np.asarray(counts.wins, dtype=float)
    games = wins + wins.T
    per_agent = games.sum(axis=1)
    keep = per_agent > 0
    if not np.all(keep):
        for i in np.flatnonzero(~keep):
            logger.warning("agent %r has no effective games; excluded from fit", counts.agents[i])
        wins = wins[np.ix_(keep, keep)]
        games = games[np.ix_(keep, keep)]
        per_agent = per_agent[keep]
    names = tuple(a for a, k in zip(counts.agents, keep) if k)
    if len(names) < 2:
        raise ValueError("Bradley-Terry fit needs at least two agents with games")
    reg = float(config.regularization)
    if reg <= 0:
        comps = _components(games)
        if len(comps) > 1:
            raise DisconnectedError([[names[i] for i in c] for c in comps])

    pi, converged, iterations = _mm(wins, reg, config.tol, config.max_iter, config.check_monotone)
    ll = log_likelihood(pi, wins, reg) if np.all(pi > 0) else -math.inf
    with np.errstate(divide="ignore"):
        logs = np.log(pi)
    logs = logs - np.mean(logs)
    strengths = {a: float(math.exp(x)) for a, x in zip(names, logs)}
    return BTFit(
        agents=names,
        strengths=strengths,
        display_rating={a: DISPLAY_BASE + DISPLAY_SCALE * float(x) / math.log(10) for a, x in zip(names, logs)},
        converged=converged,
        iterations=iterations,
        games={a: float(g) for a, g in zip(names, per_agent)},
        log_likelihood=ll,
    )


def bt_fit(matches: Sequence[MatchRecord], config: BTConfig = BTConfig()) -> BTFit:
    """Maximum-likelihood Bradley-Terry strengths over the full match history."""
    matches = list(matches)
    if len(agents_of(matches)) < 2:
        raise ValueError("Bradley-Terry fit needs at least two agents")
    return fit_counts(PairCounts.from_matches(matches, config.tie_value), config)


def bt_bootstrap(matches: Sequence[MatchRecord], config: BTConfig = BTConfig(),
                 replicates: int = 1000, seed: int = 0, level: float = 0.95,
                 max_failure_rate: float = 0.10) -> BTFit:
    """Point fit plus percentile intervals from resampling matches with replacement.

    Replicate ``r`` draws from a generator seeded by ``(seed, r)``, so results do not
    depend on evaluation order.  Replicates that fail to converge are dropped; more
    than ``max_failure_rate`` of them failing is an error.  Each interval is widened
    to contain the point estimate when the percentiles alone would miss it.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    matches = list(matches)
    point = bt_fit(matches, config)
    names = tuple(agents_of(matches))
    index = {a: i for i, a in enumerate(names)}
    n_agents, n_matches = len(names), len(matches)
    ia = np.fromiter((index[m.a] for m in matches), dtype=np.int64, count=n_matches)
    ib = np.fromiter((index[m.b] for m in matches), dtype=np.int64, count=n_matches)
    sa = np.fromiter((m.score_a(config.tie_value) for m in matches), dtype=float, count=n_matches)

    samples = np.full((replicates, n_agents), np.nan)
    failed = 0
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(replicates)):
        rng = np.random.default_rng(child)
        weights = np.bincount(rng.integers(0, n_matches, n_matches), minlength=n_matches).astype(float)
        counts = PairCounts(names, _tally(n_agents, ia, ib, sa, weights))
        try:
            fit = fit_counts(counts, config)
        except ValueError:
            fit = None
        if fit is None or not fit.converged:
            failed += 1
            continue
        for a, v in fit.display_rating.items():
            samples[r, index[a]] = v
    if failed > max_failure_rate * replicates:
        raise BootstrapError(f"{failed} of {replicates} bootstrap replicates failed to converge")
    if failed:
        logger.warning("%d of %d bootstrap replicates failed and were excluded", failed, replicates)

    alpha = (1.0 - level) / 2.0
    ci = {}
    for a in point.agents:
        col = samples[:, index[a]]
        col = col[~np.isnan(col)]
        p = point.display_rating[a]
        if col.size == 0:
            ci[a] = (p, p)
            continue
        lo, hi = np.quantile(col, [alpha, 1.0 - alpha])
        ci[a] = (min(float(lo), p), max(float(hi), p))
    return BTFit(
        agents=point.agents,
        strengths=point.strengths,
        display_rating=point.display_rating,
        converged=point.converged,
        iterations=point.iterations,
        games=point.games,
        log_likelihood=point.log_likelihood,
        ci=ci,
        level=level,
        replicates=samples,
        failed_replicates=failed,
    )


def bt_predict(fit: BTFit, i: AgentId, j: AgentId) -> float:
    try:
        pi, pj = fit.strengths[i], fit.strengths[j]
    except KeyError as exc:
        raise KeyError(f"agent {exc.args[0]!r} not in fit") from None
    # compute the favourite's side and complement it, so p(i,j) + p(j,i) == 1 exactly
    if pi >= pj:
        return pi / (pi + pj)
    return 1.0 - pj / (pi + pj)


def write_fit(fit: BTFit, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["agent", "strength", "display_rating", "ci_low", "ci_high", "games"])
        for row in fit.rows():
            w.writerow([row["agent"], repr(row["strength"]), repr(row["display_rating"]),
                        repr(row["ci_low"]), repr(row["ci_high"]), repr(row["games"])])
